"""Exclusion bounds: divergences, exclusion error probabilities and divergence-radius converse bounds."""

__version__ = "1.0.0"
