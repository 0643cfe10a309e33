"""
Seeded random instances for the verification suites.

States are Ginibre-induced, G G† / Tr[G G†] with G of shape d × rank; priors are a
uniform Dirichlet draw clipped away from the simplex boundary. Every state gets its own
stream from `SeedSequence(seed).spawn`, so instances are bit-reproducible per seed and
do not depend on how many other states are drawn before them.
"""

from __future__ import annotations
import logging
from typing import List, Sequence, Union

import numpy as np

from app.services.channels import QuantumChannel
from app.services.divergences import DensityOperator
from app.services.exclusion import ChannelEnsemble, StateEnsemble

logger = logging.getLogger(__name__)

RankProfile = Union[str, int, Sequence[int]]

PRIOR_FLOOR = 1e-3
CHANNEL_KINDS = ("random", "replacer", "identical")


def _ranks(rank_profile: RankProfile, r: int, d: int) -> List[int]:
    if isinstance(rank_profile, str):
        if rank_profile == "full":
            return [d] * r
        if rank_profile == "pure":
            return [1] * r
        raise ValueError(f"Unknown rank profile '{rank_profile}'; use 'full', 'pure', an int or a list")
    if isinstance(rank_profile, (int, np.integer)):
        ranks = [int(rank_profile)] * r
    else:
        ranks = [int(k) for k in rank_profile]
        if len(ranks) != r:
            raise ValueError(f"rank profile has {len(ranks)} entries for {r} states")
    for k in ranks:
        if not 1 <= k <= d:
            raise ValueError(f"rank {k} outside [1, {d}]")
    return ranks


def ginibre_state(rng: np.random.Generator, d: int, rank: int) -> np.ndarray:
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.real(np.trace(rho))


def dirichlet_priors(rng: np.random.Generator, r: int) -> np.ndarray:
    p = rng.dirichlet(np.ones(r))
    p = np.maximum(p, PRIOR_FLOOR)
    return p / np.sum(p)


def random_ensemble(seed: int, r: int, d: int, rank_profile: RankProfile = "full") -> StateEnsemble:
    if r < 2 or d < 2:
        raise ValueError(f"random_ensemble needs r >= 2 and d >= 2, got r={r}, d={d}")
    ranks = _ranks(rank_profile, r, d)
    *state_streams, prior_stream = np.random.SeedSequence(seed).spawn(r + 1)
    states = tuple(
        DensityOperator.from_array(ginibre_state(np.random.default_rng(s), d, k))
        for s, k in zip(state_streams, ranks)
    )
    return StateEnsemble(dirichlet_priors(np.random.default_rng(prior_stream), r), states)


def random_diagonal_ensemble(seed: int, r: int, d: int) -> StateEnsemble:
    """Commuting (classical) instance: diagonal states with full-support Dirichlet spectra."""
    if r < 2 or d < 2:
        raise ValueError(f"random_diagonal_ensemble needs r >= 2 and d >= 2, got r={r}, d={d}")
    *state_streams, prior_stream = np.random.SeedSequence(seed).spawn(r + 1)
    states = []
    for s in state_streams:
        spectrum = dirichlet_priors(np.random.default_rng(s), d)
        states.append(DensityOperator.from_array(np.diag(spectrum).astype(complex)))
    return StateEnsemble(dirichlet_priors(np.random.default_rng(prior_stream), r), tuple(states))


def random_channel(rng: np.random.Generator, d_in: int, d_out: int, n_kraus: int) -> QuantumChannel:
    """Kraus operators from a Haar-like isometry: a Ginibre stack orthonormalised by QR."""
    g = rng.normal(size=(n_kraus * d_out, d_in)) + 1j * rng.normal(size=(n_kraus * d_out, d_in))
    q, _ = np.linalg.qr(g)
    kraus = tuple(q[k * d_out:(k + 1) * d_out, :] for k in range(n_kraus))
    return QuantumChannel(kraus, label="random")


def random_channel_ensemble(seed: int, r: int, d: int, kind: str = "random", n_kraus: int = 2) -> ChannelEnsemble:
    if kind not in CHANNEL_KINDS:
        raise ValueError(f"Unknown channel ensemble kind '{kind}'; choose from {CHANNEL_KINDS}")
    if r < 2 or d < 2:
        raise ValueError(f"random_channel_ensemble needs r >= 2 and d >= 2, got r={r}, d={d}")
    *streams, prior_stream = np.random.SeedSequence(seed).spawn(r + 1)
    rngs = [np.random.default_rng(s) for s in streams]
    if kind == "random":
        channels = tuple(random_channel(rng, d, d, n_kraus) for rng in rngs)
    elif kind == "replacer":
        channels = tuple(QuantumChannel.replacer(ginibre_state(rng, d, d), d) for rng in rngs)
    else:
        channel = random_channel(rngs[0], d, d, n_kraus)
        channels = (channel,) * r
    logger.debug("random %s channel ensemble: seed %d, r=%d, d=%d", kind, seed, r, d)
    return ChannelEnsemble(dirichlet_priors(np.random.default_rng(prior_stream), r), channels)
