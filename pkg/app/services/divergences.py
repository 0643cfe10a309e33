"""
State divergences with exact support handling.

Every divergence returns an ExtendedReal: a finite float, or math.inf when the support
condition of its first argument inside the second one fails. Negative powers and
logarithms of the second argument are taken on its support.
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from app.core.errors import DimensionMismatch, InvalidAlpha, InvalidEffect, InvalidOperator, NegativeEigenvalue, ZeroOperator
from app.core.settings import DEFAULTS
from app.services.linalg import (
    ExtendedReal,
    HermitianOperator,
    as_extended,
    hermitian_part,
    support_dominated,
    support_log,
    support_power,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A quantum state: PSD (min eigenvalue ≥ −1e-10) with unit trace."""

    op: HermitianOperator

    def __post_init__(self):
        w = np.linalg.eigvalsh(self.op.entries)
        if w[0] < -DEFAULTS.STATE_TOL:
            raise InvalidOperator(f"Density operator has negative eigenvalue {w[0]:.3e}")
        tr = float(np.sum(w))
        if abs(tr - 1.0) > DEFAULTS.STATE_TOL:
            raise InvalidOperator(f"Density operator has trace {tr:.12g}, expected 1")

    @classmethod
    def from_array(cls, a) -> "DensityOperator":
        return cls(a if isinstance(a, HermitianOperator) else HermitianOperator(a))

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries


@dataclass(frozen=True, eq=False)
class TraceOneHermitian:
    """Element of the affine hull of the states: unit trace, no positivity requirement."""

    op: HermitianOperator

    def __post_init__(self):
        tr = float(np.real(np.trace(self.op.entries)))
        if abs(tr - 1.0) > DEFAULTS.STATE_TOL:
            raise InvalidOperator(f"Trace-one Hermitian operator has trace {tr:.12g}")

    @classmethod
    def from_array(cls, a) -> "TraceOneHermitian":
        return cls(a if isinstance(a, HermitianOperator) else HermitianOperator(a))

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries


def _state_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    return DensityOperator.from_array(rho).matrix


def _trace_one_matrix(gamma) -> np.ndarray:
    if isinstance(gamma, (TraceOneHermitian, DensityOperator)):
        return gamma.matrix
    return TraceOneHermitian.from_array(gamma).matrix


def _psd_matrix(sigma) -> np.ndarray:
    s = hermitian_part(sigma)
    w = np.linalg.eigvalsh(s)
    tol = max(DEFAULTS.STATE_TOL, DEFAULTS.SUPPORT_TOL_REL * float(np.max(np.abs(w))))
    if w[0] < -tol:
        raise NegativeEigenvalue(float(w[0]), tol)
    return s


def _check_alpha(alpha: float, upper: Optional[float] = None) -> float:
    alpha = float(alpha)
    if not alpha > 1.0 or (upper is not None and alpha > upper):
        interval = f"(1, {upper:g}]" if upper is not None else "(1, ∞)"
        raise InvalidAlpha(f"alpha must lie in {interval}, got {alpha}")
    return alpha


def _sandwiched_trace(g: np.ndarray, s: np.ndarray, alpha: float) -> float:
    """‖σ^{(1−α)/2α} γ σ^{(1−α)/2α}‖_α^α with |eigenvalue| powers."""
    sp = support_power(s, (1.0 - alpha) / (2.0 * alpha))
    w = np.linalg.eigvalsh(hermitian_part(sp @ g @ sp))
    return float(np.sum(np.abs(w) ** alpha))


def _geometric_trace(r: np.ndarray, s: np.ndarray, alpha: float) -> float:
    """Tr[σ (σ^{−1/2} ρ σ^{−1/2})^α], no validation; ρ need not be normalized."""
    s_inv_half = support_power(s, -0.5)
    s_half = support_power(s, 0.5)
    middle = support_power(s_inv_half @ r @ s_inv_half, alpha)
    return float(np.real(np.trace(s_half @ middle @ s_half)))


def _bs_value(r: np.ndarray, s: np.ndarray) -> float:
    r_half = support_power(r, 0.5)
    inner = r_half @ support_power(s, -1.0) @ r_half
    return float(np.real(np.trace(r @ support_log(inner))))


def umegaki(rho, sigma) -> ExtendedReal:
    r = _state_matrix(rho)
    s = _psd_matrix(sigma)
    if not support_dominated(r, s):
        return math.inf
    value = np.trace(r @ (support_log(r) - support_log(s)))
    return as_extended(np.real(value))


def sandwiched(rho, sigma, alpha: float) -> ExtendedReal:
    alpha = _check_alpha(alpha)
    r = _state_matrix(rho)
    s = _psd_matrix(sigma)
    if not support_dominated(r, s):
        return math.inf
    return as_extended(math.log(_sandwiched_trace(r, s, alpha)) / (alpha - 1.0))


def sandwiched_extended(gamma, sigma, alpha: float) -> ExtendedReal:
    """
    Sandwiched divergence with a trace-one Hermitian (possibly non-PSD) first argument.

    Coincides with `sandwiched` on states. A zero first argument raises ZeroOperator.
    """
    alpha = _check_alpha(alpha)
    raw = hermitian_part(gamma)
    if raw.size == 0 or float(np.max(np.abs(np.linalg.eigvalsh(raw)))) == 0.0:
        raise ZeroOperator("Extended sandwiched divergence is undefined for the zero operator")
    g = _trace_one_matrix(gamma)
    s = _psd_matrix(sigma)
    if not support_dominated(g, s):
        return math.inf
    return as_extended(math.log(_sandwiched_trace(g, s, alpha)) / (alpha - 1.0))


def geometric(rho, sigma, alpha: float) -> ExtendedReal:
    alpha = _check_alpha(alpha, upper=2.0)
    r = _state_matrix(rho)
    s = _psd_matrix(sigma)
    if not support_dominated(r, s):
        return math.inf
    return as_extended(math.log(_geometric_trace(r, s, alpha)) / (alpha - 1.0))


def belavkin_staszewski(rho, sigma) -> ExtendedReal:
    r = _state_matrix(rho)
    s = _psd_matrix(sigma)
    if not support_dominated(r, s):
        return math.inf
    return as_extended(_bs_value(r, s))


# -------------------------------------------------------------------
# Measurement channel and the Hoeffding-type bound
# -------------------------------------------------------------------

def _effect_matrix(effect) -> np.ndarray:
    lam = hermitian_part(effect)
    w = np.linalg.eigvalsh(lam)
    tol = DEFAULTS.STATE_TOL
    if w[0] < -tol or w[-1] > 1.0 + tol:
        raise InvalidEffect(f"Effect eigenvalues must lie in [0, 1], got [{w[0]:.6g}, {w[-1]:.6g}]")
    return lam


def measurement_channel(effect, state) -> Tuple[float, float]:
    """Two-outcome measurement {Λ, I − Λ} applied to a trace-one Hermitian input."""
    lam = _effect_matrix(effect)
    x = _trace_one_matrix(state)
    if lam.shape != x.shape:
        raise DimensionMismatch(f"Effect shape {lam.shape} does not match input shape {x.shape}")
    first = float(np.real(np.trace(lam @ x)))
    second = float(np.real(np.trace(x))) - first
    return first, second


def hoeffding_bound_residual(tau, rho, effect, alpha: float) -> ExtendedReal:
    """
    (Tr[Λρ])^{(α−1)/α} · exp(((α−1)/α) D̃_α(τ‖ρ)) − |Tr[Λτ]|.

    Nonnegative up to rounding whenever the divergence is finite; +inf otherwise.
    """
    alpha = _check_alpha(alpha)
    d = sandwiched_extended(tau, rho, alpha)
    if math.isinf(d):
        return math.inf
    lam = _effect_matrix(effect)
    r = _state_matrix(rho)
    t = _trace_one_matrix(tau)
    a = (alpha - 1.0) / alpha
    success = max(float(np.real(np.trace(lam @ r))), 0.0)
    rhs = success ** a * math.exp(a * d)
    lhs = abs(float(np.real(np.trace(lam @ t))))
    return rhs - lhs


# -------------------------------------------------------------------
# Scalar reference formulas (diagonal inputs)
# -------------------------------------------------------------------

def classical_kl(p, q) -> ExtendedReal:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return as_extended(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def classical_renyi(p, q, alpha: float) -> ExtendedReal:
    """(1/(α−1)) ln Σ |p|^α q^{1−α}; p may be signed (extended divergence)."""
    alpha = _check_alpha(alpha)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p != 0
    if np.any(q[mask] <= 0):
        return math.inf
    total = np.sum(np.abs(p[mask]) ** alpha * q[mask] ** (1.0 - alpha))
    return as_extended(math.log(total) / (alpha - 1.0))


# Name -> (callable, needs alpha); the names are the CLI `--kind` values.
DIVERGENCES: Dict[str, Tuple[Callable[..., float], bool]] = {
    "umegaki": (umegaki, False),
    "sandwiched": (sandwiched, True),
    "extended": (sandwiched_extended, True),
    "geometric": (geometric, True),
    "bs": (belavkin_staszewski, False),
}


def divergence(kind: str, first, second, alpha: Optional[float] = None) -> ExtendedReal:
    try:
        fn, needs_alpha = DIVERGENCES[kind]
    except KeyError:
        raise ValueError(f"Unknown divergence kind '{kind}'; choose from {sorted(DIVERGENCES)}") from None
    if needs_alpha:
        if alpha is None:
            raise InvalidAlpha(f"Divergence '{kind}' needs alpha")
        return fn(first, second, alpha)
    return fn(first, second)
