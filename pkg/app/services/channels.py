"""
Quantum channels as Kraus lists, their Choi operators, and the two channel divergences.

Choi convention: J_N = Σ_ij |i⟩⟨j|_R ⊗ N(|i⟩⟨j|) on R ⊗ B with the reference system first.
A Kraus operator K (d_out × d_in) contributes the rank-one term |v⟩⟨v| with
v = Σ_i |i⟩ ⊗ K|i⟩, i.e. v = K.T.reshape(-1).

The closed forms (trace over B of a Choi-level expression, then the operator norm) are the
authoritative evaluation path; `channel_divergence_input_opt` only samples the supremum
over inputs as a sanity oracle.
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from app.core.errors import DimensionMismatch, InvalidOperator
from app.core.settings import DEFAULTS
from app.services.divergences import _check_alpha
from app.services.linalg import (
    ExtendedReal,
    HermitianOperator,
    as_extended,
    as_matrix,
    hermitian_basis,
    hermitian_part,
    partial_trace_array,
    support_dominated,
    support_intersection,
    support_log,
    support_power,
    to_coordinates,
    from_coordinates,
)

logger = logging.getLogger(__name__)

# input mixing used by the sampled supremum; keeps every candidate output full-support
_INPUT_MIXING = 1e-6


@dataclass(frozen=True, eq=False)
class ChoiOperator:
    """PSD operator on R ⊗ B (d_R = dim_in); trace preserving iff Tr_B J = I_R."""

    op: HermitianOperator
    dim_in: int
    dim_out: int
    require_tp: bool = True

    def __post_init__(self):
        j = self.op.entries
        if j.shape != (self.dim_in * self.dim_out,) * 2:
            raise DimensionMismatch(f"Choi operator of shape {j.shape} does not match dims ({self.dim_in}, {self.dim_out})")
        w = np.linalg.eigvalsh(j)
        if w[0] < -DEFAULTS.STATE_TOL:
            raise InvalidOperator(f"Choi operator is not PSD: min eigenvalue {w[0]:.3e}")
        if self.require_tp:
            residual = partial_trace_array(j, 1, (self.dim_in, self.dim_out)) - np.eye(self.dim_in)
            if np.max(np.abs(residual)) > DEFAULTS.STATE_TOL:
                raise InvalidOperator("Choi operator is not trace preserving: Tr_B J != I_R")

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive trace-preserving map given by its Kraus operators (d_out × d_in)."""

    kraus: Tuple[np.ndarray, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise InvalidOperator("A channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ops):
            raise DimensionMismatch(f"Kraus operators must share one 2-D shape, got {[k.shape for k in ops]}")
        completeness = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(completeness - np.eye(shape[1]))) > DEFAULTS.STATE_TOL:
            raise InvalidOperator("Kraus operators are not trace preserving: Σ K†K != I")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    @cached_property
    def choi(self) -> np.ndarray:
        vecs = np.array([k.T.reshape(-1) for k in self.kraus])
        j = vecs.T @ vecs.conj()
        j = 0.5 * (j + j.conj().T)
        j.setflags(write=False)
        return j

    # ---- constructors ----

    @classmethod
    def identity(cls, dim: int) -> "QuantumChannel":
        return cls((np.eye(dim),), label="identity")

    @classmethod
    def unitary(cls, u, label: str = "unitary") -> "QuantumChannel":
        u = np.asarray(u, dtype=complex)
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))) > DEFAULTS.STATE_TOL:
            raise InvalidOperator("Matrix is not unitary")
        return cls((u,), label=label)

    @classmethod
    def replacer(cls, sigma, dim_in: int) -> "QuantumChannel":
        """ρ ↦ Tr[ρ] σ."""
        s = hermitian_part(sigma)
        w, v = np.linalg.eigh(s)
        if w[0] < -DEFAULTS.STATE_TOL or abs(float(np.sum(w)) - 1.0) > DEFAULTS.STATE_TOL:
            raise InvalidOperator("Replacer output must be a density operator")
        kraus = []
        for lam, vec in zip(w, v.T):
            if lam <= 0:
                continue
            for i in range(dim_in):
                k = np.zeros((s.shape[0], dim_in), dtype=complex)
                k[:, i] = math.sqrt(lam) * vec
                kraus.append(k)
        return cls(tuple(kraus), label="replacer")

    @classmethod
    def preparation(cls, sigma) -> "QuantumChannel":
        """Channel with trivial input (d_in = 1) that prepares σ."""
        return cls.replacer(sigma, 1)

    @classmethod
    def depolarizing(cls, dim: int, p: float) -> "QuantumChannel":
        """ρ ↦ (1 − p) ρ + p Tr[ρ] I/d; p = 1 is the fully depolarizing channel."""
        if not 0.0 <= p <= 1.0:
            raise InvalidOperator(f"Depolarizing parameter must lie in [0, 1], got {p}")
        phi = np.eye(dim).reshape(-1)
        j = (1.0 - p) * np.outer(phi, phi) + p * np.eye(dim * dim) / dim
        channel = cls.from_choi(j, dim, dim)
        object.__setattr__(channel, "label", "depolarizing")
        return channel

    @classmethod
    def from_choi(cls, j, dim_in: int, dim_out: int, repair_tol: float = 1e-6) -> "QuantumChannel":
        """
        Kraus operators from the eigendecomposition of a Choi matrix.

        Small trace-preservation defects (below `repair_tol`) are removed by the
        congruence K ↦ K S^{-1/2} with S = Σ K†K.
        """
        j = hermitian_part(j)
        if j.shape != (dim_in * dim_out,) * 2:
            raise DimensionMismatch(f"Choi matrix of shape {j.shape} does not match dims ({dim_in}, {dim_out})")
        w, v = np.linalg.eigh(j)
        tol = DEFAULTS.SUPPORT_TOL_REL * max(1.0, float(np.max(np.abs(w))))
        if w[0] < -max(DEFAULTS.STATE_TOL, tol):
            raise InvalidOperator(f"Choi matrix is not PSD: min eigenvalue {w[0]:.3e}")
        kraus = [math.sqrt(lam) * vec.reshape(dim_in, dim_out).T for lam, vec in zip(w, v.T) if lam > tol]
        if not kraus:
            raise InvalidOperator("Choi matrix is zero")
        s = sum(k.conj().T @ k for k in kraus)
        if np.max(np.abs(s - np.eye(dim_in))) > repair_tol:
            raise InvalidOperator("Choi matrix is not trace preserving: Tr_B J != I_R")
        s_inv_half = support_power(s, -0.5)
        return cls(tuple(k @ s_inv_half for k in kraus))


def choi_of(channel: QuantumChannel) -> ChoiOperator:
    return ChoiOperator(HermitianOperator(channel.choi), channel.dim_in, channel.dim_out)


def _reference_dim(rho: np.ndarray, dim_a: int) -> int:
    total = rho.shape[0]
    if total % dim_a:
        raise DimensionMismatch(f"Input of dimension {total} has no factor of size {dim_a}")
    return total // dim_a


def apply(channel: QuantumChannel, rho) -> HermitianOperator:
    """(id_R ⊗ N)[ρ_RA]; the reference dimension is inferred (1 for a plain input)."""
    x = as_matrix(rho)
    d_r = _reference_dim(x, channel.dim_in)
    lifted = [np.kron(np.eye(d_r), k) for k in channel.kraus]
    return HermitianOperator(sum(k @ x @ k.conj().T for k in lifted))


def apply_choi(j, rho, dim_in: int, dim_out: int) -> HermitianOperator:
    """(id_R ⊗ N)[ρ_RA] computed by contracting ρ with the Choi matrix of N."""
    x = as_matrix(rho)
    d_r = _reference_dim(x, dim_in)
    jt = as_matrix(j).reshape(dim_in, dim_out, dim_in, dim_out)
    out = np.einsum("rasc,abce->rbse", x.reshape(d_r, dim_in, d_r, dim_in), jt)
    return HermitianOperator(out.reshape(d_r * dim_out, d_r * dim_out))


def adjoint_apply(channel: QuantumChannel, effect) -> HermitianOperator:
    """(id_R ⊗ N)†[Λ_RB]."""
    lam = as_matrix(effect)
    d_r = _reference_dim(lam, channel.dim_out)
    lifted = [np.kron(np.eye(d_r), k) for k in channel.kraus]
    return HermitianOperator(sum(k.conj().T @ lam @ k for k in lifted))


# -------------------------------------------------------------------
# Closed forms on Choi matrices
# -------------------------------------------------------------------

def geometric_choi_divergence(jn, jm, dim_in: int, dim_out: int, alpha: float) -> ExtendedReal:
    alpha = _check_alpha(alpha, upper=2.0)
    jn = hermitian_part(jn)
    jm = hermitian_part(jm)
    if not support_dominated(jn, jm):
        return math.inf
    m_half = support_power(jm, 0.5)
    m_inv_half = support_power(jm, -0.5)
    x = m_half @ support_power(m_inv_half @ jn @ m_inv_half, alpha) @ m_half
    reduced = partial_trace_array(x, 1, (dim_in, dim_out))
    norm = float(np.max(np.abs(np.linalg.eigvalsh(hermitian_part(reduced)))))
    return as_extended(math.log(norm) / (alpha - 1.0))


def bs_choi_operator(jn, jm, dim_in: int, dim_out: int) -> Optional[np.ndarray]:
    """Tr_B[J_N^{1/2} ln(J_N^{1/2} J_M^{-1} J_N^{1/2}) J_N^{1/2}] on R, or None when J_N⁰ ≰ J_M⁰."""
    jn = hermitian_part(jn)
    jm = hermitian_part(jm)
    if not support_dominated(jn, jm):
        return None
    n_half = support_power(jn, 0.5)
    x = n_half @ support_log(n_half @ support_power(jm, -1.0) @ n_half) @ n_half
    return hermitian_part(partial_trace_array(x, 1, (dim_in, dim_out)))


def bs_choi_divergence(jn, jm, dim_in: int, dim_out: int) -> ExtendedReal:
    reduced = bs_choi_operator(jn, jm, dim_in, dim_out)
    if reduced is None:
        return math.inf
    return as_extended(float(np.max(np.abs(np.linalg.eigvalsh(reduced)))))


def _check_pair(n: QuantumChannel, m: QuantumChannel) -> None:
    if (n.dim_in, n.dim_out) != (m.dim_in, m.dim_out):
        raise DimensionMismatch(
            f"Channels act between different spaces: {n.dim_in}->{n.dim_out} vs {m.dim_in}->{m.dim_out}"
        )


def geometric_channel_divergence(n: QuantumChannel, m: QuantumChannel, alpha: float) -> ExtendedReal:
    _check_pair(n, m)
    return geometric_choi_divergence(n.choi, m.choi, n.dim_in, n.dim_out, alpha)


def bs_channel_divergence(n: QuantumChannel, m: QuantumChannel) -> ExtendedReal:
    _check_pair(n, m)
    return bs_choi_divergence(n.choi, m.choi, n.dim_in, n.dim_out)


# -------------------------------------------------------------------
# Sampled supremum over inputs
# -------------------------------------------------------------------

def _positive_power(a: np.ndarray, p: float) -> np.ndarray:
    """a^p for a positive definite a, eigenvalues floored at machine precision relative to the top one."""
    w, v = np.linalg.eigh(a)
    w = np.maximum(w, np.finfo(float).eps * max(float(w[-1]), np.finfo(float).tiny))
    return (v * w ** p) @ v.conj().T


def _compressed_outputs(jn, jm, support: np.ndarray, omega, dim_out: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Outputs of both channels on the canonical purification of ω, (√ω ⊗ I) J (√ω ⊗ I),
    written in an orthonormal basis of (√ω ⊗ I)·supp(J_M). ω is full rank, so that range
    holds both outputs and the second one is positive definite on it.
    """
    lift = np.kron(support_power(omega, 0.5), np.eye(dim_out))
    q, _ = np.linalg.qr(lift @ support)
    frame = lift @ q
    return hermitian_part(frame.conj().T @ jn @ frame), hermitian_part(frame.conj().T @ jm @ frame)


def _input_objective(jn, jm, support, omega, dim_out: int, alpha: Optional[float]) -> float:
    d = omega.shape[0]
    mixed = (1.0 - _INPUT_MIXING) * omega + _INPUT_MIXING * np.eye(d) / d
    rn, rm = _compressed_outputs(jn, jm, support, mixed, dim_out)
    if alpha is None:
        rn_half = support_power(rn, 0.5)
        inner = rn_half @ _positive_power(rm, -1.0) @ rn_half
        return float(np.real(np.trace(rn @ support_log(inner))))
    m_half, m_inv_half = _positive_power(rm, 0.5), _positive_power(rm, -0.5)
    middle = support_power(m_inv_half @ rn @ m_inv_half, alpha)
    return math.log(float(np.real(np.trace(m_half @ middle @ m_half)))) / (alpha - 1.0)


def _input_gradient(jn, jm, support, omega, dim_out, alpha, basis, h: float = 1e-7) -> np.ndarray:
    theta = to_coordinates(omega, basis)
    grad = np.zeros_like(theta)
    for k in range(theta.size):
        step = np.zeros_like(theta)
        step[k] = h
        hi = _input_objective(jn, jm, support, from_coordinates(theta + step, basis), dim_out, alpha)
        lo = _input_objective(jn, jm, support, from_coordinates(theta - step, basis), dim_out, alpha)
        grad[k] = (hi - lo) / (2.0 * h)
    return from_coordinates(grad, basis)


def channel_divergence_input_opt(
    n: QuantumChannel,
    m: QuantumChannel,
    alpha: Optional[float] = None,
    trials: int = 10,
    seed: int = 0,
    max_iter: int = 100,
) -> ExtendedReal:
    """
    Best divergence between the two channel outputs over sampled bipartite inputs.

    alpha=None evaluates the Belavkin–Staszewski divergence, otherwise the geometric
    divergence of order alpha. Each trial starts from a Haar-random pure input on R ⊗ A
    (d_R = d_A) and climbs by eigenvector steps: the reduced input state moves toward the
    top eigenvector of the objective's gradient. The result never exceeds the closed form
    beyond rounding.
    """
    _check_pair(n, m)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if alpha is not None:
        alpha = _check_alpha(alpha, upper=2.0)
    if not support_dominated(n.choi, m.choi):
        return math.inf
    d = n.dim_in
    basis = hermitian_basis(d)
    jn, jm = np.asarray(n.choi), np.asarray(m.choi)
    support = support_intersection([jm])
    rng = np.random.default_rng(seed)
    best = -math.inf
    for trial in range(trials):
        psi = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
        x = (psi / np.linalg.norm(psi)).reshape(d, d)
        omega = hermitian_part(x.conj().T @ x)
        value = _input_objective(jn, jm, support, omega, n.dim_out, alpha)
        for _ in range(max_iter):
            grad = _input_gradient(jn, jm, support, omega, n.dim_out, alpha, basis)
            if not np.all(np.isfinite(grad)):
                break
            w, v = np.linalg.eigh(hermitian_part(grad))
            top = np.outer(v[:, -1], v[:, -1].conj())
            improved = False
            t = 1.0
            while t > 1e-4:
                candidate = (1.0 - t) * omega + t * top
                cand_value = _input_objective(jn, jm, support, candidate, n.dim_out, alpha)
                if math.isfinite(cand_value) and cand_value > value + 1e-13:
                    omega, value, improved = candidate, cand_value, True
                    break
                t *= 0.5
            if not improved:
                break
        logger.debug("input search trial %d: %.10g", trial, value)
        best = max(best, value)
    return as_extended(best)
