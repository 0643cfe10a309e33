"""
Dense complex Hermitian matrix kernel.

Every eigendecomposition goes through numpy.linalg.eigh (LAPACK, deterministic for a
fixed input), and all functional calculus used by the divergences is built on top of it.
Functions come in two flavours:
- public operations taking/returning HermitianOperator values
- array-level helpers (`apply_on_support`, `support_power`, ...) used inside the solvers
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from app.core.errors import DimensionMismatch, InvalidAlpha, NegativeEigenvalue
from app.core.settings import DEFAULTS

logger = logging.getLogger(__name__)

# finite real or +inf (math.inf); never NaN
ExtendedReal = float

RealFunction = Callable[[np.ndarray], np.ndarray]


def as_extended(value: float) -> ExtendedReal:
    v = float(value)
    if math.isnan(v) or v == -math.inf:
        raise ValueError(f"Not an extended real value: {value}")
    return v


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Square complex matrix, symmetrized on construction and read-only afterwards."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"Hermitian operator needs a non-empty square matrix, got shape {a.shape}")
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    def __repr__(self) -> str:
        with np.printoptions(precision=6, linewidth=120):
            return f"HermitianOperator(dim={self.dim},\n{self.entries})"


@dataclass(frozen=True, eq=False)
class Eigensystem:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


OperatorLike = Union[np.ndarray, HermitianOperator, Sequence]


def as_matrix(op) -> np.ndarray:
    """Raw complex matrix behind any operator-like value (wrappers expose `.op`)."""
    while hasattr(op, "op"):
        op = op.op
    if isinstance(op, HermitianOperator):
        return op.entries
    a = np.asarray(op, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"Expected a square matrix, got shape {a.shape}")
    return a


def hermitian_part(op) -> np.ndarray:
    a = as_matrix(op)
    return 0.5 * (a + a.conj().T)


def _support_tol(eigenvalues: np.ndarray, support_tol: Optional[float]) -> float:
    if support_tol is not None:
        return float(support_tol)
    if eigenvalues.size == 0:
        return 0.0
    return DEFAULTS.SUPPORT_TOL_REL * float(np.max(np.abs(eigenvalues)))


# -------------------------------------------------------------------
# Array-level helpers
# -------------------------------------------------------------------

def apply_on_support(a: np.ndarray, f: RealFunction, support_tol: Optional[float] = None,
                     check_psd: bool = True) -> np.ndarray:
    """V f(λ) V† with f evaluated only on eigenvalues above the support tolerance."""
    w, v = np.linalg.eigh(hermitian_part(a))
    tol = _support_tol(w, support_tol)
    if check_psd and w.size and w[0] < -tol:
        raise NegativeEigenvalue(float(w[0]), tol)
    fw = np.zeros_like(w)
    mask = w > tol
    if mask.any():
        fw[mask] = f(w[mask])
    return (v * fw) @ v.conj().T


def apply_hermitian(a: np.ndarray, f: RealFunction) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(a))
    return (v * f(w)) @ v.conj().T


def support_power(a: np.ndarray, p: float, support_tol: Optional[float] = None) -> np.ndarray:
    return apply_on_support(a, lambda t: t ** p, support_tol)


def support_log(a: np.ndarray, support_tol: Optional[float] = None) -> np.ndarray:
    return apply_on_support(a, np.log, support_tol)


def clip_psd(a: np.ndarray) -> np.ndarray:
    return apply_hermitian(a, lambda t: np.maximum(t, 0.0))


def projector_array(a: np.ndarray, support_tol: Optional[float] = None) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(a))
    tol = _support_tol(w, support_tol)
    cols = v[:, np.abs(w) > tol]
    return cols @ cols.conj().T


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(a))[0])


def max_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(a))[-1])


def support_intersection(ops: Iterable, support_tol: Optional[float] = None, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (d×k columns) of the intersection of supports; k = 0 when empty."""
    mats = [hermitian_part(op) for op in ops]
    d = mats[0].shape[0]
    complement = sum(np.eye(d) - projector_array(m, support_tol) for m in mats)
    w, v = np.linalg.eigh(complement)
    return v[:, w <= tol]


def hermitian_basis(k: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of k×k Hermitian matrices, shape (k*k, k, k)."""
    basis = []
    for j in range(k):
        e = np.zeros((k, k), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    for j in range(k):
        for l in range(j + 1, k):
            e = np.zeros((k, k), dtype=complex)
            e[j, l] = e[l, j] = 1.0 / math.sqrt(2.0)
            basis.append(e)
            e = np.zeros((k, k), dtype=complex)
            e[j, l] = -1j / math.sqrt(2.0)
            e[l, j] = 1j / math.sqrt(2.0)
            basis.append(e)
    return np.array(basis)


def to_coordinates(a: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("kij,ji->k", basis, a))


def from_coordinates(theta: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.einsum("k,kij->ij", theta, basis)


def partial_trace_array(a: np.ndarray, subsystem: Union[int, Sequence[int]], dims: Sequence[int]) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if a.shape != (total, total):
        raise DimensionMismatch(f"Operator of shape {a.shape} does not match subsystem dims {dims}")
    traced = {subsystem} if isinstance(subsystem, (int, np.integer)) else set(subsystem)
    if any(k < 0 or k >= len(dims) for k in traced):
        raise DimensionMismatch(f"Subsystem index out of range for dims {dims}: {sorted(traced)}")
    t = a.reshape(dims + dims)
    n = len(dims)
    for k in sorted(traced, reverse=True):
        t = np.trace(t, axis1=k, axis2=k + n)
        n -= 1
    kept = [d for i, d in enumerate(dims) if i not in traced]
    m = int(np.prod(kept)) if kept else 1
    return t.reshape(m, m)


def tensor_power(a: np.ndarray, n: int) -> np.ndarray:
    return reduce(np.kron, [a] * n)


# -------------------------------------------------------------------
# Public operations
# -------------------------------------------------------------------

def eig_hermitian(A: OperatorLike) -> Eigensystem:
    w, v = np.linalg.eigh(hermitian_part(A))
    return Eigensystem(eigenvalues=w, eigenvectors=v)


def func_on_support(A: OperatorLike, f: RealFunction, support_tol: Optional[float] = None) -> HermitianOperator:
    """
    Functional calculus on the support of a PSD operator.

    Eigenvalues at or below `support_tol` (default: 1e-9 times the largest |eigenvalue|)
    map to 0; an eigenvalue below -support_tol raises NegativeEigenvalue.
    """
    return HermitianOperator(apply_on_support(as_matrix(A), f, support_tol))


def func_hermitian(A: OperatorLike, f: RealFunction) -> HermitianOperator:
    return HermitianOperator(apply_hermitian(as_matrix(A), f))


def support_projector(A: OperatorLike, support_tol: Optional[float] = None) -> HermitianOperator:
    return HermitianOperator(projector_array(as_matrix(A), support_tol))


def support_dominated(gamma: OperatorLike, sigma: OperatorLike, tol: Optional[float] = None) -> bool:
    """True iff supp(gamma) lies inside supp(sigma), i.e. ‖(I − σ⁰) γ⁰ (I − σ⁰)‖_∞ ≤ tol."""
    tol = DEFAULTS.SUPPORT_DOMINATION_TOL if tol is None else tol
    g = as_matrix(gamma)
    s = as_matrix(sigma)
    if g.shape != s.shape:
        raise DimensionMismatch(f"Cannot compare supports of shapes {g.shape} and {s.shape}")
    outside = np.eye(s.shape[0]) - projector_array(s)
    residual = outside @ projector_array(g) @ outside
    return float(np.max(np.abs(np.linalg.eigvalsh(hermitian_part(residual))))) <= tol


def schatten_norm(A: OperatorLike, alpha: float) -> float:
    if alpha < 1:
        raise InvalidAlpha(f"Schatten norm needs alpha >= 1, got {alpha}")
    w = np.abs(np.linalg.eigvalsh(hermitian_part(A)))
    if math.isinf(alpha):
        return float(np.max(w))
    return float(np.sum(w ** alpha) ** (1.0 / alpha))


def kron(A: OperatorLike, B: OperatorLike) -> HermitianOperator:
    return HermitianOperator(np.kron(as_matrix(A), as_matrix(B)))


def partial_trace(A: OperatorLike, subsystem: Union[int, Sequence[int]], dims: Sequence[int]) -> HermitianOperator:
    """Trace out `subsystem` (index or indices into `dims`) of an operator on ⊗ dims."""
    return HermitianOperator(partial_trace_array(as_matrix(A), subsystem, dims))


def trace(A: OperatorLike) -> float:
    return float(np.real(np.trace(as_matrix(A))))
