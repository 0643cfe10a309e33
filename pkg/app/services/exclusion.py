"""
Exclusion error probabilities.

One-shot state exclusion is the semidefinite program

    P_err(E) = min_Λ Σ_x p_x Tr[Λ_x ρ_x]   over POVMs Λ,

certified by its dual  max Tr[Y]  subject to  Y ≤ p_x ρ_x  for every x.
Two hypotheses have an exact spectral solution; three or more go through cvxpy
(primal and dual solved as separate problems, both repaired to exact feasibility).
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

from app.core.errors import DimensionCap, DimensionMismatch, InvalidOperator, SolverStalled
from app.core.settings import DEFAULTS
from app.services.channels import QuantumChannel, adjoint_apply, apply
from app.services.divergences import DensityOperator
from app.services.linalg import HermitianOperator, clip_psd, hermitian_part, support_power, tensor_power

logger = logging.getLogger(__name__)


def _check_priors(priors: Sequence[float], r: int) -> np.ndarray:
    p = np.asarray(priors, dtype=float)
    if p.ndim != 1 or p.size != r:
        raise InvalidOperator(f"Expected {r} priors, got {p.size}")
    if r < 2:
        raise InvalidOperator("An ensemble needs at least two hypotheses")
    if np.any(p <= 0):
        raise InvalidOperator("interior prior required: every prior must be > 0")
    if abs(float(np.sum(p)) - 1.0) > 1e-12:
        raise InvalidOperator(f"Priors sum to {np.sum(p):.15g}, expected 1")
    p = p.copy()
    p.setflags(write=False)
    return p


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    priors: np.ndarray
    states: Tuple[DensityOperator, ...]

    def __post_init__(self):
        states = tuple(s if isinstance(s, DensityOperator) else DensityOperator.from_array(s) for s in self.states)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "priors", _check_priors(self.priors, len(states)))
        dims = {s.dim for s in states}
        if len(dims) != 1:
            raise DimensionMismatch(f"Ensemble states have different dimensions: {sorted(dims)}")

    @classmethod
    def from_arrays(cls, priors: Sequence[float], matrices: Sequence) -> "StateEnsemble":
        return cls(np.asarray(priors, dtype=float), tuple(matrices))

    @property
    def r(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def p_min(self) -> float:
        return float(np.min(self.priors))

    @property
    def matrices(self) -> List[np.ndarray]:
        return [s.matrix for s in self.states]


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    priors: np.ndarray
    channels: Tuple[QuantumChannel, ...]

    def __post_init__(self):
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "priors", _check_priors(self.priors, len(channels)))
        dims = {(c.dim_in, c.dim_out) for c in channels}
        if len(dims) != 1:
            raise DimensionMismatch(f"Ensemble channels act between different spaces: {sorted(dims)}")

    @property
    def r(self) -> int:
        return len(self.channels)

    @property
    def dim_in(self) -> int:
        return self.channels[0].dim_in

    @property
    def dim_out(self) -> int:
        return self.channels[0].dim_out

    @property
    def p_min(self) -> float:
        return float(np.min(self.priors))


@dataclass(frozen=True, eq=False)
class POVM:
    effects: Tuple[HermitianOperator, ...]

    def __post_init__(self):
        effects = tuple(e if isinstance(e, HermitianOperator) else HermitianOperator(e) for e in self.effects)
        if not effects:
            raise InvalidOperator("A POVM needs at least one effect")
        d = effects[0].dim
        for x, e in enumerate(effects):
            if e.dim != d:
                raise DimensionMismatch(f"Effect {x} has dimension {e.dim}, expected {d}")
            w = np.linalg.eigvalsh(e.entries)
            if w[0] < -DEFAULTS.STATE_TOL:
                raise InvalidOperator(f"Effect {x} is not PSD: min eigenvalue {w[0]:.3e}")
        total = sum(e.entries for e in effects)
        if np.max(np.abs(total - np.eye(d))) > DEFAULTS.STATE_TOL:
            raise InvalidOperator("Effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_arrays(cls, effects: Sequence) -> "POVM":
        return cls(tuple(HermitianOperator(e) for e in effects))

    @classmethod
    def uniform(cls, r: int, dim: int) -> "POVM":
        return cls(tuple(HermitianOperator(np.eye(dim) / r) for _ in range(r)))

    @classmethod
    def trivial(cls, r: int, dim: int, label: int) -> "POVM":
        """Always exclude `label`."""
        return cls(tuple(HermitianOperator(np.eye(dim) if x == label else np.zeros((dim, dim))) for x in range(r)))

    @property
    def matrices(self) -> List[np.ndarray]:
        return [e.entries for e in self.effects]


@dataclass
class ExclusionSolution:
    value: float
    povm: POVM
    dual_certificate: HermitianOperator
    duality_gap: float
    stalled: bool = False
    method: str = "sdp"
    iterations: Optional[int] = None

    @property
    def dual_value(self) -> float:
        return float(np.real(np.trace(self.dual_certificate.entries)))


@dataclass
class ChannelStrategy:
    """n = 1 channel exclusion strategy: a bipartite input and a POVM on the outputs."""

    value: float
    input_state: HermitianOperator
    povm: POVM
    restarts: int
    label: str = "heuristic feasible value"
    history: List[float] = field(default_factory=list)


def exclusion_error(ensemble: StateEnsemble, povm: POVM) -> float:
    if len(povm.effects) != ensemble.r:
        raise DimensionMismatch(f"POVM has {len(povm.effects)} effects for {ensemble.r} hypotheses")
    return float(sum(p * np.real(np.trace(e @ rho)) for p, e, rho in zip(ensemble.priors, povm.matrices, ensemble.matrices)))


def tensor_power_ensemble(ensemble: StateEnsemble, n: int) -> StateEnsemble:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return StateEnsemble(ensemble.priors, tuple(DensityOperator.from_array(tensor_power(m, n)) for m in ensemble.matrices))


# -------------------------------------------------------------------
# One-shot state exclusion
# -------------------------------------------------------------------

def _spectral_two_hypotheses(ensemble: StateEnsemble) -> ExclusionSolution:
    """Exact solution for r = 2: exclude label 1 on the negative eigenspace of p₁ρ₁ − p₂ρ₂."""
    p1, p2 = ensemble.priors
    a = p1 * ensemble.matrices[0]
    b = p2 * ensemble.matrices[1]
    w, v = np.linalg.eigh(hermitian_part(a - b))
    neg = v[:, w < 0]
    lam1 = neg @ neg.conj().T
    lam2 = np.eye(ensemble.dim) - lam1
    positive = (v * np.maximum(w, 0.0)) @ v.conj().T
    y = hermitian_part(a - positive)
    povm = POVM((HermitianOperator(lam1), HermitianOperator(lam2)))
    value = exclusion_error(ensemble, povm)
    dual = HermitianOperator(y)
    trace_y = float(np.real(np.trace(y)))
    return ExclusionSolution(value=value, povm=povm, dual_certificate=dual,
                             duality_gap=value - trace_y, method="spectral", iterations=0)


def _solve(problem: cp.Problem, budget: int) -> Optional[int]:
    """Solve with the configured solver, falling back to SCS; returns the iteration count."""
    solver = DEFAULTS.SDP_SOLVER.upper()
    attempts = []
    if solver == "CLARABEL":
        attempts.append((cp.CLARABEL, dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=budget)))
    attempts.append((cp.SCS, dict(eps_abs=1e-10, eps_rel=1e-10, max_iters=budget)))
    for name, options in attempts:
        try:
            problem.solve(solver=name, **options)
        except cp.error.SolverError as exc:
            logger.warning("SDP solver %s failed: %s", name, exc)
            continue
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            stats = problem.solver_stats
            return getattr(stats, "num_iters", None) if stats is not None else None
        logger.warning("SDP solver %s returned status %s", name, problem.status)
    return None


def _repair_povm(effects: List[np.ndarray]) -> List[np.ndarray]:
    """Project solver output onto the POVM set: clip to PSD, then S^{-1/2} Λ S^{-1/2}."""
    clipped = [clip_psd(e) for e in effects]
    s_inv_half = support_power(sum(clipped), -0.5)
    return [hermitian_part(s_inv_half @ e @ s_inv_half) for e in clipped]


def _repair_dual(y: np.ndarray, weighted: List[np.ndarray]) -> np.ndarray:
    """Shift Y down until Y ≤ p_x ρ_x holds for every x."""
    y = hermitian_part(y)
    worst = min(float(np.linalg.eigvalsh(hermitian_part(m - y))[0]) for m in weighted)
    if worst < 0:
        y = y + worst * np.eye(y.shape[0])
    return y


def _canonical_order(ensemble: StateEnsemble) -> List[int]:
    """Label order fixed by (prior, entries) so relabelled ensembles feed the solver identical data."""
    def key(x: int):
        m = ensemble.matrices[x]
        return (float(ensemble.priors[x]), m.real.ravel().tolist(), m.imag.ravel().tolist())
    return sorted(range(ensemble.r), key=key)


def _sdp_exclusion(ensemble: StateEnsemble, budget: int) -> Tuple[POVM, np.ndarray, Optional[int], bool]:
    d, r = ensemble.dim, ensemble.r
    order = _canonical_order(ensemble)
    weighted = [ensemble.priors[x] * ensemble.matrices[x] for x in order]

    effects = [cp.Variable((d, d), hermitian=True) for _ in range(r)]
    constraints = [e >> 0 for e in effects] + [sum(effects) == np.eye(d)]
    objective = cp.Minimize(cp.real(sum(cp.trace(e @ w) for e, w in zip(effects, weighted))))
    primal = cp.Problem(objective, constraints)
    primal_iters = _solve(primal, budget)

    y = cp.Variable((d, d), hermitian=True)
    dual = cp.Problem(cp.Maximize(cp.real(cp.trace(y))), [w - y >> 0 for w in weighted])
    dual_iters = _solve(dual, budget)

    solved = primal_iters is not None or primal.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    if solved and all(e.value is not None for e in effects):
        repaired = _repair_povm([e.value for e in effects])
        restored = [None] * r
        for k, x in enumerate(order):
            restored[x] = repaired[k]
        povm = POVM(tuple(HermitianOperator(e) for e in restored))
    else:
        povm = POVM.uniform(r, d)
        solved = False

    dual_ok = y.value is not None
    if dual_ok:
        y_value = _repair_dual(y.value, weighted)
    else:
        y_value = min(float(np.linalg.eigvalsh(w)[0]) for w in weighted) * np.eye(d)
    iterations = (primal_iters or 0) + (dual_iters or 0)
    return povm, y_value, iterations, solved and dual_ok


def min_error_exclusion(
    ensemble: StateEnsemble,
    gap_tol: Optional[float] = None,
    method: str = "auto",
    raise_on_stall: bool = False,
) -> ExclusionSolution:
    """
    Minimum exclusion error with a feasible POVM and a feasible dual certificate.

    method: "auto" (spectral for two hypotheses, SDP otherwise), "spectral" or "sdp".
    A duality gap above `gap_tol` marks the solution stalled (or raises SolverStalled
    when `raise_on_stall`); the best certificate is returned either way.
    """
    gap_tol = DEFAULTS.GAP_TOL if gap_tol is None else gap_tol
    if method not in ("auto", "spectral", "sdp"):
        raise ValueError(f"Unknown exclusion method '{method}'")
    if method == "spectral" and ensemble.r != 2:
        raise ValueError("The spectral solution needs exactly two hypotheses")

    if method == "spectral" or (method == "auto" and ensemble.r == 2):
        solution = _spectral_two_hypotheses(ensemble)
    else:
        povm, y, iterations, solved = _sdp_exclusion(ensemble, DEFAULTS.ITERATION_BUDGET)
        value = exclusion_error(ensemble, povm)
        trace_y = float(np.real(np.trace(y)))
        solution = ExclusionSolution(value=value, povm=povm, dual_certificate=HermitianOperator(y),
                                     duality_gap=value - trace_y, method="sdp", iterations=iterations)
        if not solved:
            solution.stalled = True

    if solution.duality_gap > gap_tol:
        solution.stalled = True
    if solution.stalled:
        message = f"Exclusion solver stalled: duality gap {solution.duality_gap:.3e} > {gap_tol:.1e}"
        if raise_on_stall:
            raise SolverStalled(message, result=solution)
        logger.warning(message)
    else:
        logger.debug("exclusion (%s): value %.12g, gap %.2e", solution.method, solution.value, solution.duality_gap)
    return solution


def n_copy_error(
    ensemble: StateEnsemble,
    n: int,
    gap_tol: Optional[float] = None,
    method: str = "auto",
) -> ExclusionSolution:
    cap = DEFAULTS.DIMENSION_CAP
    if ensemble.dim ** n > cap:
        raise DimensionCap(f"d^n = {ensemble.dim}^{n} = {ensemble.dim ** n} exceeds the dimension cap {cap}")
    if n == 1:
        return min_error_exclusion(ensemble, gap_tol, method)
    return min_error_exclusion(tensor_power_ensemble(ensemble, n), gap_tol, method)


def exponent_from_error(value: float, n: int) -> float:
    if value <= DEFAULTS.ERROR_FLOOR:
        return math.inf
    return -math.log(value) / n


def empirical_exponent(
    ensemble: StateEnsemble,
    n_max: int,
    gap_tol: Optional[float] = None,
) -> List[Tuple[int, float]]:
    """[(n, −(1/n) ln P_err(n)) for n = 1..n_max]; +inf where the error is below the numerical floor."""
    if ensemble.dim ** n_max > DEFAULTS.DIMENSION_CAP:
        raise DimensionCap(
            f"d^n_max = {ensemble.dim}^{n_max} exceeds the dimension cap {DEFAULTS.DIMENSION_CAP}"
        )
    return [(n, exponent_from_error(n_copy_error(ensemble, n, gap_tol).value, n)) for n in range(1, n_max + 1)]


# -------------------------------------------------------------------
# n = 1 channel exclusion
# -------------------------------------------------------------------

def _haar_pure_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _outputs(ensemble: ChannelEnsemble, rho: np.ndarray) -> StateEnsemble:
    return StateEnsemble(ensemble.priors, tuple(DensityOperator(apply(c, rho)) for c in ensemble.channels))


def channel_exclusion_oneshot(
    ensemble: ChannelEnsemble,
    restarts: int = 5,
    seed: int = 0,
    max_iter: int = 50,
    tol: float = 1e-10,
    initial_inputs: Optional[Sequence] = None,
) -> ChannelStrategy:
    """
    Feasible value of n = 1 channel exclusion by see-saw over (input, POVM).

    For a fixed input the POVM step is one state-exclusion solve on the outputs; for a
    fixed POVM the best input is the minimal eigenvector of Σ p_x (id ⊗ N_x)†[Λ_x].
    The value is an upper bound on the optimum (heuristic, no certificate).
    """
    d_ra = ensemble.dim_in * ensemble.dim_in
    starts: List[np.ndarray] = [hermitian_part(x) for x in (initial_inputs or [])]
    streams = np.random.SeedSequence(seed).spawn(max(restarts, 0))
    starts.extend(_haar_pure_state(np.random.default_rng(s), d_ra) for s in streams)
    if not starts:
        raise ValueError("channel_exclusion_oneshot needs at least one restart or initial input")

    best: Optional[ChannelStrategy] = None
    for k, rho in enumerate(starts):
        history: List[float] = []
        current = math.inf
        strategy = None
        for _ in range(max_iter):
            solution = min_error_exclusion(_outputs(ensemble, rho))
            if solution.value < current:
                strategy = (solution.value, rho, solution.povm)
            history.append(solution.value)
            h = sum(p * adjoint_apply(c, e).entries
                    for p, c, e in zip(ensemble.priors, ensemble.channels, solution.povm.matrices))
            w, v = np.linalg.eigh(hermitian_part(h))
            new_rho = np.outer(v[:, 0], v[:, 0].conj())
            value = float(w[0])
            if value < min(current, solution.value):
                strategy = (value, new_rho, solution.povm)
            history.append(value)
            improvement = current - min(value, solution.value)
            current = min(current, value, solution.value)
            rho = new_rho
            if improvement <= tol:
                break
        logger.debug("channel see-saw restart %d: %.12g", k, current)
        value, rho_best, povm = strategy
        candidate = ChannelStrategy(value=max(value, 0.0), input_state=HermitianOperator(rho_best), povm=povm,
                                    restarts=len(starts), history=history)
        if best is None or candidate.value < best.value:
            best = candidate
    return best
