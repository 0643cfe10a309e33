"""
Divergence radii and barycentric quantities.

- log-Euclidean Chernoff divergence: concave maximisation of
  f_ε(s) = −ln Tr exp(Σ_x s_x ln(ρ_x + εI)) over the simplex (projected gradient with
  Armijo backtracking), warm-started along a decreasing ε schedule
- Umegaki radius: the Chernoff solution read as a two-sided certificate
- sandwiched radius over trace-one Hermitian centres, the one-shot converse bound
- Belavkin–Staszewski radius over channels (and over states via preparation channels)
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize, nnls

from app.core.errors import DimensionMismatch, InvalidOperator, SolverStalled
from app.core.settings import DEFAULTS
from app.services.channels import QuantumChannel, bs_choi_divergence, bs_choi_operator, choi_of
from app.services.divergences import DensityOperator, TraceOneHermitian, _check_alpha, umegaki
from app.services.exclusion import ChannelEnsemble, StateEnsemble
from app.services.linalg import (
    ExtendedReal,
    apply_hermitian,
    clip_psd,
    from_coordinates,
    hermitian_basis,
    hermitian_part,
    partial_trace_array,
    support_intersection,
    support_power,
    to_coordinates,
)
from app.utils.simplex import project_simplex

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    s: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise InvalidOperator("Simplex weights must be a non-empty vector")
        if np.any(s < -1e-12) or abs(float(np.sum(s)) - 1.0) > 1e-12:
            raise InvalidOperator(f"Not a probability vector: {s}")
        s = np.maximum(s, 0.0)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @classmethod
    def uniform(cls, r: int) -> "SimplexWeights":
        return cls(np.full(r, 1.0 / r))

    @classmethod
    def normalized(cls, v) -> "SimplexWeights":
        v = np.maximum(np.asarray(v, dtype=float), 0.0)
        total = float(np.sum(v))
        if total <= 0:
            raise InvalidOperator("Cannot normalise an all-zero weight vector")
        return cls(v / total)


@dataclass
class RadiusResult:
    """
    Outcome of a radius solve.

    `lower`/`upper` bracket the optimum when a two-sided certificate exists (Chernoff,
    Umegaki radius); otherwise `primal_dual_gap` holds a stationarity residual and `value`
    is the objective at the returned centre, an upper bound on the infimum.
    """

    value: ExtendedReal
    center: Any
    weights: SimplexWeights
    primal_dual_gap: float
    lower: Optional[float] = None
    upper: Optional[float] = None
    stalled: bool = False
    iterations: int = 0
    regularization: float = 0.0
    eps_trace: List[Tuple[float, float]] = field(default_factory=list)
    channel: Optional[QuantumChannel] = None


def _state_matrices(states) -> List[np.ndarray]:
    if isinstance(states, StateEnsemble):
        return states.matrices
    mats = [s.matrix if isinstance(s, DensityOperator) else DensityOperator.from_array(s).matrix for s in states]
    if len(mats) < 2:
        raise InvalidOperator("A radius needs at least two states")
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionMismatch(f"States have different dimensions: {sorted(dims)}")
    return mats


def _full_rank(mats: Sequence[np.ndarray]) -> bool:
    for m in mats:
        w = np.linalg.eigvalsh(m)
        if w[0] <= DEFAULTS.SUPPORT_TOL_REL * w[-1]:
            return False
    return True


# -------------------------------------------------------------------
# log-Euclidean Chernoff divergence
# -------------------------------------------------------------------

@dataclass
class _ChernoffPoint:
    s: np.ndarray
    value: float
    divergences: np.ndarray  # D(τ_s‖ρ_x + εI); f = Σ s_x D_x
    center: np.ndarray

    @property
    def gap(self) -> float:
        return float(np.max(self.divergences)) - self.value


def _regularized_logs(mats: Sequence[np.ndarray], eps: float) -> List[np.ndarray]:
    d = mats[0].shape[0]
    return [apply_hermitian(m + eps * np.eye(d), np.log) for m in mats]


def _chernoff_point(logs: Sequence[np.ndarray], s: np.ndarray) -> _ChernoffPoint:
    generator = hermitian_part(sum(sx * lx for sx, lx in zip(s, logs)))
    w, v = np.linalg.eigh(generator)
    top = float(w[-1])
    e = np.exp(w - top)
    z = float(np.sum(e))
    q = e / z
    value = -(top + math.log(z))
    center = (v * q) @ v.conj().T
    # ln τ has eigenvalues w + value
    entropy_term = float(np.sum(q * w)) + value
    cross = np.array([float(np.real(np.trace(center @ lx))) for lx in logs])
    return _ChernoffPoint(s=np.asarray(s, dtype=float), value=value, divergences=entropy_term - cross, center=center)


def _maximize_chernoff(logs, s0: np.ndarray, s_tol: float, max_iter: int, gap_tol: float) -> Tuple[_ChernoffPoint, int]:
    point = _chernoff_point(logs, s0)
    step = 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if point.gap <= gap_tol:
            break
        direction = point.divergences
        accepted = None
        while step > 1e-16:
            s_new = project_simplex(point.s + step * direction)
            trial = _chernoff_point(logs, s_new)
            if trial.value >= point.value + 1e-4 * float(direction @ (s_new - point.s)):
                accepted = trial
                break
            step *= 0.5
        if accepted is None:
            break
        moved = float(np.max(np.abs(accepted.s - point.s)))
        point = accepted
        step = min(step * 2.0, 1e6)
        if moved <= s_tol:
            break
    return point, iterations


def _diverges(values: Sequence[float]) -> bool:
    """+∞ detection along the ε schedule: very large, or growing like ln(1/ε)."""
    if values[-1] > DEFAULTS.DIVERGENCE_THRESHOLD:
        return True
    inc = np.diff(values)
    if inc.size == 0:
        return False
    if inc.size == 1:
        return bool(inc[-1] > DEFAULTS.DIVERGENCE_GROWTH_TOL)
    return bool(
        inc[-1] > DEFAULTS.DIVERGENCE_GROWTH_TOL
        and inc[-2] > 0
        and inc[-1] >= DEFAULTS.DIVERGENCE_GROWTH_RATIO * inc[-2]
    )


def chernoff_objective(states, s, eps: float = 0.0) -> Tuple[float, np.ndarray, DensityOperator]:
    """
    f_ε(s), the divergences D(τ_s‖ρ_x + εI) and the inner minimiser τ_s.

    The divergence vector is the gradient of f_ε up to a constant shift.
    """
    mats = _state_matrices(states)
    weights = s if isinstance(s, SimplexWeights) else SimplexWeights(s)
    if weights.s.size != len(mats):
        raise DimensionMismatch(f"{weights.s.size} weights for {len(mats)} states")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if eps == 0 and not _full_rank(mats):
        raise ValueError("eps = 0 needs full-rank states")
    point = _chernoff_point(_regularized_logs(mats, eps), weights.s)
    return point.value, point.divergences, DensityOperator.from_array(point.center)


def log_euclidean_chernoff(
    states,
    eps_schedule: Optional[Sequence[float]] = None,
    s_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> RadiusResult:
    mats = _state_matrices(states)
    r = len(mats)
    schedule = tuple(DEFAULTS.EPS_SCHEDULE if eps_schedule is None else eps_schedule)
    if not schedule or any(e <= 0 for e in schedule) or list(schedule) != sorted(schedule, reverse=True):
        raise ValueError(f"eps schedule must be positive and decreasing, got {schedule}")
    s_tol = DEFAULTS.SIMPLEX_TOL if s_tol is None else s_tol
    max_iter = DEFAULTS.SIMPLEX_MAX_ITER if max_iter is None else max_iter

    s = np.full(r, 1.0 / r)
    trace: List[Tuple[float, float]] = []
    iterations = 0
    point: Optional[_ChernoffPoint] = None
    for eps in schedule:
        point, its = _maximize_chernoff(_regularized_logs(mats, eps), s, s_tol, max_iter, DEFAULTS.RADIUS_TOL)
        s = point.s
        iterations += its
        trace.append((eps, point.value))

    full_rank = _full_rank(mats)
    # full-rank ensembles have a finite value; the schedule only warm-starts them
    if not full_rank and _diverges([v for _, v in trace]):
        logger.warning("Chernoff values diverge along the eps schedule %s; reporting +inf", [round(v, 6) for _, v in trace])
        return RadiusResult(
            value=math.inf,
            center=DensityOperator.from_array(point.center),
            weights=SimplexWeights.normalized(point.s),
            primal_dual_gap=math.inf,
            lower=point.value,
            upper=math.inf,
            iterations=iterations,
            regularization=schedule[-1],
            eps_trace=trace,
        )

    eps_used = schedule[-1]
    if full_rank:
        point, its = _maximize_chernoff(_regularized_logs(mats, 0.0), s, s_tol, max_iter, DEFAULTS.RADIUS_TOL)
        iterations += its
        eps_used = 0.0
        trace.append((0.0, point.value))

    gap = point.gap
    logger.info("Chernoff: value %.10g, gap %.2e after %d iterations", point.value, gap, iterations)
    return RadiusResult(
        value=point.value,
        center=DensityOperator.from_array(point.center),
        weights=SimplexWeights.normalized(point.s),
        primal_dual_gap=gap,
        lower=point.value,
        upper=float(np.max(point.divergences)),
        stalled=gap > DEFAULTS.RADIUS_GAP_TOL,
        iterations=iterations,
        regularization=eps_used,
        eps_trace=trace,
    )


def umegaki_radius(
    states,
    tol: Optional[float] = None,
    eps_schedule: Optional[Sequence[float]] = None,
    raise_on_stall: bool = False,
) -> RadiusResult:
    """
    inf_τ max_x D(τ‖ρ_x) with a two-sided certificate.

    The s-side lower value is the Chernoff objective at its optimum, the τ-side upper
    value is max_x D(τ_s‖ρ_x) at the Chernoff centre; both agree at the optimum.
    """
    tol = DEFAULTS.RADIUS_GAP_TOL if tol is None else tol
    base = log_euclidean_chernoff(states, eps_schedule)
    if math.isinf(base.value):
        return base
    mats = _state_matrices(states)
    d = mats[0].shape[0]
    eps = base.regularization
    upper = max(umegaki(base.center, m + eps * np.eye(d)) for m in mats)
    gap = upper - base.lower
    result = RadiusResult(
        value=upper,
        center=base.center,
        weights=base.weights,
        primal_dual_gap=gap,
        lower=base.lower,
        upper=upper,
        stalled=gap > tol,
        iterations=base.iterations,
        regularization=eps,
        eps_trace=base.eps_trace,
    )
    if result.stalled:
        message = f"Umegaki radius: two-sided gap {gap:.3e} exceeds {tol:.1e}"
        if raise_on_stall:
            raise SolverStalled(message, result=result)
        logger.warning(message)
    return result


# -------------------------------------------------------------------
# Shared: weights and stationarity residual at a nonsmooth optimum
# -------------------------------------------------------------------

def _stationarity(grads: np.ndarray, normals: Optional[np.ndarray]) -> Tuple[np.ndarray, float]:
    """
    Min-norm convex combination of active gradients after removing the constraint normals.

    grads: (m, n) gradients of the active terms; normals: (q, n) equality-constraint rows.
    Returns (weights, residual norm).
    """
    g = np.asarray(grads, dtype=float)
    if normals is not None and normals.size:
        _, sv, vt = np.linalg.svd(np.atleast_2d(normals), full_matrices=False)
        rows = vt[sv > 1e-10 * max(float(sv.max()), 1.0)]
        g = g - (g @ rows.T) @ rows
    m, n = g.shape
    penalty = 1e3
    a = np.vstack([g.T, penalty * np.ones((1, m))])
    b = np.concatenate([np.zeros(n), [penalty]])
    s, _ = nnls(a, b)
    total = float(np.sum(s))
    s = s / total if total > 0 else np.full(m, 1.0 / m)
    return s, float(np.linalg.norm(g.T @ s))


# -------------------------------------------------------------------
# Sandwiched radius over trace-one Hermitian centres
# -------------------------------------------------------------------

class _AffineSandwichedProblem:
    """min over trace-one Hermitian X on the common support of max_x ln Tr|B_x X B_x†|^α."""

    def __init__(self, mats: Sequence[np.ndarray], alpha: float, support: np.ndarray):
        self.alpha = alpha
        self.support = support
        k = support.shape[1]
        self.basis = hermitian_basis(k)
        self.trace_vector = np.real(np.einsum("kii->k", self.basis))
        power = (1.0 - alpha) / (2.0 * alpha)
        self.blocks = [support_power(m, power) @ support for m in mats]

    def terms(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(ln h_x, ∇_θ ln h_x) for every x."""
        x = from_coordinates(theta, self.basis)
        values, grads = [], []
        for b in self.blocks:
            mu, v = np.linalg.eigh(hermitian_part(b @ x @ b.conj().T))
            h = float(np.sum(np.abs(mu) ** self.alpha))
            phi = np.sign(mu) * np.abs(mu) ** (self.alpha - 1.0)
            g = self.alpha * b.conj().T @ ((v * phi) @ v.conj().T) @ b
            values.append(math.log(h))
            grads.append(to_coordinates(g, self.basis) / h)
        return np.array(values), np.array(grads)

    def tangent(self, g: np.ndarray) -> np.ndarray:
        t = self.trace_vector
        return g - (g @ t) / (t @ t) * t

    def normalize(self, theta: np.ndarray) -> np.ndarray:
        return theta / float(self.trace_vector @ theta)

    def center(self, theta: np.ndarray) -> np.ndarray:
        w = self.support
        return w @ from_coordinates(theta, self.basis) @ w.conj().T


def _subgradient_descent(problem: _AffineSandwichedProblem, theta0: np.ndarray, iterations: int,
                         step0: float) -> Tuple[np.ndarray, float]:
    """Normalised subgradient steps step0/k, active-set averaging, best-iterate memory."""
    theta = theta0
    values, grads = problem.terms(theta)
    best_theta, best_value = theta, float(np.max(values))
    for k in range(1, iterations + 1):
        top = float(np.max(values))
        active = values >= top - DEFAULTS.ACTIVE_SET_TOL * max(1.0, abs(top))
        g = problem.tangent(np.mean(grads[active], axis=0))
        norm = float(np.linalg.norm(g))
        if norm < 1e-14:
            break
        theta = theta - (step0 / k) * g / norm
        values, grads = problem.terms(theta)
        if float(np.max(values)) < best_value:
            best_theta, best_value = theta, float(np.max(values))
    return best_theta, best_value


def _slsqp_epigraph(problem: _AffineSandwichedProblem, theta0: np.ndarray, max_iter: int) -> Optional[np.ndarray]:
    n = theta0.size
    r = len(problem.blocks)
    values0, _ = problem.terms(theta0)
    z0 = np.concatenate([theta0, [float(np.max(values0))]])
    unit = np.zeros(n + 1)
    unit[-1] = 1.0

    def ineq(z):
        values, _ = problem.terms(z[:n])
        return z[n] - values

    def ineq_jac(z):
        _, grads = problem.terms(z[:n])
        return np.hstack([-grads, np.ones((r, 1))])

    constraints = [
        {"type": "ineq", "fun": ineq, "jac": ineq_jac},
        {"type": "eq", "fun": lambda z: np.array([problem.trace_vector @ z[:n] - 1.0]),
         "jac": lambda z: np.concatenate([problem.trace_vector, [0.0]])[None, :]},
    ]
    try:
        res = minimize(lambda z: z[n], z0, jac=lambda z: unit, method="SLSQP", constraints=constraints,
                       options={"maxiter": max_iter, "ftol": 1e-14})
    except (ValueError, np.linalg.LinAlgError) as exc:
        logger.debug("SLSQP polish failed: %s", exc)
        return None
    if not np.all(np.isfinite(res.x)):
        return None
    return res.x[:n]


def sandwiched_radius_affine(
    states,
    alpha: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> RadiusResult:
    """
    inf over trace-one Hermitian τ of max_x D̃_α(τ‖ρ_x), τ restricted to ∩_x supp ρ_x.

    Solved in the equivalent form min_τ max_x ln‖ρ_x^{(1−α)/2α} τ ρ_x^{(1−α)/2α}‖_α^α:
    subgradient phase from the ensemble average, then an SLSQP epigraph polish; the
    better of the two is returned. An empty support intersection gives +inf.
    """
    alpha = _check_alpha(alpha)
    mats = _state_matrices(states)
    r = len(mats)
    tol = DEFAULTS.STATIONARITY_TOL if tol is None else tol
    max_iter = DEFAULTS.SUBGRADIENT_ITER if max_iter is None else max_iter

    support = support_intersection(mats)
    if support.shape[1] == 0:
        logger.info("Affine sandwiched radius: supports have trivial intersection, value +inf")
        return RadiusResult(value=math.inf, center=None, weights=SimplexWeights.uniform(r), primal_dual_gap=0.0)

    problem = _AffineSandwichedProblem(mats, alpha, support)
    start = support.conj().T @ (sum(mats) / r) @ support
    theta0 = problem.normalize(to_coordinates(start, problem.basis))

    theta_sub, value_sub = _subgradient_descent(problem, theta0, max_iter, step0=0.1)
    theta, value = theta_sub, value_sub
    polished = _slsqp_epigraph(problem, theta_sub, max_iter=max(max_iter, 200))
    if polished is not None and float(problem.trace_vector @ polished) > 0:
        polished = problem.normalize(polished)
        polished_value = float(np.max(problem.terms(polished)[0]))
        if polished_value < value:
            theta, value = polished, polished_value

    values, grads = problem.terms(theta)
    top = float(np.max(values))
    active = np.nonzero(values >= top - max(DEFAULTS.ACTIVE_SET_TOL, 1e-6) * max(1.0, abs(top)))[0]
    local, residual = _stationarity(grads[active], problem.trace_vector[None, :])
    weights = np.zeros(r)
    weights[active] = local
    residual /= alpha - 1.0
    center = TraceOneHermitian.from_array(problem.center(theta))
    result = RadiusResult(
        value=top / (alpha - 1.0),
        center=center,
        weights=SimplexWeights.normalized(weights),
        primal_dual_gap=residual,
        stalled=residual > tol,
        iterations=max_iter,
    )
    logger.info("Affine sandwiched radius (alpha=%g): %.10g, stationarity residual %.2e", alpha, result.value, residual)
    return result


def oneshot_converse_bound(ensemble: StateEnsemble, alpha: float, tol: Optional[float] = None) -> ExtendedReal:
    """Radius over trace-one Hermitian centres plus (α/(α−1)) ln(1/p_min)."""
    alpha = _check_alpha(alpha)
    radius = sandwiched_radius_affine(ensemble, alpha, tol).value
    if math.isinf(radius):
        return math.inf
    return radius + alpha / (alpha - 1.0) * math.log(1.0 / ensemble.p_min)


# -------------------------------------------------------------------
# Belavkin–Staszewski radius over channels
# -------------------------------------------------------------------

class _ChoiMinimax:
    """
    min over Choi operators J = W X W† (W: common support of the ensemble's Choi
    operators, X ⪰ 0, Tr_B J = I_R) of max_x D̂(J‖J_x). X is carried in real
    coordinates θ of the Hermitian basis.
    """

    def __init__(self, chois: Sequence[np.ndarray], dim_in: int, dim_out: int):
        self.chois = [np.asarray(j) for j in chois]
        self.dims = (dim_in, dim_out)
        self.support = support_intersection(self.chois)
        self.k = self.support.shape[1]
        if not self.k:
            return
        self.basis = hermitian_basis(self.k)
        in_basis = hermitian_basis(dim_in)
        w = self.support
        columns = [
            to_coordinates(partial_trace_array(w @ e @ w.conj().T, 1, self.dims), in_basis) for e in self.basis
        ]
        self.tp_map = np.array(columns).T
        self.tp_target = to_coordinates(np.eye(dim_in), in_basis)
        self.tp_pinv = np.linalg.pinv(self.tp_map)
        u, sv, _ = np.linalg.svd(self.tp_map, full_matrices=False)
        rank = int(np.sum(sv > 1e-10 * max(float(sv.max()), 1.0)))
        self.tp_rows = u[:, :rank].T @ self.tp_map
        self.tp_rows_target = u[:, :rank].T @ self.tp_target

    # ---- geometry ----

    def choi(self, theta: np.ndarray) -> np.ndarray:
        w = self.support
        return w @ from_coordinates(theta, self.basis) @ w.conj().T

    def tp_residual(self, theta: np.ndarray) -> float:
        return float(np.linalg.norm(self.tp_map @ theta - self.tp_target))

    def project_affine(self, theta: np.ndarray) -> np.ndarray:
        return theta - self.tp_pinv @ (self.tp_map @ theta - self.tp_target)

    def project_psd(self, theta: np.ndarray) -> np.ndarray:
        return to_coordinates(clip_psd(from_coordinates(theta, self.basis)), self.basis)

    def dykstra(self, theta: np.ndarray, iterations: Optional[int] = None) -> np.ndarray:
        """Projection onto {X ⪰ 0} ∩ {Tr_B J = I_R} by Dykstra's alternating scheme; ends on the PSD side."""
        iterations = DEFAULTS.DYKSTRA_ITER if iterations is None else iterations
        x = self.project_psd(theta)
        p = np.zeros_like(x)
        q = np.zeros_like(x)
        for _ in range(iterations):
            y = self.project_affine(x + p)
            p = x + p - y
            x_new = self.project_psd(y + q)
            q = y + q - x_new
            done = np.linalg.norm(x_new - x) <= 1e-14 and self.tp_residual(x_new) <= 1e-13
            x = x_new
            if done:
                break
        return x

    # ---- objective ----

    def values(self, theta: np.ndarray) -> np.ndarray:
        j = self.choi(self.project_psd(theta))
        return np.array([bs_choi_divergence(j, jx, *self.dims) for jx in self.chois])

    def fd_gradients(self, theta: np.ndarray, h: float = 1e-7) -> np.ndarray:
        n = theta.size
        grads = np.zeros((len(self.chois), n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            grads[:, i] = (self.values(theta + e) - self.values(theta - e)) / (2.0 * h)
        return grads

    def _unpack(self, z: np.ndarray) -> np.ndarray:
        k2 = self.k * self.k
        factor = (z[:k2] + 1j * z[k2:]).reshape(self.k, self.k)
        return to_coordinates(factor @ factor.conj().T, self.basis)

    def smoothed(self, z: np.ndarray, mu: float) -> Tuple[float, np.ndarray]:
        """μ·ln Σ exp(λ/μ) over the eigenvalues λ of every reduced BS operator, and per-x softmax mass."""
        j = self.choi(self._unpack(z))
        eigs = []
        for jx in self.chois:
            reduced = bs_choi_operator(j, jx, *self.dims)
            if reduced is None:
                return 1e6, np.full(len(self.chois), 1.0 / len(self.chois))
            eigs.append(np.linalg.eigvalsh(reduced))
        stacked = np.concatenate(eigs)
        top = float(np.max(stacked))
        e = np.exp((stacked - top) / mu)
        total = float(np.sum(e))
        mass = np.array([np.sum(chunk) for chunk in np.split(e, len(self.chois))]) / total
        return top + mu * math.log(total), mass

    def polish(self, theta: np.ndarray, schedule: Sequence[float], max_iter: int) -> Tuple[np.ndarray, bool, np.ndarray]:
        """SLSQP on the factor L (X = LL†) of the smoothed objective, TP as equality constraints."""
        root = apply_hermitian(from_coordinates(theta, self.basis), lambda t: np.sqrt(np.maximum(t, 0.0)))
        z = np.concatenate([root.real.reshape(-1), root.imag.reshape(-1)])
        constraint = {"type": "eq", "fun": lambda v: self.tp_rows @ self._unpack(v) - self.tp_rows_target}
        ok = False
        mass = np.full(len(self.chois), 1.0 / len(self.chois))
        for mu in schedule:
            try:
                res = minimize(lambda v: self.smoothed(v, mu)[0], z, method="SLSQP", constraints=[constraint],
                               options={"maxiter": max_iter, "ftol": 1e-12})
            except (ValueError, np.linalg.LinAlgError) as exc:
                logger.debug("BS radius polish failed at mu=%g: %s", mu, exc)
                continue
            if np.all(np.isfinite(res.x)):
                z = res.x
                ok = ok or bool(res.success)
                mass = self.smoothed(z, mu)[1]
        return self._unpack(z), ok, mass


def _channel_list(channels) -> List[QuantumChannel]:
    if isinstance(channels, ChannelEnsemble):
        return list(channels.channels)
    chans = list(channels)
    if len(chans) < 2:
        raise InvalidOperator("A channel radius needs at least two channels")
    dims = {(c.dim_in, c.dim_out) for c in chans}
    if len(dims) != 1:
        raise DimensionMismatch(f"Channels act between different spaces: {sorted(dims)}")
    return chans


def _random_start(problem: _ChoiMinimax, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(problem.k, problem.k)) + 1j * rng.normal(size=(problem.k, problem.k))
    x = g @ g.conj().T
    return to_coordinates(x / np.real(np.trace(x)), problem.basis)


def channel_bs_radius(
    channels,
    tol: Optional[float] = None,
    restarts: Optional[int] = None,
    seed: int = 0,
    raise_on_stall: bool = False,
) -> RadiusResult:
    """
    inf over channels T of max_x D̂(T‖N_x), the Belavkin–Staszewski channel radius.

    Each restart runs projected subgradient steps (finite-difference gradients, Dykstra
    projection onto the Choi feasible set) followed by a smoothed SLSQP polish; the value
    is the objective at the best channel found, an upper bound on the infimum. +inf when no
    channel has its Choi support inside every J_x.
    """
    chans = _channel_list(channels)
    r = len(chans)
    dim_in, dim_out = chans[0].dim_in, chans[0].dim_out
    tol = DEFAULTS.ACTIVE_SET_TOL if tol is None else tol
    restarts = DEFAULTS.CHANNEL_RESTARTS if restarts is None else restarts
    chois = [np.asarray(c.choi) for c in chans]

    if all(np.max(np.abs(j - chois[0])) <= 1e-12 for j in chois[1:]):
        return RadiusResult(value=0.0, center=choi_of(chans[0]), weights=SimplexWeights.uniform(r),
                            primal_dual_gap=0.0, channel=chans[0])

    problem = _ChoiMinimax(chois, dim_in, dim_out)
    infinite = RadiusResult(value=math.inf, center=None, weights=SimplexWeights.uniform(r), primal_dual_gap=0.0)
    if problem.k == 0:
        logger.info("BS channel radius: Choi supports have trivial intersection, value +inf")
        return infinite
    anchor = problem.dykstra(problem.project_affine(np.zeros(problem.k * problem.k)))
    if problem.tp_residual(anchor) > 1e-8:
        logger.info("BS channel radius: no trace-preserving Choi operator on the common support, value +inf")
        return infinite

    average = problem.support.conj().T @ (sum(chois) / r) @ problem.support
    starts = [to_coordinates(average, problem.basis)]
    for stream in np.random.SeedSequence(seed).spawn(max(restarts - 1, 0)):
        starts.append(_random_start(problem, np.random.default_rng(stream)))

    best_theta, best_value, best_mass, any_polished = None, math.inf, None, False
    iterations = 0
    for k, start in enumerate(starts):
        theta = problem.dykstra(start)
        values = problem.values(theta)
        local_theta, local_value = theta, float(np.max(values))
        for it in range(1, DEFAULTS.CHANNEL_SUBGRADIENT_ITER + 1):
            top = float(np.max(values))
            if not math.isfinite(top):
                break
            active = values >= top - max(tol, 1e-12)
            g = np.mean(problem.fd_gradients(theta)[active], axis=0)
            norm = float(np.linalg.norm(g))
            if norm < 1e-12:
                break
            theta = problem.dykstra(theta - (0.1 / it) * g / norm, iterations=100)
            values = problem.values(theta)
            if float(np.max(values)) < local_value:
                local_theta, local_value = theta, float(np.max(values))
            iterations += 1

        polished, ok, mass = problem.polish(local_theta, DEFAULTS.SMOOTHING_SCHEDULE, max_iter=300)
        polished = problem.dykstra(polished)
        polished_value = float(np.max(problem.values(polished)))
        any_polished = any_polished or ok
        if problem.tp_residual(polished) <= 1e-9 and polished_value < local_value:
            local_theta, local_value = polished, polished_value
        else:
            mass = None
        logger.debug("BS channel radius restart %d: %.10g", k, local_value)
        if local_value < best_value:
            best_theta, best_value, best_mass = local_theta, local_value, mass

    values = problem.values(best_theta)
    top = float(np.max(values))
    active = np.nonzero(values >= top - max(tol, 1e-6))[0]
    if best_mass is not None:
        weights = SimplexWeights.normalized(best_mass)
    else:
        weights = np.zeros(r)
        weights[active] = 1.0 / active.size
        weights = SimplexWeights(weights)
    _, residual = _stationarity(problem.fd_gradients(best_theta)[active], problem.tp_rows)

    j = problem.choi(best_theta)
    channel = QuantumChannel.from_choi(j, dim_in, dim_out)
    # report the value of the channel actually returned, after its trace-preservation repair
    value = max(bs_choi_divergence(channel.choi, jx, dim_in, dim_out) for jx in chois)
    if not math.isfinite(value):
        logger.debug("BS channel radius: repaired channel left the common support, keeping %.10g", top)
        value = top
    result = RadiusResult(
        value=value,
        center=choi_of(channel),
        weights=weights,
        primal_dual_gap=residual,
        stalled=not any_polished,
        iterations=iterations,
        channel=channel,
    )
    if result.stalled:
        message = "BS channel radius: polish did not converge; value is the best feasible upper bound"
        if raise_on_stall:
            raise SolverStalled(message, result=result)
        logger.warning(message)
    logger.info("BS channel radius: %.10g over %d restarts", value, len(starts))
    return result


def bs_state_radius(
    states,
    tol: Optional[float] = None,
    restarts: Optional[int] = None,
    seed: int = 0,
) -> RadiusResult:
    """inf over states τ of max_x D̂(τ‖σ_x), solved as the channel radius of preparation channels."""
    mats = _state_matrices(states)
    result = channel_bs_radius([QuantumChannel.preparation(m) for m in mats], tol, restarts, seed)
    if result.channel is not None:
        result.center = DensityOperator.from_array(np.asarray(result.channel.choi))
    return result
