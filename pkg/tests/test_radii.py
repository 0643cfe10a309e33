"""
Tests for divergence radii: the log-Euclidean Chernoff divergence and its two-sided
certificate, the sandwiched radius over trace-one Hermitian centres, and the
Belavkin–Staszewski radius over channels and states.
"""
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from app.core.errors import InvalidAlpha, InvalidOperator
from app.services.channels import QuantumChannel, bs_channel_divergence
from app.services.divergences import DensityOperator, classical_renyi, sandwiched, umegaki
from app.services.ensembles import random_channel_ensemble, random_diagonal_ensemble, random_ensemble
from app.services.exclusion import ChannelEnsemble, StateEnsemble
from app.services.radii import (
    SimplexWeights,
    bs_state_radius,
    channel_bs_radius,
    chernoff_objective,
    log_euclidean_chernoff,
    oneshot_converse_bound,
    sandwiched_radius_affine,
    umegaki_radius,
)
from app.utils.simplex import project_simplex
from tests.test_linalg import make_diagonal, make_pure, make_state

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


# ============================================================================
# Helper Functions
# ============================================================================

def classical_chernoff(p, q) -> float:
    res = minimize_scalar(lambda s: math.log(np.sum(p ** s * q ** (1 - s))), bounds=(0.0, 1.0),
                          method="bounded", options={"xatol": 1e-12})
    return -float(res.fun)


def classical_affine_radius(p, q, alpha) -> float:
    """min over t ∈ R of max_x D_α(diag(t, 1−t)‖q_x), the objective is quasi-convex in t"""
    def worst(t):
        tau = np.array([t, 1.0 - t])
        return max(classical_renyi(tau, p, alpha), classical_renyi(tau, q, alpha))
    res = minimize_scalar(worst, bounds=(-1.0, 2.0), method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


# ============================================================================
# Simplex weights
# ============================================================================

class TestSimplexWeights:
    """Probability vectors"""

    def test_uniform(self):
        assert np.allclose(SimplexWeights.uniform(4).s, 0.25)

    def test_rejects_negative_entries(self):
        with pytest.raises(InvalidOperator):
            SimplexWeights(np.array([1.5, -0.5]))

    def test_normalized(self):
        assert np.allclose(SimplexWeights.normalized([2.0, 6.0]).s, [0.25, 0.75])

    def test_projection_of_interior_point_is_identity(self):
        assert np.allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])

    def test_projection_clips_to_a_vertex(self):
        assert np.allclose(project_simplex([3.0, 0.0, -1.0]), [1.0, 0.0, 0.0])

    def test_projection_shifts_uniformly(self):
        assert np.allclose(project_simplex([0.5, 0.5, 0.5]), [1 / 3, 1 / 3, 1 / 3])


# ============================================================================
# Chernoff divergence
# ============================================================================

class TestChernoff:
    """Concave maximisation over the simplex"""

    def test_identical_states_give_zero(self):
        rho = make_state(np.random.default_rng(0))
        result = log_euclidean_chernoff([rho, rho, rho])
        assert result.value == pytest.approx(0.0, abs=1e-9)
        assert result.regularization == 0.0

    @pytest.mark.parametrize("seed", range(8))
    def test_classical_instances_match_scalar_chernoff(self, seed):
        ensemble = random_diagonal_ensemble(seed, 2, 3)
        p, q = (np.real(np.diag(m)) for m in ensemble.matrices)
        result = log_euclidean_chernoff(ensemble)
        assert result.value == pytest.approx(classical_chernoff(p, q), abs=1e-7)
        assert result.primal_dual_gap <= 1e-6

    def test_orthogonal_states_diverge(self):
        result = log_euclidean_chernoff([make_pure([1, 0]), make_pure([0, 1])])
        assert result.value == math.inf

    def test_distinct_pure_states_diverge(self):
        result = log_euclidean_chernoff([make_pure([1, 0]), make_pure([1, 1])])
        assert result.value == math.inf
        assert len(result.eps_trace) == 3

    def test_common_support_stays_finite(self):
        states = [make_diagonal([0.5, 0.5, 0.0]), make_diagonal([0.9, 0.1, 0.0])]
        result = log_euclidean_chernoff(states)
        expected = classical_chernoff(np.array([0.5, 0.5]), np.array([0.9, 0.1]))
        assert result.value == pytest.approx(expected, abs=1e-5)

    @pytest.mark.parametrize("seed", range(5))
    def test_objective_is_concave(self, seed):
        rng = np.random.default_rng(seed)
        ensemble = random_ensemble(seed, 3, 2)
        s1, s2 = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        f1, _, _ = chernoff_objective(ensemble, s1)
        f2, _, _ = chernoff_objective(ensemble, s2)
        mid, _, _ = chernoff_objective(ensemble, 0.5 * (s1 + s2))
        assert mid >= 0.5 * (f1 + f2) - 1e-12

    def test_objective_returns_state(self):
        ensemble = random_ensemble(1, 2, 2)
        value, divergences, tau = chernoff_objective(ensemble, [0.5, 0.5], eps=1e-6)
        assert isinstance(tau, DensityOperator)
        assert value == pytest.approx(float(np.dot([0.5, 0.5], divergences)), abs=1e-10)

    def test_objective_needs_full_rank_without_regularisation(self):
        with pytest.raises(ValueError):
            chernoff_objective([make_pure([1, 0]), np.eye(2) / 2], [0.5, 0.5])

    def test_schedule_must_decrease(self):
        with pytest.raises(ValueError):
            log_euclidean_chernoff([np.eye(2) / 2, np.eye(2) / 2], eps_schedule=(1e-8, 1e-4))

    def test_small_eigenvalues_stay_finite(self):
        eps = 1e-8
        states = [make_diagonal([1.0 - eps, eps]), make_diagonal([eps, 1.0 - eps])]
        result = log_euclidean_chernoff(states)
        assert math.isfinite(result.value)
        assert result.regularization == 0.0
        assert result.value == pytest.approx(-math.log(2.0 * math.sqrt(eps * (1.0 - eps))), abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_last_schedule_points_agree_on_full_rank_ensembles(self, seed):
        result = log_euclidean_chernoff(random_ensemble(seed, 3, 2))
        (_, before), (last_eps, last) = result.eps_trace[-2:]
        assert last_eps == 0.0
        assert abs(before - last) <= 1e-6


# ============================================================================
# Umegaki radius
# ============================================================================

class TestUmegakiRadius:
    """Two-sided certificate from the Chernoff solution"""

    @pytest.mark.parametrize("seed", range(5))
    def test_gap_closes_on_full_rank_ensembles(self, seed):
        ensemble = random_ensemble(seed, 3, 2)
        result = umegaki_radius(ensemble)
        assert result.primal_dual_gap <= 1e-6
        assert not result.stalled
        assert result.value == pytest.approx(log_euclidean_chernoff(ensemble).value, abs=1e-6)

    def test_center_certifies_value(self):
        ensemble = random_ensemble(9, 3, 2)
        result = umegaki_radius(ensemble)
        worst = max(umegaki(result.center, m) for m in ensemble.matrices)
        assert worst == pytest.approx(result.value, abs=1e-9)

    def test_orthogonal_states_give_inf(self):
        assert umegaki_radius([make_pure([1, 0]), make_pure([0, 1])]).value == math.inf

    def test_symmetric_commuting_pair(self):
        result = umegaki_radius([make_diagonal([0.9, 0.1]), make_diagonal([0.1, 0.9])])
        assert result.value == pytest.approx(0.5 * math.log(0.25 / 0.09), abs=1e-6)

    def test_small_eigenvalues_stay_finite(self):
        states = [make_diagonal([1.0 - 1e-7, 1e-7]), make_diagonal([0.5, 0.5])]
        result = umegaki_radius(states)
        assert math.isfinite(result.value)
        assert result.value == pytest.approx(log_euclidean_chernoff(states).value, abs=1e-5)


# ============================================================================
# Sandwiched radius over trace-one Hermitian centres
# ============================================================================

class TestSandwichedRadius:
    """The one-shot converse bound"""

    def test_identical_states_give_zero(self):
        rho = make_state(np.random.default_rng(2))
        assert sandwiched_radius_affine([rho, rho], 2.0).value == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
    def test_classical_instances_match_scalar_minimax(self, seed, alpha):
        ensemble = random_diagonal_ensemble(seed, 2, 2)
        p, q = (np.real(np.diag(m)) for m in ensemble.matrices)
        result = sandwiched_radius_affine(ensemble, alpha)
        assert result.value == pytest.approx(classical_affine_radius(p, q, alpha), abs=1e-5)

    @pytest.mark.parametrize("seed", range(5))
    def test_never_worse_than_the_average_state(self, seed):
        ensemble = random_ensemble(seed, 3, 2)
        average = sum(p * m for p, m in zip([1 / 3] * 3, ensemble.matrices))
        upper = max(sandwiched(average, m, 2.0) for m in ensemble.matrices)
        assert sandwiched_radius_affine(ensemble, 2.0).value <= upper + 1e-9

    def test_center_has_unit_trace(self):
        result = sandwiched_radius_affine(random_ensemble(4, 3, 2), 1.5)
        assert np.trace(result.center.matrix).real == pytest.approx(1.0, abs=1e-10)
        assert result.weights.s.sum() == pytest.approx(1.0)

    def test_orthogonal_states_give_inf(self):
        assert sandwiched_radius_affine([make_pure([1, 0]), make_pure([0, 1])], 2.0).value == math.inf

    def test_rejects_alpha_one(self):
        with pytest.raises(InvalidAlpha):
            sandwiched_radius_affine([np.eye(2) / 2, np.eye(2) / 2], 1.0)

    def test_converse_bound_for_identical_states(self):
        rho = make_state(np.random.default_rng(3))
        ensemble = StateEnsemble.from_arrays([0.25, 0.75], [rho, rho])
        bound = oneshot_converse_bound(ensemble, 2.0)
        assert bound == pytest.approx(2.0 * math.log(4.0), abs=1e-8)


# ============================================================================
# Belavkin–Staszewski radius
# ============================================================================

class TestBSRadius:
    """Minimax over channels and states"""

    def test_identical_channels_give_zero(self):
        ensemble = random_channel_ensemble(0, 3, 2, "identical")
        assert channel_bs_radius(ensemble).value == pytest.approx(0.0, abs=1e-8)

    def test_identity_and_bit_flip_give_inf(self):
        channels = [QuantumChannel.identity(2), QuantumChannel.unitary(PAULI_X, "X")]
        assert channel_bs_radius(channels).value == math.inf

    def test_identity_and_full_depolarizing(self):
        channels = [QuantumChannel.identity(2), QuantumChannel.depolarizing(2, 1.0)]
        result = channel_bs_radius(channels)
        assert result.value == pytest.approx(math.log(4.0), abs=1e-6)
        assert result.channel is not None

    def test_replacer_ensemble_matches_state_radius(self):
        ensemble = random_channel_ensemble(3, 2, 2, "replacer")
        states = [c.choi[:2, :2] for c in ensemble.channels]
        channel_value = channel_bs_radius(ensemble, seed=3).value
        state_value = bs_state_radius(states, seed=3).value
        assert channel_value == pytest.approx(state_value, abs=1e-4)

    def test_state_radius_of_commuting_states_matches_umegaki_radius(self):
        ensemble = random_diagonal_ensemble(5, 2, 2)
        result = bs_state_radius(ensemble)
        assert isinstance(result.center, DensityOperator)
        assert result.value == pytest.approx(umegaki_radius(ensemble).value, abs=1e-4)

    def test_seed_stable(self):
        ensemble = random_channel_ensemble(1, 2, 2, "random", n_kraus=4)
        values = [channel_bs_radius(ensemble, restarts=2, seed=s).value for s in range(5)]
        assert all(math.isfinite(v) and v > 0.0 for v in values)
        assert max(values) - min(values) <= 1e-4

    def test_relabelling_invariant(self):
        ensemble = random_channel_ensemble(1, 2, 2, "random", n_kraus=4)
        forward = channel_bs_radius(ensemble, restarts=2).value
        backward = channel_bs_radius(list(reversed(ensemble.channels)), restarts=2).value
        assert math.isfinite(forward)
        assert forward == pytest.approx(backward, abs=1e-4)

    def test_value_belongs_to_returned_channel(self):
        ensemble = random_channel_ensemble(4, 2, 2, "random", n_kraus=4)
        result = channel_bs_radius(ensemble, restarts=1)
        recomputed = max(bs_channel_divergence(result.channel, c) for c in ensemble.channels)
        assert result.value == pytest.approx(recomputed, abs=1e-12)

    def test_channel_ensemble_dimensions_must_match(self):
        with pytest.raises(ValueError):
            channel_bs_radius([QuantumChannel.identity(2), QuantumChannel.identity(3)])

    def test_channel_ensemble_accepted(self):
        ensemble = ChannelEnsemble([0.5, 0.5], (QuantumChannel.identity(2), QuantumChannel.depolarizing(2, 1.0)))
        assert channel_bs_radius(ensemble).value == pytest.approx(math.log(4.0), abs=1e-6)
