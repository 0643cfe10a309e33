"""
Tests for the state divergences: classical reductions, support conditions, α → 1
limits, additivity of the extended sandwiched divergence and the Hoeffding-type bound.
"""
import math

import numpy as np
import pytest

from app.core.errors import InvalidAlpha, InvalidEffect, InvalidOperator, ZeroOperator
from app.services.divergences import (
    DensityOperator,
    TraceOneHermitian,
    belavkin_staszewski,
    classical_kl,
    classical_renyi,
    divergence,
    geometric,
    hoeffding_bound_residual,
    measurement_channel,
    sandwiched,
    sandwiched_extended,
    umegaki,
)
from tests.test_linalg import make_diagonal, make_hermitian, make_pure, make_state


# ============================================================================
# Helper Functions
# ============================================================================

def make_distribution(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.dirichlet(np.ones(d))


def make_effect(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    """Random effect 0 ≤ Λ ≤ I"""
    w, v = np.linalg.eigh(make_hermitian(rng, d))
    return (v * rng.uniform(0.0, 1.0, size=d)) @ v.conj().T


def make_trace_one_hermitian(rng: np.random.Generator, d: int = 2, spread: float = 0.8) -> np.ndarray:
    """Trace-one Hermitian matrix that is usually not PSD"""
    h = make_hermitian(rng, d)
    h -= np.trace(h).real / d * np.eye(d)
    return np.eye(d) / d + spread * h


def make_unitary(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix"""
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ============================================================================
# Domain types
# ============================================================================

class TestDomainTypes:
    """DensityOperator and TraceOneHermitian validation"""

    def test_density_operator_accepts_state(self):
        state = DensityOperator.from_array(make_pure([1, 1]))
        assert state.dim == 2

    def test_density_operator_rejects_wrong_trace(self):
        with pytest.raises(InvalidOperator, match="trace"):
            DensityOperator.from_array(np.eye(2))

    def test_density_operator_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidOperator, match="negative"):
            DensityOperator.from_array(make_diagonal([1.2, -0.2]))

    def test_trace_one_hermitian_allows_negative_eigenvalue(self):
        gamma = TraceOneHermitian.from_array(make_diagonal([1.2, -0.2]))
        assert gamma.dim == 2


# ============================================================================
# Classical reductions
# ============================================================================

class TestClassicalReduction:
    """Commuting inputs reduce every divergence to its scalar formula"""

    @pytest.mark.parametrize("seed", range(200))
    def test_diagonal_inputs_match_scalar_formulas(self, seed):
        rng = np.random.default_rng(seed)
        p, q = make_distribution(rng, 3), make_distribution(rng, 3)
        rho, sigma = make_diagonal(p), make_diagonal(q)
        kl = classical_kl(p, q)
        assert umegaki(rho, sigma) == pytest.approx(kl, abs=1e-10)
        assert belavkin_staszewski(rho, sigma) == pytest.approx(kl, abs=1e-10)
        for alpha in (1.5, 2.0):
            renyi = classical_renyi(p, q, alpha)
            assert sandwiched(rho, sigma, alpha) == pytest.approx(renyi, abs=1e-10)
            assert sandwiched_extended(rho, sigma, alpha) == pytest.approx(renyi, abs=1e-10)
            assert geometric(rho, sigma, alpha) == pytest.approx(renyi, abs=1e-10)

    def test_signed_diagonal_extended_divergence(self):
        p = np.array([1.3, -0.3])
        q = np.array([0.5, 0.5])
        value = sandwiched_extended(make_diagonal(p), make_diagonal(q), 2.0)
        assert value == pytest.approx(classical_renyi(p, q, 2.0), abs=1e-10)
        assert value == pytest.approx(math.log(2 * (1.69 + 0.09)), abs=1e-10)


# ============================================================================
# Support conditions
# ============================================================================

class TestSupportConditions:
    """Failing support conditions give +inf, never an exception"""

    @pytest.mark.parametrize("fn,args", [
        (umegaki, ()),
        (belavkin_staszewski, ()),
        (sandwiched, (2.0,)),
        (sandwiched_extended, (2.0,)),
        (geometric, (1.5,)),
    ])
    def test_orthogonal_states_give_inf(self, fn, args):
        assert fn(make_pure([1, 0]), make_pure([0, 1]), *args) == math.inf

    def test_identical_states_give_zero(self):
        rng = np.random.default_rng(5)
        rho = make_state(rng, 3)
        assert umegaki(rho, rho) == pytest.approx(0.0, abs=1e-10)
        assert sandwiched(rho, rho, 2.0) == pytest.approx(0.0, abs=1e-10)
        assert geometric(rho, rho, 2.0) == pytest.approx(0.0, abs=1e-10)
        assert belavkin_staszewski(rho, rho) == pytest.approx(0.0, abs=1e-10)

    def test_pure_state_against_maximally_mixed(self):
        rho = make_pure([1, 0])
        assert umegaki(rho, np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-12)
        assert sandwiched(rho, np.eye(2) / 2, 3.0) == pytest.approx(math.log(2), abs=1e-12)


# ============================================================================
# Parameter ranges and ordering
# ============================================================================

class TestParameters:
    """α ranges, ordering between the families and the α → 1 limits"""

    def test_alpha_must_exceed_one(self):
        with pytest.raises(InvalidAlpha):
            sandwiched(make_pure([1, 0]), np.eye(2) / 2, 1.0)

    def test_geometric_alpha_capped_at_two(self):
        with pytest.raises(InvalidAlpha):
            geometric(make_pure([1, 0]), np.eye(2) / 2, 2.5)

    def test_zero_operator_rejected(self):
        with pytest.raises(ZeroOperator):
            sandwiched_extended(np.zeros((2, 2)), np.eye(2) / 2, 2.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_sandwiched_below_geometric(self, seed):
        rng = np.random.default_rng(100 + seed)
        rho, sigma = make_state(rng), make_state(rng)
        for alpha in (1.2, 1.5, 2.0):
            assert sandwiched(rho, sigma, alpha) <= geometric(rho, sigma, alpha) + 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_sandwiched_nondecreasing_in_alpha(self, seed):
        rng = np.random.default_rng(250 + seed)
        rho, sigma = make_state(rng, 3), make_state(rng, 3)
        values = [sandwiched(rho, sigma, alpha) for alpha in (1.1, 1.5, 2.0, 3.0, 5.0)]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("seed", range(10))
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(270 + seed)
        rho, sigma, u = make_state(rng, 3), make_state(rng, 3), make_unitary(rng, 3)

        def rotate(a):
            return u @ a @ u.conj().T

        assert umegaki(rotate(rho), rotate(sigma)) == pytest.approx(umegaki(rho, sigma), abs=1e-9)
        assert belavkin_staszewski(rotate(rho), rotate(sigma)) == pytest.approx(belavkin_staszewski(rho, sigma), abs=1e-9)
        for alpha in (1.5, 2.0):
            assert sandwiched(rotate(rho), rotate(sigma), alpha) == pytest.approx(sandwiched(rho, sigma, alpha), abs=1e-9)
            assert geometric(rotate(rho), rotate(sigma), alpha) == pytest.approx(geometric(rho, sigma, alpha), abs=1e-9)

    @pytest.mark.parametrize("seed", range(100))
    def test_alpha_to_one_limits(self, seed):
        rng = np.random.default_rng(200 + seed)
        rho, sigma = make_state(rng), make_state(rng)
        d, d_bs = umegaki(rho, sigma), belavkin_staszewski(rho, sigma)
        gaps = [abs(sandwiched(rho, sigma, 1 + h) - d) for h in (1e-2, 1e-3, 1e-4)]
        gaps_bs = [abs(geometric(rho, sigma, 1 + h) - d_bs) for h in (1e-2, 1e-3, 1e-4)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps_bs[0] > gaps_bs[1] > gaps_bs[2]
        assert gaps[-1] <= 1e-3 and gaps_bs[-1] <= 1e-3

    def test_dispatcher(self):
        rho = make_pure([1, 0])
        assert divergence("umegaki", rho, np.eye(2) / 2) == pytest.approx(math.log(2))
        with pytest.raises(InvalidAlpha):
            divergence("sandwiched", rho, np.eye(2) / 2)
        with pytest.raises(ValueError, match="Unknown divergence"):
            divergence("petz", rho, np.eye(2) / 2, 2.0)


# ============================================================================
# Extended divergence: additivity and the Hoeffding-type bound
# ============================================================================

class TestExtendedDivergence:
    """Properties of the sandwiched divergence with trace-one Hermitian first argument"""

    @pytest.mark.parametrize("seed", range(100))
    @pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
    def test_tensor_additivity(self, seed, alpha):
        rng = np.random.default_rng(300 + seed)
        g1, g2 = make_trace_one_hermitian(rng), make_trace_one_hermitian(rng)
        r1, r2 = make_state(rng), make_state(rng)
        joint = sandwiched_extended(np.kron(g1, g2), np.kron(r1, r2), alpha)
        split = sandwiched_extended(g1, r1, alpha) + sandwiched_extended(g2, r2, alpha)
        assert joint == pytest.approx(split, abs=1e-8)

    @pytest.mark.parametrize("seed", range(1000))
    def test_hoeffding_residual_nonnegative(self, seed):
        rng = np.random.default_rng(400 + seed)
        tau = make_trace_one_hermitian(rng, spread=0.5) if seed % 2 else make_state(rng)
        rho = make_state(rng)
        effect = make_effect(rng)
        alpha = float(rng.uniform(1.05, 4.0))
        assert hoeffding_bound_residual(tau, rho, effect, alpha) >= -1e-8

    def test_hoeffding_residual_inf_on_support_failure(self):
        residual = hoeffding_bound_residual(make_pure([1, 0]), make_pure([0, 1]), np.eye(2) / 2, 2.0)
        assert residual == math.inf


# ============================================================================
# Measurement channel
# ============================================================================

class TestMeasurementChannel:
    """Two-outcome measurement on trace-one inputs"""

    def test_outcomes_sum_to_trace(self):
        rng = np.random.default_rng(6)
        first, second = measurement_channel(make_effect(rng), make_trace_one_hermitian(rng))
        assert first + second == pytest.approx(1.0, abs=1e-12)

    def test_projective_measurement_of_basis_state(self):
        assert measurement_channel(make_diagonal([1, 0]), make_pure([1, 0])) == pytest.approx((1.0, 0.0))

    def test_invalid_effect(self):
        with pytest.raises(InvalidEffect):
            measurement_channel(make_diagonal([1.5, 0]), make_pure([1, 0]))

    @pytest.mark.parametrize("seed", range(20))
    def test_measurement_never_increases_divergence(self, seed):
        rng = np.random.default_rng(500 + seed)
        rho, sigma, effect = make_state(rng), make_state(rng), make_effect(rng)
        p, q = np.array(measurement_channel(effect, rho)), np.array(measurement_channel(effect, sigma))
        for alpha in (1.5, 2.0, 3.0):
            assert classical_renyi(p, q, alpha) <= sandwiched_extended(rho, sigma, alpha) + 1e-8
