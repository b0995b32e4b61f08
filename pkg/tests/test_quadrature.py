import numpy as np
import pytest
from numpy.testing import assert_allclose

from padefd import (
    StencilSpec,
    WeightFunction,
    inner_product,
    build_cost,
    build_cost_even,
    build_cost_odd,
    spectral_norm,
    derive_optimized,
    derive_standard,
    DenominatorError,
)
from padefd.quadrature import WeightError, _cost_blocks
from padefd.stencils import KIND_STANDARD


def trapezoid_cost(d, m_hat, weight, n=1_000_001, lo=0.0, hi=3.0):
    """Independent oracle: dense trapezoid quadrature of the cost integrand."""
    etas = np.linspace(lo, hi, n)
    u, v = _cost_blocks(d, m_hat, etas)
    gw = weight(etas)
    w = np.full(n, (hi - lo) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    gw = gw * w
    return (u * gw) @ u.T + (v * gw) @ v.T


class TestWeightFunction:
    def test_constant_piece(self):
        w = WeightFunction.constant(2.0, 0.0, 3.0)
        assert_allclose(w(np.array([0.0, 1.5, 3.0])), [2.0, 2.0, 2.0])
        assert w(np.array([3.2]))[0] == 0.0

    def test_exponential_piece(self):
        w = WeightFunction.exponential(-6.0, 0.0, 3.0)
        assert_allclose(w(np.array([1.0])), [np.exp(-6.0)])

    def test_tabulated_interpolation(self):
        w = WeightFunction.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
        assert_allclose(w(np.array([0.5, 1.5])), [0.5, 0.5])

    def test_negative_samples_rejected(self):
        with pytest.raises(WeightError):
            WeightFunction.tabulated([0.0, 1.0], [1.0, -0.1])

    def test_negative_constant_rejected(self):
        with pytest.raises(WeightError):
            WeightFunction.constant(-1.0)

    def test_outside_domain_rejected(self):
        with pytest.raises(WeightError):
            WeightFunction.constant(1.0, 0.0, 4.0)

    def test_overlap_rejected(self):
        from padefd.quadrature import WeightPiece

        with pytest.raises(WeightError):
            WeightFunction([WeightPiece(0.0, 2.0, "const", (1.0,)),
                            WeightPiece(1.0, 3.0, "const", (1.0,))])

    def test_json_round_trip(self):
        w = WeightFunction.from_json(
            '[{"lo": 0.0, "hi": 1.0, "form": "const", "params": {"value": 2.0}},'
            ' {"lo": 2.0, "hi": 3.0, "form": "exp", "params": {"alpha": 6.0}}]')
        again = WeightFunction.from_json(w.to_json())
        etas = np.linspace(0, np.pi, 50)
        assert_allclose(w(etas), again(etas))

    def test_multi_piece_gap(self):
        # sin on [0,1], 1 on [2,3], 0 elsewhere
        xs = np.linspace(0.0, 1.0, 64)
        w = WeightFunction(
            WeightFunction.tabulated(xs, np.sin(xs)).pieces
            + WeightFunction.constant(1.0, 2.0, 3.0).pieces)
        assert w(np.array([1.5]))[0] == 0.0
        assert w(np.array([2.5]))[0] == 1.0


class TestInnerProduct:
    def test_unit_functions(self):
        w = WeightFunction.constant(1.0, 0.0, 3.0)
        assert_allclose(inner_product(lambda e: np.ones_like(e),
                                      lambda e: np.ones_like(e), w), 3.0,
                        rtol=1e-12)

    def test_cosine_orthogonality(self):
        w = WeightFunction.constant(1.0, 0.0, np.pi)
        val = inner_product(np.cos, np.cos, w)
        assert_allclose(val, np.pi / 2, rtol=1e-12)

    def test_eta_squared(self):
        w = WeightFunction.constant(1.0, 0.0, 3.0)
        val = inner_product(lambda e: e**2, lambda e: np.ones_like(e), w)
        assert_allclose(val, 9.0, rtol=1e-12)

    def test_empty_support(self):
        w = WeightFunction([])
        assert inner_product(np.cos, np.cos, w) == 0.0


class TestCostMatrices:
    def test_even_center_entries(self, unit_weight):
        cost = build_cost_even(2, 1, unit_weight)
        n = 3
        center_a = 1
        center_b = n + 1
        assert_allclose(cost.Q[center_a, center_a], 3.0, rtol=1e-12)
        assert_allclose(cost.Q[center_a, center_b], 9.0, rtol=1e-12)

    def test_odd_center_entries(self, unit_weight):
        cost = build_cost_odd(1, 1, unit_weight)
        assert_allclose(cost.Q[1, 1], 3.0, rtol=1e-12)
        # a-center pairs with b-center only through vanishing S components
        assert abs(cost.Q[1, 4]) < 1e-12

    @pytest.mark.parametrize("d,m_hat", [(2, 1), (2, 3), (1, 1), (1, 2), (3, 2),
                                         (4, 2), (2, 4), (1, 4)])
    def test_matches_trapezoid_oracle(self, d, m_hat, unit_weight):
        cost = build_cost(d, m_hat, unit_weight)
        oracle = trapezoid_cost(d, m_hat, unit_weight)
        assert_allclose(cost.Q, oracle, rtol=1e-9,
                        atol=1e-9 * np.max(np.abs(oracle)))

    def test_matches_oracle_exponential_weight(self):
        w = WeightFunction.exponential(-6.0, 0.0, 3.0)
        cost = build_cost(1, 2, w)
        oracle = trapezoid_cost(1, 2, w)
        assert_allclose(cost.Q, oracle, rtol=1e-9,
                        atol=1e-9 * np.max(np.abs(oracle)))

    @pytest.mark.parametrize("d,m_hat", [(1, 3), (2, 3), (3, 3), (4, 3)])
    def test_symmetric_psd(self, d, m_hat, unit_weight):
        Q = build_cost(d, m_hat, unit_weight).Q
        assert_allclose(Q, Q.T, atol=1e-13 * np.max(np.abs(Q)))
        eigs = np.linalg.eigvalsh(Q)
        assert eigs.min() >= -1e-10 * np.trace(Q)

    def test_quadratic_form_nonnegative(self, unit_weight, rng):
        Q = build_cost(2, 3, unit_weight).Q
        for _ in range(50):
            x = rng.standard_normal(Q.shape[0])
            assert x @ Q @ x >= -1e-10 * np.trace(Q)

    def test_parity_recorded(self, unit_weight):
        assert build_cost(2, 2, unit_weight).parity == "even"
        assert build_cost(3, 2, unit_weight).parity == "odd"

    def test_wrong_parity_rejected(self, unit_weight):
        with pytest.raises(ValueError):
            build_cost_even(3, 2, unit_weight)
        with pytest.raises(ValueError):
            build_cost_odd(2, 2, unit_weight)


class TestSpectralNorm:
    def test_standard_scheme_matches_trapezoid(self, unit_weight):
        spec = StencilSpec.central(2, 4, 1, kind=KIND_STANDARD)
        coeffs = derive_standard(spec)
        val = spectral_norm(coeffs, unit_weight)
        etas = np.linspace(1e-9, 3.0, 1_000_001)
        C = np.cos(np.outer(np.arange(-1, 2), etas))
        S = np.sin(np.outer(np.arange(-1, 2), etas))
        num = (C.T @ coeffs.a) + 1j * (S.T @ coeffs.a)
        den = (C.T @ coeffs.b) + 1j * (S.T @ coeffs.b)
        err = np.abs(num / den - (1j * etas)**2)**2
        oracle = np.trapezoid(err, etas)
        assert val > 0
        assert_allclose(val, oracle, rtol=1e-9)

    def test_empty_support_is_zero(self, unit_weight):
        spec = StencilSpec.central(2, 4, 1, kind=KIND_STANDARD)
        coeffs = derive_standard(spec)
        assert spectral_norm(coeffs, WeightFunction([])) == 0.0

    def test_norm_decreases_with_stencil_size(self, unit_weight):
        norms = [spectral_norm(
            derive_optimized(StencilSpec.central(2, 4, m), unit_weight).coeffs,
            unit_weight) for m in (1, 2, 3, 4)]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_vanishing_denominator_reported(self, unit_weight):
        from padefd.stencils import SchemeCoefficients

        spec = StencilSpec.central(1, 1, 1)
        # b = (-0.5, 1, -0.5) makes C^T b vanish as eta -> 0
        a = np.array([-0.5, 0.0, 0.5])
        b = np.array([-0.5, 1.0, -0.5])
        coeffs = SchemeCoefficients(a=a, b=b, spec=spec,
                                    constraint_residual=0.0, kkt_rank=0)
        with pytest.raises(DenominatorError):
            spectral_norm(coeffs, WeightFunction.constant(1.0, 0.0, 3.0))

    def test_weight_scaling_leaves_argmin(self, unit_weight):
        doubled = WeightFunction.constant(2.0, 0.0, 3.0)
        c1 = derive_optimized(StencilSpec.central(2, 4, 3), unit_weight).coeffs
        c2 = derive_optimized(StencilSpec.central(2, 4, 3), doubled).coeffs
        assert_allclose(c1.a, c2.a, atol=1e-12)
        assert_allclose(c1.b, c2.b, atol=1e-12)
