import numpy as np
import pytest
from numpy.testing import assert_allclose

from padefd import (
    StencilSpec,
    StencilError,
    WeightFunction,
    RankDeficiencyError,
    build_constraints,
    derive_optimized,
    derive_standard,
    mirror,
    verify_kkt,
    assemble_kkt,
    delta_vector,
    KIND_STANDARD,
)

# Frozen oracle: 50-digit solve of the KKT system with closed-form
# trigonometric moments for the unit weight on [0, 3].  Computed with an
# independent mpmath pipeline (adaptive quadrature cross-checked against
# the analytic antiderivatives), rounded to double.
EXACT_D2_M4_A = [-0.71942263705275, -0.156640806634415, 0.34003766165153,
                 0.16170245408668, 0.0146120094225796]
EXACT_D2_M4_B = [1.0, 0.695375023941445, 0.22300884577625,
                 0.0272452186550704, 0.000682950383784298]
EXACT_D1_M4_A = [0.0, 0.472419666228049, 0.367572866288519,
                 0.0980340645207027, 0.0069975013214327]
EXACT_D1_M4_B = [1.0, 0.724071362606492, 0.263264282077344,
                 0.0407179424808153, 0.0016040104882762]


def one_sided(coeffs):
    m = coeffs.m_hat
    return coeffs.a[m:], coeffs.b[m:]


class TestDeriveOptimized:
    def test_exact_oracle_d2_m4(self, unit_weight):
        sol = derive_optimized(StencilSpec.central(2, 4, 4), unit_weight)
        a, b = one_sided(sol.coeffs)
        assert_allclose(a, EXACT_D2_M4_A, atol=1e-12)
        assert_allclose(b, EXACT_D2_M4_B, atol=1e-12)

    def test_exact_oracle_d1_m4(self, unit_weight):
        sol = derive_optimized(StencilSpec.central(1, 4, 4), unit_weight)
        a, b = one_sided(sol.coeffs)
        assert_allclose(a, EXACT_D1_M4_A, atol=1e-12)
        assert_allclose(b, EXACT_D1_M4_B, atol=1e-12)

    def test_recovers_standard_tridiagonal_d2(self, unit_weight):
        sol = derive_optimized(StencilSpec.central(2, 4, 1), unit_weight)
        assert_allclose(sol.coeffs.a, [1.2, -2.4, 1.2], atol=1e-12)
        assert_allclose(sol.coeffs.b, [0.1, 1.0, 0.1], atol=1e-12)
        assert sol.rank_deficient  # 7 constraint rows bind 6 unknowns

    def test_recovers_standard_tridiagonal_d1(self, unit_weight):
        sol = derive_optimized(StencilSpec.central(1, 4, 1), unit_weight)
        assert_allclose(sol.coeffs.a, [-0.75, 0.0, 0.75], atol=1e-12)
        assert_allclose(sol.coeffs.b, [0.25, 1.0, 0.25], atol=1e-12)

    def test_d1_m2_table_values(self, unit_weight):
        sol = derive_optimized(StencilSpec.central(1, 4, 2), unit_weight)
        a, b = one_sided(sol.coeffs)
        assert_allclose(a, [0.0, 0.682194069313335, 0.214144479273011],
                        atol=1e-11)
        assert_allclose(b, [1.0, 0.547827381201651, 0.0626556466577058],
                        atol=1e-11)

    def test_biased_d2_ml4_table_values(self, unit_weight):
        spec = StencilSpec(d=2, p=3, m_al=4, m_ar=2, m_bl=4, m_br=2)
        sol = derive_optimized(spec, unit_weight)
        m = spec.m_hat
        assert_allclose(sol.coeffs.a[m], -0.0583231083517459, atol=1e-9)
        assert_allclose(sol.coeffs.b[m - 1], 1.64238167997833, atol=1e-9)
        # structural zeros beyond the true range are exact
        assert sol.coeffs.a[m + 3] == 0.0
        assert sol.coeffs.a[m + 4] == 0.0
        assert sol.coeffs.b[m + 3] == 0.0

    def test_residual_within_contract(self, unit_weight):
        sol = derive_optimized(StencilSpec.central(2, 4, 3), unit_weight)
        scale = 1.0 + max(np.max(np.abs(sol.coeffs.a)),
                          np.max(np.abs(sol.coeffs.b)))
        assert sol.residual <= 1e-9 * scale
        assert sol.coeffs.constraint_residual <= 1e-10 * scale

    def test_explicit_scheme_unit_delta(self, unit_weight):
        spec = StencilSpec(d=2, p=3, m_al=3, m_ar=3, m_bl=0, m_br=0)
        sol = derive_optimized(spec, unit_weight)
        assert_allclose(sol.coeffs.b, delta_vector(7, 4), atol=0.0)

    @pytest.mark.parametrize("d", [1, 2])
    def test_rank_deficiency_raises_at_m6(self, d, unit_weight):
        with pytest.raises(RankDeficiencyError) as info:
            derive_optimized(StencilSpec.central(d, 4, 6), unit_weight)
        assert info.value.m_hat == 6
        assert info.value.support == ((0.0, 3.0),)

    def test_infeasible_order_raises(self, unit_weight):
        with pytest.raises(StencilError, match="infeasible"):
            derive_optimized(StencilSpec.central(4, 4, 1), unit_weight)

    def test_standard_kind_rejected(self, unit_weight):
        spec = StencilSpec.central(2, 4, 1, kind=KIND_STANDARD)
        with pytest.raises(StencilError):
            derive_optimized(spec, unit_weight)

    @pytest.mark.parametrize("d,m", [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2),
                                     (4, 2), (1, 5), (2, 5)])
    def test_lemma_symmetry(self, d, m, unit_weight):
        sol = derive_optimized(StencilSpec.central(d, 4, m), unit_weight)
        a, b = sol.coeffs.a, sol.coeffs.b
        sgn = 1.0 if d % 2 == 0 else -1.0
        assert np.max(np.abs(a[::-1] - sgn * a)) <= 1e-10
        assert np.max(np.abs(b[::-1] - b)) <= 1e-10

    def test_unequal_stencil_keeps_symmetry(self, unit_weight):
        # zero rows symmetric about the center preserve the parity lemmas
        spec = StencilSpec(d=2, p=3, m_al=3, m_ar=3, m_bl=2, m_br=2)
        sol = derive_optimized(spec, unit_weight)
        assert np.max(np.abs(sol.coeffs.a[::-1] - sol.coeffs.a)) <= 1e-10
        assert np.max(np.abs(sol.coeffs.b[::-1] - sol.coeffs.b)) <= 1e-10


class TestDeriveStandard:
    def test_classical_tridiagonal(self):
        spec = StencilSpec.central(2, 4, 1, kind=KIND_STANDARD)
        coeffs = derive_standard(spec)
        assert_allclose(coeffs.a, [1.2, -2.4, 1.2], rtol=0, atol=1e-12)
        assert_allclose(coeffs.b, [0.1, 1.0, 0.1], rtol=0, atol=1e-12)

    def test_pentadiagonal_tenth_order(self):
        spec = StencilSpec(d=1, p=9, m_al=3, m_ar=3, m_bl=2, m_br=2,
                           kind=KIND_STANDARD)
        coeffs = derive_standard(spec)
        system = build_constraints(StencilSpec(
            d=1, p=9, m_al=3, m_ar=3, m_bl=2, m_br=2))
        res = np.max(np.abs(coeffs.a @ system.X - coeffs.b @ system.Y))
        assert res <= 1e-10
        assert coeffs.b[coeffs.m_hat] == 1.0
        # derivative-side entries beyond half-width 2 are structural zeros
        assert coeffs.b[0] == 0.0 and coeffs.b[-1] == 0.0

    def test_d2_pentadiagonal_tenth_order_exists(self):
        spec = StencilSpec(d=2, p=9, m_al=3, m_ar=3, m_bl=2, m_br=2,
                           kind=KIND_STANDARD)
        coeffs = derive_standard(spec)
        assert coeffs.constraint_residual <= 1e-10

    def test_underdetermined_order_errors(self):
        spec = StencilSpec(d=1, p=3, m_al=3, m_ar=3, m_bl=2, m_br=2,
                           kind=KIND_STANDARD)
        with pytest.raises(StencilError, match="achievable order .* 10"):
            derive_standard(spec)


class TestMirror:
    def test_left_biased_d2_reverses(self, unit_weight):
        spec = StencilSpec(d=2, p=3, m_al=4, m_ar=2, m_bl=4, m_br=2)
        left = derive_optimized(spec, unit_weight).coeffs
        right = mirror(left)
        assert right.spec.m_al == 2 and right.spec.m_ar == 4
        assert_allclose(right.a, left.a[::-1], atol=0.0)
        assert_allclose(right.b, left.b[::-1], atol=0.0)

    def test_left_biased_d1_negates_a(self, unit_weight):
        spec = StencilSpec(d=1, p=3, m_al=4, m_ar=2, m_bl=4, m_br=2)
        left = derive_optimized(spec, unit_weight).coeffs
        right = mirror(left)
        assert_allclose(right.a, -left.a[::-1], atol=0.0)
        assert_allclose(right.b, left.b[::-1], atol=0.0)

    def test_central_even_is_identity(self, unit_weight):
        coeffs = derive_optimized(StencilSpec.central(2, 4, 2),
                                  unit_weight).coeffs
        mirrored = mirror(coeffs)
        assert_allclose(mirrored.a, coeffs.a, atol=1e-10)
        assert_allclose(mirrored.b, coeffs.b, atol=1e-10)

    def test_central_odd_negation_equals_skew(self, unit_weight):
        coeffs = derive_optimized(StencilSpec.central(1, 4, 2),
                                  unit_weight).coeffs
        mirrored = mirror(coeffs)
        assert_allclose(mirrored.a, coeffs.a, atol=1e-10)

    def test_right_biased_direct_derivation_matches(self, unit_weight):
        left_spec = StencilSpec(d=2, p=3, m_al=4, m_ar=2, m_bl=4, m_br=2)
        left = derive_optimized(left_spec, unit_weight).coeffs
        right_direct = derive_optimized(left_spec.mirrored(),
                                        unit_weight).coeffs
        assert_allclose(mirror(left).a, right_direct.a, atol=1e-9)
        assert_allclose(mirror(left).b, right_direct.b, atol=1e-9)


class TestVerifyKkt:
    def test_stationarity_and_perturbations(self, unit_weight):
        spec = StencilSpec.central(2, 4, 3)
        sol = derive_optimized(spec, unit_weight)
        cost, G, h = assemble_kkt(spec, unit_weight)
        report = verify_kkt(sol, cost, G, h)
        assert report.ok
        assert report.perturbation_violations == 0
        assert report.stationarity_residual <= 1e-9 * (
            1.0 + np.max(np.abs(sol.coeffs.a)))

    def test_standard_scheme_costs_more(self, unit_weight):
        spec = StencilSpec.central(2, 4, 3)
        cost, _, _ = assemble_kkt(spec, unit_weight)
        opt = derive_optimized(spec, unit_weight).coeffs
        std = derive_standard(StencilSpec(d=2, p=11, m_al=3, m_ar=3, m_bl=3,
                                          m_br=3, kind=KIND_STANDARD))
        x_opt = np.concatenate([opt.a, opt.b])
        x_std = np.concatenate([std.a, std.b])
        assert cost.value(x_std) >= cost.value(x_opt)


class TestGridInvariance:
    def test_stacked_domain_replicates_single_point(self, unit_weight):
        # Kronecker-stacked problem over five grid points must reproduce
        # five copies of the single-point optimum.
        spec = StencilSpec.central(2, 4, 2)
        cost, G, h = assemble_kkt(spec, unit_weight)
        single = derive_optimized(spec, unit_weight)
        x_single = np.concatenate([single.coeffs.a, single.coeffs.b])
        n_p = 5
        n = 2 * spec.n_hat
        m = G.shape[0]
        K = np.zeros((n + m, n + m))
        K[:n, :n] = cost.Q
        K[:n, n:] = G.T
        K[n:, :n] = G
        big_K = np.kron(np.eye(n_p), K)
        big_rhs = np.tile(np.concatenate([np.zeros(n), h]), n_p)
        z = np.linalg.solve(big_K, big_rhs)
        for i in range(n_p):
            block = z[i * (n + m): i * (n + m) + n]
            assert_allclose(block, x_single, atol=1e-10)
