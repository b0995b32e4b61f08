import numpy as np
import pytest
from numpy.testing import assert_allclose

from padefd import (
    StencilSpec,
    derive_optimized,
    derive_standard,
    trig_vectors,
    modified_wavenumber_pow,
    error_components,
    figure_data,
    KIND_STANDARD,
)
from padefd.spectral import (
    SpectralCurve,
    UnknownFigureError,
    eta_grid,
    relative_error_curve,
    symbol_ratio,
)


class TestTrigVectors:
    def test_eta_zero(self):
        C, S = trig_vectors(0.0, 3)
        assert_allclose(C, np.ones(7))
        assert_allclose(S, np.zeros(7))

    def test_eta_pi_m1(self):
        C, S = trig_vectors(np.pi, 1)
        assert_allclose(C, [-1.0, 1.0, -1.0], atol=1e-15)
        assert_allclose(S, [0.0, 0.0, 0.0], atol=1e-15)

    def test_eta_half_pi_m2(self):
        C, _ = trig_vectors(np.pi / 2, 2)
        assert_allclose(C, [-1.0, 0.0, 1.0, 0.0, -1.0], atol=1e-15)

    def test_reversal_identities(self, rng):
        for _ in range(200):
            eta = rng.uniform(0.0, np.pi)
            C, S = trig_vectors(eta, 4)
            assert_allclose(C[::-1], C, atol=1e-15)
            assert_allclose(S[::-1], -S, atol=1e-15)


class TestModifiedWavenumber:
    def test_zero_at_origin(self, unit_weight):
        coeffs = derive_optimized(StencilSpec.central(2, 4, 2),
                                  unit_weight).coeffs
        assert abs(modified_wavenumber_pow(coeffs, 0.0)) <= 1e-14

    def test_standard_d2_at_half_pi(self):
        coeffs = derive_standard(StencilSpec.central(2, 4, 1,
                                                     kind=KIND_STANDARD))
        # C = (0, 1, 0): numerator a0, denominator b0
        val = modified_wavenumber_pow(coeffs, np.pi / 2)
        assert_allclose(val, -2.4, atol=1e-13)

    def test_even_symbol_is_real(self, unit_weight):
        coeffs = derive_optimized(StencilSpec.central(2, 4, 3),
                                  unit_weight).coeffs
        etas = np.linspace(0.0, np.pi, 257)
        sym, flagged = symbol_ratio(coeffs, etas)
        assert not flagged.any()
        assert np.max(np.abs(sym.imag)) <= 1e-12

    def test_flagged_near_zero_denominator(self):
        from padefd.stencils import SchemeCoefficients

        spec = StencilSpec.central(1, 1, 1)
        coeffs = SchemeCoefficients(
            a=np.array([-0.5, 0.0, 0.5]), b=np.array([-0.5, 1.0, -0.5]),
            spec=spec, constraint_residual=0.0, kkt_rank=0)
        sym, flagged = symbol_ratio(coeffs, np.array([0.0, 1.0]))
        assert flagged[0] and not flagged[1]
        assert np.isnan(sym[0].real)


class TestErrorComponents:
    def test_odd_real_part_vanishes(self, unit_weight):
        coeffs = derive_optimized(StencilSpec.central(1, 4, 3),
                                  unit_weight).coeffs
        re, im = error_components(coeffs, eta_grid(1000))
        assert np.nanmax(np.abs(re.values)) <= 1e-12
        assert np.nanmax(np.abs(im.values)) > 0.0

    def test_biased_has_both_components(self, unit_weight):
        spec = StencilSpec(d=2, p=3, m_al=4, m_ar=2, m_bl=4, m_br=2)
        coeffs = derive_optimized(spec, unit_weight).coeffs
        re, im = error_components(coeffs)
        assert np.nanmax(np.abs(im.values)) > 1e-6
        assert np.nanmax(np.abs(re.values)) > 1e-6

    def test_error_zero_at_origin(self, unit_weight):
        coeffs = derive_optimized(StencilSpec.central(2, 4, 2),
                                  unit_weight).coeffs
        re, im = error_components(coeffs, np.array([0.0, 0.1]))
        assert abs(re.values[0]) <= 1e-13
        assert abs(im.values[0]) <= 1e-13

    def test_taylor_slope_matches_order(self, unit_weight):
        # |e(eta)| / eta^d follows eta^(p+1) as eta -> 0
        for d in (1, 2):
            coeffs = derive_optimized(StencilSpec.central(d, 4, 3),
                                      unit_weight).coeffs
            etas = np.logspace(-2, -1, 40)
            err, _ = symbol_ratio(coeffs, etas)
            rel = np.abs(err - (1j * etas) ** d) / etas**d
            slope = np.polyfit(np.log(etas), np.log(rel), 1)[0]
            assert abs(slope - 4.0) <= 0.3

    def test_optimized_beats_standard_at_high_wavenumbers(self, unit_weight):
        opt = derive_optimized(StencilSpec.central(2, 4, 3),
                               unit_weight).coeffs
        std = derive_standard(StencilSpec.central(2, 4, 1,
                                                  kind=KIND_STANDARD))
        etas = np.linspace(1.5, 3.0, 200)
        ropt = relative_error_curve(opt, etas)
        rstd = relative_error_curve(std, etas)
        assert np.all(ropt.values < rstd.values)


class TestSpectralCurve:
    def test_requires_increasing_etas(self):
        with pytest.raises(ValueError):
            SpectralCurve(np.array([0.0, 0.5, 0.5]), np.zeros(3), "real_err")


class TestFigureData:
    def test_gamma_effect_bundle(self):
        tables = figure_data("fig:gammaEffect", n_samples=64)
        assert len(tables) == 1
        table = tables[0]
        assert table.header[0] == "eta"
        assert len(table.header) == 4
        assert table.columns.shape == (63, 4)

    def test_l2_error_trend(self):
        tables = figure_data("fig:implicitSecondDerivativeL2error")
        norms = tables[0].columns[:, 1]
        assert len(norms) == 5
        assert np.all(np.diff(norms) < 0)

    def test_custom_sweep(self):
        request = {"scheme": {"d": 2, "order": 4, "mAL": 2, "mAR": 2,
                              "mBL": 2, "mBR": 2, "kind": "optimized"},
                   "etas": [0.5, 1.0, 1.5, 2.0]}
        tables = figure_data(request)
        assert tables[0].columns.shape == (4, 4)

    def test_unknown_figure(self):
        with pytest.raises(UnknownFigureError):
            figure_data("fig:doesNotExist")

    def test_m3_compare_bundle(self):
        tables = figure_data("fig:M3Compare", n_samples=33)
        assert tables[0].columns.shape[1] == 8  # eta + 7 schemes
