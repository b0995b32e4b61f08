"""Wavenumber-space evaluation of schemes: symbols, errors, figure curves.

All quantities live on the normalized wavenumber ``eta = k*dx`` in
``[0, pi]``.  The discrete symbol of a scheme is the ratio of its
trigonometric a- and b-sums; comparing it against ``(j*eta)**d`` gives
the spectral error that the optimizer minimizes.
"""

from dataclasses import dataclass, field

import numpy as np

from .stencils import StencilSpec, KIND_OPTIMIZED, KIND_STANDARD

#: Denominator magnitudes below this flag a sample as unreliable.
DENOMINATOR_FLOOR = 1e-14

#: Default sampling of [0, pi] for curves and lemma checks.
DEFAULT_SAMPLES = 2048


def trig_vectors(eta, m_hat):
    """Cosine and sine stencil vectors ``C_m = cos(m*eta)``, ``S_m = sin(m*eta)``.

    Parameters
    ----------
    eta : float
        Normalized wavenumber in [0, pi].
    m_hat : int
        Augmented half-width; vectors run over ``m = -m_hat..m_hat``.
    """
    m = np.arange(-m_hat, m_hat + 1, dtype=float)
    return np.cos(m * eta), np.sin(m * eta)


def trig_matrices(etas, m_hat):
    """Vectorized trig vectors: arrays of shape ``(2*m_hat+1, len(etas))``."""
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    m = np.arange(-m_hat, m_hat + 1, dtype=float)
    phase = np.outer(m, etas)
    return np.cos(phase), np.sin(phase)


def symbol_ratio(coeffs, etas):
    """Discrete symbol ``(C + jS)^T a / (C + jS)^T b`` sampled at etas.

    Returns the complex samples together with a mask of flagged samples
    whose denominator magnitude fell below ``DENOMINATOR_FLOOR``; flagged
    samples are NaN, never clamped.
    """
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    C, S = trig_matrices(etas, coeffs.m_hat)
    num = (C.T @ coeffs.a) + 1j * (S.T @ coeffs.a)
    den = (C.T @ coeffs.b) + 1j * (S.T @ coeffs.b)
    flagged = np.abs(den) < DENOMINATOR_FLOOR
    out = np.full(etas.shape, np.nan + 0j)
    ok = ~flagged
    out[ok] = num[ok] / den[ok]
    return out, flagged


def modified_wavenumber_pow(coeffs, eta):
    """``(j * eta_tilde)**d`` of a scheme at one normalized wavenumber.

    A near-zero denominator (< 1e-14 in magnitude) yields NaN, matching
    the flagged-sample contract of the curve producers.
    """
    val, _ = symbol_ratio(coeffs, eta)
    return complex(val[0])


def spectral_error(coeffs, etas):
    """Spectral error ``e(eta) = (j eta_tilde)^d - (j eta)^d`` (complex samples)."""
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    sym, flagged = symbol_ratio(coeffs, etas)
    exact = (1j * etas) ** coeffs.spec.d
    err = sym - exact
    err[flagged] = np.nan + 0j
    return err, flagged


@dataclass(frozen=True)
class SpectralCurve:
    """Sampled curve over strictly increasing etas.

    ``kind`` is one of ``mkdx_pow_d``, ``real_err``, ``imag_err``,
    ``abs_rel_err``; ``flagged`` lists etas where the symbol denominator
    nearly vanished (their values are NaN).
    """

    etas: np.ndarray
    values: np.ndarray
    kind: str
    label: str = ""
    flagged: tuple = field(default_factory=tuple)

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=float)
        if np.any(np.diff(etas) <= 0):
            raise ValueError("etas must be strictly increasing")
        object.__setattr__(self, "etas", etas)
        object.__setattr__(self, "values", np.asarray(self.values))


def eta_grid(n=DEFAULT_SAMPLES, hi=np.pi):
    """Uniform curve grid on [0, hi]."""
    return np.linspace(0.0, hi, n)


def error_components(coeffs, etas=None):
    """Real and imaginary parts of the spectral error as two curves."""
    if etas is None:
        etas = eta_grid()
    err, flagged = spectral_error(coeffs, etas)
    fl = tuple(np.asarray(etas)[flagged])
    label = coeffs.scheme_id()
    re = SpectralCurve(etas, err.real, "real_err", label, fl)
    im = SpectralCurve(etas, err.imag, "imag_err", label, fl)
    return re, im


def modified_wavenumber_curve(coeffs, etas=None):
    """``eta_tilde^d`` samples, i.e. the symbol stripped of its ``j^d`` factor."""
    if etas is None:
        etas = eta_grid()
    sym, flagged = symbol_ratio(coeffs, etas)
    d = coeffs.spec.d
    values = (sym / (1j**d)).real
    return SpectralCurve(etas, values, "mkdx_pow_d", coeffs.scheme_id(),
                         tuple(np.asarray(etas)[flagged]))


def relative_error_curve(coeffs, etas=None):
    """``|eta_tilde^d / eta^d - 1|`` with the eta=0 sample dropped."""
    if etas is None:
        etas = eta_grid()
    etas = np.asarray(etas, dtype=float)
    keep = etas > 0
    etas = etas[keep]
    sym, flagged = symbol_ratio(coeffs, etas)
    d = coeffs.spec.d
    rel = np.abs(sym / (1j * etas) ** d - 1.0)
    return SpectralCurve(etas, rel, "abs_rel_err", coeffs.scheme_id(),
                         tuple(etas[flagged]))


@dataclass(frozen=True)
class FigureTable:
    """One CSV-able table: header names plus a column matrix."""

    name: str
    header: tuple
    columns: np.ndarray


class UnknownFigureError(KeyError):
    """Requested figure id has no generator."""


def _default_weight():
    from .quadrature import WeightFunction

    return WeightFunction.constant(1.0, 0.0, 3.0)


def _derive(spec, weight=None):
    from .optimize import derive_optimized, derive_standard

    if spec.kind == KIND_STANDARD:
        return derive_standard(spec)
    return derive_optimized(spec, weight or _default_weight()).coeffs


def _curve_table(name, curves):
    etas = curves[0].etas
    cols = [etas] + [np.asarray(c.values, dtype=float) for c in curves]
    header = ("eta",) + tuple(c.label or c.kind for c in curves)
    return FigureTable(name, header, np.column_stack(cols))


def figure_data(request, n_samples=512):
    """Curve bundles reproducing the paper-style figures.

    ``request`` is either a known figure id (``fig:...``) or a dict
    ``{"scheme": <spec dict>, "etas": [...]}`` for a custom sweep.
    Returns a list of FigureTable.
    """
    from .optimize import derive_standard
    from .quadrature import WeightFunction, spectral_norm

    if isinstance(request, dict):
        spec = StencilSpec.from_dict(request["scheme"])
        etas = np.asarray(request.get("etas", eta_grid(n_samples)), dtype=float)
        weight = (WeightFunction.from_list(request["weight"])
                  if "weight" in request else None)
        coeffs = _derive(spec, weight)
        re, im = error_components(coeffs, etas)
        mw = modified_wavenumber_curve(coeffs, etas)
        table = FigureTable(
            "custom_sweep",
            ("eta", "mkdx_pow_d", "real_err", "imag_err"),
            np.column_stack([etas, mw.values, re.values, im.values]),
        )
        return [table]

    etas3 = np.linspace(0.0, 3.0, n_samples)

    if request == "fig:gammaEffect":
        curves = []
        for alpha in (0.0, 6.0, -6.0):
            w = (WeightFunction.constant(1.0, 0.0, 3.0) if alpha == 0.0
                 else WeightFunction.exponential(alpha, 0.0, 3.0))
            coeffs = _derive(StencilSpec.central(2, 4, 3), w)
            c = relative_error_curve(coeffs, etas3)
            curves.append(SpectralCurve(c.etas, c.values, c.kind,
                                        f"alpha={alpha:g}", c.flagged))
        return [_curve_table("gamma_effect_d2_m3", curves)]

    if request in ("fig:implicitSecondDerivativeL2error",
                   "fig:implicitFirstDerivativeL2error"):
        d = 2 if "Second" in request else 1
        w = _default_weight()
        ms, norms = [], []
        for m in range(1, 6):
            coeffs = _derive(StencilSpec.central(d, 4, m), w)
            ms.append(float(m))
            norms.append(spectral_norm(coeffs, w))
        return [FigureTable(f"l2_error_vs_m_d{d}", ("M", "l2_norm_sq"),
                            np.column_stack([ms, norms]))]

    if request in ("fig:implicitspectralError2", "fig:implicitspectralError1"):
        d = 2 if request.endswith("2") else 1
        w = _default_weight()
        tables = []
        std = derive_standard(StencilSpec.central(d, 4, 1, kind=KIND_STANDARD))
        for m in (2, 3, 4):
            opt = _derive(StencilSpec.central(d, 4, m), w)
            curves = [modified_wavenumber_curve(opt, etas3)]
            for coeffs in (opt, std):
                re, im = error_components(coeffs, etas3)
                curves.extend([re, im])
            header = ("eta", "mkdx_pow_d", "opt_real_err", "opt_imag_err",
                      "std_real_err", "std_imag_err")
            cols = np.column_stack([etas3] + [c.values for c in curves])
            tables.append(FigureTable(f"spectral_error_d{d}_m{m}", header, cols))
        return tables

    if request == "fig:M3Compare":
        w = _default_weight()
        shapes = [
            StencilSpec(2, 9, 3, 3, 2, 2, kind=KIND_STANDARD),
            StencilSpec(2, 3, 3, 3, 3, 3),
            StencilSpec(2, 3, 3, 3, 2, 2),
            StencilSpec(2, 3, 2, 2, 3, 3),
            StencilSpec(2, 3, 3, 3, 1, 1),
            StencilSpec(2, 3, 1, 1, 3, 3),
            StencilSpec(2, 3, 3, 3, 0, 0),
        ]
        curves = [relative_error_curve(_derive(s, w), etas3) for s in shapes]
        return [_curve_table("m3_compare_d2", curves)]

    if request in ("fig:implicitspectralErrorNonPeriodD2",
                    "fig:implicitspectralErrorNonPeriodD1"):
        d = 2 if request.endswith("2") else 1
        w = _default_weight()
        tables = []
        central = _derive(StencilSpec.central(d, 4, 3), w)
        for m_l in (4, 5, 6):
            m_r = 6 - m_l
            spec = StencilSpec(d, 3, m_l, m_r, m_l, m_r)
            biased = _derive(spec, w)
            curves = []
            for coeffs in (biased, central):
                curves.append(modified_wavenumber_curve(coeffs, etas3))
                re, im = error_components(coeffs, etas3)
                curves.extend([re, im])
            header = ("eta", "biased_mkdx", "biased_real_err", "biased_imag_err",
                      "central_mkdx", "central_real_err", "central_imag_err")
            cols = np.column_stack([etas3] + [c.values for c in curves])
            tables.append(FigureTable(f"biased_error_d{d}_ml{m_l}", header, cols))
        return tables

    raise UnknownFigureError(request)
