"""Weighted inner products on [0, pi] and the quadratic cost matrices.

The weighting function gamma is piecewise (constant, exponential, or
tabulated with linear interpolation) and vanishes outside its pieces.
All integrals use composite Gauss-Legendre quadrature with 32 nodes per
panel; panels start at piece boundaries and every panel is bisected
until two successive estimates agree to a relative tolerance.  Panels
are reduced in fixed order so results are bitwise reproducible.
"""

from dataclasses import dataclass
import json

import numpy as np

from .spectral import trig_matrices

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(32)

#: Relative agreement between successive refinement levels.
QUAD_RTOL = 1e-12

#: Each refinement level doubles the panel count.
MAX_REFINEMENTS = 12

FORM_CONST = "const"
FORM_EXP = "exp"
FORM_TABLE = "table"


class QuadratureError(RuntimeError):
    """Panel refinement failed to converge; carries the last two estimates."""

    def __init__(self, message, last, previous):
        super().__init__(f"{message} (last two estimates {previous!r} -> {last!r})")
        self.last = last
        self.previous = previous


class WeightError(ValueError):
    """Invalid weighting-function definition."""


@dataclass(frozen=True)
class WeightPiece:
    lo: float
    hi: float
    form: str
    params: tuple

    def evaluate(self, etas):
        if self.form == FORM_CONST:
            return np.full_like(etas, self.params[0])
        if self.form == FORM_EXP:
            return np.exp(self.params[0] * etas)
        xs, ys = self.params
        return np.interp(etas, xs, ys)


class WeightFunction:
    """Non-negative piecewise weighting function gamma(eta) on [0, pi]."""

    def __init__(self, pieces):
        pieces = sorted(pieces, key=lambda p: p.lo)
        last_hi = 0.0
        for piece in pieces:
            if not 0.0 <= piece.lo < piece.hi <= np.pi + 1e-12:
                raise WeightError(
                    f"piece [{piece.lo}, {piece.hi}] must lie inside [0, pi]")
            if piece.lo < last_hi - 1e-15:
                raise WeightError("weight pieces overlap")
            last_hi = piece.hi
            if piece.form == FORM_CONST and piece.params[0] < 0:
                raise WeightError("constant weight value must be >= 0")
            if piece.form == FORM_TABLE:
                xs, ys = piece.params
                if np.any(np.asarray(ys) < 0):
                    raise WeightError("tabulated weight samples must be >= 0")
                if np.any(np.diff(xs) <= 0):
                    raise WeightError("tabulated abscissae must increase")
        self.pieces = tuple(pieces)

    def __call__(self, etas):
        etas = np.asarray(etas, dtype=float)
        out = np.zeros_like(etas)
        for piece in self.pieces:
            mask = (etas >= piece.lo) & (etas <= piece.hi)
            if np.any(mask):
                out[mask] = piece.evaluate(etas[mask])
        return out

    @property
    def support(self):
        """Piece intervals as (lo, hi) pairs."""
        return tuple((p.lo, p.hi) for p in self.pieces)

    @classmethod
    def constant(cls, value=1.0, lo=0.0, hi=3.0):
        return cls([WeightPiece(lo, hi, FORM_CONST, (float(value),))])

    @classmethod
    def exponential(cls, alpha, lo=0.0, hi=3.0):
        return cls([WeightPiece(lo, hi, FORM_EXP, (float(alpha),))])

    @classmethod
    def tabulated(cls, etas, values, lo=None, hi=None):
        xs = np.asarray(etas, dtype=float)
        ys = np.asarray(values, dtype=float)
        if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
            raise WeightError("tabulated weight needs matching 1-d samples")
        lo = xs[0] if lo is None else lo
        hi = xs[-1] if hi is None else hi
        return cls([WeightPiece(float(lo), float(hi), FORM_TABLE,
                                (tuple(xs), tuple(ys)))])

    def to_list(self):
        out = []
        for p in self.pieces:
            if p.form == FORM_CONST:
                params = {"value": p.params[0]}
            elif p.form == FORM_EXP:
                params = {"alpha": p.params[0]}
            else:
                params = {"etas": list(p.params[0]), "values": list(p.params[1])}
            out.append({"lo": p.lo, "hi": p.hi, "form": p.form, "params": params})
        return out

    @classmethod
    def from_list(cls, items):
        pieces = []
        for item in items:
            form = item["form"]
            params = item.get("params", {})
            if form == FORM_CONST:
                packed = (float(params["value"]),)
            elif form == FORM_EXP:
                packed = (float(params["alpha"]),)
            elif form == FORM_TABLE:
                packed = (tuple(float(x) for x in params["etas"]),
                          tuple(float(y) for y in params["values"]))
            else:
                raise WeightError(f"unknown weight form {form!r}")
            pieces.append(WeightPiece(float(item["lo"]), float(item["hi"]),
                                      form, packed))
        return cls(pieces)

    def to_json(self):
        return json.dumps(self.to_list())

    @classmethod
    def from_json(cls, text):
        return cls.from_list(json.loads(text))


def _panels(weight, level):
    """Panel edges at refinement ``level``: each piece split into 2**level parts."""
    panels = []
    for lo, hi in weight.support:
        edges = np.linspace(lo, hi, 2**level + 1)
        panels.extend(zip(edges[:-1], edges[1:]))
    return panels


def _panel_points(lo, hi):
    half = 0.5 * (hi - lo)
    return lo + half * (GL_NODES + 1.0), half * GL_WEIGHTS


def integrate(func, weight, rtol=QUAD_RTOL, max_refinements=MAX_REFINEMENTS,
              noise_floor=0.0):
    """Integrate ``gamma(eta) * func(eta)`` over the weight support.

    ``func`` maps an array of etas to an array of samples.  Refinement
    bisects every panel until two successive composite estimates agree
    to ``rtol`` relative to the integral scale; the scale includes the
    integral of |gamma * func| so genuinely tiny integrals still
    converge.  ``noise_floor`` (times sqrt of the absolute integral)
    bounds the evaluation noise of the integrand itself, below which
    refinement cannot be expected to contract.
    """
    if not weight.pieces:
        return 0.0
    previous = None
    abs_scale = 0.0
    for level in range(max_refinements + 1):
        total = 0.0
        abs_total = 0.0
        for lo, hi in _panels(weight, level):
            pts, wts = _panel_points(lo, hi)
            samples = weight(pts) * np.asarray(func(pts), dtype=float)
            total += float(wts @ samples)
            abs_total += float(wts @ np.abs(samples))
        if previous is not None:
            abs_scale = max(abs_scale, abs_total)
            threshold = max(rtol * max(abs(total), 1e-3 * abs_scale, 1e-300),
                            noise_floor * np.sqrt(max(abs_scale, 0.0)))
            if abs(total - previous) <= threshold:
                return total
        previous = total
    raise QuadratureError("panel refinement did not converge", total, previous)


def inner_product(f, g, weight, rtol=QUAD_RTOL):
    """Weighted inner product ``<f * g> = integral of gamma * f * g``."""
    return integrate(lambda etas: np.asarray(f(etas)) * np.asarray(g(etas)),
                     weight, rtol=rtol)


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric PSD quadratic-cost matrix over the stacked vector [a; b]."""

    Q: np.ndarray
    parity: str
    d: int
    m_hat: int

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        scale = np.max(np.abs(Q))
        if scale > 0 and np.max(np.abs(Q - Q.T)) > 1e-13 * scale:
            raise ValueError("cost matrix must be symmetric")
        Q = 0.5 * (Q + Q.T)
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x)


def _cost_blocks(d, m_hat, etas):
    """Stacked u(eta), v(eta) vectors, shape (2*(2*m_hat+1), len(etas))."""
    C, S = trig_matrices(etas, m_hat)
    powd = np.asarray(etas, dtype=float) ** d
    if d % 2 == 0:
        q = d // 2
        s = -((-1.0) ** q)
        u = np.vstack([C, s * powd * C])
        v = np.vstack([S, s * powd * S])
    else:
        q = (d - 1) // 2
        s = (-1.0) ** q
        u = np.vstack([C, s * powd * S])
        v = np.vstack([S, -s * powd * C])
    return u, v


def _build_cost(d, m_hat, weight, rtol=QUAD_RTOL,
                max_refinements=MAX_REFINEMENTS):
    n2 = 2 * (2 * m_hat + 1)
    if not weight.pieces:
        return np.zeros((n2, n2))
    previous = None
    for level in range(max_refinements + 1):
        Q = np.zeros((n2, n2))
        for lo, hi in _panels(weight, level):
            pts, wts = _panel_points(lo, hi)
            u, v = _cost_blocks(d, m_hat, pts)
            gw = weight(pts) * wts
            Q += (u * gw) @ u.T + (v * gw) @ v.T
        if previous is not None:
            scale = max(np.max(np.abs(Q)), 1e-300)
            if np.max(np.abs(Q - previous)) <= rtol * scale:
                return Q
        previous = Q
    raise QuadratureError("cost-matrix refinement did not converge",
                          float(np.max(np.abs(Q))),
                          float(np.max(np.abs(previous))))


def build_cost_even(d, m_hat, weight):
    """Cost matrix for an even derivative ``d = 2q``."""
    if d % 2 != 0 or d < 2:
        raise ValueError("even-derivative cost requires even d >= 2")
    return CostMatrix(_build_cost(d, m_hat, weight), "even", d, m_hat)


def build_cost_odd(d, m_hat, weight):
    """Cost matrix for an odd derivative ``d = 2q + 1``."""
    if d % 2 != 1:
        raise ValueError("odd-derivative cost requires odd d")
    return CostMatrix(_build_cost(d, m_hat, weight), "odd", d, m_hat)


def build_cost(d, m_hat, weight):
    if d % 2 == 0:
        return build_cost_even(d, m_hat, weight)
    return build_cost_odd(d, m_hat, weight)


class DenominatorError(RuntimeError):
    """Symbol denominator vanished on the weight support."""

    def __init__(self, eta):
        super().__init__(f"symbol denominator vanishes near eta = {eta:.6g}")
        self.eta = eta


def spectral_norm(coeffs, weight, rtol=QUAD_RTOL):
    """True weighted L2 norm of the spectral error, squared.

    Integrates ``gamma * |e(eta)|**2`` with the denominator included
    (the relaxed numerator bound is used only inside the optimizer).
    """
    from .spectral import spectral_error, trig_matrices

    b_scale = float(np.sum(np.abs(coeffs.b)))

    # Zeros of the denominator can sit between quadrature nodes (or at a
    # support endpoint); scan each piece densely first.
    for lo, hi in weight.support:
        scan = np.linspace(lo, hi, 1025)
        C, S = trig_matrices(scan, coeffs.m_hat)
        den2 = (C.T @ coeffs.b) ** 2 + (S.T @ coeffs.b) ** 2
        bad = den2 <= (1e-7 * b_scale) ** 2
        if np.any(bad):
            raise DenominatorError(float(scan[bad][0]))

    def integrand(etas):
        from .spectral import trig_matrices as _tm

        C, S = _tm(etas, coeffs.m_hat)
        den2 = (C.T @ coeffs.b) ** 2 + (S.T @ coeffs.b) ** 2
        bad = den2 <= (1e-14 * b_scale) ** 2
        if np.any(bad):
            raise DenominatorError(float(np.asarray(etas)[bad][0]))
        err, _ = spectral_error(coeffs, etas)
        return np.abs(err) ** 2

    # |e|^2 carries cancellation noise ~ 2|e| * eps * (coefficient scale),
    # so the refinement loop cannot contract below this floor.
    coef_scale = 1.0 + float(np.sum(np.abs(coeffs.a)) + np.sum(np.abs(coeffs.b)))
    noise = 8.0 * np.finfo(float).eps * coef_scale * np.sqrt(np.pi)
    return integrate(integrand, weight, rtol=rtol, noise_floor=noise)
