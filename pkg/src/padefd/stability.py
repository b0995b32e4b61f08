"""Discrete operators on a grid, spectra, RK stability, and time-step limits.

A scheme's coefficient rows are placed cyclically (periodic) or clipped
with biased boundary rows (non-periodic) to form the function-value and
derivative-value operator pair.  The semi-discrete system matrix is
assembled by factorization-and-solve, its spectrum feeds the
Runge-Kutta stability function, and the largest stable time step is
located by a log-spaced scan plus bisection.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np
import scipy.linalg

from .optimize import mirror
from .spectral import symbol_ratio

#: Acceptance band for |r(z)| at stability-region boundaries.
STABILITY_TOL = 1e-12

#: Time-step scan window (log-spaced) and the ray-probe ceiling for
#: declaring a tableau stable at any step size.
DT_SCAN_LO = 1e-12
DT_SCAN_HI = 1e6
RAY_PROBE_CEILING = 1e8

#: Relative width of the bisection bracket at convergence.
DT_BISECT_RTOL = 1e-10

#: Condition estimate above which the derivative-value operator is
#: treated as singular.
BPHI_COND_LIMIT = 1e12


class OperatorError(RuntimeError):
    """Operator assembly failed (grid too small or singular LHS)."""


@dataclass(frozen=True)
class ShiftOperator:
    """Cyclic shift by k on a periodic grid of np_ points."""

    np_: int
    k: int

    def matrix(self):
        i = np.arange(self.np_)
        return np.equal.outer((i - self.k) % self.np_, i).astype(float).T

    def apply(self, v):
        return np.roll(np.asarray(v), self.k)


def shift_matrix(np_, k):
    """Dense cyclic-shift matrix: entry (i, j) = delta((i - j - k) mod np_)."""
    i = np.arange(np_)
    return ((np.subtract.outer(i, i) - k) % np_ == 0).astype(float)


@dataclass(frozen=True)
class DomainOperators:
    """Function-value (a_phi) and derivative-value (b_phi) grid operators."""

    a_phi: np.ndarray
    b_phi: np.ndarray
    periodic: bool
    scheme_ids: tuple

    @property
    def np_(self):
        return self.a_phi.shape[0]

    def lu(self):
        return scipy.linalg.lu_factor(self.b_phi)


def _place_periodic(vec, m_hat, np_):
    rows = np.zeros((np_, np_))
    first = np.zeros(np_)
    for m in range(-m_hat, m_hat + 1):
        first[m % np_] += vec[m_hat + m]
    for i in range(np_):
        rows[i] = np.roll(first, i)
    return rows


def assemble_operators(coeffs, np_, periodic=True, boundary=None):
    """Build the operator pair for one derivative over the whole grid.

    Parameters
    ----------
    coeffs : SchemeCoefficients
        Interior (central) scheme.
    np_ : int
        Number of grid points.
    periodic : bool
        Periodic placement; requires ``np_ > 2*m_hat``.
    boundary : sequence of SchemeCoefficients, optional
        Non-periodic only: left-biased schemes ordered from least to
        most biased.  Scheme j (half-widths m_l = m_hat + 1 + j) fills
        row np_ - m_hat + j; mirrored copies fill the leading rows.
    """
    m_hat = coeffs.spec.m_hat
    if np_ <= 2 * m_hat:
        raise OperatorError(f"grid of {np_} points cannot hold half-width {m_hat}")
    ids = [coeffs.scheme_id()]
    if periodic:
        a_phi = _place_periodic(coeffs.a, m_hat, np_)
        b_phi = _place_periodic(coeffs.b, m_hat, np_)
    else:
        if boundary is None or len(boundary) != m_hat:
            raise OperatorError(
                f"non-periodic assembly needs {m_hat} left-biased boundary schemes")
        a_phi = np.zeros((np_, np_))
        b_phi = np.zeros((np_, np_))
        for i in range(m_hat, np_ - m_hat):
            a_phi[i, i - m_hat:i + m_hat + 1] = coeffs.a
            b_phi[i, i - m_hat:i + m_hat + 1] = coeffs.b
        for j, left in enumerate(boundary):
            spec = left.spec
            if spec.m_al != m_hat + 1 + j or spec.m_al + spec.m_ar != 2 * m_hat:
                raise OperatorError(
                    "boundary scheme half-widths must step from m_hat+1 to "
                    "2*m_hat with fixed true size")
            row = np_ - m_hat + j
            sel = slice(row - spec.m_al, row + spec.m_ar + 1)
            off = spec.m_hat - spec.m_al
            a_phi[row, sel] = left.a[off:off + spec.n_bar]
            b_phi[row, sel] = left.b[off:off + spec.n_bar]
            right = mirror(left)
            rrow = m_hat - 1 - j
            rsel = slice(rrow - right.spec.m_al, rrow + right.spec.m_ar + 1)
            roff = right.spec.m_hat - right.spec.m_al
            a_phi[rrow, rsel] = right.a[roff:roff + right.spec.n_bar]
            b_phi[rrow, rsel] = right.b[roff:roff + right.spec.n_bar]
            ids.append(left.scheme_id())
    cond = np.linalg.cond(b_phi)
    if not np.isfinite(cond) or cond > BPHI_COND_LIMIT:
        raise OperatorError(
            f"derivative-value operator is numerically singular "
            f"(condition estimate {cond:.3e})")
    return DomainOperators(a_phi=a_phi, b_phi=b_phi, periodic=periodic,
                           scheme_ids=tuple(ids))


def assemble_lambda(operators_by_d, betas, dx):
    """Semi-discrete system matrix: sum of beta_d/dx^d * Bphi^-1 Aphi.

    ``betas[i]`` multiplies derivative order d = i + 1; each inverse is
    realized by an LU solve, never formed explicitly.
    """
    first = next(iter(operators_by_d.values()))
    lam = np.zeros((first.np_, first.np_))
    for i, beta in enumerate(betas):
        d = i + 1
        if beta == 0.0:
            continue
        ops = operators_by_d[d]
        lam += (beta / dx**d) * scipy.linalg.lu_solve(ops.lu(), ops.a_phi)
    return lam


def circulant_eigenvalues(coeffs_by_d, betas, np_, dx):
    """Spectrum of the periodic central system via the symbol ratio.

    Exact for circulant operators: lambda(theta_k) sums
    beta_d/dx^d * S_a(theta_k)/S_b(theta_k) over derivatives.
    """
    thetas = 2.0 * np.pi * np.arange(np_) / np_
    lam = np.zeros(np_, dtype=complex)
    for i, beta in enumerate(betas):
        d = i + 1
        if beta == 0.0:
            continue
        ratio, flagged = symbol_ratio(coeffs_by_d[d], thetas)
        if np.any(flagged):
            raise OperatorError("symbol denominator vanished on the grid")
        lam += (beta / dx**d) * ratio
    return lam


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalue list with a parity classification of its support."""

    eigenvalues: np.ndarray
    max_real_part: float
    classification: str


def classify_spectrum(eigenvalues):
    eig = np.asarray(eigenvalues, dtype=complex)
    rho = np.max(np.abs(eig)) if eig.size else 0.0
    tol = 1e-9 * max(rho, 1e-300)
    im = np.max(np.abs(eig.imag))
    re = np.max(np.abs(eig.real))
    if im <= tol:
        kind = "real-only"
    elif re <= tol:
        kind = "imaginary-only"
    else:
        kind = "mixed"
    return SpectrumReport(eigenvalues=eig, max_real_part=float(np.max(eig.real)),
                          classification=kind)


@dataclass(frozen=True)
class SemiDiscreteReport:
    stable: bool
    worst_margin: float
    worst_eta: float


def semi_discrete_check(coeffs_by_d, betas, n_samples=2048):
    """Fourier-mode growth check for central schemes.

    Samples eta in [0, pi] and evaluates the real part of the summed
    symbol contribution; stability requires it to stay <= 0 for every
    mode.  The worst (largest) margin and its location are reported.
    """
    etas = np.linspace(0.0, np.pi, n_samples)
    total = np.zeros(n_samples, dtype=complex)
    for i, beta in enumerate(betas):
        d = i + 1
        if beta == 0.0:
            continue
        ratio, flagged = symbol_ratio(coeffs_by_d[d], etas)
        ratio[flagged] = 0.0
        total += beta * ratio
    margin = total.real
    worst = int(np.argmax(margin))
    return SemiDiscreteReport(stable=bool(margin[worst] <= 1e-12),
                              worst_margin=float(margin[worst]),
                              worst_eta=float(etas[worst]))


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta tableau (A, b, c); row sums of A must equal c."""

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.size
        if A.shape != (s, s) or c.shape != (s,):
            raise ValueError("tableau dimensions are inconsistent")
        if np.max(np.abs(A.sum(axis=1) - c)) > 1e-12:
            raise ValueError("tableau row sums must equal c")
        for arr in (A, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self):
        return self.b.size

    @property
    def explicit(self):
        return bool(np.all(np.triu(self.A) == 0.0))

    def to_dict(self):
        return {"name": self.name, "A": self.A.tolist(),
                "b": self.b.tolist(), "c": self.c.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        return cls(name=obj["name"], A=obj["A"], b=obj["b"], c=obj["c"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _tableaux():
    fe = ButcherTableau("fe", [[0.0]], [1.0], [0.0])
    erk2 = ButcherTableau("erk2", [[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5], [0.0, 1.0])
    erk4 = ButcherTableau(
        "erk4",
        [[0.0, 0.0, 0.0, 0.0],
         [0.5, 0.0, 0.0, 0.0],
         [0.0, 0.5, 0.0, 0.0],
         [0.0, 0.0, 1.0, 0.0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
        [0.0, 0.5, 0.5, 1.0],
    )
    erk5 = ButcherTableau(
        "erk5",
        [[0, 0, 0, 0, 0, 0],
         [1 / 4, 0, 0, 0, 0, 0],
         [1 / 8, 1 / 8, 0, 0, 0, 0],
         [0, -1 / 2, 1, 0, 0, 0],
         [3 / 16, 0, 0, 9 / 16, 0, 0],
         [-3 / 7, 2 / 7, 12 / 7, -12 / 7, 8 / 7, 0]],
        [7 / 90, 0, 32 / 90, 12 / 90, 32 / 90, 7 / 90],
        [0, 1 / 4, 1 / 4, 1 / 2, 3 / 4, 1],
    )
    irk2 = ButcherTableau("irk2", [[0.0, 0.0], [1 / 3, 1 / 3]],
                          [0.25, 0.75], [0.0, 2 / 3])
    # Last row of A and b differ in the 6th decimal as printed in the
    # source tables; both are kept verbatim, not reconciled.
    irk3 = ButcherTableau(
        "irk3",
        [[0.158984, 0.0, 0.0],
         [0.420508, 0.158984, 0.0],
         [0.348023, 0.492993, 0.158984]],
        [0.348022, 0.492994, 0.158984],
        [0.158984, 0.579492, 1.0],
    )
    return {t.name: t for t in (fe, erk2, erk4, erk5, irk2, irk3)}


TABLEAUX = _tableaux()

#: Temporal scheme paired with each spatial order of accuracy (matching
#: order); overridable per run config.
ORDER_PAIRING = {4: "erk2", 10: "erk5"}


def stability_function(tableau, z):
    """RK amplification factor r(z) = 1 + z b^T (I - z A)^{-1} 1.

    A singular stage matrix (a pole of the rational function) returns
    +inf magnitude.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    s = tableau.stages
    eye = np.eye(s)
    ones = np.ones(s)
    out = np.empty(z_arr.shape, dtype=complex)
    for i, zi in enumerate(z_arr.ravel()):
        try:
            stage = np.linalg.solve(eye - zi * tableau.A, ones)
            out.ravel()[i] = 1.0 + zi * (tableau.b @ stage)
        except np.linalg.LinAlgError:
            out.ravel()[i] = complex(np.inf, 0.0)
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return complex(out.ravel()[0])
    return out


@dataclass(frozen=True)
class StabilityWindow:
    """Largest stable time step; ``bounded`` is False when the scan and
    per-eigenray probes found no boundary crossing."""

    bounded: bool
    dt_max: float
    probe_ceiling: float = RAY_PROBE_CEILING


def _feasible(tableau, eigenvalues, dt):
    r = stability_function(tableau, eigenvalues * dt)
    return bool(np.all(np.abs(r) <= 1.0 + STABILITY_TOL))


def max_stable_dt(eigenvalues, tableau, points_per_decade=16):
    """Largest dt keeping every eigenvalue inside the stability region.

    Log-spaced scan over [1e-12, 1e6] followed by bisection to relative
    width 1e-10.  If the ceiling is feasible and no per-eigenray probe
    up to |z| = 1e8 crosses the region boundary, the window is reported
    unbounded.
    """
    eig = np.asarray(eigenvalues, dtype=complex)
    rho = np.max(np.abs(eig)) if eig.size else 0.0
    # Roundoff-level eigenvalues are zero modes; their "direction" is
    # meaningless and would poison the ray probe.
    eig = eig[np.abs(eig) > 1e-12 * max(rho, 1e-300)]
    if eig.size == 0:
        return StabilityWindow(bounded=False, dt_max=math.inf)
    decades = int(math.log10(DT_SCAN_HI / DT_SCAN_LO))
    grid = np.logspace(math.log10(DT_SCAN_LO), math.log10(DT_SCAN_HI),
                       decades * points_per_decade + 1)
    lo = None
    hi = None
    for dt in grid:
        if _feasible(tableau, eig, dt):
            lo = dt
        else:
            hi = dt
            break
    if lo is None:
        return StabilityWindow(bounded=True, dt_max=0.0)
    if hi is None:
        # Feasible through the ceiling; probe each eigenray much further.
        for lam in eig:
            mags = np.logspace(-12, math.log10(RAY_PROBE_CEILING), 600)
            ray = lam / abs(lam) * mags
            r = stability_function(tableau, ray)
            if np.any(np.abs(r) > 1.0 + STABILITY_TOL):
                crossing = mags[np.argmax(np.abs(r) > 1.0 + STABILITY_TOL)]
                hi = crossing / abs(lam)
                if hi <= lo:
                    lo = hi * 1e-15
                break
        else:
            return StabilityWindow(bounded=False, dt_max=math.inf)
    while (hi - lo) > DT_BISECT_RTOL * hi:
        mid = math.sqrt(lo * hi)
        if _feasible(tableau, eig, mid):
            lo = mid
        else:
            hi = mid
    return StabilityWindow(bounded=True, dt_max=lo)


def spectral_norm_2(mat, rtol=1e-10, max_iter=20000):
    """Matrix 2-norm by power iteration on the Gram matrix."""
    mat = np.asarray(mat, dtype=float)
    gram = mat.T @ mat
    v = np.ones(mat.shape[1]) / math.sqrt(mat.shape[1])
    prev = 0.0
    for _ in range(max_iter):
        v = gram @ v
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return 0.0
        v /= norm
        if abs(norm - prev) <= rtol * norm:
            return math.sqrt(norm)
        prev = norm
    return math.sqrt(prev)


def max_dt_forward_euler_2norm(operators_by_d, betas, dx):
    """Largest dt with ||I + dt * Lambda||_2 <= 1 (forward Euler only).

    The sublevel set of the convex map dt -> ||I + dt*Lambda|| is an
    interval, so bisection against a doubling upper bracket is exact;
    Lambda = 0 yields an unbounded sentinel (inf).  Conservative with
    respect to the eigenvalue criterion for nonnormal matrices.
    """
    lam = assemble_lambda(operators_by_d, betas, dx)
    if not np.any(lam):
        return math.inf
    eye = np.eye(lam.shape[0])

    def ok(dt):
        return spectral_norm_2(eye + dt * lam) <= 1.0 + STABILITY_TOL

    lo = 0.0
    hi = DT_SCAN_LO
    while ok(hi):
        lo = hi
        hi *= 2.0
        if hi > DT_SCAN_HI:
            return math.inf
    while (hi - lo) > DT_BISECT_RTOL * max(hi, DT_SCAN_LO):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def cfl_sweep(coeffs_by_d, tableau, betas, dx_list, np_=31):
    """Maximum CFL numbers r_d = |beta_d| dt / dx^d across grid spacings.

    Central periodic schemes use the exact circulant spectrum.  Returns
    one row per dx with the stability window and the per-derivative CFL
    numbers at dt_max.
    """
    rows = []
    for dx in dx_list:
        eig = circulant_eigenvalues(coeffs_by_d, betas, np_, dx)
        window = max_stable_dt(eig, tableau)
        row = {"dx": float(dx), "dt_max": window.dt_max,
               "bounded": window.bounded}
        for i, beta in enumerate(betas):
            d = i + 1
            r_d = (abs(beta) * window.dt_max / dx**d
                   if math.isfinite(window.dt_max) else math.inf)
            row[f"r{d}"] = r_d if beta != 0.0 else 0.0
        rows.append(row)
    return rows
