"""Stencil specifications and the shared order-accuracy constraint system.

Every derivation path (central, unequal left/right sizes, spatially
explicit, biased) is expressed on one augmented symmetric index range
``m = -M_hat..M_hat``.  Coefficients that fall outside a scheme's active
range are pinned to zero through explicit constraint rows, so a single
assembler serves all cases.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

# Factorials stay exactly representable in double precision only so far;
# constraint columns beyond this are rejected.
MAX_TAYLOR_INDEX = 30

KIND_OPTIMIZED = "optimized"
KIND_STANDARD = "standard-max-order"

SYMMETRIC = "symmetric"
SKEW = "skew"
NEITHER = "neither"


class StencilError(ValueError):
    """Invalid or infeasible stencil specification."""


def delta_vector(n, hot):
    """Unit vector of length ``n`` with a single 1 at one-based index ``hot``."""
    if not 1 <= hot <= n:
        raise ValueError(f"hot index {hot} outside 1..{n}")
    v = np.zeros(n)
    v[hot - 1] = 1.0
    return v


def reversal(v):
    """Apply the anti-diagonal identity (element reversal) to a vector."""
    return np.asarray(v)[::-1].copy()


def symmetrize_check(v, rtol=1e-12):
    """Classify an odd-length vector as symmetric, skew, or neither.

    A vector is symmetric about its central element when reversing it
    leaves it unchanged, and skew when reversing flips all signs.  The
    comparison tolerance scales with ``max|v|``; the zero vector counts
    as symmetric.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size % 2 == 0:
        raise ValueError("expected an odd-length vector")
    tol = rtol * max(np.max(np.abs(v)), 1.0e-300)
    jv = v[::-1]
    if np.max(np.abs(jv - v)) <= tol:
        return SYMMETRIC
    if np.max(np.abs(jv + v)) <= tol:
        return SKEW
    return NEITHER


@dataclass(frozen=True)
class StencilSpec:
    """Shape and accuracy request for one finite-difference scheme.

    Parameters
    ----------
    d : int
        Derivative order, >= 1.
    p : int
        Highest matched Taylor remainder index; the formal order of
        accuracy is ``p + 1``.
    m_al, m_ar : int
        Half-widths of the function-value (RHS) stencil, left and right.
    m_bl, m_br : int
        Half-widths of the derivative-value (LHS) stencil, left and right.
    kind : str
        ``"optimized"`` for the spectrally optimized scheme or
        ``"standard-max-order"`` for plain coefficient matching.
    """

    d: int
    p: int
    m_al: int
    m_ar: int
    m_bl: int
    m_br: int
    kind: str = KIND_OPTIMIZED

    def __post_init__(self):
        if self.d < 1:
            raise StencilError("derivative order d must be >= 1")
        if self.p < 0:
            raise StencilError("remainder index p must be >= 0")
        for name in ("m_al", "m_ar", "m_bl", "m_br"):
            if getattr(self, name) < 0:
                raise StencilError(f"half-width {name} must be >= 0")
        if self.m_al == 0 and self.m_ar == 0:
            raise StencilError("function-value stencil must contain a neighbor")
        if self.kind not in (KIND_OPTIMIZED, KIND_STANDARD):
            raise StencilError(f"unknown scheme kind {self.kind!r}")
        if self.d + self.p > MAX_TAYLOR_INDEX:
            raise StencilError(
                f"d + p = {self.d + self.p} exceeds the exact-factorial limit "
                f"{MAX_TAYLOR_INDEX}"
            )

    @property
    def order(self):
        return self.p + 1

    @property
    def m_hat(self):
        """Augmented half-width."""
        return max(self.m_al, self.m_ar, self.m_bl, self.m_br)

    @property
    def n_hat(self):
        """Augmented stencil size ``2*m_hat + 1``."""
        return 2 * self.m_hat + 1

    @property
    def n_bar(self):
        """True function-value stencil size ``m_al + m_ar + 1``."""
        return self.m_al + self.m_ar + 1

    @property
    def is_central(self):
        return self.m_al == self.m_ar and self.m_bl == self.m_br

    @property
    def is_equal_size(self):
        return self.m_al == self.m_ar == self.m_bl == self.m_br

    @property
    def is_explicit(self):
        return self.m_bl == 0 and self.m_br == 0

    def offsets(self):
        """Augmented index vector ``m = -m_hat..m_hat`` as floats."""
        return np.arange(-self.m_hat, self.m_hat + 1, dtype=float)

    def active_a(self):
        """Boolean mask over the augmented range where a-entries may be nonzero."""
        m = np.arange(-self.m_hat, self.m_hat + 1)
        return (m >= -self.m_al) & (m <= self.m_ar)

    def active_b(self):
        m = np.arange(-self.m_hat, self.m_hat + 1)
        return (m >= -self.m_bl) & (m <= self.m_br)

    def mirrored(self):
        """Spec with left/right half-widths swapped."""
        return StencilSpec(
            d=self.d, p=self.p,
            m_al=self.m_ar, m_ar=self.m_al,
            m_bl=self.m_br, m_br=self.m_bl,
            kind=self.kind,
        )

    def scheme_id(self):
        tag = "OFD" if self.kind == KIND_OPTIMIZED else "SFD"
        return (
            f"{tag}({self.m_al},{self.m_ar},{self.m_bl},{self.m_br})^{self.order}"
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    def to_dict(self):
        return {
            "d": self.d,
            "order": self.order,
            "mAL": self.m_al,
            "mAR": self.m_ar,
            "mBL": self.m_bl,
            "mBR": self.m_br,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            return cls(
                d=int(obj["d"]),
                p=int(obj["order"]) - 1,
                m_al=int(obj["mAL"]),
                m_ar=int(obj["mAR"]),
                m_bl=int(obj["mBL"]),
                m_br=int(obj["mBR"]),
                kind=obj.get("kind", KIND_OPTIMIZED),
            )
        except KeyError as exc:
            raise StencilError(f"stencil JSON missing key {exc}") from exc

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def central(cls, d, order, m, kind=KIND_OPTIMIZED):
        """Equal-size central scheme with half-width ``m``."""
        return cls(d=d, p=order - 1, m_al=m, m_ar=m, m_bl=m, m_br=m, kind=kind)


@dataclass(frozen=True)
class SchemeCoefficients:
    """Derived coefficient pair on the augmented index range.

    ``a`` multiplies function values (to be divided by dx**d) and ``b``
    multiplies derivative values; ``b`` is exactly 1 at the central index
    and entries outside the spec's active ranges are exactly zero.
    """

    a: np.ndarray
    b: np.ndarray
    spec: StencilSpec
    constraint_residual: float
    kkt_rank: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        n = self.spec.n_hat
        if a.shape != (n,) or b.shape != (n,):
            raise ValueError(f"coefficient vectors must have augmented length {n}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if b[self.spec.m_hat] != 1.0:
            raise ValueError("central b coefficient must equal 1 exactly")

    @property
    def m_hat(self):
        return self.spec.m_hat

    def table(self):
        """Rows (m, a_m, b_m) over the augmented range."""
        m = np.arange(-self.m_hat, self.m_hat + 1)
        return np.column_stack([m.astype(float), self.a, self.b])

    def scheme_id(self):
        return self.spec.scheme_id()


@dataclass(frozen=True)
class ConstraintSystem:
    """Order-accuracy constraint matrices plus normalization/zero rows.

    ``X`` and ``Y`` hold the Taylor-matching columns; every extra row is a
    pair ``(row, rhs)`` with ``row`` acting on the stacked vector [a; b]
    of length ``2*n_hat``.
    """

    X: np.ndarray
    Y: np.ndarray
    extra_rows: tuple

    def order_rows(self):
        """Order constraints as a matrix acting on [a; b] (rhs is zero)."""
        return np.hstack([self.X.T, -self.Y.T])

    def stacked(self):
        """Full constraint system ``G @ [a; b] = h`` with extras appended."""
        rows = [self.order_rows()]
        rhs = [np.zeros(self.X.shape[1])]
        if self.extra_rows:
            rows.append(np.array([r for r, _ in self.extra_rows]))
            rhs.append(np.array([v for _, v in self.extra_rows]))
        return np.vstack(rows), np.concatenate(rhs)


def _taylor_columns(spec):
    m = spec.offsets()
    ncols = spec.d + spec.p + 1
    X = np.empty((spec.n_hat, ncols))
    Y = np.zeros((spec.n_hat, ncols))
    for j in range(spec.d):
        X[:, j] = m**j
    for r in range(spec.p + 1):
        X[:, spec.d + r] = m ** (spec.d + r) / math.factorial(spec.d + r)
        Y[:, spec.d + r] = m**r / math.factorial(r)
    return X, Y


def build_constraints(spec):
    """Assemble the linear constraint system for a stencil spec.

    Returns the Taylor-matching matrices on the augmented index range
    together with the normalization row (central b equal to 1) and one
    zero row for every coefficient outside the spec's active ranges.
    Exact duplicate rows are dropped.
    """
    X, Y = _taylor_columns(spec)
    n = spec.n_hat
    extras = []

    norm_row = np.zeros(2 * n)
    norm_row[n + spec.m_hat] = 1.0
    extras.append((norm_row, 1.0))

    for i, active in enumerate(spec.active_a()):
        if not active:
            row = np.zeros(2 * n)
            row[i] = 1.0
            extras.append((row, 0.0))
    for i, active in enumerate(spec.active_b()):
        if not active:
            row = np.zeros(2 * n)
            row[n + i] = 1.0
            extras.append((row, 0.0))

    # Combined special cases can regenerate a row; keep the first occurrence.
    seen = set()
    unique = []
    for row, rhs in extras:
        key = (row.tobytes(), rhs)
        if key not in seen:
            seen.add(key)
            unique.append((row, rhs))

    system = ConstraintSystem(X=X, Y=Y, extra_rows=tuple(unique))
    if spec.kind == KIND_STANDARD:
        _check_standard_feasible(spec, system)
    return system


def _check_standard_feasible(spec, system):
    """Reject standard-kind specs whose constraints admit no solution."""
    G, h = system.stacked()
    active = np.concatenate([spec.active_a(), spec.active_b()])
    Ga = G[:, active]
    sol, _, rank, _ = np.linalg.lstsq(Ga, h, rcond=None)
    residual = np.max(np.abs(Ga @ sol - h)) if h.size else 0.0
    if residual > 1e-8 * max(1.0, np.max(np.abs(sol))):
        best = max_standard_order(spec)
        raise StencilError(
            f"order {spec.order} is not achievable for stencil "
            f"({spec.m_al},{spec.m_ar},{spec.m_bl},{spec.m_br}) with d={spec.d}; "
            f"largest achievable order is {best}"
        )


def max_standard_order(spec):
    """Largest order of accuracy a standard scheme of this shape can match."""
    best = 0
    for p in range(MAX_TAYLOR_INDEX - spec.d + 1):
        trial = StencilSpec(
            d=spec.d, p=p,
            m_al=spec.m_al, m_ar=spec.m_ar,
            m_bl=spec.m_bl, m_br=spec.m_br,
            kind=KIND_OPTIMIZED,
        )
        system = build_constraints(trial)
        G, h = system.stacked()
        active = np.concatenate([trial.active_a(), trial.active_b()])
        Ga = G[:, active]
        sol, _, _, _ = np.linalg.lstsq(Ga, h, rcond=None)
        residual = np.max(np.abs(Ga @ sol - h))
        if residual > 1e-8 * max(1.0, np.max(np.abs(sol))):
            break
        best = p + 1
    return best
