"""Extended-precision internals for the KKT solve.

The constrained minimizers are hypersensitive to perturbations of the
cost matrix: at the condition numbers reached by large stencils
(~1e10..1e13), double-precision assembly and factorization move the
coefficients by more than the documented tolerances.  This module
rebuilds the cost integrals and constraint rows in 170-bit arithmetic
(gmpy2) and solves the KKT system with a pivoted LU at that precision,
so the returned coefficients are the true optimum to far below double
roundoff.  Only the solver uses this path; all reported norms, costs,
and test oracles stay in ordinary double precision.
"""

import math

import gmpy2
from gmpy2 import mpfr
import numpy as np

PRECISION_BITS = 170

#: Nodes per panel for the internal quadrature (the double-precision
#: reporting quadrature keeps its own 32-node contract).
GL_ORDER = 64

#: Relative agreement between refinement levels of the cost integrals.
COST_RTOL = mpfr("1e-30")

_GL_CACHE = {}


def _ctx():
    ctx = gmpy2.get_context()
    ctx.precision = PRECISION_BITS
    return ctx


def _legendre_nodes(n):
    """Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration."""
    _ctx()
    if n in _GL_CACHE:
        return _GL_CACHE[n]
    nodes = []
    weights = []
    for i in range(1, n + 1):
        x = mpfr(math.cos(math.pi * (i - 0.25) / (n + 0.5)))
        for _ in range(80):
            p0, p1 = mpfr(1), x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1)
            dx = p1 / dp
            x = x - dx
            if abs(dx) < mpfr("1e-45"):
                break
        p0, p1 = mpfr(1), x
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1)
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    _GL_CACHE[n] = (nodes, weights)
    return _GL_CACHE[n]


def _weight_values(weight_piece, etas):
    form = weight_piece.form
    if form == "const":
        c = mpfr(weight_piece.params[0])
        return [c for _ in etas]
    if form == "exp":
        alpha = mpfr(weight_piece.params[0])
        return [gmpy2.exp(alpha * e) for e in etas]
    xs, ys = weight_piece.params
    out = []
    for e in etas:
        ef = float(e)
        j = int(np.searchsorted(xs, ef, side="right")) - 1
        j = min(max(j, 0), len(xs) - 2)
        x0, x1 = mpfr(xs[j]), mpfr(xs[j + 1])
        y0, y1 = mpfr(ys[j]), mpfr(ys[j + 1])
        out.append(y0 + (y1 - y0) * (e - x0) / (x1 - x0))
    return out


def _trig_table(eta, m_hat):
    """cos(m*eta), sin(m*eta) for m = -m_hat..m_hat by recurrence."""
    c1 = gmpy2.cos(eta)
    s1 = gmpy2.sin(eta)
    cos_pos = [mpfr(1), c1]
    sin_pos = [mpfr(0), s1]
    for _ in range(2, m_hat + 1):
        cos_pos.append(2 * c1 * cos_pos[-1] - cos_pos[-2])
        sin_pos.append(2 * c1 * sin_pos[-1] - sin_pos[-2])
    C = [cos_pos[abs(m)] for m in range(-m_hat, m_hat + 1)]
    S = [(-sin_pos[-m] if m < 0 else sin_pos[m])
         for m in range(-m_hat, m_hat + 1)]
    return C, S


def _accumulate_cost(d, m_hat, weight, level):
    _ctx()
    n = 2 * m_hat + 1
    n2 = 2 * n
    nodes, wts = _legendre_nodes(GL_ORDER)
    Q = [[mpfr(0)] * n2 for _ in range(n2)]
    odd = d % 2 == 1
    if odd:
        sign = mpfr((-1) ** ((d - 1) // 2))
    else:
        sign = mpfr(-((-1) ** (d // 2)))
    for piece in weight.pieces:
        lo, hi = mpfr(piece.lo), mpfr(piece.hi)
        edges = [lo + (hi - lo) * k / (2**level) for k in range(2**level + 1)]
        for p_lo, p_hi in zip(edges[:-1], edges[1:]):
            half = (p_hi - p_lo) / 2
            etas = [p_lo + half * (x + 1) for x in nodes]
            gammas = _weight_values(piece, etas)
            for eta, gw0, gamma in zip(etas, wts, gammas):
                gw = half * gw0 * gamma
                if gw == 0:
                    continue
                C, S = _trig_table(eta, m_hat)
                powd = eta**d
                if odd:
                    u = C + [sign * powd * s for s in S]
                    v = S + [-sign * powd * c for c in C]
                else:
                    u = C + [sign * powd * c for c in C]
                    v = S + [sign * powd * s for s in S]
                for i in range(n2):
                    ui = gw * u[i]
                    vi = gw * v[i]
                    row = Q[i]
                    for j in range(i, n2):
                        row[j] += ui * u[j] + vi * v[j]
    for i in range(n2):
        for j in range(i):
            Q[i][j] = Q[j][i]
    return Q


def build_cost_mp(d, m_hat, weight, max_refinements=8):
    """Cost matrix in extended precision, refined panel-wise to COST_RTOL."""
    previous = None
    for level in range(max_refinements + 1):
        Q = _accumulate_cost(d, m_hat, weight, level)
        if previous is not None:
            scale = max(abs(v) for row in Q for v in row)
            diff = max(abs(a - b) for ra, rb in zip(Q, previous)
                       for a, b in zip(ra, rb))
            if diff <= COST_RTOL * max(scale, mpfr("1e-300")):
                return Q
        previous = Q
    raise RuntimeError("extended-precision cost refinement did not converge")


def _constraint_rows_mp(spec):
    """Exact constraint matrix G and rhs h in extended precision."""
    _ctx()
    n = spec.n_hat
    ms = list(range(-spec.m_hat, spec.m_hat + 1))
    rows = []
    rhs = []
    for j in range(spec.d):
        row = [mpfr(m) ** j if not (m == 0 and j == 0) else mpfr(1)
               for m in ms] + [mpfr(0)] * n
        rows.append(row)
        rhs.append(mpfr(0))
    for r in range(spec.p + 1):
        fact_x = mpfr(math.factorial(spec.d + r))
        fact_y = mpfr(math.factorial(r))
        row_a = [mpfr(m) ** (spec.d + r) / fact_x for m in ms]
        row_b = [-(mpfr(m) ** r if not (m == 0 and r == 0) else mpfr(1)) / fact_y
                 for m in ms]
        rows.append(row_a + row_b)
        rhs.append(mpfr(0))
    norm = [mpfr(0)] * (2 * n)
    norm[n + spec.m_hat] = mpfr(1)
    rows.append(norm)
    rhs.append(mpfr(1))
    for i, active in enumerate(spec.active_a()):
        if not active:
            row = [mpfr(0)] * (2 * n)
            row[i] = mpfr(1)
            rows.append(row)
            rhs.append(mpfr(0))
    for i, active in enumerate(spec.active_b()):
        if not active:
            row = [mpfr(0)] * (2 * n)
            row[n + i] = mpfr(1)
            rows.append(row)
            rhs.append(mpfr(0))
    return rows, rhs


def _lu_solve(A, b):
    """In-place LU with partial pivoting on lists of mpfr."""
    n = len(b)
    M = [row[:] for row in A]
    x = b[:]
    for c in range(n):
        pivot = max(range(c, n), key=lambda r: abs(M[r][c]))
        if M[pivot][c] == 0:
            raise ZeroDivisionError("extended-precision KKT matrix is singular")
        if pivot != c:
            M[c], M[pivot] = M[pivot], M[c]
            x[c], x[pivot] = x[pivot], x[c]
        inv = 1 / M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] * inv
            if f == 0:
                continue
            M[r][c] = f
            row_r = M[r]
            row_c = M[c]
            for cc in range(c + 1, n):
                row_r[cc] -= f * row_c[cc]
            x[r] -= f * x[c]
    for r in range(n - 1, -1, -1):
        acc = x[r]
        row = M[r]
        for cc in range(r + 1, n):
            acc -= row[cc] * x[cc]
        x[r] = acc / row[r]
    return x


def solve_kkt(spec, weight):
    """Solve the full KKT system in extended precision.

    Returns (x, multipliers) as double arrays; x stacks [a; b] on the
    augmented index range.
    """
    _ctx()
    Q = build_cost_mp(spec.d, spec.m_hat, weight)
    rows, rhs = _constraint_rows_mp(spec)
    n2 = 2 * spec.n_hat
    m = len(rows)
    size = n2 + m
    K = [[mpfr(0)] * size for _ in range(size)]
    for i in range(n2):
        for j in range(n2):
            K[i][j] = Q[i][j]
    for r, row in enumerate(rows):
        for c, v in enumerate(row):
            K[n2 + r][c] = v
            K[c][n2 + r] = v
    b = [mpfr(0)] * n2 + rhs
    z = _lu_solve(K, b)
    x = np.array([float(v) for v in z[:n2]])
    lam = np.array([float(v) for v in z[n2:]])
    return x, lam
