"""Invariant suite behind the ``verify`` command.

Runs the structural checks that must hold for any correct build:
symmetry/skew-symmetry of central optimized coefficients, vanishing
error components, parity of the operator spectrum, and the observed
order of convergence on a single-mode linear run.
"""

import numpy as np

from .stencils import StencilSpec, StencilError, symmetrize_check, SYMMETRIC, SKEW
from .quadrature import WeightFunction
from .optimize import derive_optimized
from .spectral import error_components, eta_grid
from .stability import assemble_operators, assemble_lambda, classify_spectrum
from . import pde

SYMMETRY_TOL = 1e-10
COMPONENT_TOL = 1e-11
PARITY_FACTOR = 1e-9
ORDER_BAND = 0.3


def check_lemma_symmetry(max_m=5, max_d=4, weight=None):
    """Central optimized schemes: even d symmetric, odd d skew a / symmetric b."""
    weight = weight or WeightFunction.constant(1.0, 0.0, 3.0)
    worst = 0.0
    tested = 0
    for d in range(1, max_d + 1):
        for m in range(1, max_m + 1):
            try:
                sol = derive_optimized(StencilSpec.central(d, 4, m), weight)
            except StencilError:
                continue
            a, b = sol.coeffs.a, sol.coeffs.b
            sgn = 1.0 if d % 2 == 0 else -1.0
            worst = max(worst,
                        float(np.max(np.abs(a[::-1] - sgn * a))),
                        float(np.max(np.abs(b[::-1] - b))))
            expect_a = SYMMETRIC if d % 2 == 0 else SKEW
            if symmetrize_check(a) != expect_a or symmetrize_check(b) != SYMMETRIC:
                return False, f"classification failed at d={d} M={m}"
            tested += 1
    ok = worst <= SYMMETRY_TOL and tested > 0
    return ok, f"{tested} schemes, worst residual {worst:.3e}"


def check_error_components(max_m=5, max_d=4, weight=None):
    """Even d: Im e = 0; odd d: Re e = 0 over the default eta grid."""
    weight = weight or WeightFunction.constant(1.0, 0.0, 3.0)
    etas = eta_grid()
    worst = 0.0
    tested = 0
    for d in range(1, max_d + 1):
        for m in range(1, max_m + 1):
            try:
                sol = derive_optimized(StencilSpec.central(d, 4, m), weight)
            except StencilError:
                continue
            re, im = error_components(sol.coeffs, etas)
            vanishing = im.values if d % 2 == 0 else re.values
            worst = max(worst, float(np.nanmax(np.abs(vanishing))))
            tested += 1
    ok = worst <= COMPONENT_TOL and tested > 0
    return ok, f"{tested} schemes, worst |component| {worst:.3e}"


def check_parity_spectrum(np_=64, weight=None):
    """Even-only PDE gives a real spectrum, odd-only an imaginary one."""
    weight = weight or WeightFunction.constant(1.0, 0.0, 3.0)
    coeffs = {d: derive_optimized(StencilSpec.central(d, 4, 3), weight).coeffs
              for d in (1, 2)}
    dx = 2.0 * np.pi / np_
    ops = {d: assemble_operators(coeffs[d], np_) for d in (1, 2)}
    details = []
    ok = True
    for betas, want in (((0.0, 0.2), "real-only"), ((-0.1, 0.0), "imaginary-only")):
        lam = assemble_lambda(ops, betas, dx)
        eig = np.linalg.eigvals(lam)
        rho = np.max(np.abs(eig))
        off = (np.max(np.abs(eig.imag)) if want == "real-only"
               else np.max(np.abs(eig.real)))
        report = classify_spectrum(eig)
        ok = ok and off <= PARITY_FACTOR * rho and report.classification == want
        details.append(f"{want}: off-part {off:.2e} (rho {rho:.2e})")
    return ok, "; ".join(details)


def check_convergence_order(weight=None):
    """Single-mode linear run refines at the formal spatial order."""
    weight = weight or WeightFunction.constant(1.0, 0.0, 3.0)
    errs = []
    grids = (32, 64, 128, 256)
    for np_g in grids:
        case = pde.PdeCase(
            betas=(-1.0, 0.05), np_=np_g, kmax=2,
            amplitude=pde.AmplitudeLaw("uniform", 1.0), seed=20240601,
            scheme=StencilSpec.central(2, 4, 3),
            cfl_d=2, cfl_value=0.01,
            horizon_kind="time", horizon_value=0.5)
        derived = pde.derive_case_schemes(case, weight)
        result = pde.run_case(case, derived)
        exact = pde.analytic_advdiff(case, result.metadata["t_end"])
        errs.append(float(np.max(np.abs(result.final_field - exact))))
    logs = np.log(errs)
    loghs = np.log(2.0 * np.pi / np.array(grids, dtype=float))
    slope = float(np.polyfit(loghs, logs, 1)[0])
    ok = abs(slope - 4.0) <= ORDER_BAND
    return ok, f"observed order {slope:.3f} (target 4 +/- {ORDER_BAND})"


def run_verification(config=None):
    """All invariant checks; returns a JSON-able report."""
    config = config or {}
    weight = (WeightFunction.from_list(config["weight"])
              if config.get("weight") else None)
    checks = {}
    for name, fn in (
        ("lemma_symmetry", lambda: check_lemma_symmetry(weight=weight)),
        ("error_components", lambda: check_error_components(weight=weight)),
        ("parity_spectrum", lambda: check_parity_spectrum(weight=weight)),
        ("convergence_order", lambda: check_convergence_order(weight=weight)),
    ):
        ok, detail = fn()
        checks[name] = {"ok": bool(ok), "detail": detail}
    return {"checks": checks,
            "tolerances": {"symmetry": SYMMETRY_TOL,
                           "errorComponent": COMPONENT_TOL,
                           "parityFactor": PARITY_FACTOR,
                           "orderBand": ORDER_BAND}}
