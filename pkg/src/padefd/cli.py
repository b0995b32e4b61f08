"""Command-line entry point for derivations, analysis, stability, and runs.

Subcommands: derive, tables, spectrum, stability, solve, verify.  Every
command reads a JSON config, writes CSV/JSON artifacts into an output
directory, and never overwrites existing files unless --force is given.
Exit codes: 0 success, 1 usage or config error, 2 numerical-derivation
or verification failure, 3 aborted run.
"""

import argparse
import importlib.resources
import json
import sys
from pathlib import Path

import numpy as np

from .stencils import StencilSpec, StencilError, KIND_STANDARD
from .quadrature import WeightFunction, spectral_norm
from .optimize import RankDeficiencyError, derive_optimized, derive_standard
from .spectral import figure_data, UnknownFigureError
from .stability import TABLEAUX, circulant_eigenvalues, max_stable_dt, cfl_sweep
from . import pde

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_ABORTED = 3

GOLDEN_TABLES = ("d2_central_order4", "d1_central_order4",
                 "d2_biased_order4", "d1_biased_order4")
GOLDEN_TOLERANCE = 1e-8


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _fmt(x):
    return f"{float(x):.17g}"


def _write_text(path, text, force):
    path = Path(path)
    if path.exists() and not force:
        raise CliError(f"{path} exists; use --force to overwrite", EXIT_USAGE)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _write_csv(path, header, rows, force):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row))
    return _write_text(path, "\n".join(lines) + "\n", force)


def _write_json(path, obj, force):
    return _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n",
                       force)


def _load_config(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CliError(f"config not found: {path}", EXIT_USAGE) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}", EXIT_USAGE) from exc


def _weight_from(config):
    if "weight" in config and config["weight"]:
        return WeightFunction.from_list(config["weight"])
    return WeightFunction.constant(1.0, 0.0, 3.0)


def cmd_derive(args):
    config = _load_config(args.config)
    spec = StencilSpec.from_dict(config["stencil"])
    weight = _weight_from(config)
    out = Path(args.out)
    if spec.kind == KIND_STANDARD:
        coeffs = derive_standard(spec)
        report = {"kind": "standard", "kktRank": coeffs.kkt_rank,
                  "constraintResidual": coeffs.constraint_residual}
    else:
        solution = derive_optimized(spec, weight)
        coeffs = solution.coeffs
        report = {
            "kind": "optimized",
            "kktRank": coeffs.kkt_rank,
            "constraintResidual": coeffs.constraint_residual,
            "kktResidual": solution.residual,
            "rankDeficient": solution.rank_deficient,
            "conditionEstimate": solution.condition_estimate,
            "cost": None,
            "spectralNormSq": spectral_norm(coeffs, weight),
        }
        from .optimize import assemble_kkt

        cost, _, _ = assemble_kkt(spec, weight)
        report["cost"] = cost.value(np.concatenate([coeffs.a, coeffs.b]))
    rows = list(coeffs.table())
    if args.format == "json":
        payload = {"scheme": spec.to_dict(),
                   "m": [int(r[0]) for r in rows],
                   "a": [r[1] for r in rows],
                   "b": [r[2] for r in rows]}
        _write_json(out / "coefficients.json", payload, args.force)
    else:
        _write_csv(out / "coefficients.csv", ("m", "a", "b"), rows, args.force)
    report["scheme"] = spec.scheme_id()
    _write_json(out / "kkt_report.json", report, args.force)
    return EXIT_OK


def golden_table_rows(name, weight=None):
    """Regenerate one shipped coefficient table (rows of label, m, a, b)."""
    weight = weight or WeightFunction.constant(1.0, 0.0, 3.0)
    rows = []
    if name in ("d2_central_order4", "d1_central_order4"):
        d = 2 if name.startswith("d2") else 1
        for m in (1, 2, 3, 4):
            coeffs = derive_optimized(StencilSpec.central(d, 4, m), weight).coeffs
            for mm in range(0, m + 1):
                rows.append((f"M={m}", mm, coeffs.a[m + mm], coeffs.b[m + mm]))
    elif name in ("d2_biased_order4", "d1_biased_order4"):
        d = 2 if name.startswith("d2") else 1
        for ml in (4, 5, 6):
            mr = 6 - ml
            spec = StencilSpec(d=d, p=3, m_al=ml, m_ar=mr, m_bl=ml, m_br=mr)
            coeffs = derive_optimized(spec, weight).coeffs
            for mm in range(-ml, mr + 1):
                rows.append((f"ML={ml}", mm, coeffs.a[spec.m_hat + mm],
                             coeffs.b[spec.m_hat + mm]))
    else:
        raise CliError(f"unknown golden table {name}", EXIT_USAGE)
    return rows


def load_golden(name):
    ref = importlib.resources.files("padefd") / "testdata" / f"{name}.csv"
    try:
        text = ref.read_text()
    except FileNotFoundError as exc:
        raise CliError(f"golden table {name} missing from package data",
                       EXIT_USAGE) from exc
    rows = []
    for line in text.strip().splitlines()[1:]:
        label, m, a, b = line.split(",")
        rows.append((label, int(m), float(a), float(b)))
    return rows


def cmd_tables(args):
    out = Path(args.out)
    worst = 0.0
    mismatches = []
    for name in GOLDEN_TABLES:
        golden = load_golden(name)
        rows = golden_table_rows(name)
        _write_csv(out / f"{name}.csv", ("label", "m", "a", "b"), rows,
                   args.force)
        if len(golden) != len(rows):
            mismatches.append(f"{name}: row count {len(rows)} != {len(golden)}")
            continue
        for (gl, gm, ga, gb), (rl, rm, ra, rb) in zip(golden, rows):
            err = max(abs(ga - ra), abs(gb - rb))
            worst = max(worst, err)
            if err > GOLDEN_TOLERANCE:
                mismatches.append(
                    f"{name} {gl} m={gm}: |delta|={err:.3e} "
                    f"(a {ra:.12g} vs {ga:.12g}, b {rb:.12g} vs {gb:.12g})")
    _write_json(out / "tables_report.json",
                {"worstAbsError": worst, "tolerance": GOLDEN_TOLERANCE,
                 "mismatches": mismatches}, args.force)
    if mismatches:
        print(f"{len(mismatches)} golden-table mismatches "
              f"(worst {worst:.3e}):", file=sys.stderr)
        for line in mismatches:
            print("  " + line, file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"golden tables reproduced (worst abs error {worst:.3e})")
    return EXIT_OK


def cmd_spectrum(args):
    config = _load_config(args.config)
    request = config.get("figure") or config
    try:
        tables = figure_data(request)
    except UnknownFigureError as exc:
        raise CliError(f"unknown figure id {exc}", EXIT_USAGE) from exc
    out = Path(args.out)
    for table in tables:
        _write_csv(out / f"{table.name}.csv", table.header, table.columns,
                   args.force)
    return EXIT_OK


def _schemes_by_derivative(config, weight):
    shape = config["scheme"]
    out = {}
    for d in (1, 2):
        spec_dict = dict(shape)
        spec_dict["d"] = d
        spec = StencilSpec.from_dict(spec_dict)
        if spec.kind == KIND_STANDARD:
            out[d] = derive_standard(spec)
        else:
            out[d] = derive_optimized(spec, weight).coeffs
    return out


def cmd_stability(args):
    config = _load_config(args.config)
    weight = _weight_from(config)
    betas = [float(b) for b in config["betas"]]
    np_ = int(config.get("Np", 31))
    out = Path(args.out)
    coeffs_by_d = _schemes_by_derivative(config, weight)

    dx_list = config.get("dxList") or [2.0 * np.pi / np_]
    tableaus = config.get("tableaus") or ["fe", "erk4", "irk2", "irk3"]
    summary = {"Np": np_, "betas": betas,
               "scan": {"lo": 1e-12, "hi": 1e6, "rayCeiling": 1e8,
                        "stabilityTol": 1e-12},
               "results": {}}
    for name in tableaus:
        tab = TABLEAUX[name]
        rows = cfl_sweep(coeffs_by_d, tab, betas, dx_list, np_=np_)
        header = ["dx", "dt_max", "bounded"] + [f"r{i+1}" for i in
                                                range(len(betas))]
        _write_csv(out / f"cfl_{name}.csv", header,
                   [[r["dx"], r["dt_max"], int(r["bounded"])]
                    + [r[f"r{i+1}"] for i in range(len(betas))] for r in rows],
                   args.force)
        summary["results"][name] = rows[-1]
    eig = circulant_eigenvalues(coeffs_by_d, betas, np_, dx_list[-1])
    _write_csv(out / "spectrum.csv", ("re", "im"),
               [(v.real, v.imag) for v in eig], args.force)
    _write_json(out / "stability_report.json", summary, args.force)
    return EXIT_OK


def cmd_solve(args):
    config = _load_config(args.config)
    weight = _weight_from(config)
    case = pde.PdeCase.from_dict(config)
    if args.seed is not None:
        case = pde.PdeCase.from_dict({**case.to_dict(), "seed": args.seed})
    derived = pde.derive_case_schemes(case, weight)
    result = pde.run_case(case, derived)
    out = Path(args.out)

    final = result.frames[-1]
    rows = [(final.t, x, f) for x, f in zip(case.x, result.final_field)]
    _write_csv(out / "snapshots.csv", ("t", "x", "f"), rows, args.force)

    if case.nonlinear:
        analytic = pde.analytic_burgers_colehopf(case, final.t, case.x)
    else:
        analytic = pde.analytic_advdiff(case, final.t)
    spec_a = pde.one_sided_spectrum(analytic, case.kmax)
    energy_err = pde.energy_error(case, result, spec_a)
    combined = pde.combined_amplitude_error(case, result, spec_a)
    ks = np.arange(1, case.kmax + 1)
    header = ["t_star", "k", "eta", "abs_fhat", "arg_fhat", "energy_error",
              "combined_amplitude_error"]
    t_norm = final.t_star if case.nonlinear else final.t_star_d.get(2, final.t)
    rows = []
    extra = None
    if case.nonlinear:
        header.append("phase_ratio_error")
        extra = pde.phase_ratio_error(case, result, spec_a)
    elif case.betas[0] != 0.0:
        header.append("c_star")
        extra = pde.speed_diagnostics(case, result)
    for i, k in enumerate(ks):
        row = [t_norm, k, k * case.dx, abs(final.spectrum[i]),
               float(np.angle(final.spectrum[i])), energy_err[i], combined[i]]
        if extra is not None:
            row.append(extra[i])
        rows.append(row)
    _write_csv(out / "spectra.csv", header, rows, args.force)
    _write_json(out / "run_metadata.json", result.metadata, args.force)
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_verification

    config = _load_config(args.config) if args.config else {}
    report = run_verification(config)
    _write_json(Path(args.out) / "verify_report.json", report, args.force)
    failed = [name for name, entry in report["checks"].items()
              if not entry["ok"]]
    for name, entry in report["checks"].items():
        print(f"{'PASS' if entry['ok'] else 'FAIL'} {name}: {entry['detail']}")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="padefd",
        description="Derive and analyze spectrally optimized compact "
                    "finite-difference schemes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("derive", cmd_derive, True),
        ("tables", cmd_tables, False),
        ("spectrum", cmd_spectrum, True),
        ("stability", cmd_stability, True),
        ("solve", cmd_solve, True),
        ("verify", cmd_verify, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config,
                       help="JSON configuration path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="recorded in metadata; computations are "
                            "deterministic and single-threaded")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except RankDeficiencyError as exc:
        print(f"derivation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StencilError as exc:
        print(f"derivation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except pde.AbortedRunError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
