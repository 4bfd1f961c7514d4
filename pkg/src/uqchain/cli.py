"""Command-line interface.

Exit codes: 0 success / property holds, 2 the computed property does not
hold (complex spectrum, indefinite metric, failed check), 1 usage or
runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .chain import (
    ChainSpec,
    alternating,
    chain_spec_from_dict,
    chain_spec_to_dict,
    hamiltonian,
    load_chain_spec,
)
from .errors import DomainError, UnknownIdentity
from .metric import (
    alpha0,
    det_formula_check,
    gamma_hat,
    hermitian_metric,
    metric_to_json,
    pd_range_scan,
    symmetrization_residual,
    universal_eta,
)
from .qalgebra import DeformationParams, format_spin, parse_spin, spin_rep
from .relations import IdentityParams, default_lattice, run_all
from .spectral import (
    REALITY_TOL,
    chebyshev_boundary,
    dk_expected,
    extract_dk,
    reality_boundary,
    spectrum,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2

REPRODUCE_TASKS = ("pair-boundaries", "alt-4", "alt-5", "dk", "det", "pd-range")


# ---------------------------------------------------------------- io helpers

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _to_json(doc) -> str:
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_json_report(path) -> dict | list:
    return json.loads(Path(path).read_text())


def read_csv_table(path) -> dict[str, list]:
    """Columns of a CSV written by this tool, with numbers and booleans decoded."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols: dict[str, list] = {}
    for row in rows:
        for k, v in row.items():
            cols.setdefault(k, []).append(_decode(v))
    return cols


def _decode(v: str):
    if v in ("True", "False"):
        return v == "True"
    try:
        return float(v)
    except ValueError:
        return v


# ------------------------------------------------------------ config parsing

def _spec_from_args(args) -> ChainSpec:
    if args.spec:
        return load_chain_spec(args.spec)
    missing = [f for f in ("S", "N", "gamma", "coupling") if getattr(args, f) is None]
    if missing:
        raise ValueError("need --spec FILE or all of --S --N --gamma --coupling; missing " + ", ".join("--" + m for m in missing))
    return chain_spec_from_dict({"S": args.S, "N": args.N, "gamma": args.gamma, "coupling": json.loads(args.coupling)})


def _family_doc(args) -> dict:
    """Chain document without gamma, for scans."""
    if args.spec:
        doc = json.loads(Path(args.spec).read_text())
    else:
        missing = [f for f in ("S", "N", "coupling") if getattr(args, f) is None]
        if missing:
            raise ValueError("need --spec FILE or --S --N --coupling; missing " + ", ".join("--" + m for m in missing))
        doc = {"S": args.S, "N": args.N, "coupling": json.loads(args.coupling)}
    doc["gamma"] = 0.0
    chain_spec_from_dict(doc)  # validate once up front
    return doc


def _family(doc: dict):
    def build(gamma: float):
        return hamiltonian(chain_spec_from_dict({**doc, "gamma": gamma}))

    return build


def _chain_size(args) -> tuple[int, int]:
    if args.spec:
        doc = json.loads(Path(args.spec).read_text())
        return parse_spin(doc["S"]), int(doc["N"])
    if args.S is None or args.N is None:
        raise ValueError("need --S and --N (or --spec)")
    return parse_spin(args.S), args.N


# --------------------------------------------------------------- subcommands

def cmd_spectrum(args) -> int:
    spec = _spec_from_args(args)
    rep = spectrum(hamiltonian(spec), tol=args.tol)
    if args.format == "csv":
        text = _to_csv(["re", "im"], [[z.real, z.imag] for z in rep.eigenvalues])
    else:
        text = _to_json({"chain": chain_spec_to_dict(spec), "seed": args.seed, **rep.to_dict()})
    _emit(text, args.out)
    return EXIT_OK if rep.is_real else EXIT_NEGATIVE


def cmd_scan_reality(args) -> int:
    doc = _family_doc(args)
    two_S = parse_spin(doc["S"])
    gmax = args.gamma_max if args.gamma_max is not None else 0.999 * np.pi / two_S
    scan = reality_boundary(
        _family(doc), gmax, resolution=args.resolution, n_grid=args.n_grid,
        tol=args.tol, gamma_min=args.gamma_min, jobs=args.jobs,
    )
    summary = {"chain": {k: v for k, v in doc.items() if k != "gamma"}, "seed": args.seed,
               "gamma_min": args.gamma_min, "gamma_max": gmax, **scan.to_dict()}
    if args.format == "csv":
        rows = zip(scan.gamma_grid, scan.max_imag_curve, scan.is_real_curve)
        _emit(_to_csv(["gamma", "max_abs_imag", "is_real"], rows), args.out)
        sys.stderr.write(json.dumps(summary, default=_json_default) + "\n")
    else:
        summary["curve"] = {"gamma": scan.gamma_grid, "max_abs_imag": scan.max_imag_curve,
                            "is_real": scan.is_real_curve}
        _emit(_to_json(summary), args.out)
    return EXIT_OK


def cmd_scan_pd(args) -> int:
    two_S, N = _chain_size(args)
    if args.gamma_max is not None and args.gamma_max <= 0:
        raise DomainError("empty gamma range")
    scan = pd_range_scan(two_S, N, resolution=args.resolution, n_grid=args.n_grid,
                         gamma_max=args.gamma_max, jobs=args.jobs)
    summary = {"S": format_spin(two_S), "N": N, "seed": args.seed, "tol": args.tol, **scan.to_dict()}
    if args.format == "csv":
        _emit(_to_csv(["gamma", "is_pd"], zip(scan.gamma_grid, scan.is_pd_curve)), args.out)
        sys.stderr.write(json.dumps(summary, default=_json_default) + "\n")
    else:
        summary["curve"] = {"gamma": scan.gamma_grid, "is_pd": scan.is_pd_curve}
        _emit(_to_json(summary), args.out)
    return EXIT_OK


def cmd_metric(args) -> int:
    if args.spec or args.coupling is not None:
        spec = _spec_from_args(args)
        two_S, N, gamma = spec.params.two_S, spec.N, spec.params.gamma
    else:
        if args.gamma is None:
            raise ValueError("need --gamma")
        spec = None
        two_S, N = _chain_size(args)
        gamma = args.gamma
    alpha = alpha0(two_S, N, gamma) if args.alpha is None else args.alpha
    pair = universal_eta(spin_rep(DeformationParams(gamma, two_S)), N)
    cand = hermitian_metric(pair, alpha)
    diag = cand.diagnostics(gamma=gamma, alpha=alpha, S=format_spin(two_S), N=N, gamma_hat=gamma_hat(two_S, N))
    if spec is not None:
        diag["symmetrization_residual"] = symmetrization_residual(cand.eta, hamiltonian(spec).matrix)
    if args.eta_out:
        Path(args.eta_out).write_text(json.dumps(metric_to_json(cand.eta)))
    if args.format == "csv":
        _emit(_to_csv(list(diag), [list(diag.values())]), args.out)
    else:
        _emit(_to_json(diag), args.out)
    return EXIT_OK if cand.is_positive_definite else EXIT_NEGATIVE


def cmd_verify(args) -> int:
    if args.S is not None or args.N is not None or args.gamma is not None:
        if None in (args.S, args.N, args.gamma):
            raise ValueError("give all of --S --N --gamma, or none for the default lattice")
        lattice = [IdentityParams(parse_spin(args.S), args.N, args.gamma, args.seed)]
    else:
        lattice = default_lattice(seed=args.seed)
    names = [args.only] if args.only else None
    t0 = time.perf_counter()
    reports = run_all(lattice, names=names, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports)
    if args.format == "csv":
        rows = [[r.identity_name, r.params["S"], r.params["N"], r.params["gamma"], r.residual,
                 r.tolerance, r.passed, r.error or ""] for r in reports]
        _emit(_to_csv(["identity", "S", "N", "gamma", "residual", "tolerance", "pass", "error"], rows), args.out)
    else:
        _emit(_to_json({"seed": args.seed, "pass": ok, "elapsed_s": elapsed,
                        "reports": [r.to_dict() for r in reports]}), args.out)
    return EXIT_OK if ok else EXIT_NEGATIVE


# ----------------------------------------------------------------- reproduce

def _row(task, case, expected, obtained, tol, note=""):
    err = float("nan") if obtained is None else abs(obtained - expected)
    return {"task": task, "case": case, "expected": expected, "obtained": obtained,
            "abs_err": err, "tol": tol, "pass": bool(obtained is not None and err <= tol), "note": note}


def _scan_boundary(two_S, s, a, jobs, resolution):
    scan = reality_boundary(_family({"S": format_spin(two_S), "N": len(a) + 1,
                                     "coupling": {"type": "single_s", "s": s, "a": list(a)}}),
                            0.99 * np.pi / two_S if two_S > 1 else 1.5, resolution=resolution, jobs=jobs)
    return scan.boundary


def _task_pair_boundaries(args):
    rows = []
    for two_S, s in ((2, 1), (2, 2), (3, 1), (3, 2), (3, 3)):
        expected = np.pi / (2 * (s + two_S / 2 + 1 - (s == two_S)))
        got = _scan_boundary(two_S, s, (1.0, -1.0), args.jobs, args.resolution)
        rows.append(_row("pair-boundaries", f"S={format_spin(two_S)} s={s} N=3 a=(1,-1)", expected, got, 1e-3))
    return rows


def _alt_rows(task, N, cases, args):
    rows = []
    for two_S, expected, label in cases:
        got = _scan_boundary(two_S, 0, alternating(N), args.jobs, args.resolution)
        rows.append(_row(task, f"S={format_spin(two_S)} N={N} alternating", expected, got, 1e-3, label))
        cheb = chebyshev_boundary(two_S, N)
        rows.append(_row(task, f"S={format_spin(two_S)} N={N} chebyshev vs scan", cheb, got, 2e-3))
    return rows


def _task_alt4(args):
    exact = float(np.arccos(np.sqrt(1 + np.sqrt(2)) / 2))
    return _alt_rows("alt-4", 4, ((1, np.pi / 4, "pi/4"), (2, exact, "~0.217 pi")), args)


def _task_alt5(args):
    rows = _alt_rows("alt-5", 5, ((1, np.pi / 5, "pi/5"), (2, np.pi / 5, "pi/5")), args)
    # only the two-digit value 0.172 pi is quoted for S=3/2; compare against it and the Chebyshev root
    got = _scan_boundary(3, 0, alternating(5), args.jobs, args.resolution)
    rows.append(_row("alt-5", "S=3/2 N=5 alternating", 0.172 * np.pi, got, 1e-3, "~0.172 pi"))
    rows.append(_row("alt-5", "S=3/2 N=5 chebyshev vs scan", chebyshev_boundary(3, 5), got, 2e-3))
    return rows


def _task_dk(args):
    rng = np.random.default_rng(args.seed)
    spins = (parse_spin(args.S),) if args.S is not None else (2, 3)
    rows = []
    for two_S in spins:
        channels = (args.s,) if args.s is not None else range(1, two_S + 1)
        for s in channels:
            for g in rng.uniform(0.05, 0.35, size=5):
                try:
                    got = extract_dk(two_S, s, float(g), seed=args.seed)
                    want = dk_expected(two_S, s, float(g))
                except KeyError:
                    raise DomainError(f"no tabulated d_k for S={format_spin(two_S)}, s={s}") from None
                err = float(np.max(np.abs(np.subtract(got, want)))) if len(got) == len(want) else float("inf")
                rows.append({"task": "dk", "case": f"S={format_spin(two_S)} s={s} gamma={g:.6f}",
                             "expected": want, "obtained": got, "abs_err": err, "tol": 1e-8,
                             "pass": err <= 1e-8, "note": "has d=1" if 1.0 in np.round(want, 12) else ""})
    return rows


_METRIC_CASES = ((1, 2), (1, 3), (1, 4), (2, 2), (2, 3))


def _task_det(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    for two_S, N in _METRIC_CASES:
        g = 0.5 * gamma_hat(two_S, N)
        pair = universal_eta(spin_rep(DeformationParams(g, two_S)), N)
        alpha = float(rng.uniform(-np.pi, np.pi))
        chk = det_formula_check(pair, alpha)
        case = f"S={format_spin(two_S)} N={N} gamma={g:.5f} alpha={alpha:.4f}"
        rows.append({"task": "det", "case": case, "expected": 0.0, "obtained": chk.rel_err,
                     "abs_err": chk.rel_err, "tol": 1e-8, "pass": chk.rel_err <= 1e-8, "note": "relative error"})
        dev = max(abs(np.linalg.det(pair.eta_plus) - 1), abs(np.linalg.det(pair.eta_minus) - 1))
        rows.append({"task": "det", "case": case + " det(eta+-)", "expected": 1.0, "obtained": 1.0 + dev,
                     "abs_err": dev, "tol": 1e-9, "pass": dev <= 1e-9, "note": ""})
    return rows


def _task_pd_range(args):
    rows = []
    for two_S, N in _METRIC_CASES:
        ghat = gamma_hat(two_S, N)
        scan = pd_range_scan(two_S, N, resolution=args.resolution, jobs=args.jobs)
        got = scan.boundary
        ok = got is None or got >= ghat - args.resolution
        rows.append({"task": "pd-range", "case": f"S={format_spin(two_S)} N={N}", "expected": ghat,
                     "obtained": got, "abs_err": None if got is None else got - ghat,
                     "tol": args.resolution, "pass": bool(ok), "note": "obtained >= expected - tol"})
    return rows


_TASKS = {
    "pair-boundaries": _task_pair_boundaries,
    "alt-4": _task_alt4,
    "alt-5": _task_alt5,
    "dk": _task_dk,
    "det": _task_det,
    "pd-range": _task_pd_range,
}


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_reproduce(args) -> int:
    if args.only and args.only not in _TASKS:
        raise ValueError(f"unknown task {args.only!r}; choose from {', '.join(_TASKS)}")
    names = [args.only] if args.only else list(_TASKS)
    rows = []
    for name in names:
        t0 = time.perf_counter()
        rows.extend(_TASKS[name](args))
        log.info("%s done in %.1f s", name, time.perf_counter() - t0)
    ok = all(r["pass"] for r in rows)
    table = [f"{'PASS' if r['pass'] else 'FAIL'}  {r['task']:<16} {r['case']:<44} "
             f"expected={_fmt(r['expected'])} obtained={_fmt(r['obtained'])} err={_fmt(r['abs_err'])}"
             for r in rows]
    sys.stdout.write("\n".join(table) + f"\n{'ALL PASS' if ok else 'SOME FAILED'} ({len(rows)} checks)\n")
    if args.out:
        if args.format == "csv":
            cols = ["task", "case", "expected", "obtained", "abs_err", "tol", "pass", "note"]
            Path(args.out).write_text(_to_csv(cols, [[json.dumps(r[c], default=_json_default)
                                                      if isinstance(r[c], list) else r[c] for c in cols]
                                                     for r in rows]))
        else:
            Path(args.out).write_text(_to_json({"seed": args.seed, "pass": ok, "rows": rows}))
    return EXIT_OK if ok else EXIT_NEGATIVE


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="chain JSON document")
    common.add_argument("--S", help='spin as a string, e.g. "1/2"')
    common.add_argument("--N", type=int, help="number of sites")
    common.add_argument("--gamma", type=float, help="deformation parameter")
    common.add_argument("--coupling", help='coupling JSON, e.g. \'{"type":"single_s","s":0,"a":[1,-1]}\'')
    common.add_argument("--tol", type=float, default=REALITY_TOL)
    common.add_argument("--resolution", type=float, default=1e-4)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--only", help="restrict to one identity or reproduce task")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="uqchain", description="U_q(sl_2)-invariant spin chains and metric operators")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("spectrum", parents=[common], help="eigenvalues and reality test").set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("scan-reality", parents=[common], help="reality boundary in gamma")
    sp.add_argument("--gamma-min", type=float, default=0.0)
    sp.add_argument("--gamma-max", type=float)
    sp.add_argument("--n-grid", type=int, default=400)
    sp.set_defaults(func=cmd_scan_reality)

    sp = sub.add_parser("scan-pd", parents=[common], help="positivity range of eta(alpha0)")
    sp.add_argument("--gamma-max", type=float)
    sp.add_argument("--n-grid", type=int, default=100)
    sp.set_defaults(func=cmd_scan_pd)

    sp = sub.add_parser("metric", parents=[common], help="universal metric eta(alpha) and diagnostics")
    sp.add_argument("--alpha", type=float, help="defaults to alpha0(gamma)")
    sp.add_argument("--eta-out", help="write eta as JSON [re, im] pairs")
    sp.set_defaults(func=cmd_metric)

    sub.add_parser("verify", parents=[common], help="identity suite").set_defaults(func=cmd_verify)

    sp = sub.add_parser("reproduce", parents=[common], help="regenerate the reference numbers")
    sp.add_argument("--s", type=int, help="channel filter for the dk task")
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, OSError, ArithmeticError, UnknownIdentity) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
