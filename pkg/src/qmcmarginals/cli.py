"""Command-line front end: ``qmcm <verb> [options]``.

Verbs: ``lattice``, ``estimate``, ``fanova``, ``bench`` and ``discrepancy``.
Global options (``--seed``, ``--budget``, ``--out-dir``, ``--threads``,
``--config``) go before the verb. A ``--config`` JSON file supplies
defaults for the verb's options; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import cbc
from .fanova import VarianceReport, variance_report
from .metrics import write_scores
from .pointsets import (
    Box,
    GeneratingVector,
    make_korobov,
    read_binary,
    read_csv,
    star_discrepancy,
    write_binary,
    write_csv,
)
from .targets import preset_names, resolve

log = logging.getLogger("qmcmarginals")


def _int_expr(text: str) -> int:
    """Accept ``65536`` or ``2^16``."""
    if "^" in text:
        base, exp = text.split("^")
        return int(base) ** int(exp)
    return int(text)


def _weights(arg: str | None, dims: int, target=None):
    """``uniform`` / ``None`` -> unweighted, ``from:<report.json>`` -> fanova
    weights, ``fanova`` -> computed from the target, or a comma list."""
    if arg is None or arg == "uniform":
        return None
    if arg.startswith("from:"):
        rep = VarianceReport.from_json(arg[5:])
        gamma = cbc.weights_from_importances(rep)
    elif arg == "fanova":
        if target is None:
            raise SystemExit("--weights fanova needs a target")
        gamma = cbc.weights_from_importances(bench_mod.report_for(target))
    else:
        gamma = np.array([float(x) for x in arg.split(",")])
    if gamma.size != dims:
        raise SystemExit(f"weights have {gamma.size} entries for {dims} dimensions")
    return gamma


def _generator(spec: str, N: int, dims: int, gamma) -> tuple[GeneratingVector, dict | None]:
    if spec.startswith("korobov:"):
        return GeneratingVector.korobov(int(spec.split(":", 1)[1]), N, dims), None
    if spec == "cbc" or gamma is not None:
        res = cbc.cbc_search(cbc.WeightedSearchSpec(N, dims, tuple(np.ones(dims) if gamma is None else gamma)))
        return res.vector, res.to_dict()
    if spec == "table":
        gv = cbc.table_lookup(N, dims)
        if gv is not None:
            return gv, None
        res = cbc.cbc_search(cbc.WeightedSearchSpec.unweighted(N, dims))
        return res.vector, res.to_dict()
    raise SystemExit(f"unknown generator {spec!r}; use table, cbc or korobov:<g>")


def cmd_lattice(args) -> int:
    out = Path(args.out_dir)
    gamma = _weights(args.weights, args.dims)
    gv, searched = _generator(args.generator, args.N, args.dims, gamma)
    box = Box.unit(args.dims)
    ps = make_korobov(args.N, gv, box, budget=args.budget)
    record = searched or {"N": gv.modulus, "s": gv.dims, "z": list(gv.components),
                          "gamma": None if gamma is None else [float(g) for g in gamma]}
    (out / "vector.json").write_text(json.dumps(record, indent=2) + "\n")
    write_csv(ps, out / "points.csv")
    write_binary(ps, out / "points.bin")
    print(f"z = {list(gv.components)}")
    print(f"wrote {out / 'vector.json'}, {out / 'points.csv'}, {out / 'points.bin'}")
    return 0


def cmd_estimate(args) -> int:
    out = Path(args.out_dir)
    target = resolve(args.target)
    size = args.n if args.points in ("grid", "chebyshev") else args.N
    if size is None:
        raise SystemExit("grid point sets need --n; lattice and random sets need --N")
    method = "korobov-weighted" if args.points == "korobov" and args.weights not in (None, "uniform") else args.points
    spec = bench_mod.RunSpec(method, size)
    gamma = _weights(args.weights, target.dims, target) if method == "korobov-weighted" else None
    ps = bench_mod.build_pointset(target, spec, seed=args.seed, gamma=gamma, budget=args.budget)
    axes = None if args.axes is None else [int(a) - 1 for a in args.axes.split(",")]
    _, results = bench_mod.estimate(target, ps, axes=axes, parts=args.parts)
    rows = []
    for r in results:
        r.fit.to_json(out / f"fit_axis{r.axis + 1}.json")
        r.estimate.to_csv(out / f"marginal_axis{r.axis + 1}.csv")
        rows.append((target.name, r.axis + 1, spec.label, ps.N, "hellinger", r.hellinger))
        rows.append((target.name, r.axis + 1, spec.label, ps.N, "sup_error", r.sup_error))
        print(f"axis {r.axis + 1:>2}  hellinger {r.hellinger:.4f}  sup_error {r.sup_error:.4g}")
    write_scores(rows, out / "scores.csv")
    return 0


def cmd_fanova(args) -> int:
    out = Path(args.out_dir)
    target = resolve(args.target)
    if target.factorization is None:
        raise SystemExit(f"target {target.name!r} has no likelihood factorization")
    anchor = None if args.anchor is None else np.array([float(x) for x in args.anchor.split(",")])
    rep = variance_report(target.factorization, anchor, method=args.method)
    rep.to_json(out / "variance_report.json")
    print(rep.weights_table())
    return 0


def cmd_bench(args) -> int:
    out = Path(args.out_dir)
    target = resolve(args.target)
    matrix = None if not args.runs else [bench_mod.RunSpec.parse(r) for r in args.runs]

    def progress(res):
        log.info("%s done (%d evaluations)", res.spec.label, res.N)

    results, percent = bench_mod.bench(target, matrix, seed=args.seed, parts=args.parts,
                                       budget=args.budget, progress=progress)
    bench_mod.write_bench_csv(results, percent, out / "bench.csv", timing=args.timing)
    if args.timing:
        timings = {r.spec.label: r.timings_ms for r in results}
        (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    if args.series:
        rows = bench_mod.convergence_series(target)
        bench_mod.write_series_csv(rows, out / "convergence.csv")
    for r in results:
        hs = ", ".join(f"{a.hellinger:.3f}" for a in r.axes)
        print(f"{r.spec.label:<24} N={r.N:<8} hellinger: {hs}")
    return 0


def cmd_discrepancy(args) -> int:
    if args.points:
        path = Path(args.points)
        u = read_binary(path) if path.suffix == ".bin" else read_csv(path)
    else:
        if args.N is None or args.dims is None:
            raise SystemExit("give --points FILE or --N and --dims")
        gv, _ = _generator(args.generator, args.N, args.dims, None)
        u = make_korobov(args.N, gv, Box.unit(args.dims), budget=args.budget).unit_points()
    d = star_discrepancy(u, seed=args.seed)
    kind = "exact" if d.exact else "lower bound"
    print(f"star discrepancy ({kind}): {d.value:.6g}")
    out = Path(args.out_dir)
    (out / "discrepancy.json").write_text(json.dumps({"value": d.value, "exact": d.exact}) + "\n")
    return 0


def _add_global_flags(p: argparse.ArgumentParser, suppress: bool = False) -> None:
    # verbs repeat the global flags with suppressed defaults so they may follow the verb
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="seed for random point sets and sampling")
    p.add_argument("--budget", type=_int_expr, default=d(None), help="maximum number of density evaluations")
    p.add_argument("--out-dir", default=d("."), help="directory for output files")
    p.add_argument("--threads", type=int, default=d(None), help="worker threads for the lattice search")
    p.add_argument("--config", default=d(None), help="JSON file of option defaults for the verb")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmcm", description=__doc__.splitlines()[0])
    _add_global_flags(p)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="verb", required=True)

    q = sub.add_parser("lattice", parents=[common], help="build a rank-1 lattice and write its points")
    q.add_argument("--N", type=_int_expr, required=False)
    q.add_argument("--dims", type=int, required=False)
    q.add_argument("--weights", default="uniform", help="uniform, from:<variance_report.json> or a comma list")
    q.add_argument("--generator", default="table", help="table, cbc or korobov:<g>")
    q.set_defaults(func=cmd_lattice, required=("N", "dims"))

    q = sub.add_parser("estimate", parents=[common], help="fit marginals of a target on one point set")
    q.add_argument("--target", required=False, help=f"preset ({', '.join(preset_names())})")
    q.add_argument("--points", default="korobov", choices=("korobov", "grid", "chebyshev", "random"))
    q.add_argument("--N", type=_int_expr, default=None)
    q.add_argument("--n", type=int, default=None, help="nodes per axis for grids")
    q.add_argument("--parts", type=int, default=None, help="slabs per axis for lattice and random sets")
    q.add_argument("--axes", default=None, help="comma list of 1-based axes (default all)")
    q.add_argument("--weights", default=None, help="fanova, from:<report.json> or a comma list")
    q.set_defaults(func=cmd_estimate, required=("target",))

    q = sub.add_parser("fanova", parents=[common], help="anchored variance components and importances")
    q.add_argument("--target", required=False)
    q.add_argument("--anchor", default=None, help="comma list; default is the posterior mode")
    q.add_argument("--method", default="auto", choices=("auto", "closed", "numeric"))
    q.set_defaults(func=cmd_fanova, required=("target",))

    q = sub.add_parser("bench", parents=[common], help="run a matrix of point sets and write one CSV")
    q.add_argument("--target", required=False)
    q.add_argument("--runs", nargs="*", default=None, help="cells like korobov:2^17 grid:5 korobov-weighted:2^16")
    q.add_argument("--parts", type=int, default=None)
    q.add_argument("--series", action="store_true", help="also write the (n, m) convergence series")
    q.add_argument("--timing", action="store_true", help="fill wall_ms and write timings.json")
    q.set_defaults(func=cmd_bench, required=("target",))

    q = sub.add_parser("discrepancy", parents=[common], help="star discrepancy of a point file or lattice")
    q.add_argument("--points", default=None, help="points.csv or points.bin in unit coordinates")
    q.add_argument("--N", type=_int_expr, default=None)
    q.add_argument("--dims", type=int, default=None)
    q.add_argument("--generator", default="table")
    q.set_defaults(func=cmd_discrepancy, required=())
    return p


def _apply_config(parser: argparse.ArgumentParser, argv, args):
    """Re-parse with defaults from the config file so explicit flags win.

    The file is either flat or keyed by verb (``{"bench": {...}}``).
    """
    with open(args.config) as fh:
        cfg = json.load(fh)
    verb_cfg = cfg.get(args.verb, cfg)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.verb]
    top_keys = {a.dest for a in parser._actions} - {"help", "verb"}
    sub_keys = {a.dest for a in sub._actions} - {"help"} - top_keys
    unknown = set(verb_cfg) - sub_keys - top_keys
    if unknown:
        raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
    sub.set_defaults(**{k: v for k, v in verb_cfg.items() if k in sub_keys})
    parser.set_defaults(**{k: v for k, v in verb_cfg.items() if k in top_keys})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if args.config:
        args = _apply_config(parser, argv, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    missing = [r for r in args.required if getattr(args, r, None) is None]
    if missing:
        parser.error(f"{args.verb} needs --{' --'.join(missing)} (flag or config)")
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    try:
        return int(args.func(args) or 0)
    except (ValueError, KeyError, OSError) as exc:
        # CapacityError and SearchBudgetError are ValueErrors
        print(f"qmcm {args.verb}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
