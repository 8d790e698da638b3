"""Command line entry point: ``python -m inhomdiff <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .config import load
from .errors import InhomDiffError


def _theory(args):
    from .theory import check_structural_lemmas, classify, threshold_sweep

    spec = load(args.config)
    rep = classify(spec.bundle, spec.p, spec.m)
    out = rep.to_dict()
    if spec.p < spec.N:
        lemmas = check_structural_lemmas(spec.bundle, spec.p, rep.assumptions)
        out["lemmas"] = {c.id: {"passed": c.passed, "constant": c.fitted_constant}
                         for c in lemmas.values()}
    text = json.dumps(out, indent=2, default=str)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    if args.csv:
        alphas = ([float(a) for a in args.alphas.split(",")] if args.alphas
                  else np.round(np.arange(0.0, 3.01, 0.25), 10).tolist())
        rows = threshold_sweep(lambda a: spec.replace(alpha=a).bundle, spec.p, spec.m, alphas)
        with open(args.csv, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
            wr.writeheader()
            wr.writerows(rows)


def _geometry(args):
    spec = load(args.config)
    spec.bundle.to_csv(args.out, spec.p, spec.m)


def _simulate(args):
    from .solver import RadialState, init_bump, run

    spec = load(args.config)
    cfg = spec.solver_config()
    if args.restore:
        state = RadialState.from_json(args.restore, spec.bundle)
    else:
        grid = cfg.make_grid(spec.bundle)
        state = init_bump(grid, spec.option("R0", 1.0), spec.option("mass", 1.0),
                          eps_supp=cfg.eps_supp)
    if args.observe_every:
        rs = run(state, cfg, args.t_end, observe_every=args.observe_every)
    else:
        t_first = max(state.t, spec.option("t_first", 1e-2))
        n = int(spec.option("obs_per_decade", 10) * max(1.0, np.log10(args.t_end / t_first))) + 1
        times = np.geomspace(t_first, args.t_end, n) if args.t_end > t_first else [args.t_end]
        rs = run(state, cfg, args.t_end, times=times)
    rs.to_csv(args.out)
    if args.checkpoint:
        rs.final.to_json(args.checkpoint)
    for w in rs.warnings:
        print(f"warning: {w}", file=sys.stderr)


def _inequalities(args):
    from .inequalities import bump_family, run_suite, write_report

    spec = load(args.config)
    opts = spec.inequalities
    if args.family != "bumps100":
        raise InhomDiffError(f"unknown family {args.family!r}")
    fam = bump_family(spec.bundle, n=opts.get("n", 100), seed=opts.get("seed", 0),
                      R_max=opts.get("R_max", 20.0), K=opts.get("K", 1024))
    recs = run_suite(fam, spec.p, opts.get("r", 1.0), opts.get("s", 2.5))
    write_report(recs, args.out, {"family": args.family, "config_hash": spec.config_hash})


def _experiment(args):
    from .harness import run_experiment

    res = run_experiment(args.name, load(args.config), args.out)
    summary = {k: v["passed"] for k, v in res.verdicts.items()}
    print(json.dumps({"experiment": args.name, "passed": res.passed, "verdicts": summary}))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inhomdiff", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="exponents, regime flags and assumption checks")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.add_argument("--csv", help="write an alpha sweep of the regime flags")
    p.add_argument("--alphas", help="comma separated alphas for --csv")
    p.set_defaults(func=_theory)

    p = sub.add_parser("geometry", help="tabulate r, V, h, omega, vol_rho, psi")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_geometry)

    p = sub.add_parser("simulate", help="evolve a bump and write the time series")
    p.add_argument("--config", required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--observe-every", type=float)
    p.add_argument("--checkpoint", help="write the final state as JSON")
    p.add_argument("--restore", help="start from a JSON checkpoint")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("inequalities", help="empirical inequality constants")
    p.add_argument("--config", required=True)
    p.add_argument("--family", default="bumps100")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_inequalities)

    p = sub.add_parser("experiment", help="run a theory-vs-solver experiment")
    p.add_argument("name", choices=["decay", "fsp", "universal", "blowup", "barenblatt"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InhomDiffError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
