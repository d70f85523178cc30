"""Command line entry point: ``rrgperc run ...`` and ``rrgperc predict ...``."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import walk_theory as wt
from .errors import RRGPercError
from .excursion_oracle import write_cdf_csv
from .harness import (
    MODES, ExperimentConfig, clt_path_check, compare_window, prop1_bounds_check, run_sweep,
    window_tail_fit,
)


def _parser():
    ap = argparse.ArgumentParser(prog="rrgperc", description="Percolation experiments on random regular graphs.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded Monte Carlo sweep and print a summary report")
    run.add_argument("--mode", choices=MODES, required=True)
    run.add_argument("--n", type=int, default=0)
    run.add_argument("--d", type=int, default=3)
    g = run.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--epsilon", dest="eps", type=float)
    run.add_argument("--p", type=float, help="explicit edge probability (must agree with lambda/epsilon if both given)")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--graph", choices=("multigraph", "simple", "circulant"), default="multigraph")
    run.add_argument("--top-m", type=int, default=4)
    run.add_argument("--ds", type=float, default=1e-3)
    run.add_argument("--smax", type=float, default=20.0)
    run.add_argument("--out", help="JSONL results file (default: $RRGPERC_OUTPUT_DIR/<mode>_n<n>_d<d>_seed<seed>.jsonl)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--diameter", action="store_true")
    run.add_argument("--stride", type=int, default=0, help="dump (t, Y_t) every STRIDE steps per trial")
    run.add_argument("--explore-cap", type=float, help="stop after S*n^(2/3) steps (first component end)")
    run.add_argument("--s-points", type=float, nargs="+", default=[1.0])
    run.add_argument("--oracle-trials", type=int, default=0, help="critical mode: compare against this many oracle paths")
    run.add_argument("--A", type=float, nargs="+", default=[4.0, 6.0], help="prop1 mode: thresholds A")
    run.add_argument("--no-resume", action="store_true")

    pr = sub.add_parser("predict", help="print the closed-form prediction table as CSV")
    pr.add_argument("--n", type=float, nargs="+", required=True)
    pr.add_argument("--d", type=int, nargs="+", default=[3])
    g = pr.add_mutually_exclusive_group(required=True)
    g.add_argument("--epsilon", dest="eps", type=float, nargs="+",
                   help="negative values give subcritical rows")
    g.add_argument("--lambda", dest="lam", type=float, nargs="+")
    return ap


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if k != "cdf"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _summary(cfg, records, args):
    if cfg.mode == "critical":
        out = {"tail": window_tail_fit(records, cfg.n), "clt": clt_path_check(cfg, records)}
        if args.oracle_trials > 0:
            dest = cfg.output_path()
            cdf_dir = dest.with_suffix("") if dest is not None else None
            out["window"] = compare_window(cfg, records, oracle_trials=args.oracle_trials, cdf_dir=cdf_dir)
        return out
    if cfg.mode == "cltpath":
        return clt_path_check(cfg, records)
    if cfg.mode == "prop1":
        return prop1_bounds_check(cfg, records, A_values=args.A)
    c1 = np.array([r.sizes[0] for r in records], dtype=float) if records else np.zeros(0)
    if cfg.mode == "subcritical":
        pred = wt.predict_subcritical(cfg.n, cfg.d, cfg.eps)
        return {"median_C1": float(np.median(c1)) if c1.size else None, "predicted": pred}
    if cfg.mode == "supercritical":
        m1 = np.array([r.M1 for r in records], dtype=float)
        rem = np.array([r.remainder_sizes[0] if r.remainder_sizes else 0 for r in records], dtype=float)
        return {
            "mean_C1": float(c1.mean()) if c1.size else None,
            "mean_M1": float(m1.mean()) if m1.size else None,
            "giant_rate": float(np.mean([r.giant_ok for r in records])) if records else None,
            "median_remainder_C1": float(np.median(rem)) if rem.size else None,
            "predicted": {"C1": wt.predict_giant(cfg.n, cfg.d, cfg.eps),
                          "M1": wt.predict_damage(cfg.n, cfg.d, cfg.eps),
                          "C2": wt.predict_second(cfg.n, cfg.d, cfg.eps)},
        }
    # excursion
    gam = np.array([r.sizes for r in records], dtype=float)
    dest = cfg.output_path()
    if dest is not None and gam.size:
        write_cdf_csv(gam[:, 0], dest.with_name(dest.stem + "_gamma1_cdf.csv"))
    return {
        "median": np.median(gam, axis=0).tolist() if gam.size else [],
        "truncation_rate": float(np.mean([r.truncated for r in records])) if records else 0.0,
    }


def _run(args):
    cfg = ExperimentConfig(
        mode=args.mode, n=args.n, d=args.d, lam=args.lam, eps=args.eps, p=args.p, trials=args.trials,
        master_seed=args.seed, graph_mode=args.graph, top_m=args.top_m, ds=args.ds, s_max=args.smax,
        out=args.out, stride=args.stride, diameter=args.diameter, workers=args.workers,
        explore_cap=args.explore_cap, s_points=tuple(args.s_points),
    )
    records = run_sweep(cfg, resume=not args.no_resume)
    report = {"mode": cfg.mode, "trials": len(records), "output": str(cfg.output_path() or ""),
              "report": _summary(cfg, records, args)}
    print(json.dumps(_jsonable(report), indent=2))


def _predict(args):
    rows = []
    for n in args.n:
        for d in args.d:
            for v in (args.eps or args.lam):
                if args.eps is not None:
                    rows.append(wt.regime_prediction(int(n), d, eps=v))
                else:
                    rows.append(wt.regime_prediction(int(n), d, lam=v))
    sys.stdout.write(wt.prediction_table(rows))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            _run(args)
        else:
            _predict(args)
    except RRGPercError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
