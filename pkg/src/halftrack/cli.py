"""Command line entry point: ``halftrack {parse,run,sweep}``.

Exit codes: 0 success, 1 validation error, 2 sweep finished with failed cells.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bench import ExperimentSpec, emit_csv, emit_plot_series, published_tables_path, run_experiment
from .core import Bounds, TrackerConfig
from .dataio import DEFAULT_LAYOUT, LAYOUTS, load_orlib, split, to_returns
from .errors import HalftrackError
from .pipeline import MODELS, track

log = logging.getLogger("halftrack")

EXIT_OK, EXIT_INVALID, EXIT_CELL_FAILURES = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = os.environ.get("HALFTRACK_LOG", "warn").lower()
    logging.basicConfig(
        level=LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--rule", choices=["recompute", "monotone-min"], default="recompute")
    p.add_argument("--init", choices=["uniform", "seeded-random"], default="uniform")
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--refine", action="store_true")
    p.add_argument("--split-count", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halftrack", description="Sparse index tracking portfolios.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse an OR-Library file and print its shape")
    p.add_argument("--input", required=True)
    p.add_argument("--layout", choices=LAYOUTS, default=DEFAULT_LAYOUT)

    p = sub.add_parser("run", help="track one dataset with one model")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", choices=LAYOUTS, default=DEFAULT_LAYOUT)
    p.add_argument("--model", choices=MODELS, default="l12")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="write the result record as JSON")
    _config_args(p)

    p = sub.add_parser("sweep", help="run a (dataset x K x model) grid and write CSV tables")
    p.add_argument("--data", required=True, help="comma separated OR-Library paths")
    p.add_argument("--layout", choices=LAYOUTS, default=DEFAULT_LAYOUT)
    p.add_argument("--k-min", type=int, default=5)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--k-step", type=int, default=1)
    p.add_argument("--models", default="l12,l1")
    p.add_argument("--csv", required=True)
    p.add_argument("--plot-dir", default=None)
    p.add_argument("--reference", default=None,
                   help="table constants CSV for the supo column ('published' for the shipped tables)")
    p.add_argument("--reference-model", default="evolutionary")
    p.add_argument("--seeds", default="42")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record runtime_ms (output no longer reproducible)")
    _config_args(p)
    return parser


def _config(args, k: int, seed: int = 42) -> TrackerConfig:
    return TrackerConfig(
        k=k,
        bounds=Bounds(args.eta, args.delta),
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        rule=args.rule,
        init=args.init,
        seed=seed,
        refine=args.refine,
    )


def cmd_parse(args) -> int:
    panel = load_orlib(args.input, args.layout)
    data = to_returns(panel)
    r = data.index_returns
    print(f"dataset     {panel.source_name}")
    print(f"layout      {args.layout}")
    print(f"N           {panel.n_stocks}")
    print(f"T_p         {panel.n_periods}")
    print(f"returns     {data.n_periods}")
    print(f"default split {data.n_periods // 2}/{data.n_periods - data.n_periods // 2}")
    print(f"index return mean {r.mean():.6e} std {r.std(ddof=1):.6e}")
    print(f"stock return mean {data.stock_returns.mean():.6e} std {data.stock_returns.std(ddof=1):.6e}")
    print(f"price range [{min(panel.index_prices.min(), panel.stock_prices.min()):.6g}, "
          f"{max(panel.index_prices.max(), panel.stock_prices.max()):.6g}]")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args, args.k, args.seed)
    data = split(to_returns(load_orlib(args.data, args.layout)), args.split_count)
    res = track(args.model, data, cfg, jobs=args.jobs)
    record = {
        "dataset": Path(args.data).stem,
        "layout": args.layout,
        "k": cfg.k,
        "train_rows": data.train_rows,
        "test_rows": data.test_rows,
        "config": {
            "eta": cfg.bounds.eta, "delta": cfg.bounds.delta, "epsilon": cfg.epsilon,
            "rule": cfg.rule, "init": cfg.init, "seed": cfg.seed, "max_iters": cfg.max_iters,
            "refine": cfg.refine,
        },
        **res.to_dict(),
    }
    text = json.dumps(record, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(f"{record['dataset']} {res.model} K={cfg.k}: TEI={res.tei:.5e} TEO={res.teo:.5e} "
          f"Cons={res.cons:.5e} support={res.support}")
    if res.flags:
        print("flags: " + ", ".join(res.flags))
    return EXIT_OK


def cmd_sweep(args) -> int:
    paths = [p for p in args.data.split(",") if p]
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(p)
    seeds = _int_list(args.seeds)
    reference = args.reference
    if reference == "published":
        reference = str(published_tables_path())
    template = _config(args, args.k_min, seeds[0] if seeds else 42)
    spec = ExperimentSpec(
        datasets=[(p, args.layout) for p in paths],
        k_values=list(range(args.k_min, args.k_max + 1, args.k_step)),
        models=[m for m in args.models.split(",") if m],
        cfg=template,
        reference_table=reference,
        reference_model=args.reference_model,
        seeds=seeds,
        split_count=args.split_count,
    )
    rows = run_experiment(spec, jobs=args.jobs)
    emit_csv(rows, args.csv, timing=args.timing)
    if args.plot_dir:
        emit_plot_series(rows, args.plot_dir)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"FAILED {r.dataset} K={r.k} {r.model} seed={r.seed}: {r.error}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.csv}")
    return EXIT_CELL_FAILURES if failed else EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    handler = {"parse": cmd_parse, "run": cmd_run, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except (HalftrackError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
