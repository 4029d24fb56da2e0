"""Command line front end.

Run subcommands execute one experiment kind and persist every table to
``--out`` as CSV, together with the resolved configuration (config.json)
and a per-cell status log (runs.csv).  ``fit`` recomputes the fit
columns of a persisted two-vector sweep without re-simulating; ``plot``
renders figures from persisted CSV only.

Exit codes: 0 success, 2 configuration or input error, 3 at least one
cell diverged and nothing else failed, 4 internal failure.
"""

import argparse
import dataclasses
import json
import os
import sys

from ..errors import ConfigError, DriftlabError, FormatError
from .config import ExperimentConfig, config_hash, default_config, from_mapping, load_config
from .experiments import run_experiment, uv_summary_from_cells
from .plots import ENTRY_TABLE, emit_plots
from .sweep import write_csv, write_run_log

# subcommand -> experiment kind
_RUN_COMMANDS = {
    "uv-timescale": "uv-timescale",
    "matrix-sensing": "matrix-sensing",
    "spectral": "spectral-report",
    "drift-compare": "drift-compare",
    "beta-star": "beta-star-protocol",
}

_UV_SUMMARY_FIELDS = [
    "gamma",
    "scaling_constant",
    "eta",
    "t_c",
    "r_squared",
    "alpha",
    "t0",
    "fit_residual",
    "alpha_theory",
]


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="JSON config file; defaults are used when omitted")
    p.add_argument("--out", metavar="DIR", help="output directory (default runs/<kind>)")
    p.add_argument("--seed", type=int, default=2, metavar="U64", help="base seed for all cell streams")
    p.add_argument("--parallelism", type=int, default=1, metavar="N", help="worker threads for sweep cells")
    p.add_argument("--paper-scale", action="store_true", help="full-size matrix sensing (slow)")


def build_parser():
    parser = argparse.ArgumentParser(prog="driftlab", description="label-noise momentum drift laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _RUN_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {kind} experiment")
        _add_common(p)
        p.set_defaults(kind=kind)
    p = sub.add_parser("fit", help="recompute fit columns from a persisted uv-timescale sweep")
    p.add_argument("--out", required=True, metavar="DIR", help="results directory holding cells.csv")
    p = sub.add_parser("plot", help="render figures from a persisted results directory")
    p.add_argument("--out", required=True, metavar="DIR", help="results directory to read and write")
    p.add_argument("--kind", choices=sorted(ENTRY_TABLE), help="override the kind recorded in config.json")
    return parser


def _load(args):
    if args.config:
        cfg = load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.kind!r}")
    else:
        cfg = from_mapping(default_config(args.kind))
    if args.paper_scale:
        cfg = dataclasses.replace(cfg, paper_scale=True)
    return cfg


def _dump_config(cfg: ExperimentConfig, path):
    blob = {k: v for k, v in dataclasses.asdict(cfg).items()}
    with open(path, "w") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_table(path):
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return reader.fieldnames or [], list(reader)


def _cmd_run(args):
    cfg = _load(args)
    out_dir = args.out or os.path.join("runs", args.kind)
    os.makedirs(out_dir, exist_ok=True)
    result = run_experiment(cfg, base_seed=args.seed, parallelism=args.parallelism)

    _dump_config(cfg, os.path.join(out_dir, "config.json"))
    for name, (fields, rows) in result.tables.items():
        write_csv(os.path.join(out_dir, f"{name}.csv"), fields, rows)
    write_run_log(
        os.path.join(out_dir, "runs.csv"),
        result.outcomes,
        {"kind": cfg.kind, "config_hash": config_hash(cfg), "seed": args.seed},
    )

    n_div = sum(1 for o in result.outcomes if o.status == "diverged")
    n_fail = sum(1 for o in result.outcomes if o.status == "failed")
    print(f"{cfg.kind}: {len(result.outcomes)} cells -> {out_dir} (config {config_hash(cfg)})")
    for key, value in sorted(result.meta.items()):
        if isinstance(value, (int, float, str, bool)):
            print(f"  {key}: {value}")
    if n_div or n_fail:
        print(f"  diverged cells: {n_div}, failed cells: {n_fail}", file=sys.stderr)
        return 4 if n_fail else 3
    return 0


def _cmd_fit(args):
    cfg_path = os.path.join(args.out, "config.json")
    cells_path = os.path.join(args.out, "cells.csv")
    if not os.path.exists(cfg_path) or not os.path.exists(cells_path):
        raise ConfigError(f"{args.out} does not hold config.json and cells.csv")
    with open(cfg_path) as fh:
        cfg = from_mapping(json.load(fh), where=cfg_path)
    if cfg.kind != "uv-timescale":
        raise ConfigError(f"fit expects a uv-timescale results directory, found kind {cfg.kind!r}")

    _, raw = _read_table(cells_path)
    rows = []
    for r in raw:
        if r.get("t_c"):
            rows.append(
                {
                    "gamma": float(r["gamma"]),
                    "eta": float(r["eta"]),
                    "t_c": float(r["t_c"]),
                    "r_squared": float(r["r_squared"]) if r.get("r_squared") else None,
                }
            )
    summary_rows, _, fits = uv_summary_from_cells(rows, cfg.gammas, cfg.eta_grid, cfg.scaling_constant)
    write_csv(os.path.join(args.out, "summary.csv"), _UV_SUMMARY_FIELDS, summary_rows)
    print(f"refit {len(rows)} cells -> {os.path.join(args.out, 'summary.csv')}")
    for gamma, pl in sorted(fits.items()):
        print(f"  gamma={gamma:g}: alpha={pl.alpha:.4f} t0={pl.t0:.4g}")
    return 0


def _cmd_plot(args):
    kind = args.kind
    if kind is None:
        cfg_path = os.path.join(args.out, "config.json")
        if not os.path.exists(cfg_path):
            raise ConfigError(f"{args.out} has no config.json; pass --kind explicitly")
        with open(cfg_path) as fh:
            kind = json.load(fh).get("kind")
        if kind not in ENTRY_TABLE:
            raise ConfigError(f"config.json in {args.out} names unknown kind {kind!r}")
    entry = os.path.join(args.out, f"{ENTRY_TABLE[kind]}.csv")
    if not os.path.exists(entry):
        raise FormatError(f"{entry} not found; run the {kind} experiment first")
    for path in emit_plots(entry, kind, args.out):
        print(path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "plot":
            return _cmd_plot(args)
        return _cmd_run(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DriftlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
