"""Reservoir-computing synchronization experiments from the command line.

    rcsync run        one seeded run: records, summary, mfnn and replica CSVs
    rcsync sweep      spectral radius / input scaling sweep with repetitions
    rcsync ergodicity score one trained readout on fresh trajectories
    rcsync replica    replica divergence series only
    rcsync mfnn       per-sample MFNN values only

Every command writes ``manifest.json`` next to its CSVs.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config, serialize, to_mapping
from .experiments import (
    ExperimentConfig,
    aggregate,
    ergodicity_check,
    run_task,
    sweep,
)
from .io import write_records, write_rows, write_summary

OUT_DIR_ENV = "RCSYNC_OUT_DIR"
DEFAULT_OUT_DIR = "rcsync-out"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcsync", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rcsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="experiment config file (defaults when omitted)")
        p.add_argument("--seed", type=int, help="root seed, overrides root_seed in the config")
        p.add_argument("--out-dir", type=Path, help=f"output directory (env {OUT_DIR_ENV})")
        p.add_argument("--threads", type=int, default=None, help="worker processes for sweeps")
        return p

    common(sub.add_parser("run", help="single run"))
    sw = common(sub.add_parser("sweep", help="hyperparameter sweep"))
    sw.add_argument("--param", required=True, choices=["spectral_radius", "input_scaling"])
    sw.add_argument("--values", required=True, type=_values)
    er = common(sub.add_parser("ergodicity", help="fresh-trajectory check"))
    er.add_argument("--n-fresh", type=int, default=5)
    common(sub.add_parser("replica", help="replica divergence"))
    common(sub.add_parser("mfnn", help="MFNN per sample"))
    return parser


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config is not None else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = replace(cfg, root_seed=args.seed)
    return cfg


def _cmd_run(cfg, args, out: Path) -> list[str]:
    outcome = run_task(cfg)
    write_records(out / "records.csv", [outcome.record])
    write_summary(out / "summary.csv", aggregate([outcome.record]))
    outcome.mfnn.to_csv(out / "mfnn.csv")
    outcome.replica.to_csv(out / "replica.csv")
    return ["records.csv", "summary.csv", "mfnn.csv", "replica.csv"]


def _cmd_sweep(cfg, args, out: Path) -> list[str]:
    records = sweep(cfg, args.param, args.values, threads=args.threads)
    write_records(out / "records.csv", records)
    write_summary(out / "summary.csv", aggregate(records))
    return ["records.csv", "summary.csv"]


def _cmd_ergodicity(cfg, args, out: Path) -> list[str]:
    report = ergodicity_check(cfg, args.n_fresh)
    rows = [dict(trajectory="original", rmse=report.original_rmse, ratio=1.0)]
    rows += [dict(trajectory=str(i), rmse=e, ratio=r)
             for i, (e, r) in enumerate(zip(report.fresh_rmse, report.ratios))]
    write_rows(out / "ergodicity.csv", ["trajectory", "rmse", "ratio"], rows)
    print(f"ergodicity check {'passed' if report.passed else 'failed'}: ratios "
          + ", ".join(f"{r:.3f}" for r in report.ratios))
    return ["ergodicity.csv"]


def _cmd_replica(cfg, args, out: Path) -> list[str]:
    run_task(cfg).replica.to_csv(out / "replica.csv")
    return ["replica.csv"]


def _cmd_mfnn(cfg, args, out: Path) -> list[str]:
    run_task(cfg).mfnn.to_csv(out / "mfnn.csv")
    return ["mfnn.csv"]


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "ergodicity": _cmd_ergodicity,
    "replica": _cmd_replica,
    "mfnn": _cmd_mfnn,
}


def _write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if getattr(args, "n_fresh", 1) < 1:
            raise ConfigError("--n-fresh must be >= 1")
    except ConfigError as exc:
        print(f"rcsync: error: {exc}", file=sys.stderr)
        return 2

    out = args.out_dir or Path(os.environ.get(OUT_DIR_ENV, DEFAULT_OUT_DIR))
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "rcsync",
        "version": __version__,
        "command": args.command,
        "arguments": {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items()
            if k not in ("command", "out_dir", "config")
        },
        "config": to_mapping(cfg),
        "config_text": serialize(cfg),
        "root_seed": cfg.root_seed,
        "started": _now(),
    }
    before = {p.name for p in out.iterdir()}
    try:
        files = COMMANDS[args.command](cfg, args, out)
    except Exception as exc:
        partial = sorted({p.name for p in out.iterdir()} - before - {"manifest.json"})
        manifest.update(finished=_now(), status="failed", error=f"{type(exc).__name__}: {exc}",
                        outputs=partial)
        _write_manifest(out, manifest)
        print(f"rcsync: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    manifest.update(finished=_now(), status="ok", outputs=files)
    _write_manifest(out, manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
