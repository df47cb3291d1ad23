"""Command-line surface: run, chsh, sweep, control, classify.

Every subcommand accepts --config/--seed/--shards/--out/--format. Results go
to --out (or stdout) with a companion manifest; failures exit nonzero with a
one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as fio
from ._version import __version__
from .config import (
    ChshJob,
    ClassifyJob,
    ControlJob,
    RunJob,
    SweepJob,
    config_digest,
    parse_config,
)
from .engine import run_batch, run_events
from .errors import FairbellError
from .protocol import classify as classify_sweep
from .protocol import run_sweep, singlet_control
from .stats import chsh


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="YAML/JSON config document")
    sub.add_argument("--seed", type=int, default=None, help="override the run seed")
    sub.add_argument("--shards", type=int, default=None, help="worker shard count (scheduling only)")
    sub.add_argument("--out", type=Path, default=None, help="output path (default stdout)")
    sub.add_argument("--format", choices=("csv", "jsonl"), default="csv", dest="fmt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairbell",
        description="Monte Carlo fair-sampling tests for two-channel Bell experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("run", help="one batch at a single analyzer setting")
    _add_common(p)
    p.add_argument("--events", type=Path, default=None, help="also write a per-trial event log")

    _add_common(subs.add_parser("chsh", help="CHSH S over the four setting pairs"))
    _add_common(subs.add_parser("sweep", help="theta sweep of the detected rate"))
    _add_common(subs.add_parser("control", help="singlet-source R_d across settings"))

    p = subs.add_parser("classify", help="re-analyze a stored sweep CSV")
    p.add_argument("sweep_csv", type=Path, help="sweep table produced by the sweep command")
    _add_common(p)
    return parser


def _load_doc(path: Path | None) -> str | None:
    if path is None:
        return None
    return path.read_text(encoding="utf-8")


def _manifest(job) -> fio.RunManifest:
    return fio.build_manifest(
        config_digest(job.resolved), job.resolved["seed"], job.resolved["shards"]
    )


def _dispatch(args: argparse.Namespace) -> None:
    doc = _load_doc(args.config)
    job = parse_config(doc, mode=args.command, seed=args.seed, shards=args.shards)
    manifest = _manifest(job)

    if isinstance(job, RunJob):
        if args.events is not None:
            records = run_events(job.config)
            fio.write_event_log(records, args.events)
            counts = records.counts()
        else:
            counts = run_batch(job.config)
        fio.write_results(counts, manifest, args.out, args.fmt)
    elif isinstance(job, ChshJob):
        result = chsh(job.config, job.a, job.a_prime, job.b, job.b_prime)
        fio.write_results(result, manifest, args.out, args.fmt)
    elif isinstance(job, SweepJob):
        result = run_sweep(job.plan)
        fio.write_results(result, manifest, args.out, args.fmt)
    elif isinstance(job, ControlJob):
        report = singlet_control(job.config, job.phi_pairs)
        fio.write_results(report, manifest, args.out, args.fmt)
    elif isinstance(job, ClassifyJob):
        sweep = fio.read_sweep_csv(args.sweep_csv)
        verdict = classify_sweep(sweep, job.thresholds)
        fio.write_results(verdict, manifest, args.out, args.fmt)
    else:  # pragma: no cover
        raise FairbellError(f"unhandled job type {type(job).__name__}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except FairbellError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "OSError", "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
