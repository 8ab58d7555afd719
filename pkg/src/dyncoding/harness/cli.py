"""Command line: ``run``, ``accept`` and ``trace``."""

from __future__ import annotations

import argparse
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

from ..simulator import InvalidConfig, format_trace, run_trial, with_seed
from .config import load_spec
from .experiment import rows_to_csv, run_experiment


def _cmd_run(args) -> int:
    spec = load_spec(args.spec)
    rows, _ = run_experiment(spec, jobs=args.jobs, master_seed=args.seed, out=args.out)
    if args.out is None and spec.out is None:
        sys.stdout.write(rows_to_csv(rows))
    return 0


def _cmd_trace(args) -> int:
    spec = load_spec(args.spec)
    points = spec.points()
    if len(points) != 1:
        raise InvalidConfig("spec", f"trace needs a single sweep point, got {len(points)}")
    cfg = points[0][1]
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    record = run_trial(replace(cfg, trace=True))
    text = format_trace(record)
    summary = (
        f"# completion={record.completion_round} termination={record.self_termination_round} "
        f"bits={record.total_bits_sent} failure={record.failure_reason}\n"
    )
    if args.out:
        Path(args.out).write_text(text + summary)
    else:
        sys.stdout.write(text + summary)
    return 0


def _cmd_accept(args) -> int:
    suite = Path(__file__).resolve().parents[3] / "tests" / "test_acceptance.py"
    if not suite.exists():
        print(f"acceptance suite not found at {suite}", file=sys.stderr)
        return 1
    cmd = [sys.executable, "-m", "pytest", str(suite), "-q"]
    if args.out:
        cmd.append(f"--junitxml={args.out}")
    return 0 if subprocess.call(cmd) == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyncoding", description="Dissemination experiments on dynamic networks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the spec file)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    common.add_argument("--out", default=None, help="output path")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run every sweep point of a spec file, write CSV")
    p.add_argument("spec")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("trace", parents=[common], help="run one trial and dump its per-round trace")
    p.add_argument("spec")
    p.set_defaults(func=_cmd_trace)
    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite; exit 0 iff all pass")
    p.set_defaults(func=_cmd_accept)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (InvalidConfig, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
