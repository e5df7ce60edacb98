"""Command-line front end.

Two modes share one executable: the default runs a sweep described by a
config file and/or flags (flags win), writing traces, a summary table, and
learning-curve figures under the output directory; ``--verify`` instead runs
the analytical self-checks and writes their report next to a machine-readable
CSV.  Every value flag is passed through as text and parsed by the same code
that reads config files, so a bad ``--reps`` and a bad ``reps=`` line produce
the same message.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import ExperimentSpec, parse_config, run_experiment
from .verify import render_report, run_verification_suites, write_report_csv

__all__ = ["build_parser", "main"]

# matches the instance count the checks are normally quoted at
INSTANCES_PER_SUITE = 200

_VALUE_FLAGS = (
    ("agents", "number of agents on the network"),
    ("arms", "number of arms per agent"),
    ("horizon", "rounds per run"),
    ("q-grid", "comma-separated activation probabilities, e.g. 0.05,0.5,1"),
    ("pnet-grid", "comma-separated network edge densities"),
    ("pfeed-grid", "comma-separated feedback-graph edge densities"),
    ("n-delay", "network delay (hops a message ages per round)"),
    ("f-delay", "feedback-graph power used for observations"),
    ("reps", "repetitions per grid cell"),
    ("seed", "master seed for losses, activations, graphs, and draws"),
    ("eta-policy", "fixed:<value>, tuned, doubling, or doubling-reset"),
    ("out", "output directory (default: runs)"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopbandit",
        description=(
            "Simulate cooperating bandit agents over a parameter grid and "
            "record regret traces, summary statistics, and figures."
        ),
    )
    parser.add_argument(
        "--config",
        metavar="FILE",
        help="flat key=value config file; any flag below overrides its entry",
    )
    for flag, help_text in _VALUE_FLAGS:
        parser.add_argument(f"--{flag}", metavar="V", help=help_text)
    parser.add_argument(
        "--baseline-only",
        action="store_true",
        help="run only the non-cooperative baseline",
    )
    parser.add_argument(
        "--coop-only",
        action="store_true",
        help="run only the cooperative algorithm",
    )
    parser.add_argument(
        "--verify",
        action="store_true",
        help="run the analytical self-check suites instead of a sweep",
    )
    return parser


def _cell_line(result) -> str:
    parts = [f"q={result.q:g} p_net={result.p_net:g} p_feed={result.p_feed:g}:"]
    for label, finals in (("coop", result.coop_finals), ("base", result.base_finals)):
        if finals is None:
            continue
        std = float(finals.std(ddof=1)) if finals.size > 1 else 0.0
        parts.append(f"{label} {float(finals.mean()):.4f} ± {std:.4f}")
    return "  ".join(parts)


def _run_verify(spec: ExperimentSpec) -> int:
    suites = run_verification_suites(seed=spec.seed, instances=INSTANCES_PER_SUITE)
    print(render_report(suites))
    out_root = Path(spec.out)
    out_root.mkdir(parents=True, exist_ok=True)
    report_path = out_root / "verify_report.csv"
    write_report_csv(suites, report_path)
    print(f"wrote {report_path}")
    return 0 if all(s.failures == 0 for s in suites) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.baseline_only and args.coop_only:
        parser.error("--baseline-only and --coop-only are mutually exclusive")

    overrides = {}
    for flag, _ in _VALUE_FLAGS:
        value = getattr(args, flag.replace("-", "_"))
        if value is not None:
            overrides[flag] = value
    if args.baseline_only:
        overrides["baseline-only"] = "true"
    if args.coop_only:
        overrides["coop-only"] = "true"

    try:
        spec = parse_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.verify:
        return _run_verify(spec)

    try:
        results = run_experiment(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for result in results:
        print(_cell_line(result))
    print(f"wrote {len(results)} cell(s) under {spec.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
