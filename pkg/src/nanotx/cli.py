"""Experiment harness command line.

Subcommands:
    run             simulate one scenario and write a CSV trajectory
    compare         compute deviation metrics between two CSV trajectories
    sweep           run a parameter grid and write per-point CSVs + summary
    list-scenarios  show the built-in scenarios

Exit codes: 0 ok, 1 usage error, 2 validation error, 3 comparison failed.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import os
import sys

from . import analysis
from .compare import compare_records
from .config import ConfigError, SystemConfig, load_config
from .record import TimeSeriesRecord
from .scenarios import get_scenario, list_scenarios, run_experiment, spec_with

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_COMPARE_FAIL = 3

MAX_GRID_POINTS = 10_000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _add_run_options(p, grid=False):
    many = (lambda t: t) if not grid else None
    p.add_argument("--scenario", required=True, help="built-in scenario name")
    p.add_argument("--model", choices=["ideal", "practical", "pbs-ideal", "pbs-enzyme"])
    p.add_argument("--config", help="key-value system config file")
    if grid:
        p.add_argument("--k-ab", type=_float_list, help="comma list of k_AB values")
        p.add_argument("--n-mr", type=_int_list, help="comma list of enzyme counts")
        p.add_argument("--t-dis", type=_float_list, help="comma list of ramp durations [s]")
        p.add_argument(
            "--switch-times",
            help="semicolon-separated list of comma lists, e.g. '0,5;0,10'",
        )
    else:
        p.add_argument("--k-ab", type=float, help="first-order conversion rate [1/s]")
        p.add_argument("--n-mr", type=int, help="number of encapsulated enzymes")
        p.add_argument("--t-dis", type=float, help="ramp duration of each switch [s]")
        p.add_argument("--switch-times", type=_float_list, help="comma list of switch times [s]")
    p.add_argument("--duration", type=float, help="simulated time [s]")
    p.add_argument("--stride", type=int, help="sampling stride in steps")
    p.add_argument("--seed", type=int, help="PBS master seed")
    p.add_argument("--n-runs", type=int, help="PBS ensemble size")
    p.add_argument("--n-jobs", type=int, help="worker processes for PBS")
    p.add_argument("--no-receiver", action="store_true", help="skip the received-count column")


def build_parser():
    parser = _Parser(prog="nanotx", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    _add_run_options(p_run)
    p_run.add_argument("-o", "--output", help="output CSV path (default <scenario>.csv)")

    p_cmp = sub.add_parser("compare", help="compare two trajectory CSVs")
    p_cmp.add_argument("file_a")
    p_cmp.add_argument("file_b")
    p_cmp.add_argument("--threshold", type=float, default=0.05)
    p_cmp.add_argument("--columns", help="comma list of columns to compare")

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    _add_run_options(p_sweep, grid=True)
    p_sweep.add_argument("--output-dir", required=True)

    sub.add_parser("list-scenarios", help="list built-in scenarios")
    return parser


def _resolve_spec(args, **point):
    spec = get_scenario(args.scenario)
    system = None
    if args.config:
        system = load_config(args.config)
    overrides = dict(
        model=args.model,
        duration=args.duration,
        stride=args.stride,
        seed=args.seed,
        n_runs=args.n_runs,
        system=system,
    )
    if getattr(args, "no_receiver", False):
        overrides["with_receiver"] = False
    overrides.update(point)
    return spec_with(spec, **overrides)


def cmd_run(args) -> int:
    spec = _resolve_spec(
        args,
        k_AB=args.k_ab,
        n_mr=args.n_mr,
        t_dis=args.t_dis,
        switch_times=tuple(args.switch_times) if args.switch_times else None,
    )
    record = run_experiment(spec, n_jobs=args.n_jobs)
    out = args.output or f"{spec.name}.csv"
    record.write_csv(out)
    if "N_out_S" in record.columns or "N_out_B" in record.columns:
        col = "N_out_S" if "N_out_S" in record.columns else "N_out_B"
        sep = analysis.release_distinguishability(record, col)
        print(f"wrote {out} ({len(record)} samples, release quiet-gap fraction {sep:.3f})")
    else:
        print(f"wrote {out} ({len(record)} samples)")
    return EXIT_OK


def cmd_compare(args) -> int:
    a = TimeSeriesRecord.from_csv(args.file_a)
    b = TimeSeriesRecord.from_csv(args.file_b)
    columns = args.columns.split(",") if args.columns else None
    report = compare_records(a, b, threshold=args.threshold, columns=columns)
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_COMPARE_FAIL


def _grid(args):
    axes = {}
    if args.k_ab:
        axes["k_AB"] = args.k_ab
    if args.n_mr:
        axes["n_mr"] = args.n_mr
    if args.t_dis:
        axes["t_dis"] = args.t_dis
    if args.switch_times:
        axes["switch_times"] = [
            tuple(_float_list(part)) for part in args.switch_times.split(";") if part.strip()
        ]
    if not axes:
        return [{}]
    names = list(axes)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]
    if len(points) > MAX_GRID_POINTS:
        raise ConfigError(f"grid has {len(points)} points (limit {MAX_GRID_POINTS})")
    return points


def _point_tag(point):
    parts = []
    for key, value in point.items():
        if key == "switch_times":
            parts.append("times_" + "-".join(f"{t:g}" for t in value))
        else:
            parts.append(f"{key}_{value:g}")
    return "__".join(parts) if parts else "base"


def cmd_sweep(args) -> int:
    points = _grid(args)
    os.makedirs(args.output_dir, exist_ok=True)
    summary_rows = []
    for point in points:
        spec = _resolve_spec(args, **point)
        record = run_experiment(spec, n_jobs=args.n_jobs)
        tag = _point_tag(point)
        path = os.path.join(args.output_dir, f"{spec.name}__{tag}.csv")
        record.write_csv(path)
        sig = "N_in_S" if "N_in_S" in record.columns else "N_in_B"
        rel = "N_out_S" if "N_out_S" in record.columns else "N_out_B"
        per_open = analysis.per_opening_released(record, rel, spec.switch_times)
        summary_rows.append(
            {
                "file": os.path.basename(path),
                "model": spec.model,
                "k_AB": spec.k_AB,
                "n_mr": spec.n_mr,
                "t_dis": spec.t_dis,
                "switch_times": " ".join(f"{t:g}" for t in spec.switch_times),
                "plateau_signal": f"{analysis.plateau_value(record, sig):.6g}",
                "time_to_plateau": f"{analysis.time_to_plateau(record, sig):.6g}",
                "total_released": f"{record.columns[rel][-1]:.6g}",
                "per_opening_released": " ".join(f"{x:.6g}" for x in per_open),
            }
        )
    summary_path = os.path.join(args.output_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary_rows[0]))
        writer.writeheader()
        writer.writerows(summary_rows)
    print(f"wrote {len(points)} runs and {summary_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "list-scenarios":
            for name in list_scenarios():
                print(name)
            return EXIT_OK
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
