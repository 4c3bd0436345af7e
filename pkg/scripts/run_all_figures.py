#!/usr/bin/env python3
"""Run every built-in scenario and write one trajectory CSV per scenario.

Deterministic models by default; pass --pbs to also run the matching
particle-based ensemble for the desk-scale scenarios (fig3/fig4/fig5).
"""

import argparse
import pathlib

from nanotx import run_experiment
from nanotx.scenarios import BUILTIN_SCENARIOS, spec_with


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--output-dir", default="results", help="CSV destination")
    parser.add_argument("--pbs", action="store_true", help="also run PBS ensembles")
    parser.add_argument("--n-runs", type=int, default=100, help="PBS ensemble size")
    parser.add_argument("--n-jobs", type=int, default=None, help="worker processes")
    args = parser.parse_args()

    out_dir = pathlib.Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for name, spec in sorted(BUILTIN_SCENARIOS.items()):
        record = run_experiment(spec, n_jobs=args.n_jobs)
        path = out_dir / f"{name}.csv"
        record.write_csv(path)
        print(f"wrote {path} ({len(record)} samples, model {spec.model})")
        if args.pbs and name in ("fig3", "fig4", "fig5"):
            pbs_model = "pbs-enzyme" if spec.model == "practical" else "pbs-ideal"
            pbs_spec = spec_with(spec, model=pbs_model, n_runs=args.n_runs)
            record = run_experiment(pbs_spec, n_jobs=args.n_jobs)
            path = out_dir / f"{name}-pbs.csv"
            record.write_csv(path)
            print(f"wrote {path} ({pbs_spec.n_runs} stochastic runs)")


if __name__ == "__main__":
    main()
