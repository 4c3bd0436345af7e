#!/usr/bin/env python3
"""Deterministic transfer-function models vs. the particle-based oracle.

Runs the fig3 (first-order conversion, k_AB = 1), fig4 (multi-cycle), and
fig5 (enzyme) scenarios with both the deterministic model and a PBS
ensemble, and prints the per-column relative RMSE (normalized by the
reference peak).  The acceptance gate requires < 5% at 100 runs.
"""

import argparse

from nanotx import PbsConfig, run_pbs
from nanotx.compare import rel_rmse
from nanotx.scenarios import get_scenario, run_experiment, spec_with

CASES = [
    ("fig3", dict(model="ideal", k_AB=1.0), dict(mode="ideal", k_AB=1.0),
     ("N_in_A", "N_in_B", "N_out_B")),
    ("fig4", dict(model="ideal"), dict(mode="ideal", k_AB=0.1),
     ("N_in_A", "N_in_B", "N_out_B")),
    ("fig5", dict(model="practical"), dict(mode="enzyme", n_mr=4),
     ("N_in_R", "N_in_S", "N_out_S")),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-runs", type=int, default=100, help="ensemble size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-jobs", type=int, default=None, help="worker processes")
    args = parser.parse_args()

    for name, det_over, pbs_over, columns in CASES:
        spec = spec_with(get_scenario(name), **det_over)
        det = run_experiment(spec, n_jobs=1)
        pc = PbsConfig(
            system=spec.system, seed=args.seed, n_runs=args.n_runs, **pbs_over
        )
        pbs = run_pbs(
            pc, spec.waveform(), spec.duration, spec.stride, n_jobs=args.n_jobs
        ).to_record()
        errors = " ".join(
            f"{c}={rel_rmse(det.columns[c], pbs.columns[c]):.4f}" for c in columns
        )
        print(f"{name} ({args.n_runs} runs): rel RMSE {errors}")


if __name__ == "__main__":
    main()
