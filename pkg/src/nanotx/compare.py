"""Trajectory comparison metrics (deterministic model vs. PBS ensemble).

Relative RMSE of a column is the RMS deviation normalized by the peak
absolute value of the reference column, so trajectories that start at zero
do not blow up the metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .record import TimeSeriesRecord


@dataclass
class ColumnMetrics:
    rel_rmse: float
    max_abs_dev: float
    passed: bool


@dataclass
class ComparisonReport:
    """Per-column deviation metrics plus an overall verdict."""

    columns: dict = field(default_factory=dict)
    threshold: float = 0.05

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.columns.values())

    def to_text(self) -> str:
        lines = []
        for name, m in self.columns.items():
            status = "pass" if m.passed else "FAIL"
            lines.append(
                f"{name}: rel_rmse={m.rel_rmse:.5g} max_abs_dev={m.max_abs_dev:.5g} [{status}]"
            )
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'} (threshold {self.threshold})")
        return "\n".join(lines)


def rel_rmse(reference: np.ndarray, other: np.ndarray) -> float:
    """RMS of the deviation, normalized by the reference peak magnitude."""
    reference = np.asarray(reference, dtype=float)
    other = np.asarray(other, dtype=float)
    rms = float(np.sqrt(np.mean((reference - other) ** 2)))
    scale = float(np.max(np.abs(reference)))
    if scale == 0.0:
        return 0.0 if rms == 0.0 else float("inf")
    return rms / scale


def compare_records(
    a: TimeSeriesRecord,
    b: TimeSeriesRecord,
    threshold: float = 0.05,
    columns=None,
) -> ComparisonReport:
    """Compare shared count columns of two trajectories.

    `a` is the reference.  If the time grids differ, `b` is linearly
    interpolated onto `a`'s grid.  Standard-deviation columns ("*_std")
    are ignored.
    """
    shared = [
        name
        for name in a.columns
        if name in b.columns and not name.endswith("_std")
    ]
    if columns is not None:
        shared = [name for name in shared if name in columns]
    if not shared:
        raise ValueError("records share no comparable columns")
    same_grid = len(a.time) == len(b.time) and np.allclose(a.time, b.time)
    report = ComparisonReport(threshold=threshold)
    for name in shared:
        col_b = b.columns[name]
        if not same_grid:
            col_b = np.interp(a.time, b.time, col_b)
        r = rel_rmse(a.columns[name], col_b)
        dev = float(np.max(np.abs(a.columns[name] - col_b)))
        report.columns[name] = ColumnMetrics(
            rel_rmse=r, max_abs_dev=dev, passed=r < threshold
        )
    return report
