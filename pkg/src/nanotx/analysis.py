"""Summary statistics extracted from simulated trajectories."""

from __future__ import annotations

import numpy as np

from .record import TimeSeriesRecord


def plateau_value(record: TimeSeriesRecord, column: str, tail_fraction: float = 0.02) -> float:
    """Mean of the trailing samples of a column (its settled value)."""
    col = record.columns[column]
    n_tail = max(1, int(len(col) * tail_fraction))
    return float(np.mean(col[-n_tail:]))


def time_to_plateau(
    record: TimeSeriesRecord,
    column: str,
    rel_tol: float = 0.01,
    start_time: float = 0.0,
) -> float:
    """First time after start_time from which the column stays within
    rel_tol of its plateau value.  Returns inf if it never settles."""
    col = record.columns[column]
    plateau = plateau_value(record, column)
    band = rel_tol * abs(plateau)
    inside = np.abs(col - plateau) <= band
    inside &= record.time >= start_time
    # last index that is outside the band marks the settling point
    outside = np.nonzero(~inside & (record.time >= start_time))[0]
    if len(outside) == 0:
        return float(start_time)
    i = outside[-1] + 1
    if i >= len(col):
        return float("inf")
    return float(record.time[i])


def per_opening_released(
    record: TimeSeriesRecord,
    column: str,
    switch_times,
) -> np.ndarray:
    """Released-count increment attributed to each membrane opening.

    Openings start at the even-indexed switch times; each opening's window
    extends to the next opening start (or the end of the record), so ramped
    releases are fully attributed.
    """
    opens = [float(t) for t in switch_times[::2]]
    if not opens:
        return np.zeros(0)
    released = record.columns[column]
    edges = opens + [float(record.time[-1])]
    values = np.interp(edges, record.time, released)
    return np.diff(values)


def peak_release_rate(record: TimeSeriesRecord, column: str) -> float:
    """Maximum per-second increase of an accumulated release column."""
    dt = np.diff(record.time)
    rate = np.diff(record.columns[column]) / np.where(dt > 0, dt, 1.0)
    return float(np.max(rate)) if len(rate) else 0.0


def release_distinguishability(
    record: TimeSeriesRecord,
    column: str,
    rate_fraction: float = 0.05,
) -> float:
    """Fraction of time the release rate is below rate_fraction of its peak.

    High values mean the individual releases are separated by quiet gaps
    (clearly distinguishable); ramped switching drives this toward zero.
    """
    dt = np.diff(record.time)
    rate = np.diff(record.columns[column]) / np.where(dt > 0, dt, 1.0)
    if len(rate) == 0 or np.max(rate) == 0:
        return 1.0
    return float(np.mean(rate < rate_fraction * np.max(rate)))
