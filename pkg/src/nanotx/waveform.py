"""Time-dependent membrane permeability schedules.

A waveform is a piecewise-linear function rho(t) built from a list of
events (time, target, ramp_duration).  At each event time the permeability
moves from its previous value to the target, linearly over the ramp
duration (instantaneously for a zero ramp).  After the last ramp the value
is held.  The convention is half-open: at the event timestamp itself the
new segment is already in effect, so a zero-ramp event takes its target
value exactly at its own time.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np


class WaveformError(ValueError):
    """Raised for ill-formed permeability schedules."""


@dataclass(frozen=True)
class PermeabilityWaveform:
    """Piecewise-linear permeability schedule.

    events: sequence of (time [s], target [1/s], ramp duration [s]),
    times strictly increasing.  rho(t) = 0 before the first event and holds
    the last target after the final ramp.
    """

    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        events = tuple((float(t), float(v), float(r)) for t, v, r in self.events)
        object.__setattr__(self, "events", events)
        times = [e[0] for e in events]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise WaveformError("event times must be strictly increasing")
        for t, v, r in events:
            if v < 0:
                raise WaveformError(f"negative permeability target {v}")
            if r < 0:
                raise WaveformError(f"negative ramp duration {r}")
        # Ramps may not run past the next event, otherwise the profile
        # would be ambiguous.
        for (t0, _, r0), (t1, _, _) in zip(events, events[1:]):
            if t0 + r0 > t1:
                raise WaveformError(
                    f"ramp starting at t={t0} (duration {r0}) overlaps event at t={t1}"
                )

    @property
    def max_target(self) -> float:
        return max((v for _, v, _ in self.events), default=0.0)

    def value(self, t: float) -> float:
        """Evaluate rho(t) at a single time t >= 0."""
        times = [e[0] for e in self.events]
        i = bisect.bisect_right(times, t) - 1
        if i < 0:
            return 0.0
        t_e, target, ramp = self.events[i]
        start = self.events[i - 1][1] if i > 0 else 0.0
        if ramp == 0.0 or t >= t_e + ramp:
            return target
        return start + (target - start) * (t - t_e) / ramp

    def sample(self, times: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on an array of times."""
        times = np.asarray(times, dtype=float)
        out = np.zeros_like(times)
        if not self.events:
            return out
        ev_t = np.array([e[0] for e in self.events])
        ev_v = np.array([e[1] for e in self.events])
        ev_r = np.array([e[2] for e in self.events])
        ev_prev = np.concatenate(([0.0], ev_v[:-1]))
        idx = np.searchsorted(ev_t, times, side="right") - 1
        active = idx >= 0
        i = idx[active]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            frac = np.where(
                ev_r[i] > 0.0,
                np.clip((times[active] - ev_t[i]) / np.where(ev_r[i] > 0, ev_r[i], 1.0), 0.0, 1.0),
                1.0,
            )
        # match the scalar convention exactly: a ramp is finished once
        # t >= t_e + ramp, including when t_e + ramp rounds down to t_e
        frac = np.where(times[active] >= ev_t[i] + ev_r[i], 1.0, frac)
        out[active] = ev_prev[i] + (ev_v[i] - ev_prev[i]) * frac
        return out

    def sample_steps(self, n_steps: int, T: float) -> np.ndarray:
        """Per-step permeabilities rho[k] = rho(k*T) for k = 0..n_steps-1."""
        return self.sample(np.arange(n_steps) * T)


def waveform_instantaneous(switch_times, rho_max: float) -> PermeabilityWaveform:
    """Alternating open/close schedule with instantaneous switching.

    The first time opens the membrane to rho_max, the second closes it,
    and so on.  An empty list yields a permanently closed membrane.
    """
    events = []
    for i, t in enumerate(switch_times):
        target = rho_max if i % 2 == 0 else 0.0
        events.append((float(t), target, 0.0))
    return PermeabilityWaveform(tuple(events))


def waveform_ramp(switch_times, t_dis: float, rho_max: float) -> PermeabilityWaveform:
    """Alternating open/close schedule with linear transitions.

    Each switch ramps linearly over t_dis seconds, producing a trapezoidal
    profile.  Consecutive switch times must be at least t_dis apart.
    t_dis = 0 degenerates to the instantaneous schedule.
    """
    if t_dis < 0:
        raise WaveformError(f"negative ramp duration {t_dis}")
    times = [float(t) for t in switch_times]
    for t0, t1 in zip(times, times[1:]):
        if t1 - t0 < t_dis:
            raise WaveformError(
                f"switch times {t0} and {t1} closer than ramp duration {t_dis}"
            )
    events = []
    for i, t in enumerate(times):
        target = rho_max if i % 2 == 0 else 0.0
        events.append((t, target, t_dis))
    return PermeabilityWaveform(tuple(events))
