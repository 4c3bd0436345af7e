"""Permeability waveform construction and evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanotx import (
    PermeabilityWaveform,
    WaveformError,
    waveform_instantaneous,
    waveform_ramp,
)

RHO_MAX = 2.7e-2


class TestInstantaneous:
    def test_single_cycle(self):
        w = waveform_instantaneous([0.0, 5.0], RHO_MAX)
        assert w.value(0.0) == RHO_MAX  # switch takes effect at its own time
        assert w.value(2.5) == RHO_MAX
        assert w.value(5.0) == 0.0
        assert w.value(9.0) == 0.0

    def test_before_first_event(self):
        w = waveform_instantaneous([1.0, 2.0], RHO_MAX)
        assert w.value(0.0) == 0.0
        assert w.value(0.999) == 0.0

    def test_multi_cycle(self):
        w = waveform_instantaneous([0.0, 5.0, 10.0, 15.0, 20.0, 25.0], RHO_MAX)
        for t, expected in [(1, RHO_MAX), (6, 0), (11, RHO_MAX), (16, 0), (21, RHO_MAX), (26, 0)]:
            assert w.value(t) == expected

    def test_empty_schedule_is_closed(self):
        w = waveform_instantaneous([], RHO_MAX)
        assert w.value(0.0) == 0.0
        assert w.max_target == 0.0
        assert np.all(w.sample_steps(100, 1e-4) == 0.0)

    def test_holds_last_value(self):
        w = waveform_instantaneous([0.0], RHO_MAX)  # odd count: stays open
        assert w.value(1e6) == RHO_MAX


class TestRamp:
    def test_linear_transition(self):
        w = waveform_ramp([0.0, 55.0, 110.0, 165.0], 45.0, RHO_MAX)
        assert w.value(0.0) == 0.0
        assert w.value(22.5) == pytest.approx(RHO_MAX / 2)
        assert w.value(9.0) == pytest.approx(0.2 * RHO_MAX)
        assert w.value(45.0) == RHO_MAX
        assert w.value(50.0) == RHO_MAX  # hold until the closing ramp
        assert w.value(77.5) == pytest.approx(RHO_MAX / 2)
        assert w.value(100.0) == 0.0

    def test_switches_closer_than_ramp_rejected(self):
        with pytest.raises(WaveformError):
            waveform_ramp([0.0, 30.0], 45.0, RHO_MAX)

    def test_negative_ramp_rejected(self):
        with pytest.raises(WaveformError):
            waveform_ramp([0.0, 5.0], -1.0, RHO_MAX)

    @given(
        times=st.lists(st.floats(0.0, 100.0), min_size=1, max_size=6, unique=True),
        t=st.floats(0.0, 120.0),
    )
    def test_zero_ramp_degenerates_to_instantaneous(self, times, t):
        times = sorted(times)
        ramp = waveform_ramp(times, 0.0, RHO_MAX)
        inst = waveform_instantaneous(times, RHO_MAX)
        assert ramp.value(t) == inst.value(t)


class TestWaveformInvariants:
    def test_non_monotone_times_rejected(self):
        with pytest.raises(WaveformError):
            PermeabilityWaveform(((5.0, 1.0, 0.0), (5.0, 0.0, 0.0)))
        with pytest.raises(WaveformError):
            PermeabilityWaveform(((5.0, 1.0, 0.0), (3.0, 0.0, 0.0)))

    def test_negative_target_rejected(self):
        with pytest.raises(WaveformError):
            PermeabilityWaveform(((0.0, -1.0, 0.0),))

    def test_overlapping_ramp_rejected(self):
        with pytest.raises(WaveformError):
            PermeabilityWaveform(((0.0, 1.0, 10.0), (5.0, 0.0, 0.0)))

    @given(
        times=st.lists(st.floats(0.0, 50.0), min_size=0, max_size=8, unique=True),
        queries=st.lists(st.floats(0.0, 80.0), min_size=1, max_size=20),
    )
    def test_value_bounded_by_max_target(self, times, queries):
        w = waveform_instantaneous(sorted(times), RHO_MAX)
        for t in queries:
            assert 0.0 <= w.value(t) <= RHO_MAX

    @given(
        times=st.lists(st.floats(0.0, 50.0), min_size=0, max_size=6, unique=True),
        t_dis=st.floats(0.0, 5.0),
        queries=st.lists(st.floats(0.0, 80.0), min_size=1, max_size=20),
    )
    @settings(max_examples=50)
    def test_sample_matches_scalar_value(self, times, t_dis, queries):
        times = sorted(times)
        if any(t1 - t0 < t_dis for t0, t1 in zip(times, times[1:])):
            return
        w = waveform_ramp(times, t_dis, RHO_MAX)
        got = w.sample(np.array(queries))
        expected = np.array([w.value(t) for t in queries])
        assert np.allclose(got, expected, rtol=1e-12, atol=1e-18)

    def test_sample_steps_grid(self):
        w = waveform_instantaneous([0.0, 5.0], RHO_MAX)
        rho = w.sample_steps(100_000, 1e-4)
        assert len(rho) == 100_000
        assert rho[0] == RHO_MAX
        assert rho[49_999] == RHO_MAX  # t = 4.9999 s
        assert rho[50_000] == 0.0  # t = 5.0 s exactly: already closed
