"""Idealized transmitter: per-step update, fixed points, trajectories."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanotx import (
    IdealParams,
    IdealTxState,
    SystemConfig,
    derive_constants,
    ideal_open_fixed_point,
    simulate_ideal,
    step_ideal,
    waveform_instantaneous,
)
from nanotx.ideal import ideal_discrete_fixed_point

# Independently computed reference values for the default parameter set.
FIXED_POINT_MOLECULES_KAB1 = 134.60564751703993  # open membrane, k_AB = 1
SINGLE_STEP_HARVEST_MOLECULES = 0.013824  # T * rho_max * C_out0_A * V_in * N_a


@pytest.fixture(scope="module")
def params():
    return IdealParams.from_config(SystemConfig(), k_AB=1.0)


class TestStep:
    def test_single_step_from_empty(self, params, cfg):
        s = step_ideal(IdealTxState(), cfg.rho_max, params)
        scale = params.V_in * params.N_a
        assert s.C_in_A * scale == pytest.approx(SINGLE_STEP_HARVEST_MOLECULES, rel=1e-9)
        # the fresh harvest already feeds conversion within the same step
        assert s.C_in_B == pytest.approx(params.T * params.k_AB * s.C_in_A, rel=1e-12)
        assert s.C_out_B > 0.0
        assert s.k == 1

    def test_closed_membrane_decay(self, params):
        s0 = IdealTxState(C_in_A=1.0, C_in_B=0.5, C_out_B=0.1)
        s1 = step_ideal(s0, 0.0, params)
        assert s1.C_in_A == pytest.approx(math.exp(-params.k_AB * params.T), rel=1e-14)
        assert s1.C_in_B == pytest.approx(0.5 + params.T * params.k_AB * s1.C_in_A, rel=1e-14)
        assert s1.C_out_B == 0.1  # nothing released while closed

    def test_no_conversion_without_rate(self, cfg):
        p = IdealParams.from_config(cfg, k_AB=0.0)
        s = IdealTxState()
        for _ in range(100):
            s = step_ideal(s, cfg.rho_max, p)
        assert s.C_in_B == 0.0
        assert s.C_out_B == 0.0

    def test_negative_permeability_rejected(self, params):
        with pytest.raises(ValueError):
            step_ideal(IdealTxState(), -1.0, params)

    def test_negative_rate_rejected(self, cfg):
        with pytest.raises(ValueError):
            IdealParams.from_config(cfg, k_AB=-0.1)


class TestFixedPoint:
    def test_open_fixed_point_value(self, params, cfg, dc):
        fp = ideal_open_fixed_point(params, cfg.rho_max)
        assert fp * dc.V_in * cfg.N_a == pytest.approx(FIXED_POINT_MOLECULES_KAB1, rel=1e-12)

    def test_no_conversion_recovers_capacity(self, cfg, dc):
        p = IdealParams.from_config(cfg, k_AB=0.0)
        fp = ideal_open_fixed_point(p, cfg.rho_max)
        assert fp * dc.V_in * cfg.N_a == pytest.approx(dc.N_max, rel=1e-9)

    def test_discrete_fixed_point_is_invariant(self, params, cfg):
        fp = ideal_discrete_fixed_point(params, cfg.rho_max)
        s = IdealTxState(C_in_A=fp)
        s = step_ideal(s, cfg.rho_max, params)
        assert s.C_in_A == pytest.approx(fp, rel=1e-12)

    def test_discrete_matches_continuous_for_small_step(self, params, cfg):
        cont = ideal_open_fixed_point(params, cfg.rho_max)
        disc = ideal_discrete_fixed_point(params, cfg.rho_max)
        assert disc == pytest.approx(cont, rel=1e-3)

    def test_degenerate_rates_rejected(self, cfg):
        p = IdealParams.from_config(cfg, k_AB=0.0)
        with pytest.raises(ValueError):
            ideal_open_fixed_point(p, 0.0)


class TestSimulate:
    def test_open_phase_reaches_fixed_point(self, params, cfg, dc):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        rec = simulate_ideal(params, w, 10.0, stride=100)
        i_open_end = np.searchsorted(rec.time, 5.0) - 1
        assert rec.columns["N_in_A"][i_open_end] == pytest.approx(
            FIXED_POINT_MOLECULES_KAB1, rel=1e-2
        )
        # after closing, the harvested store is converted away
        assert rec.columns["N_in_A"][-1] < 1e-2 * FIXED_POINT_MOLECULES_KAB1
        assert rec.columns["N_in_B"][-1] > 0.0

    def test_closed_phase_conserves_molecules(self, params, cfg, dc):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        rec = simulate_ideal(params, w, 10.0, stride=100)
        closed = rec.time >= 5.0
        total = rec.columns["N_in_A"] + rec.columns["N_in_B"]
        drift = np.ptp(total[closed]) / total[closed][0]
        assert drift < 1e-4

    def test_release_only_while_open(self, params, cfg):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        rec = simulate_ideal(params, w, 10.0, stride=100)
        released = rec.columns["N_out_B"]
        closed = rec.time >= 5.0
        assert np.ptp(released[closed]) == 0.0
        open_phase = (rec.time > 0.1) & (rec.time < 5.0)
        assert np.all(np.diff(released[open_phase]) > 0.0)

    def test_release_independent_of_environment_size(self, cfg):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        recs = []
        for r_out in (1e-3, 2e-3):
            # keep the background concentration fixed while growing the volume
            scale = (r_out / 1e-3) ** 3
            c = cfg.with_overrides(r_out=r_out, N_out_A=cfg.N_out_A * scale)
            recs.append(simulate_ideal(IdealParams.from_config(c, 1.0), w, 10.0, 100))
        assert np.allclose(
            recs[0].columns["N_out_B"], recs[1].columns["N_out_B"], rtol=1e-9
        )

    def test_zero_duration(self, params, cfg):
        w = waveform_instantaneous([0.0], cfg.rho_max)
        rec = simulate_ideal(params, w, 0.0)
        assert len(rec) == 1
        assert all(rec.columns[c][0] == 0.0 for c in rec.columns)

    def test_invalid_arguments(self, params, cfg):
        w = waveform_instantaneous([0.0], cfg.rho_max)
        with pytest.raises(ValueError):
            simulate_ideal(params, w, -1.0)
        with pytest.raises(ValueError):
            simulate_ideal(params, w, 1.0, stride=0)

    @given(
        k_ab=st.floats(0.0, 10.0),
        times=st.lists(st.floats(0.0, 2.0), min_size=0, max_size=4, unique=True),
    )
    @settings(max_examples=25, deadline=None)
    def test_trajectory_invariants(self, k_ab, times):
        cfg = SystemConfig()
        dc = derive_constants(cfg)
        p = IdealParams.from_config(cfg, k_AB=k_ab)
        w = waveform_instantaneous(sorted(times), cfg.rho_max)
        rec = simulate_ideal(p, w, 2.0, stride=50)
        for name, col in rec.columns.items():
            assert np.all(col >= 0.0), name
        # accumulated release never decreases
        assert np.all(np.diff(rec.columns["N_out_B"]) >= 0.0)
        # the interior can never exceed its equilibrium capacity
        assert np.all(rec.columns["N_in_A"] <= dc.N_max * 1.001)

    def test_produced_signal_grows_with_conversion_rate(self, cfg):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        totals = []
        for k_ab in (1e-2, 1e-1, 1.0):
            p = IdealParams.from_config(cfg, k_AB=k_ab)
            rec = simulate_ideal(p, w, 10.0, stride=100)
            totals.append(rec.columns["N_in_B"][-1] + rec.columns["N_out_B"][-1])
        assert totals[0] < totals[1] < totals[2]
