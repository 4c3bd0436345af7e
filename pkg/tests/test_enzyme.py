"""Practical transmitter: enzyme kinetics, conservation, equilibrium."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanotx import (
    EnzymeRates,
    EnzymeTxState,
    IdealParams,
    SystemConfig,
    derive_constants,
    equilibrium_constant,
    react_enzyme_substep,
    simulate_ideal,
    simulate_practical,
    step_practical,
    waveform_instantaneous,
)

# Independently computed overall equilibrium ratio for the default rates.
K_EQ = 1.000005257027538


class TestEquilibriumConstant:
    def test_default_rates(self):
        assert equilibrium_constant(EnzymeRates()) == pytest.approx(K_EQ, rel=1e-12)
        # racemization: the two mirror forms are energetically identical
        assert abs(equilibrium_constant(EnzymeRates()) - 1.0) < 1e-3

    def test_symmetric_rates(self):
        r = EnzymeRates(k1=2.0, k_m1=3.0, k2=5.0, k_m2=5.0, k3=3.0, k_m3=2.0)
        assert equilibrium_constant(r) == pytest.approx(1.0, rel=1e-15)

    def test_scales_with_forward_rate(self):
        base = equilibrium_constant(EnzymeRates())
        doubled = equilibrium_constant(EnzymeRates(k2=2 * EnzymeRates().k2))
        assert doubled == pytest.approx(2.0 * base, rel=1e-12)

    def test_zero_backward_rate_rejected(self):
        with pytest.raises(ZeroDivisionError):
            equilibrium_constant(EnzymeRates(k_m2=0.0))

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            EnzymeRates(k1=-1.0)


conc = st.floats(0.0, 10.0, allow_nan=False)
rate = st.floats(0.0, 5e3, allow_nan=False)


class TestReactionStep:
    @given(
        cr=conc, cs=conc, ce=conc, cer=conc, ces=conc,
        k1=rate, km1=rate, k2=rate, km2=rate, k3=rate, km3=rate,
    )
    @settings(max_examples=200, deadline=None)
    def test_conservation(self, cr, cs, ce, cer, ces, k1, km1, k2, km2, k3, km3):
        s0 = EnzymeTxState(C_in_R=cr, C_in_S=cs, C_E=ce, C_ER=cer, C_ES=ces)
        r = EnzymeRates(k1=k1, k_m1=km1, k2=k2, k_m2=km2, k3=k3, k_m3=km3)
        s1 = react_enzyme_substep(s0, r, 1e-4)
        enzyme0 = s0.C_E + s0.C_ER + s0.C_ES
        enzyme1 = s1.C_E + s1.C_ER + s1.C_ES
        mandelate0 = s0.C_in_R + s0.C_in_S + s0.C_ER + s0.C_ES
        mandelate1 = s1.C_in_R + s1.C_in_S + s1.C_ER + s1.C_ES
        assert enzyme1 == pytest.approx(enzyme0, rel=1e-9, abs=1e-12)
        assert mandelate1 == pytest.approx(mandelate0, rel=1e-9, abs=1e-12)
        for v in (s1.C_in_R, s1.C_in_S, s1.C_E, s1.C_ER, s1.C_ES):
            # roundoff may leave values a few ulps below zero
            assert v >= -1e-12

    def test_no_enzyme_means_no_reaction(self):
        s0 = EnzymeTxState(C_in_R=1.0)
        s1 = react_enzyme_substep(s0, EnzymeRates(), 1e-4)
        assert s1 == s0

    def test_empty_state_stays_empty(self):
        s0 = EnzymeTxState(C_E=1.0)
        s1 = react_enzyme_substep(s0, EnzymeRates(), 1e-4)
        assert s1.C_in_R == 0.0
        assert s1.C_in_S == 0.0
        assert s1.C_E == 1.0

    def test_closed_membrane_reaches_racemization_equilibrium(self, cfg, dc):
        # a loaded, sealed particle must settle at C_S/C_R = K_eq
        n_mr = 16
        s = EnzymeTxState(C_in_R=dc.C_out0_A, C_E=n_mr / (dc.V_in * cfg.N_a))
        r = EnzymeRates()
        for _ in range(30_000):  # 3 s of simulated time
            s = react_enzyme_substep(s, r, cfg.T)
        assert s.C_in_S / s.C_in_R == pytest.approx(K_EQ, rel=1e-2)
        # the overshoot guard may fire during the first steps of this
        # deliberately extreme initial condition, but not persistently
        assert s.clamp_count <= 5


class TestStepPractical:
    def test_negative_permeability_rejected(self, cfg):
        with pytest.raises(ValueError):
            step_practical(EnzymeTxState(), -1.0, cfg, EnzymeRates())

    def test_transport_matches_ideal_without_enzymes(self, cfg):
        # no enzymes and no first-order conversion: the harvested species
        # obeys the same exponential transport law in both models
        w = waveform_instantaneous([0.0, 1.0], cfg.rho_max)
        rec_p = simulate_practical(cfg, EnzymeRates(), 0, w, 2.0, stride=100)
        rec_i = simulate_ideal(IdealParams.from_config(cfg, 0.0), w, 2.0, stride=100)
        assert np.allclose(rec_p.columns["N_in_R"], rec_i.columns["N_in_A"], rtol=1e-12)
        # the idle reaction channels leak only float roundoff into S
        assert np.all(rec_p.columns["N_in_S"] < 1e-9)
        assert np.all(rec_p.columns["N_out_S"] < 1e-9)

    def test_release_accumulates_only_while_open(self, cfg):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        rec = simulate_practical(cfg, EnzymeRates(), 4, w, 10.0, stride=100)
        released = rec.columns["N_out_S"]
        assert np.all(np.diff(released) >= 0.0)
        closed = rec.time >= 5.0
        assert np.ptp(released[closed]) == 0.0
        assert released[-1] > 0.0

    def test_closed_phase_conserves_mandelate(self, cfg, dc):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        n_steps = 100_000
        rho = w.sample_steps(n_steps, cfg.T)
        s = EnzymeTxState(C_E=4 / (dc.V_in * cfg.N_a))
        r = EnzymeRates()
        totals = []
        for k in range(n_steps):
            s = step_practical(s, rho[k], cfg, r)
            if rho[k] == 0.0:
                totals.append(s.C_in_R + s.C_in_S + s.C_ER + s.C_ES)
        totals = np.array(totals)
        assert np.ptp(totals) / totals[0] < 1e-9

    def test_no_clamping_at_default_parameters(self, cfg):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        rec = simulate_practical(cfg, EnzymeRates(), 4, w, 10.0, stride=100)
        assert rec.metadata["clamp_count"] == 0

    def test_more_enzymes_convert_faster(self, cfg):
        w = waveform_instantaneous([0.0, 5.0], cfg.rho_max)
        recs = {
            n: simulate_practical(cfg, EnzymeRates(), n, w, 7.0, stride=100)
            for n in (2, 8)
        }
        # at a fixed time shortly after closing, the larger enzyme load has
        # converted more of the harvested store
        i = np.searchsorted(recs[2].time, 6.0)
        assert recs[8].columns["N_in_S"][i] > recs[2].columns["N_in_S"][i]

    def test_invalid_arguments(self, cfg):
        w = waveform_instantaneous([0.0], cfg.rho_max)
        with pytest.raises(ValueError):
            simulate_practical(cfg, EnzymeRates(), -1, w, 1.0)
        with pytest.raises(ValueError):
            simulate_practical(cfg, EnzymeRates(), 4, w, -1.0)
        with pytest.raises(ValueError):
            simulate_practical(cfg, EnzymeRates(), 4, w, 1.0, stride=0)
