"""Practical transmitter: mandelate-racemase kinetics inside the NP.

The enzyme network

    E + R <-> ER <-> ES <-> E + S          (rates k1/k-1, k2/k-2, k3/k-3)

has no closed-form solution, so each step solves the three bidirectional
sub-reactions sequentially.  Every sub-reaction is reduced to a linear
pair by freezing the bimolecular partner concentration at the sub-step
entry value (pseudo-first-order) and then relaxed exactly: the distance to
the pair's fixed point decays by exp(-(f+b) T).  Both partners of a
bimolecular channel are updated through a single extent-of-reaction
variable, so enzyme and mandelate totals are conserved exactly.

Membrane transport of R and S mirrors the idealized model; the complexes
and free enzyme never cross the membrane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SystemConfig, derive_constants
from .record import TimeSeriesRecord
from .waveform import PermeabilityWaveform

# Mandelate racemase rate constants (bimolecular rates in m^3/(mol s)).
DEFAULT_RATES = dict(
    k1=3.21e3,
    k_m1=3948.0,
    k2=889.0,
    k_m2=631.41,
    k3=3896.0,
    k_m3=4.46e3,
)


@dataclass(frozen=True)
class EnzymeRates:
    """Rate constants of the three reversible sub-reactions."""

    k1: float = DEFAULT_RATES["k1"]
    k_m1: float = DEFAULT_RATES["k_m1"]
    k2: float = DEFAULT_RATES["k2"]
    k_m2: float = DEFAULT_RATES["k_m2"]
    k3: float = DEFAULT_RATES["k3"]
    k_m3: float = DEFAULT_RATES["k_m3"]

    def __post_init__(self):
        for name in ("k1", "k_m1", "k2", "k_m2", "k3", "k_m3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def as_tuple(self):
        return (self.k1, self.k_m1, self.k2, self.k_m2, self.k3, self.k_m3)


def equilibrium_constant(r: EnzymeRates) -> float:
    """Overall equilibrium ratio C_S/C_R = (k1 k2 k3)/(k-1 k-2 k-3)."""
    denom = r.k_m1 * r.k_m2 * r.k_m3
    if denom == 0:
        raise ZeroDivisionError("backward rates must all be > 0")
    return (r.k1 * r.k2 * r.k3) / denom


@dataclass(frozen=True)
class EnzymeTxState:
    """Concentrations inside the NP plus the accumulated release [mol/m^3].

    C_E is the free enzyme, C_ER/C_ES the bound complexes; the enzyme
    total C_E + C_ER + C_ES is invariant.
    """

    C_in_R: float = 0.0
    C_in_S: float = 0.0
    C_E: float = 0.0
    C_ER: float = 0.0
    C_ES: float = 0.0
    C_out_S: float = 0.0
    k: int = 0
    clamp_count: int = 0


@njit(cache=True)
def _relax_pair(x, y, f, b, T):  # pragma: no cover
    """Relax the linear pair dx/dt = -f x + b y exactly over T.

    Returns the extent moved from x to y (may be negative).
    """
    s = f + b
    if s <= 0.0:
        return 0.0
    x_star = b * (x + y) / s
    return (x - x_star) * (1.0 - math.exp(-s * T))


@njit(cache=True)
def _react(cr, cs, ce, cer, ces, k1, km1, k2, km2, k3, km3, T):  # pragma: no cover
    clamps = 0
    # (1) E + R <-> ER: pseudo-first-order in R with partner E frozen.
    x = _relax_pair(cr, cer, k1 * ce, km1, T)
    if x > ce:
        x = ce
        clamps += 1
    cr -= x
    cer += x
    ce -= x
    if cr < 0.0:
        cr = 0.0
        clamps += 1
    if ce < 0.0:
        ce = 0.0
        clamps += 1
    # (2) ER <-> ES: genuinely first order both ways.
    x = _relax_pair(cer, ces, k2, km2, T)
    cer -= x
    ces += x
    # (3) ES <-> E + S: backward pseudo-first-order in S with E frozen.
    x = _relax_pair(ces, cs, k3, km3 * ce, T)
    if x < -ce:
        x = -ce
        clamps += 1
    ces -= x
    cs += x
    ce += x
    if ces < 0.0:
        ces = 0.0
        clamps += 1
    return cr, cs, ce, cer, ces, clamps


def react_enzyme_substep(s: EnzymeTxState, r: EnzymeRates, T: float) -> EnzymeTxState:
    """Apply one reaction step of the enzyme network (no transport).

    Conserves the enzyme total and the mandelate total exactly.
    """
    cr, cs, ce, cer, ces, clamps = _react(
        s.C_in_R, s.C_in_S, s.C_E, s.C_ER, s.C_ES, *r.as_tuple(), T
    )
    return EnzymeTxState(
        C_in_R=cr,
        C_in_S=cs,
        C_E=ce,
        C_ER=cer,
        C_ES=ces,
        C_out_S=s.C_out_S,
        k=s.k,
        clamp_count=s.clamp_count + clamps,
    )


def step_practical(
    s: EnzymeTxState,
    rho_k: float,
    cfg: SystemConfig,
    r: EnzymeRates,
) -> EnzymeTxState:
    """Advance the practical transmitter by one time step.

    The reaction contribution is evaluated on the previous step's
    concentrations and added to the transported ones; complexes and free
    enzyme see no transport.
    """
    if rho_k < 0:
        raise ValueError(f"negative permeability {rho_k}")
    dc = derive_constants(cfg)
    T = cfg.T
    cr, cs, ce, cer, ces, clamps = _react(
        s.C_in_R, s.C_in_S, s.C_E, s.C_ER, s.C_ES, *r.as_tuple(), T
    )
    d_r = cr - s.C_in_R
    d_s = cs - s.C_in_S
    decay = math.exp(-rho_k * T)
    c_in_r = decay * s.C_in_R + T * rho_k * dc.C_out0_A + d_r
    c_in_s = decay * s.C_in_S + d_s
    if c_in_r < 0.0:
        c_in_r = 0.0
        clamps += 1
    if c_in_s < 0.0:
        c_in_s = 0.0
        clamps += 1
    c_out_s = s.C_out_S + rho_k * (dc.V_in / dc.V_out) * T * c_in_s
    return EnzymeTxState(
        C_in_R=c_in_r,
        C_in_S=c_in_s,
        C_E=ce,
        C_ER=cer,
        C_ES=ces,
        C_out_S=c_out_s,
        k=s.k + 1,
        clamp_count=s.clamp_count + clamps,
    )


@njit(cache=True)
def _practical_loop(
    rho, k1, km1, k2, km2, k3, km3, c_out0, v_ratio, T, ce0, stride, n_samples
):  # pragma: no cover
    out_r = np.empty(n_samples)
    out_s = np.empty(n_samples)
    out_rel = np.empty(n_samples)
    cr = 0.0
    cs = 0.0
    ce = ce0
    cer = 0.0
    ces = 0.0
    cout = 0.0
    clamps = 0
    out_r[0] = 0.0
    out_s[0] = 0.0
    out_rel[0] = 0.0
    j = 1
    for k in range(1, len(rho) + 1):
        r = rho[k - 1]
        ncr, ncs, ce, cer, ces, c = _react(
            cr, cs, ce, cer, ces, k1, km1, k2, km2, k3, km3, T
        )
        clamps += c
        d_r = ncr - cr
        d_s = ncs - cs
        decay = math.exp(-r * T)
        cr = decay * cr + T * r * c_out0 + d_r
        cs = decay * cs + d_s
        if cr < 0.0:
            cr = 0.0
            clamps += 1
        if cs < 0.0:
            cs = 0.0
            clamps += 1
        cout = cout + r * v_ratio * T * cs
        if k % stride == 0:
            out_r[j] = cr
            out_s[j] = cs
            out_rel[j] = cout
            j += 1
    return out_r, out_s, out_rel, clamps


def simulate_practical(
    cfg: SystemConfig,
    r: EnzymeRates,
    n_mr: int,
    w: PermeabilityWaveform,
    duration: float,
    stride: int = 1,
) -> TimeSeriesRecord:
    """Simulate the practical transmitter from an empty interior.

    n_mr enzymes are encapsulated (initial free-enzyme concentration
    n_mr/(V_in N_a)); all other species start at zero.
    """
    if n_mr < 0:
        raise ValueError("n_mr must be >= 0")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    dc = derive_constants(cfg)
    n_steps = int(round(duration / cfg.T))
    rho = w.sample_steps(n_steps, cfg.T) if n_steps else np.zeros(0)
    n_samples = n_steps // stride + 1
    ce0 = n_mr / (dc.V_in * cfg.N_a)
    out_r, out_s, out_rel, clamps = _practical_loop(
        rho,
        *r.as_tuple(),
        dc.C_out0_A,
        dc.V_in / dc.V_out,
        cfg.T,
        ce0,
        stride,
        n_samples,
    )
    t = np.arange(n_samples) * (stride * cfg.T)
    scale_in = dc.V_in * cfg.N_a
    return TimeSeriesRecord(
        time=t,
        rho=w.sample(t),
        columns={
            "N_in_R": out_r * scale_in,
            "N_in_S": out_s * scale_in,
            "N_out_S": out_rel * dc.V_out * cfg.N_a,
        },
        metadata={
            "model": "practical",
            "N_MR": n_mr,
            "T": cfg.T,
            "stride": stride,
            "clamp_count": clamps,
        },
    )
