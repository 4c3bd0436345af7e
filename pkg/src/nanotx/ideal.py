"""Idealized transmitter: instantaneous switching, first-order A -> B.

The inside/outside concentrations follow an exact per-step exponential
update with the permeability frozen over each step:

    C_in_A[k]  = exp(-(rho[k]+k_AB) T) C_in_A[k-1] + T rho[k] C_out0_A
    C_in_B[k]  = exp(-rho[k] T) C_in_B[k-1] + T k_AB C_in_A[k]
    C_out_B[k] = C_out_B[k-1] + rho[k] (V_in/V_out) T C_in_B[k]

Released molecules are treated as a perfect sink (no re-entry).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import DEFAULT_K_AB, SystemConfig, derive_constants
from .record import TimeSeriesRecord
from .waveform import PermeabilityWaveform


@dataclass(frozen=True)
class IdealParams:
    """Rates and geometry of the idealized transmitter model."""

    k_AB: float
    C_out0_A: float
    V_in: float
    V_out: float
    T: float
    N_a: float = 6.022e23

    def __post_init__(self):
        if self.k_AB < 0:
            raise ValueError(f"k_AB must be >= 0, got {self.k_AB}")
        if self.V_in <= 0 or self.V_out <= 0 or self.T <= 0:
            raise ValueError("volumes and T must be > 0")

    @classmethod
    def from_config(cls, cfg: SystemConfig, k_AB: float = DEFAULT_K_AB) -> "IdealParams":
        dc = derive_constants(cfg)
        return cls(
            k_AB=k_AB,
            C_out0_A=dc.C_out0_A,
            V_in=dc.V_in,
            V_out=dc.V_out,
            T=cfg.T,
            N_a=cfg.N_a,
        )


@dataclass(frozen=True)
class IdealTxState:
    """Per-step concentrations of the idealized transmitter [mol/m^3]."""

    C_in_A: float = 0.0
    C_in_B: float = 0.0
    C_out_B: float = 0.0
    k: int = 0


def step_ideal(s: IdealTxState, rho_k: float, p: IdealParams) -> IdealTxState:
    """Advance the idealized transmitter by one time step."""
    if rho_k < 0:
        raise ValueError(f"negative permeability {rho_k}")
    T = p.T
    c_in_a = math.exp(-(rho_k + p.k_AB) * T) * s.C_in_A + T * rho_k * p.C_out0_A
    c_in_b = math.exp(-rho_k * T) * s.C_in_B + T * p.k_AB * c_in_a
    c_out_b = s.C_out_B + rho_k * (p.V_in / p.V_out) * T * c_in_b
    return IdealTxState(C_in_A=c_in_a, C_in_B=c_in_b, C_out_B=c_out_b, k=s.k + 1)


def ideal_open_fixed_point(p: IdealParams, rho: float) -> float:
    """Steady-state inside A-concentration for a constantly open membrane.

    Continuous-time fixed point rho*C_out0_A/(rho + k_AB); the exact
    discrete-time counterpart is T*rho*C_out0_A/(1 - exp(-(rho+k_AB)T)).
    """
    if rho + p.k_AB <= 0:
        raise ValueError("rho + k_AB must be > 0")
    return rho * p.C_out0_A / (rho + p.k_AB)


def ideal_discrete_fixed_point(p: IdealParams, rho: float) -> float:
    """Exact fixed point of the discrete update at constant permeability."""
    if rho + p.k_AB <= 0:
        raise ValueError("rho + k_AB must be > 0")
    lam = (rho + p.k_AB) * p.T
    return p.T * rho * p.C_out0_A / (1.0 - math.exp(-lam))


@njit(cache=True)
def _ideal_loop(rho, k_ab, c_out0, v_ratio, T, stride, n_samples):  # pragma: no cover
    out_a = np.empty(n_samples)
    out_b = np.empty(n_samples)
    out_rel = np.empty(n_samples)
    ca = 0.0
    cb = 0.0
    cout = 0.0
    out_a[0] = 0.0
    out_b[0] = 0.0
    out_rel[0] = 0.0
    j = 1
    for k in range(1, len(rho) + 1):
        r = rho[k - 1]
        ca = math.exp(-(r + k_ab) * T) * ca + T * r * c_out0
        cb = math.exp(-r * T) * cb + T * k_ab * ca
        cout = cout + r * v_ratio * T * cb
        if k % stride == 0:
            out_a[j] = ca
            out_b[j] = cb
            out_rel[j] = cout
            j += 1
    return out_a, out_b, out_rel


def simulate_ideal(
    p: IdealParams,
    w: PermeabilityWaveform,
    duration: float,
    stride: int = 1,
) -> TimeSeriesRecord:
    """Simulate the idealized transmitter from an all-zero initial state.

    Counts are reported as molecules: concentration * V_in * N_a inside and
    concentration * V_out * N_a for the accumulated release.  One sample is
    emitted every `stride` steps (plus the initial state).
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n_steps = int(round(duration / p.T))
    # rho is frozen at each step's start time: step k uses rho((k-1) T).
    rho = w.sample_steps(n_steps, p.T) if n_steps else np.zeros(0)
    n_samples = n_steps // stride + 1
    out_a, out_b, out_rel = _ideal_loop(
        rho, p.k_AB, p.C_out0_A, p.V_in / p.V_out, p.T, stride, n_samples
    )
    t = np.arange(n_samples) * (stride * p.T)
    record = TimeSeriesRecord(
        time=t,
        rho=w.sample(t),
        columns={
            "N_in_A": out_a * p.V_in * p.N_a,
            "N_in_B": out_b * p.V_in * p.N_a,
            "N_out_B": out_rel * p.V_out * p.N_a,
        },
        metadata={"model": "ideal", "k_AB": p.k_AB, "T": p.T, "stride": stride},
    )
    return record
