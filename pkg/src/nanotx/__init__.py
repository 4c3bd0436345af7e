"""Simulation toolkit for a switchable-membrane nanoparticle transmitter.

Deterministic discrete-time models of molecule harvesting, enzymatic
conversion, and controlled release, a particle-based stochastic oracle,
and an absorbing-receiver model, with a CSV experiment harness.
"""

from .config import (
    AVOGADRO,
    DEFAULTS,
    ConfigError,
    DerivedConstants,
    SystemConfig,
    derive_constants,
    load_config,
)
from .enzyme import (
    EnzymeRates,
    EnzymeTxState,
    equilibrium_constant,
    react_enzyme_substep,
    simulate_practical,
    step_practical,
)
from .ideal import (
    IdealParams,
    IdealTxState,
    ideal_open_fixed_point,
    simulate_ideal,
    step_ideal,
)
from .pbs import PbsConfig, PbsResult, membrane_step_calibration, run_pbs
from .receiver import ReceiverConfig, absorbed_series, add_received_column, hitting_cdf
from .record import TimeSeriesRecord
from .scenarios import ExperimentSpec, get_scenario, list_scenarios, run_experiment
from .waveform import (
    PermeabilityWaveform,
    WaveformError,
    waveform_instantaneous,
    waveform_ramp,
)

__version__ = "0.1.0"
