"""Built-in experiment scenarios and the experiment runner.

Each scenario bundles a membrane switching pattern, a model choice, a
duration, and default parameters.  The scenario names follow the standard
evaluation set: single reloading cycle (fig3/fig5), multi-cycle signaling
(fig4/fig6), and the ramped switching study (fig6-ramp / fig6-inst).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .config import DEFAULT_K_AB, ConfigError, SystemConfig
from .enzyme import EnzymeRates, simulate_practical
from .ideal import IdealParams, simulate_ideal
from .pbs import PbsConfig, run_pbs
from .receiver import ReceiverConfig, add_received_column
from .record import TimeSeriesRecord
from .waveform import waveform_instantaneous, waveform_ramp

MODELS = ("ideal", "practical", "pbs-ideal", "pbs-enzyme")


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved experiment: scenario plus parameter choices."""

    name: str
    model: str
    switch_times: tuple
    duration: float
    t_dis: float = 0.0
    k_AB: float = DEFAULT_K_AB
    n_mr: int = 4
    stride: int = 100
    seed: int = 0
    n_runs: int = 100
    system: SystemConfig = field(default_factory=SystemConfig)
    rates: EnzymeRates = field(default_factory=EnzymeRates)
    with_receiver: bool = True

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")

    def waveform(self):
        if self.t_dis > 0:
            return waveform_ramp(self.switch_times, self.t_dis, self.system.rho_max)
        return waveform_instantaneous(self.switch_times, self.system.rho_max)


_SWITCH_SINGLE = (0.0, 5.0)
_SWITCH_MULTI = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
_SWITCH_SLOW = (0.0, 55.0, 110.0, 165.0)

BUILTIN_SCENARIOS = {
    "fig3": ExperimentSpec(
        name="fig3", model="ideal", switch_times=_SWITCH_SINGLE, duration=10.0
    ),
    "fig4": ExperimentSpec(
        name="fig4", model="ideal", switch_times=_SWITCH_MULTI, duration=30.0
    ),
    "fig5": ExperimentSpec(
        name="fig5", model="practical", switch_times=_SWITCH_SINGLE, duration=10.0
    ),
    "fig6": ExperimentSpec(
        name="fig6", model="practical", switch_times=_SWITCH_MULTI, duration=30.0
    ),
    "fig6-ramp": ExperimentSpec(
        name="fig6-ramp",
        model="practical",
        switch_times=_SWITCH_SLOW,
        duration=220.0,
        t_dis=45.0,
    ),
    "fig6-inst": ExperimentSpec(
        name="fig6-inst",
        model="practical",
        switch_times=_SWITCH_SLOW,
        duration=220.0,
    ),
}

SCENARIO_ALIASES = {"fig7-ramp": "fig6-ramp", "fig7-inst": "fig6-inst"}


def get_scenario(name: str) -> ExperimentSpec:
    name = SCENARIO_ALIASES.get(name, name)
    try:
        return BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {', '.join(list_scenarios())}"
        ) from None


def list_scenarios():
    return sorted(BUILTIN_SCENARIOS) + sorted(SCENARIO_ALIASES)


def run_experiment(spec: ExperimentSpec, n_jobs=None) -> TimeSeriesRecord:
    """Run the experiment and return its sampled trajectory.

    Deterministic models append a received-count column via the analytic
    receiver; PBS models count absorption directly.
    """
    w = spec.waveform()
    cfg = spec.system
    if spec.model == "ideal":
        record = simulate_ideal(
            IdealParams.from_config(cfg, spec.k_AB), w, spec.duration, spec.stride
        )
    elif spec.model == "practical":
        record = simulate_practical(
            cfg, spec.rates, spec.n_mr, w, spec.duration, spec.stride
        )
    else:
        mode = "enzyme" if spec.model == "pbs-enzyme" else "ideal"
        pc = PbsConfig(
            system=cfg,
            mode=mode,
            k_AB=spec.k_AB,
            rates=spec.rates,
            n_mr=spec.n_mr,
            seed=spec.seed,
            n_runs=spec.n_runs,
        )
        record = run_pbs(pc, w, spec.duration, spec.stride, n_jobs=n_jobs).to_record()
    if spec.with_receiver and spec.model in ("ideal", "practical"):
        add_received_column(record, ReceiverConfig.from_config(cfg))
    record.metadata["scenario"] = spec.name
    for key, value in (
        ("D", cfg.D),
        ("r_in", cfg.r_in),
        ("r_out", cfg.r_out),
        ("r_RX", cfg.r_RX),
        ("d", cfg.d),
        ("N_out_A", cfg.N_out_A),
        ("rho_max", cfg.rho_max),
        ("switch_times", " ".join(str(t) for t in spec.switch_times)),
        ("t_dis", spec.t_dis),
        ("duration", spec.duration),
    ):
        record.metadata[key] = value
    return record


def spec_with(spec: ExperimentSpec, **kwargs) -> ExperimentSpec:
    """Copy a scenario with overrides (ignores None values)."""
    return replace(spec, **{k: v for k, v in kwargs.items() if v is not None})
