"""Physical configuration, derived constants, and config-file parsing.

All quantities are SI: lengths in m, time in s, concentrations in mol/m^3,
permeability in 1/s.  Molecule counts are dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

AVOGADRO = 6.022e23  # 1/mol

# Default parameter set used throughout (diffusion coefficient, geometry,
# environment population, membrane permeability, time step).
DEFAULTS = dict(
    D=2.6e-12,
    r_in=80e-9,
    r_out=1e-3,
    r_RX=1e-6,
    d=2e-6,
    N_out_A=1e16,
    rho_max=2.7e-2,
    T=1e-4,
)

# Default rate of the first-order A -> B conversion in the idealized model.
DEFAULT_K_AB = 1e-1


class ConfigError(ValueError):
    """Raised when a configuration violates its physical invariants."""


@dataclass(frozen=True)
class SystemConfig:
    """Geometry, diffusion, and membrane parameters of the TX system.

    Attributes
    ----------
    D : diffusion coefficient [m^2/s]
    r_in : nanoparticle radius [m]
    r_out : radius of the surrounding environment [m]
    r_RX : receiver radius [m]
    d : TX-RX center-to-center distance [m]
    N_out_A : number of type-A molecules in the environment
    rho_max : maximum membrane permeability [1/s]
    T : simulation time step [s]
    N_a : Avogadro constant [1/mol]
    """

    D: float = DEFAULTS["D"]
    r_in: float = DEFAULTS["r_in"]
    r_out: float = DEFAULTS["r_out"]
    r_RX: float = DEFAULTS["r_RX"]
    d: float = DEFAULTS["d"]
    N_out_A: float = DEFAULTS["N_out_A"]
    rho_max: float = DEFAULTS["rho_max"]
    T: float = DEFAULTS["T"]
    N_a: float = AVOGADRO

    def __post_init__(self):
        for name in ("D", "r_in", "r_out", "r_RX", "d", "T"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.N_out_A < 0:
            raise ConfigError(f"N_out_A must be >= 0, got {self.N_out_A}")
        if self.rho_max < 0:
            raise ConfigError(f"rho_max must be >= 0, got {self.rho_max}")
        # The environment must dwarf the nanoparticle, otherwise the
        # constant-background-concentration assumption breaks down.
        if self.r_out < 100.0 * self.r_in:
            raise ConfigError(
                f"r_out ({self.r_out}) must be at least 100*r_in ({100 * self.r_in})"
            )
        if self.d <= self.r_RX:
            raise ConfigError(f"d ({self.d}) must exceed r_RX ({self.r_RX})")

    def with_overrides(self, **kwargs) -> "SystemConfig":
        """Return a copy with the given fields replaced (and re-validated)."""
        return replace(self, **kwargs)


@dataclass(frozen=True)
class DerivedConstants:
    """Quantities computed from a SystemConfig.

    V_in, V_out : compartment volumes [m^3]
    C_out0_A : background type-A concentration in the environment [mol/m^3]
    N_max : molecule capacity of the nanoparticle at background concentration
    rho_hat_max : maximum permeability in velocity units [m/s]
    """

    V_in: float
    V_out: float
    C_out0_A: float
    N_max: float
    rho_hat_max: float


def derive_constants(cfg: SystemConfig) -> DerivedConstants:
    """Compute the derived constants for a valid system configuration.

    The velocity-form permeability follows from rho = rho_hat * A / V_in
    with A the membrane surface area, which reduces to
    rho_hat = rho * r_in / 3 for a sphere.
    """
    v_in = (4.0 / 3.0) * math.pi * cfg.r_in**3
    v_out = (4.0 / 3.0) * math.pi * cfg.r_out**3
    c_out0_a = cfg.N_out_A / (v_out * cfg.N_a)
    n_max = c_out0_a * v_in * cfg.N_a
    rho_hat_max = cfg.rho_max * cfg.r_in / 3.0
    return DerivedConstants(
        V_in=v_in,
        V_out=v_out,
        C_out0_A=c_out0_a,
        N_max=n_max,
        rho_hat_max=rho_hat_max,
    )


_FIELD_NAMES = tuple(f.name for f in fields(SystemConfig))


def parse_config_text(text: str) -> dict:
    """Parse a flat key-value config ("key = value" per line, '#' comments).

    Keys must be SystemConfig field names; values are floats.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _FIELD_NAMES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = float(val.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val.strip()!r}") from exc
    return values


def load_config(path, **overrides) -> SystemConfig:
    """Load a SystemConfig from a key-value file; missing keys use defaults.

    Keyword overrides (e.g. from CLI flags) take precedence over the file.
    """
    with open(path) as fh:
        values = parse_config_text(fh.read())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SystemConfig(**values)
