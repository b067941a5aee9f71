"""Physical parameter sets for the Endex carboniser/calciner model.

All quantities are stored in strict SI (Pa, K, s, mol, m^3, J, kg).  The
literature table quotes some entries in kJ and MPa; those are converted once
in :func:`default_params`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

R_GAS = 8.314  # J/(mol K)


class ParameterError(ValueError):
    """Raised for invalid or unknown model parameters."""


@dataclass(frozen=True)
class KineticParams:
    """Surface-reaction kinetics shared by both segments."""

    A: float = 114.0
    E: float = 205e3
    dH: float = -170e3
    p0: float = 4.147e12
    eps: float = 0.51
    S: float = 5e7
    kappa: float = 1.0

    def __post_init__(self):
        if not self.E > 0:
            raise ParameterError(f"activation energy must be positive, got {self.E}")
        if not self.p0 > 0:
            raise ParameterError(f"p0 must be positive, got {self.p0}")
        if not 0 < self.eps <= 1:
            raise ParameterError(f"porosity must lie in (0, 1], got {self.eps}")
        if not self.S > 0:
            raise ParameterError(f"surface area must be positive, got {self.S}")
        if not self.kappa > 0:
            raise ParameterError(f"rate scale must be positive, got {self.kappa}")
        if not self.dH < 0:
            raise ParameterError(f"carbonation enthalpy must be negative, got {self.dH}")


@dataclass(frozen=True)
class SegmentParams:
    """Geometry and heat capacities of one reactor segment."""

    V: float
    zeta: float
    C: float
    Cg: float

    def __post_init__(self):
        if not self.V > 0:
            raise ParameterError(f"volume must be positive, got {self.V}")
        if not 0 <= self.zeta <= 1:
            raise ParameterError(f"solid fraction must lie in [0, 1], got {self.zeta}")
        if not (self.C > 0 and self.Cg > 0):
            raise ParameterError("heat capacities must be positive")


@dataclass(frozen=True)
class FlowParams:
    """Flows, coupling and inlet conditions."""

    tau1: float = 15.0
    tau2: float = 30.0
    Fs: float = 20.0
    Cs: float = 975.0
    Lex: float = 0.0
    T1_in: float = 1060.0
    pc_in: float = 24.3 * R_GAS * 1060.0
    Ts_in: float = 1021.0

    def __post_init__(self):
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ParameterError("residence times must be positive")
        if not self.Fs >= 0:
            raise ParameterError(f"solids flow must be non-negative, got {self.Fs}")
        if not self.Lex >= 0:
            raise ParameterError(f"wall exchange must be non-negative, got {self.Lex}")
        if not self.T1_in > 0:
            raise ParameterError(f"inlet temperature must be positive, got {self.T1_in}")
        if not self.pc_in >= 0:
            raise ParameterError(f"inlet CO2 pressure must be non-negative, got {self.pc_in}")
        if not self.Ts_in > 0:
            raise ParameterError(f"sorbent inlet temperature must be positive, got {self.Ts_in}")

    @property
    def c1_in(self) -> float:
        return self.pc_in / (R_GAS * self.T1_in)


def _carboniser() -> SegmentParams:
    return SegmentParams(V=math.pi * 0.25**2 * 12, zeta=0.5, C=160e3, Cg=5.8e3)


def _calciner() -> SegmentParams:
    return SegmentParams(V=math.pi * 2.0**2 * 12, zeta=0.008, C=25e3, Cg=25.0)


@dataclass(frozen=True)
class ModelParams:
    kinetics: KineticParams = field(default_factory=KineticParams)
    carboniser: SegmentParams = field(default_factory=_carboniser)
    calciner: SegmentParams = field(default_factory=_calciner)
    flow: FlowParams = field(default_factory=FlowParams)

    def with_values(self, **values: float) -> "ModelParams":
        """Return a copy with flat-named fields replaced, e.g. ``with_values(Fs=40.0)``."""
        groups: dict[str, dict[str, float]] = {}
        for name, value in values.items():
            group, attr = _lookup(name)
            groups.setdefault(group, {})[attr] = float(value)
        return dataclasses.replace(
            self,
            **{g: dataclasses.replace(getattr(self, g), **kv) for g, kv in groups.items()},
        )

    def get(self, name: str) -> float:
        group, attr = _lookup(name)
        return getattr(getattr(self, group), attr)

    def as_flat_dict(self) -> dict[str, float]:
        return {name: self.get(name) for name in PARAMETERS}


# flat name -> (group, attribute, SI unit)
PARAMETERS: dict[str, tuple[str, str, str]] = {
    "A": ("kinetics", "A", "1"),
    "E": ("kinetics", "E", "J/mol"),
    "dH": ("kinetics", "dH", "J/mol"),
    "p0": ("kinetics", "p0", "Pa"),
    "eps": ("kinetics", "eps", "1"),
    "S": ("kinetics", "S", "m^2/m^3"),
    "kappa": ("kinetics", "kappa", "1"),
    "V1": ("carboniser", "V", "m^3"),
    "zeta1": ("carboniser", "zeta", "1"),
    "C1": ("carboniser", "C", "J/(K m^3)"),
    "C1g": ("carboniser", "Cg", "J/(K m^3)"),
    "V2": ("calciner", "V", "m^3"),
    "zeta2": ("calciner", "zeta", "1"),
    "C2": ("calciner", "C", "J/(K m^3)"),
    "C2g": ("calciner", "Cg", "J/(K m^3)"),
    "tau1": ("flow", "tau1", "s"),
    "tau2": ("flow", "tau2", "s"),
    "Fs": ("flow", "Fs", "kg/s"),
    "Cs": ("flow", "Cs", "J/(K kg)"),
    "Lex": ("flow", "Lex", "W/K"),
    "T1_in": ("flow", "T1_in", "K"),
    "pc_in": ("flow", "pc_in", "Pa"),
    "Ts_in": ("flow", "Ts_in", "K"),
}

# Parameters a branch may be traced against.
TUNABLE = ("T1_in", "tau1", "tau2", "Fs", "Lex", "pc_in", "Ts_in")


def _lookup(name: str) -> tuple[str, str]:
    try:
        group, attr, _ = PARAMETERS[name]
    except KeyError:
        raise ParameterError(f"unknown parameter {name!r}") from None
    return group, attr


def si_unit(name: str) -> str:
    _lookup(name)
    return PARAMETERS[name][2]


def default_params() -> ModelParams:
    """Literature parameter set, converted to SI.

    Operating-point entries that the table leaves open (residence times,
    solids flow, wall exchange) default to the nominal case
    tau1 = 15 s, tau2 = 30 s, Fs = 20 kg/s, Lex = 0.
    """
    return ModelParams()
