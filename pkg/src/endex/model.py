"""Rate laws and right-hand sides of the carboniser/calciner dynamics.

State vectors are ordered ``(c1, T1, c2, T2)`` for the coupled Endex system
and ``(c1, T1)`` for the standalone carboniser.  All functions are pure.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np

from .params import R_GAS, KineticParams, ModelParams, SegmentParams


class DomainError(ValueError):
    """An argument lies outside the physical domain of a rate law."""


@dataclass(frozen=True)
class EndexState:
    c1: float
    T1: float
    c2: float
    T2: float

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise DomainError(f"negative concentration in {self}")
        if not (self.T1 > 0 and self.T2 > 0):
            raise DomainError(f"non-positive temperature in {self}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "EndexState":
        return cls(*(float(v) for v in x))


@dataclass(frozen=True)
class CarboniserState:
    c1: float
    T1: float

    def __post_init__(self):
        if self.c1 < 0:
            raise DomainError(f"negative concentration in {self}")
        if not self.T1 > 0:
            raise DomainError(f"non-positive temperature in {self}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "CarboniserState":
        return cls(*(float(v) for v in x))


def _check_temperature(T: float) -> None:
    if not math.isfinite(T) or T <= 0:
        raise DomainError(f"temperature must be finite and positive, got {T}")


def arrhenius_k(T: float, kin: KineticParams) -> float:
    _check_temperature(T)
    return kin.A * math.exp(-kin.E / (R_GAS * T))


def equilibrium_pressure(T: float, kin: KineticParams) -> float:
    """CO2 pressure (Pa) at which carbonation and calcination balance."""
    _check_temperature(T)
    return kin.p0 * math.exp(-abs(kin.dH) / (R_GAS * T))


def pressure_of(c: float, T: float) -> float:
    if not c >= 0:
        raise DomainError(f"concentration must be non-negative, got {c}")
    _check_temperature(T)
    return c * R_GAS * T


def coverage(p: float, p_eq: float) -> float:
    """Langmuir coverage for a CO2 molecule occupying two surface sites."""
    if not p >= 0:
        raise DomainError(f"pressure must be non-negative, got {p}")
    if not p_eq > 0:
        raise DomainError(f"equilibrium pressure must be positive, got {p_eq}")
    try:
        r = math.sqrt(p / p_eq)
    except OverflowError:
        return 1.0
    if math.isinf(r):
        return 1.0
    return r / (1.0 + r)


def carbonation_rate(T1: float, p1: float, kin: KineticParams, seg: SegmentParams) -> float:
    """Net carbonation rate in the carboniser, mol m^-3 s^-1."""
    p_eq = equilibrium_pressure(T1, kin)
    theta = coverage(p1, p_eq)
    k = arrhenius_k(T1, kin)
    v = kin.kappa * (p1 / p_eq - 1.0) * theta * kin.eps * k * seg.zeta * kin.S
    return _finite(v, "carbonation rate")


def calcination_rate(T2: float, p2: float, kin: KineticParams, seg: SegmentParams) -> float:
    """Net calcination rate in the calciner, mol m^-3 s^-1."""
    p_eq = equilibrium_pressure(T2, kin)
    theta = coverage(p2, p_eq)
    k = arrhenius_k(T2, kin)
    v = kin.kappa * (1.0 - p2 / p_eq) * (1.0 - theta) * kin.eps * k * seg.zeta * kin.S
    return _finite(v, "calcination rate")


def _as_vector(s) -> np.ndarray:
    if isinstance(s, (EndexState, CarboniserState)):
        return s.as_array()
    return np.asarray(s, dtype=float)


def _components(s) -> list[float]:
    return [float(v) for v in _as_vector(s)]


def _finite(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise DomainError(f"{what} is not finite")
    return v


def endex_rhs(s, P: ModelParams) -> np.ndarray:
    """Time derivatives ``(dc1/dt, dT1/dt, dc2/dt, dT2/dt)`` of the coupled system."""
    c1, T1, c2, T2 = _components(s)
    kin, seg1, seg2, fl = P.kinetics, P.carboniser, P.calciner, P.flow
    v1 = carbonation_rate(T1, pressure_of(c1, T1), kin, seg1)
    v2 = calcination_rate(T2, pressure_of(c2, T2), kin, seg2)
    F1 = seg1.V / fl.tau1
    F2 = seg2.V / fl.tau2
    G = fl.Fs * fl.Cs + fl.Lex
    dc1 = -v1 + (fl.c1_in - c1) / fl.tau1
    dT1 = (
        seg1.V * (-kin.dH) * v1 + F1 * seg1.Cg * (fl.T1_in - T1) + G * (T2 - T1)
    ) / (seg1.V * seg1.C)
    dc2 = v2 - c2 / fl.tau2
    dT2 = (
        seg2.V * kin.dH * v2 - F2 * seg2.Cg * T2 + G * (T1 - T2)
    ) / (seg2.V * seg2.C)
    return np.array([dc1, dT1, dc2, dT2])


def standalone_rhs(s, P: ModelParams) -> np.ndarray:
    """Time derivatives ``(dc1/dt, dT1/dt)`` of the standalone carboniser.

    Sorbent enters at the fixed temperature ``Ts_in`` and its heat is lost
    with the outflow instead of being returned by a calciner.
    """
    c1, T1 = _components(s)
    kin, seg1, fl = P.kinetics, P.carboniser, P.flow
    v1 = carbonation_rate(T1, pressure_of(c1, T1), kin, seg1)
    F1 = seg1.V / fl.tau1
    dc1 = -v1 + (fl.c1_in - c1) / fl.tau1
    dT1 = (
        seg1.V * (-kin.dH) * v1
        + F1 * seg1.Cg * (fl.T1_in - T1)
        + fl.Fs * fl.Cs * (fl.Ts_in - T1)
    ) / (seg1.V * seg1.C)
    return np.array([dc1, dT1])


MODES = ("endex", "standalone")


def rhs_for(mode: str):
    if mode == "endex":
        return endex_rhs
    if mode == "standalone":
        return standalone_rhs
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def state_scale(P: ModelParams, mode: str) -> np.ndarray:
    """Per-component scale: concentrations by ``c1_in``, temperatures by 1000 K."""
    c = P.flow.c1_in if P.flow.c1_in > 0 else 1.0
    scale = np.array([c, 1000.0, c, 1000.0])
    return scale if mode == "endex" else scale[:2]


def scaled_norm(dx, P: ModelParams, mode: str) -> float:
    return float(np.linalg.norm(np.asarray(dx, dtype=float) / state_scale(P, mode)))


def fd_scale(mode: str) -> np.ndarray:
    """Finite-difference step floors.

    Concentrations get a tiny floor so steps stay relative: at low
    temperature the calciner holds ~1e-15 mol/m^3 and an absolute step
    would swamp it.
    """
    scale = np.array([1e-12, 1.0, 1e-12, 1.0])
    return scale if mode == "endex" else scale[:2]


def nonnegative_components(mode: str) -> tuple[int, ...]:
    return (0, 2) if mode == "endex" else (0,)


def derived_quantities(x, P: ModelParams, mode: str) -> dict[str, float]:
    """Partial pressures, their equilibrium values and carboniser conversion."""
    x = _as_vector(x)
    kin = P.kinetics
    c1, T1 = x[0], x[1]
    out = {
        "p1": pressure_of(max(c1, 0.0), T1),
        "p1_eq": equilibrium_pressure(T1, kin),
        "conversion": 1.0 - c1 / P.flow.c1_in if P.flow.c1_in > 0 else float("nan"),
    }
    if mode == "endex":
        c2, T2 = x[2], x[3]
        out["p2"] = pressure_of(max(c2, 0.0), T2)
        out["p2_eq"] = equilibrium_pressure(T2, kin)
    else:
        out["p2"] = float("nan")
        out["p2_eq"] = float("nan")
    return out


def adiabatic_rise(P: ModelParams, c: float | None = None) -> float:
    """Temperature rise for complete carbonation of ``c`` mol/m^3 against the gas heat capacity."""
    if c is None:
        c = P.flow.c1_in
    return c * abs(P.kinetics.dH) / P.carboniser.Cg
