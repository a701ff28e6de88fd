"""Scenario configuration: JSON-facing models, validation, unit conversion.

Configuration files speak the operator's units (hours, m^3/h by default);
everything behind :func:`compile_spec` is strict SI.  The pydantic models
double as the request/response schema of the HTTP service, so schema
violations surface with field-path diagnostics in both places.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .constitutive import ConstitutiveSet
from .errors import ConfigurationError
from .geometry import AreaProfile, AreaSegment
from .reactions import DenitrificationKinetics
from . import scenario as _runtime

_HOUR = 3600.0


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScheduleSpec(_StrictModel):
    """Piecewise-constant scalar schedule; value i holds on [times[i], times[i+1])."""

    times: list[float] = Field(min_length=1)
    values: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self) -> "ScheduleSpec":
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if self.times[0] != 0.0:
            raise ValueError("schedules must start at t = 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("schedule times must be strictly increasing")
        return self


class VectorScheduleSpec(_StrictModel):
    """Piecewise-constant vector schedule (one list per breakpoint)."""

    times: list[float] = Field(min_length=1)
    values: list[list[float]] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self) -> "VectorScheduleSpec":
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if self.times[0] != 0.0:
            raise ValueError("schedules must start at t = 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("schedule times must be strictly increasing")
        width = {len(v) for v in self.values}
        if len(width) != 1:
            raise ValueError("all schedule vectors must have the same length")
        return self


class AreaSegmentSpec(_StrictModel):
    kind: Literal["cylinder", "cone"]
    z_top: float
    z_bottom: float
    area: Optional[float] = Field(default=None, gt=0.0)         # cylinder [m^2]
    area_top: Optional[float] = Field(default=None, gt=0.0)     # cone [m^2]
    area_bottom: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check(self) -> "AreaSegmentSpec":
        if self.z_bottom <= self.z_top:
            raise ValueError("segment needs z_bottom > z_top")
        if self.kind == "cylinder":
            if self.area is None or self.area_top is not None or self.area_bottom is not None:
                raise ValueError("cylinder segments take exactly the 'area' field")
        else:
            if self.area is not None or self.area_top is None or self.area_bottom is None:
                raise ValueError("cone segments take 'area_top' and 'area_bottom'")
        return self

    def build(self) -> AreaSegment:
        if self.kind == "cylinder":
            return AreaSegment.cylinder(self.z_top, self.z_bottom, self.area)
        return AreaSegment.cone(self.z_top, self.z_bottom, self.area_top, self.area_bottom)


class GeometrySpec(_StrictModel):
    """Vessel wall as contiguous segments from z = -H (top) to z = B (bottom)."""

    segments: list[AreaSegmentSpec] = Field(min_length=1)


class ProfilePieceSpec(_StrictModel):
    """One linear piece of an initial profile: value_from at z_from to value_to at z_to."""

    z_from: float
    z_to: float
    value_from: float
    value_to: float

    @model_validator(mode="after")
    def _check(self) -> "ProfilePieceSpec":
        if self.z_to <= self.z_from:
            raise ValueError("profile piece needs z_to > z_from")
        return self


class InitialSpec(_StrictModel):
    solids: list[list[ProfilePieceSpec]] = Field(min_length=1)
    solubles: list[list[ProfilePieceSpec]] = Field(min_length=1)


class MaterialSpec(_StrictModel):
    """Settling/compression parameters; defaults are the calibrated sludge."""

    v0: float = Field(default=1.76e-3, gt=0.0)
    x_bar: float = Field(default=3.87, gt=0.0)
    eta: float = Field(default=3.58, gt=1.0)
    x_crit: float = Field(default=5.0, gt=0.0)
    alpha: float = Field(default=0.2, gt=0.0)
    rho_solid: float = Field(default=1050.0, gt=0.0)
    rho_fluid: float = Field(default=998.0, gt=0.0)
    gravity: float = Field(default=9.81, gt=0.0)
    x_max: float = Field(default=30.0, gt=0.0)

    def build(self) -> ConstitutiveSet:
        return ConstitutiveSet(
            v0=self.v0, x_bar=self.x_bar, eta=self.eta, x_crit=self.x_crit,
            alpha=self.alpha, rho_solid=self.rho_solid, rho_fluid=self.rho_fluid,
            gravity=self.gravity, x_max=self.x_max)


class KineticsSpec(_StrictModel):
    enabled: bool = True
    yield_coeff: float = Field(default=0.67, gt=0.0, lt=1.0)
    decay_rate: float = Field(default=6.94e-6, ge=0.0)
    inert_fraction: float = Field(default=0.2, ge=0.0, le=1.0)
    mu_max: float = Field(default=5.56e-5, ge=0.0)
    half_sat_no3: float = Field(default=5e-4, gt=0.0)
    half_sat_substrate: float = Field(default=0.02, gt=0.0)
    biomass_cap: Literal["none", "ramp"] = "none"

    def build(self, x_max: float) -> Optional[DenitrificationKinetics]:
        if not self.enabled:
            return None
        return DenitrificationKinetics(
            yield_coeff=self.yield_coeff, decay_rate=self.decay_rate,
            inert_fraction=self.inert_fraction, mu_max=self.mu_max,
            half_sat_no3=self.half_sat_no3,
            half_sat_substrate=self.half_sat_substrate,
            x_max=x_max, biomass_cap=self.biomass_cap)


class ScenarioSpec(_StrictModel):
    """Complete scenario description as stored on disk / sent over the wire."""

    name: str
    time_unit: Literal["h", "s"] = "h"
    flow_unit: Literal["m3/h", "m3/s"] = "m3/h"
    geometry: GeometrySpec
    feed_flow: ScheduleSpec          # Q_f
    underflow: ScheduleSpec          # Q_u
    feed_solids: VectorScheduleSpec  # C_f per solid component [kg/m^3]
    feed_solubles: VectorScheduleSpec
    initial: InitialSpec
    material: MaterialSpec = MaterialSpec()
    kinetics: KineticsSpec = KineticsSpec()
    diffusion: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])


def _schedule(times: list[float], values, time_scale: float,
              value_scale: float = 1.0) -> _runtime.Schedule:
    return _runtime.Schedule(
        starts=np.asarray(times, dtype=float) * time_scale,
        values=np.asarray(values, dtype=float) * value_scale)


def _pieces(pieces: list[ProfilePieceSpec]) -> _runtime.PiecewiseLinear:
    return _runtime.PiecewiseLinear(
        z_from=np.array([p.z_from for p in pieces]),
        z_to=np.array([p.z_to for p in pieces]),
        value_from=np.array([p.value_from for p in pieces]),
        value_to=np.array([p.value_to for p in pieces]))


def compile_spec(spec: ScenarioSpec) -> "_runtime.Scenario":
    """Turn a validated spec into the SI runtime scenario (checks physics)."""
    time_scale = _HOUR if spec.time_unit == "h" else 1.0
    flow_scale = 1.0 / _HOUR if spec.flow_unit == "m3/h" else 1.0
    try:
        profile = AreaProfile(tuple(seg.build() for seg in spec.geometry.segments))
    except ConfigurationError as exc:
        raise ConfigurationError(f"geometry: {exc}") from exc
    laws = spec.material.build()
    reactions = spec.kinetics.build(x_max=spec.material.x_max)
    n_solids = len(spec.feed_solids.values[0])
    n_solubles = len(spec.feed_solubles.values[0])
    if reactions is not None:
        if n_solids != len(reactions.solid_names) or n_solubles != len(reactions.soluble_names):
            raise ConfigurationError(
                "feed vectors must match the reaction model's component counts "
                f"({len(reactions.solid_names)} solids, {len(reactions.soluble_names)} solubles)")
    if len(spec.initial.solids) != n_solids or len(spec.initial.solubles) != n_solubles:
        raise ConfigurationError("initial profiles must cover every component")
    if len(spec.diffusion) != n_solubles:
        raise ConfigurationError("diffusion needs one coefficient per soluble component")
    if any(d < 0.0 for d in spec.diffusion):
        raise ConfigurationError("diffusion coefficients must be nonnegative")
    scn = _runtime.Scenario(
        name=spec.name,
        profile=profile,
        feed_flow=_schedule(spec.feed_flow.times, spec.feed_flow.values,
                            time_scale, flow_scale),
        underflow=_schedule(spec.underflow.times, spec.underflow.values,
                            time_scale, flow_scale),
        feed_solids=_schedule(spec.feed_solids.times, spec.feed_solids.values,
                              time_scale),
        feed_solubles=_schedule(spec.feed_solubles.times, spec.feed_solubles.values,
                                time_scale),
        initial_solids=tuple(_pieces(p) for p in spec.initial.solids),
        initial_solubles=tuple(_pieces(p) for p in spec.initial.solubles),
        laws=laws,
        reactions=reactions,
        diffusion=np.asarray(spec.diffusion, dtype=float),
    )
    scn.validate()
    return scn


def load_spec(source) -> ScenarioSpec:
    """Resolve a builtin scenario name or read a JSON file into a spec."""
    from .builtins import BUILTIN_NAMES, builtin_spec

    text = str(source)
    if text in BUILTIN_NAMES:
        return builtin_spec(text)
    path = Path(source)
    if not path.exists():
        raise ConfigurationError(
            f"scenario {text!r} is neither a builtin ({', '.join(BUILTIN_NAMES)}) "
            "nor an existing file")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return ScenarioSpec.model_validate(payload)
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def load_scenario(source) -> "_runtime.Scenario":
    """One-call loading: builtin name or JSON path to a ready runtime scenario."""
    return compile_spec(load_spec(source))


def write_spec(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(spec.model_dump_json(indent=2) + "\n")
