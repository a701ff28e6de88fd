"""Builtin benchmark scenarios.

Five ready-to-run secondary-settling cases exercised throughout the test
suite: a cylindrical vessel with step-loaded feed (example1) and a
varying-area vessel family (example2..example5) that differs only in initial
soluble profiles and soluble diffusion.  All numbers are operator units
(hours, m^3/h) and converted at compile time.
"""
from __future__ import annotations

from .config import (AreaSegmentSpec, GeometrySpec, InitialSpec, ProfilePieceSpec,
                     ScenarioSpec, ScheduleSpec, VectorScheduleSpec)

BUILTIN_NAMES = ("example1", "example2", "example3", "example4", "example5")

# the two solid components are fixed fractions 5/7 and 2/7 of the fed total
_OHO_FRACTION = 5.0 / 7.0
_INERT_FRACTION = 2.0 / 7.0


def _const(z0: float, z1: float, value: float) -> ProfilePieceSpec:
    return ProfilePieceSpec(z_from=z0, z_to=z1, value_from=value, value_to=value)


def _ramp(z0: float, z1: float, v0: float, v1: float) -> ProfilePieceSpec:
    return ProfilePieceSpec(z_from=z0, z_to=z1, value_from=v0, value_to=v1)


def v7like_geometry() -> GeometrySpec:
    """Axisymmetric vessel with a conical mid-section and a wall step at z = 3 m."""
    return GeometrySpec(segments=[
        AreaSegmentSpec(kind="cylinder", z_top=-1.0, z_bottom=0.5, area=450.0),
        AreaSegmentSpec(kind="cone", z_top=0.5, z_bottom=3.0,
                        area_top=450.0, area_bottom=120.0),
        AreaSegmentSpec(kind="cylinder", z_top=3.0, z_bottom=4.0, area=120.0),
    ])


def _solids_feed(times: list[float], totals: list[float]) -> VectorScheduleSpec:
    return VectorScheduleSpec(
        times=times,
        values=[[x * _OHO_FRACTION, x * _INERT_FRACTION] for x in totals])


_FEED_SOLUBLES = VectorScheduleSpec(times=[0.0], values=[[6.0e-3, 9.0e-4, 0.0]])


def _example1() -> ScenarioSpec:
    bottom = 3.0
    # initial total solids: clear above 0.5 m, linear 3.5 -> 13 kg/m^3 below
    solids = [
        [_const(-1.0, 0.5, 0.0),
         _ramp(0.5, bottom, 3.5 * frac, 13.0 * frac)]
        for frac in (_OHO_FRACTION, _INERT_FRACTION)
    ]
    solubles = [
        [_const(-1.0, 0.5, 6.0e-3), _const(0.5, bottom, 0.0)],
        [_const(-1.0, 0.5, 0.0), _ramp(0.5, bottom, 0.0, 0.12 * (bottom - 0.5))],
        [_const(-1.0, 0.5, 0.0), _const(0.5, bottom, 6.0e-3)],
    ]
    return ScenarioSpec(
        name="example1",
        geometry=GeometrySpec(segments=[
            AreaSegmentSpec(kind="cylinder", z_top=-1.0, z_bottom=bottom, area=400.0)]),
        feed_flow=ScheduleSpec(times=[0.0, 2.0, 4.0], values=[450.0, 130.0, 65.0]),
        underflow=ScheduleSpec(times=[0.0, 2.0, 4.0, 7.0],
                               values=[30.0, 100.0, 35.0, 50.0]),
        feed_solids=_solids_feed([0.0, 2.0, 4.0, 7.0], [1.0, 0.5, 3.0, 4.0]),
        feed_solubles=_FEED_SOLUBLES,
        initial=InitialSpec(solids=solids, solubles=solubles),
    )


def _example2_family(name: str, solubles: list[list[ProfilePieceSpec]],
                     diffusion: list[float]) -> ScenarioSpec:
    bottom = 4.0
    solids = [
        [_const(-1.0, 0.5, 0.0), _const(0.5, bottom, 20.0 / 7.0)],
        [_const(-1.0, 0.5, 0.0), _const(0.5, bottom, 8.0 / 7.0)],
    ]
    return ScenarioSpec(
        name=name,
        geometry=v7like_geometry(),
        feed_flow=ScheduleSpec(times=[0.0, 4.0, 6.0], values=[100.0, 150.0, 250.0]),
        underflow=ScheduleSpec(times=[0.0, 4.0, 6.0, 9.0],
                               values=[10.0, 100.0, 50.0, 5.0]),
        feed_solids=_solids_feed([0.0, 2.0, 4.0, 7.0], [4.0, 2.0, 5.0, 6.0]),
        feed_solubles=_FEED_SOLUBLES,
        initial=InitialSpec(solids=solids, solubles=solubles),
        diffusion=diffusion,
    )


def _example2() -> ScenarioSpec:
    bottom = 4.0
    solubles = [
        [_const(-1.0, 0.5, 6.0e-3), _const(0.5, bottom, 0.0)],
        [_const(-1.0, 0.5, 0.0), _ramp(0.5, bottom, 0.0, 0.12 * (bottom - 0.5))],
        [_const(-1.0, 0.5, 0.0), _const(0.5, bottom, 6.0e-3)],
    ]
    return _example2_family("example2", solubles, [0.0, 0.0, 0.0])


def _diffusion_family_solubles() -> list[list[ProfilePieceSpec]]:
    bottom = 4.0
    return [
        [_const(-1.0, 0.5, 6.0e-3), _const(0.5, bottom, 0.0)],
        [_const(-1.0, 0.5, 0.0), _ramp(0.5, bottom, 0.0, 0.12 * (bottom - 0.5))],
        [_const(-1.0, 0.5, 0.0), _const(0.5, 1.5, 3.0e-3), _const(1.5, bottom, 6.0e-3)],
    ]


def builtin_spec(name: str) -> ScenarioSpec:
    if name == "example1":
        return _example1()
    if name == "example2":
        return _example2()
    if name == "example3":
        return _example2_family("example3", _diffusion_family_solubles(),
                                [0.0, 0.0, 0.0])
    if name == "example4":
        return _example2_family("example4", _diffusion_family_solubles(),
                                [0.0, 0.0, 3.0e-6])
    if name == "example5":
        return _example2_family("example5", _diffusion_family_solubles(),
                                [1.0e-5, 5.0e-5, 3.0e-6])
    raise KeyError(f"unknown builtin scenario {name!r}")
