"""HTTP service exposing scenario runs over JSON.

The endpoints wrap the core package one-to-one: request models name a
builtin scenario or carry a full inline scenario spec, optional overrides
tweak kinetics and diffusion without editing that spec, and responses return
plain arrays ready for tabulation.  The CLI is a thin client of this app; it
mounts it in-process by default, so no server needs to run for local use.
"""
from __future__ import annotations

import logging
from typing import Literal, Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .builtins import BUILTIN_NAMES, builtin_spec
from .config import ScenarioSpec, compile_spec
from .errors import ConfigurationError, DomainError, InvariantViolationError
from .harness import cfl_curve, convergence_study, relative_l1_error
from .scenario import Scenario
from .stepping import DEFAULT_SAFETY, RunResult, simulate

log = logging.getLogger(__name__)

MAX_CELLS = 4096
MAX_HORIZON_S = 48 * 3600.0


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Union[str, ScenarioSpec]
    z_mode: Optional[Literal["none", "ramp"]] = None
    diffusion: Optional[list[float]] = None
    reactions_enabled: Optional[bool] = None


def _resolve(request: _Request) -> Scenario:
    if isinstance(request.scenario, str):
        name = request.scenario
        if name not in BUILTIN_NAMES:
            raise ConfigurationError(
                f"unknown scenario {name!r}; builtin names are "
                f"{', '.join(BUILTIN_NAMES)} (send a full spec for "
                "custom scenarios)")
        spec = builtin_spec(name)
    else:
        spec = request.scenario
    update = {}
    if request.z_mode is not None:
        update["kinetics"] = spec.kinetics.model_copy(
            update={"biomass_cap": request.z_mode})
    if request.reactions_enabled is not None:
        base = update.get("kinetics", spec.kinetics)
        update["kinetics"] = base.model_copy(
            update={"enabled": request.reactions_enabled})
    if request.diffusion is not None:
        update["diffusion"] = request.diffusion
    if update:
        spec = spec.model_copy(update=update)
    return compile_spec(spec)


class SimulateRequest(_Request):
    method: Literal["cs", "xp"] = "cs"
    cells: int = Field(default=128, ge=2, le=MAX_CELLS)
    horizon_s: float = Field(ge=0.0, le=MAX_HORIZON_S)
    cadence_s: Optional[float] = Field(default=None, gt=0.0)
    probe_times_s: list[float] = Field(default_factory=list)
    safety: float = Field(default=DEFAULT_SAFETY, gt=0.0, le=1.0)
    strict_invariants: bool = False
    compiled: bool = True


class ReportPayload(BaseModel):
    method: str
    cells: int
    steps: int
    dt_limit_s: float
    violations: int
    mass_residual: float
    wall_seconds: float


class SimulateResponse(BaseModel):
    name: str
    solid_names: list[str]
    soluble_names: list[str]
    dz: float
    z_centers: list[float]
    times_s: list[float]
    solids: list[list[list[float]]]    # [time][cell][component]
    solubles: list[list[list[float]]]
    water: list[list[float]]           # [time][cell]
    probe_times_s: list[float]
    probe_solids: list[list[list[float]]]
    probe_solubles: list[list[list[float]]]
    feed_flow: list[float]             # at snapshot times [m^3/s]
    effluent_flow: list[float]
    underflow: list[float]
    report: ReportPayload


class ConvergeRequest(_Request):
    method: Literal["cs", "xp"] = "cs"
    n_values: list[int] = Field(min_length=1)
    times_s: list[float] = Field(min_length=1)
    reference_cells: int = Field(default=1024, ge=4, le=MAX_CELLS)
    safety: Optional[float] = Field(default=None, gt=0.0, le=1.0)


class ConvergeResponse(BaseModel):
    name: str
    method: str
    reference_cells: int
    n_values: list[int]
    times_s: list[float]
    errors: list[list[float]]            # [time][n]
    orders: list[list[Optional[float]]]  # [time][n], null where undefined
    component_errors: list[list[list[float]]]
    component_names: list[str]
    cpu_seconds: list[float]


class CflCurveRequest(_Request):
    cell_counts: list[int] = Field(min_length=1)
    horizon_s: float = Field(default=9 * 3600.0, gt=0.0, le=MAX_HORIZON_S)
    safety: float = Field(default=1.0, gt=0.0, le=1.0)
    with_reactions: bool = True


class CflCurveResponse(BaseModel):
    name: str
    n_values: list[int]
    dz: list[float]
    dt_cs: list[float]
    dt_xp: list[Optional[float]]


class CompareRequest(_Request):
    cells: int = Field(default=128, ge=2, le=MAX_CELLS)
    horizon_s: float = Field(gt=0.0, le=MAX_HORIZON_S)
    probe_times_s: list[float] = Field(default_factory=list)
    safety: float = Field(default=DEFAULT_SAFETY, gt=0.0, le=1.0)


class CompareResponse(BaseModel):
    name: str
    cells: int
    solid_names: list[str]
    soluble_names: list[str]
    z_centers: list[float]
    probe_times_s: list[float]
    cs_solids: list[list[list[float]]]
    cs_solubles: list[list[list[float]]]
    xp_solids: list[list[list[float]]]
    xp_solubles: list[list[list[float]]]
    distances: list[float]                    # per probe time
    component_distances: list[list[float]]    # [time][component]
    cs_report: ReportPayload
    xp_report: ReportPayload


def _report_payload(result: RunResult) -> ReportPayload:
    r = result.report
    return ReportPayload(method=r.method, cells=r.n_cells, steps=r.steps,
                         dt_limit_s=r.dt_limit, violations=r.violations,
                         mass_residual=r.mass_residual,
                         wall_seconds=r.wall_seconds)


def _listify(array: np.ndarray):
    return np.asarray(array, dtype=float).tolist()


def create_app() -> FastAPI:
    app = FastAPI(title="settlesim", version=__version__,
                  description="one-dimensional reactive settling runs "
                              "for clarifier-thickener vessels")

    @app.exception_handler(ConfigurationError)
    async def _config_error(request, exc: ConfigurationError):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(DomainError)
    async def _domain_error(request, exc: DomainError):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(InvariantViolationError)
    async def _invariant_error(request, exc: InvariantViolationError):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/scenarios")
    def scenarios() -> dict:
        return {"names": list(BUILTIN_NAMES)}

    @app.get("/scenarios/{name}")
    def scenario_detail(name: str) -> ScenarioSpec:
        try:
            return builtin_spec(name)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no builtin scenario {name!r}")

    @app.post("/simulate")
    def run_simulation(request: SimulateRequest) -> SimulateResponse:
        scenario = _resolve(request)
        result = simulate(scenario, request.cells, request.horizon_s,
                          method=request.method, safety=request.safety,
                          cadence=request.cadence_s,
                          probe_times=tuple(request.probe_times_s),
                          strict_invariants=request.strict_invariants,
                          use_compiled=request.compiled)
        water = np.stack([result.water(i) for i in range(len(result.times))])
        return SimulateResponse(
            name=scenario.name,
            solid_names=list(scenario.solid_names),
            soluble_names=list(scenario.soluble_names),
            dz=result.grid.dz,
            z_centers=_listify(result.grid.z_centers),
            times_s=_listify(result.times),
            solids=_listify(result.solids),
            solubles=_listify(result.solubles),
            water=_listify(water),
            probe_times_s=_listify(result.probe_times),
            probe_solids=_listify(result.probe_solids),
            probe_solubles=_listify(result.probe_solubles),
            feed_flow=[scenario.feed_flow.value_at(t) for t in result.times],
            effluent_flow=[scenario.effluent_flow(t) for t in result.times],
            underflow=[scenario.underflow.value_at(t) for t in result.times],
            report=_report_payload(result))

    @app.post("/converge")
    def run_convergence(request: ConvergeRequest) -> ConvergeResponse:
        scenario = _resolve(request)
        report = convergence_study(
            scenario, tuple(request.n_values), tuple(request.times_s),
            reference_cells=request.reference_cells, method=request.method,
            safety=request.safety)
        orders = [[None if not np.isfinite(v) else float(v) for v in row]
                  for row in report.orders]
        return ConvergeResponse(
            name=scenario.name, method=report.method,
            reference_cells=report.reference_cells,
            n_values=list(report.n_values), times_s=list(report.times),
            errors=_listify(report.errors), orders=orders,
            component_errors=_listify(np.nan_to_num(report.component_errors)),
            component_names=list(scenario.solid_names)
            + list(scenario.soluble_names),
            cpu_seconds=_listify(report.cpu_seconds))

    @app.post("/cfl-curve")
    def run_cfl_curve(request: CflCurveRequest) -> CflCurveResponse:
        scenario = _resolve(request)
        curve = cfl_curve(scenario, tuple(request.cell_counts),
                          request.horizon_s, safety=request.safety,
                          with_reactions=request.with_reactions)
        dt_xp = [None if not np.isfinite(v) else float(v) for v in curve.dt_xp]
        return CflCurveResponse(name=scenario.name,
                                n_values=list(curve.n_values),
                                dz=_listify(curve.dz),
                                dt_cs=_listify(curve.dt_cs), dt_xp=dt_xp)

    @app.post("/compare-xp")
    def run_comparison(request: CompareRequest) -> CompareResponse:
        scenario = _resolve(request)
        probes = sorted(set(request.probe_times_s) | {request.horizon_s})
        runs = {}
        for method in ("cs", "xp"):
            runs[method] = simulate(scenario, request.cells,
                                    request.horizon_s, method=method,
                                    safety=request.safety,
                                    probe_times=tuple(probes))
        distances = []
        component_distances = []
        for ti in range(len(probes)):
            cs_state = np.hstack([runs["cs"].probe_solids[ti][1:-1],
                                  runs["cs"].probe_solubles[ti][1:-1]])
            xp_state = np.hstack([runs["xp"].probe_solids[ti][1:-1],
                                  runs["xp"].probe_solubles[ti][1:-1]])
            total, per_component = relative_l1_error(cs_state, xp_state)
            distances.append(total)
            component_distances.append(np.nan_to_num(per_component).tolist())
        return CompareResponse(
            name=scenario.name, cells=request.cells,
            solid_names=list(scenario.solid_names),
            soluble_names=list(scenario.soluble_names),
            z_centers=_listify(runs["cs"].grid.z_centers),
            probe_times_s=[float(p) for p in probes],
            cs_solids=_listify(runs["cs"].probe_solids),
            cs_solubles=_listify(runs["cs"].probe_solubles),
            xp_solids=_listify(runs["xp"].probe_solids),
            xp_solubles=_listify(runs["xp"].probe_solubles),
            distances=distances, component_distances=component_distances,
            cs_report=_report_payload(runs["cs"]),
            xp_report=_report_payload(runs["xp"]))

    return app


app = create_app()
