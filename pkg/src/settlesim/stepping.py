"""Explicit Euler time stepping with the scheme's stability budget.

The driver splits the horizon into windows bounded by schedule breakpoints
and probe times, so boundary data is constant within each window and probe
states are captured at exact times.  Within a window the step is uniform and
never exceeds the global stability budget; snapshots are recorded at the
first completed step past each cadence tick, stamped with the true step time.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels, fluxes
from .constitutive import ConstitutiveSet
from .errors import ConfigurationError, InvariantViolationError
from .geometry import Grid
from .reactions import DenitrificationKinetics, ReactionModel
from .scenario import BoundaryData, Scenario, face_bulk_flow

log = logging.getLogger(__name__)

DEFAULT_SAFETY = 0.95
# Absolute slack on invariant checks: covers rounding of states assembled
# from convex combinations, far below any physical concentration.
INVARIANT_SLACK = 1e-12
_TIME_FUZZ = 1e-9


@dataclass(frozen=True)
class CflBudget:
    """Largest admissible explicit step for the settling scheme."""

    beta1: float
    beta2: float
    dt_max: float
    safety: float
    ingredients: dict[str, float] = field(default_factory=dict)


def compute_budget(grid: Grid, laws: ConstitutiveSet,
                   reactions: ReactionModel | None,
                   diffusion: np.ndarray, max_feed_flow: float,
                   safety: float = DEFAULT_SAFETY) -> CflBudget:
    """Evaluate the stability bound for the given grid and material.

    Both rates combine bulk throughput, settling, compression, diffusion and
    reaction sensitivities with the worst-case area ratios of the grid; the
    admissible step is the safety factor over the larger rate.
    """
    if not 0.0 < safety <= 1.0:
        raise ConfigurationError(f"safety factor must be in (0, 1], got {safety}")
    consts = grid.constants
    norms = laws.norms
    dz = grid.dz
    x_max = laws.x_max
    squeeze = laws.rho_solid - x_max

    if reactions is not None:
        bounds = reactions.derivative_bounds()
        m_solids = bounds.solids_own
        m_solids_total = bounds.solids_total
        m_solubles = bounds.solubles
    else:
        m_solids = m_solids_total = m_solubles = 0.0
    d_tilde = float(np.max(diffusion)) if np.size(diffusion) else 0.0

    flow = max_feed_flow / (consts.a_min * dz)
    beta1 = (flow
             + consts.m1 / dz * (norms.settling_slope * x_max
                                 + laws.settling_velocity(0.0))
             + consts.m2 / dz ** 2 * (norms.compression_diffusivity * x_max
                                      + norms.compression_primitive)
             + max(m_solids, m_solids_total))
    beta2 = ((laws.rho_solid + x_max) / squeeze * flow
             + x_max * consts.m1 * norms.settling_velocity / (squeeze * dz)
             + x_max * consts.m2 * norms.compression_primitive / (squeeze * dz ** 2)
             + d_tilde * consts.m2 / dz ** 2
             + m_solubles)
    ingredients = {
        "flow_over_area": max_feed_flow / consts.a_min,
        "settling_velocity_sup": norms.settling_velocity,
        "settling_velocity_zero": laws.settling_velocity(0.0),
        "settling_slope_sup": norms.settling_slope,
        "diffusivity_sup": norms.compression_diffusivity,
        "primitive_at_max": norms.compression_primitive,
        "max_soluble_diffusion": d_tilde,
        "m1": consts.m1,
        "m2": consts.m2,
        "reaction_solids": m_solids,
        "reaction_solids_total": m_solids_total,
        "reaction_solubles": m_solubles,
        "rho_solid": laws.rho_solid,
        "x_max": x_max,
    }
    return CflBudget(beta1=beta1, beta2=beta2,
                     dt_max=safety / max(beta1, beta2), safety=safety,
                     ingredients=ingredients)


def step_once(grid: Grid, laws: ConstitutiveSet, bdata: BoundaryData,
              solids: np.ndarray, solubles: np.ndarray, dt: float,
              diffusion: np.ndarray,
              reactions: ReactionModel | None = None,
              ) -> tuple[np.ndarray, np.ndarray]:
    """One explicit Euler step on copies (numpy reference path)."""
    from .semidiscrete import rhs_from_boundary
    d_solids, d_solubles = rhs_from_boundary(grid, laws, bdata, solids,
                                             solubles, diffusion, reactions)
    return solids + dt * d_solids, solubles + dt * d_solubles


@dataclass
class RunReport:
    """Outcome bookkeeping for one simulation."""

    method: str
    n_cells: int
    steps: int
    dt_limit: float
    violations: int
    mass_residual: float
    wall_seconds: float
    budget: object


@dataclass
class RunResult:
    """Recorded snapshots and probes of a completed run."""

    scenario: Scenario
    grid: Grid
    times: np.ndarray          # (n_snapshots,)
    solids: np.ndarray         # (n_snapshots, N + 2, k_C)
    solubles: np.ndarray       # (n_snapshots, N + 2, k_S)
    probe_times: np.ndarray    # (n_probes,)
    probe_solids: np.ndarray
    probe_solubles: np.ndarray
    report: RunReport

    def water(self, snapshot: int) -> np.ndarray:
        from .semidiscrete import water_concentration
        return water_concentration(self.scenario.laws, self.solids[snapshot],
                                   self.solubles[snapshot])

    def total_solids(self, snapshot: int) -> np.ndarray:
        return self.solids[snapshot].sum(axis=1)


class _CsNumpyAdvancer:
    """Reference stepping loop mirroring the compiled kernel's contract."""

    def __init__(self, grid: Grid, laws: ConstitutiveSet,
                 reactions: ReactionModel | None, diffusion: np.ndarray,
                 solids: np.ndarray, solubles: np.ndarray):
        self.grid = grid
        self.laws = laws
        self.reactions = reactions
        self.diffusion = diffusion
        self.solids = solids
        self.solubles = solubles
        width = solids.shape[1] + solubles.shape[1]
        self.audit = np.zeros(width)
        self.audit_abs = np.zeros(width)

    def capture(self) -> tuple[np.ndarray, np.ndarray]:
        return self.solids.copy(), self.solubles.copy()

    def masses(self) -> np.ndarray:
        volume = (self.grid.area_cells * self.grid.dz)[:, None]
        return np.concatenate([(volume * self.solids).sum(axis=0),
                               (volume * self.solubles).sum(axis=0)])

    def advance(self, n_steps: int, dt: float, bdata: BoundaryData) -> int:
        grid, laws = self.grid, self.laws
        kc = self.solids.shape[1]
        _, q_face = face_bulk_flow(grid, bdata)
        volume = (grid.area_cells * grid.dz)[:, None]
        gated = grid.gamma_cells[:, None]
        violations = 0
        for _ in range(n_steps):
            total = self.solids.sum(axis=1)
            v_face = fluxes.interface_velocity(grid, laws, q_face, total)
            phi_c = fluxes.solids_flux(grid, v_face, self.solids)
            density = fluxes.total_flux_density(v_face, total)
            phi_s = fluxes.solubles_flux(grid, laws, q_face, density,
                                         self.solubles, total, self.diffusion)
            new_c = self.solids - dt * fluxes.divergence(grid, phi_c)
            new_s = self.solubles - dt * fluxes.divergence(grid, phi_s)
            j = grid.feed_cell
            cell_volume = grid.area_cells[j] * grid.dz
            feed_c = bdata.feed_solids * bdata.feed_flow
            feed_s = bdata.feed_solubles * bdata.feed_flow
            new_c[j] += dt * feed_c / cell_volume
            new_s[j] += dt * feed_s / cell_volume
            self.audit += dt * np.concatenate([feed_c - (phi_c[-1] - phi_c[0]),
                                               feed_s - (phi_s[-1] - phi_s[0])])
            self.audit_abs += dt * np.concatenate(
                [np.abs(feed_c) + np.abs(phi_c[-1]) + np.abs(phi_c[0]),
                 np.abs(feed_s) + np.abs(phi_s[-1]) + np.abs(phi_s[0])])
            if self.reactions is not None:
                rate_c, rate_s = self.reactions.rates(self.solids, self.solubles)
                new_c += dt * gated * rate_c
                new_s += dt * gated * rate_s
                self.audit += dt * np.concatenate(
                    [(volume * gated * rate_c).sum(axis=0),
                     (volume * gated * rate_s).sum(axis=0)])
                self.audit_abs += dt * np.concatenate(
                    [(volume * gated * np.abs(rate_c)).sum(axis=0),
                     (volume * gated * np.abs(rate_s)).sum(axis=0)])
            self.solids, self.solubles = new_c, new_s
            bad = (new_c.min() < -INVARIANT_SLACK
                   or new_s.min() < -INVARIANT_SLACK
                   or new_c.sum(axis=1).max() > laws.x_max + INVARIANT_SLACK)
            if bad:
                violations += 1
        return violations


class _CsKernelAdvancer:
    """Drives the compiled stepping kernel."""

    def __init__(self, grid: Grid, laws: ConstitutiveSet,
                 reactions: DenitrificationKinetics | None,
                 diffusion: np.ndarray, solids: np.ndarray,
                 solubles: np.ndarray):
        self.grid = grid
        self.laws = laws
        self.solids = np.ascontiguousarray(solids)
        self.solubles = np.ascontiguousarray(solubles)
        self.diffusion = np.ascontiguousarray(diffusion, dtype=float)
        width = solids.shape[1] + solubles.shape[1]
        self.audit = np.zeros(width)
        self.audit_abs = np.zeros(width)
        table = laws._compression_table
        self._table = (table.lo, table.hi, table.step,
                       np.ascontiguousarray(table.values),
                       np.ascontiguousarray(table.slopes))
        self._gamma_faces = np.ascontiguousarray(grid.gamma_faces, dtype=float)
        self._gamma_cells = np.ascontiguousarray(grid.gamma_cells, dtype=float)
        if reactions is None:
            self._kin_on = 0
            self._kin = np.zeros(_kernels.KIN_WIDTH)
        else:
            self._kin_on = 1
            self._kin = np.array([
                reactions.mu_max, reactions.half_sat_no3,
                reactions.half_sat_substrate, reactions.yield_coeff,
                reactions.decay_rate, reactions.inert_fraction,
                reactions.nitrate_yield,
                1.0 if reactions.biomass_cap == "ramp" else 0.0,
                reactions.x_max * reactions.ramp_fraction,
            ])

    def capture(self) -> tuple[np.ndarray, np.ndarray]:
        return self.solids.copy(), self.solubles.copy()

    def masses(self) -> np.ndarray:
        volume = (self.grid.area_cells * self.grid.dz)[:, None]
        return np.concatenate([(volume * self.solids).sum(axis=0),
                               (volume * self.solubles).sum(axis=0)])

    def advance(self, n_steps: int, dt: float, bdata: BoundaryData) -> int:
        grid, laws = self.grid, self.laws
        _, q_face = face_bulk_flow(grid, bdata)
        lo, hi, step, values, slopes = self._table
        return _kernels.cs_advance(
            self.solids, self.solubles, n_steps, dt, grid.dz,
            grid.area_faces, grid.area_cells,
            self._gamma_faces, self._gamma_cells,
            np.ascontiguousarray(q_face), grid.feed_cell,
            bdata.feed_flow, np.ascontiguousarray(bdata.feed_solids),
            np.ascontiguousarray(bdata.feed_solubles),
            self.diffusion, laws.rho_solid, laws.x_max,
            laws.v0, laws.x_bar, laws.eta,
            lo, hi, step, values, slopes,
            self._kin_on, self._kin, INVARIANT_SLACK,
            self.audit, self.audit_abs)


def _supports_kernel(laws: ConstitutiveSet,
                     reactions: ReactionModel | None) -> bool:
    if not laws.is_builtin_family:
        return False
    if reactions is None:
        return True
    return (type(reactions) is DenitrificationKinetics
            and reactions.solid_names == ("X_OHO", "X_U")
            and reactions.soluble_names == ("S_NO3", "S_S", "S_N2"))


def plan_windows(scenario: Scenario, horizon: float,
                 probe_times: tuple[float, ...]) -> np.ndarray:
    """Ascending time points bounding constant-boundary stepping windows."""
    pts = [0.0, horizon]
    pts.extend(scenario.schedule_breakpoints(horizon))
    for p in probe_times:
        if p < -_TIME_FUZZ or p > horizon + _TIME_FUZZ:
            raise ConfigurationError(
                f"probe time {p} s outside the horizon [0, {horizon}] s")
        pts.append(min(max(p, 0.0), horizon))
    pts = sorted(pts)
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > _TIME_FUZZ:
            merged.append(p)
    return np.asarray(merged)


def run_windows(scenario: Scenario, grid: Grid, horizon: float,
                dt_limit: float, cadence: float | None,
                probe_times: tuple[float, ...], advancer,
                strict_invariants: bool) -> tuple[dict, int, int]:
    """Shared window/snapshot loop used by both stepping schemes."""
    windows = plan_windows(scenario, horizon, probe_times)
    probes = sorted(set(float(p) for p in probe_times))

    times = [0.0]
    snaps = [advancer.capture()]
    probe_snaps: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def grab_probe(t: float) -> None:
        for p in probes:
            if abs(t - p) <= 1e-6 and p not in probe_snaps:
                probe_snaps[p] = advancer.capture()

    grab_probe(0.0)
    next_tick = cadence if cadence else math.inf
    steps = 0
    violations = 0
    for a, b in zip(windows[:-1], windows[1:]):
        bdata = scenario.boundary_average(a, b)
        span = b - a
        n = max(1, math.ceil(span / dt_limit - 1e-12))
        dt = span / n
        done = 0
        while done < n:
            if next_tick <= b + _TIME_FUZZ:
                target = min(n, max(done + 1,
                                    math.ceil((next_tick - a) / dt - 1e-12)))
            else:
                target = n
            newly = advancer.advance(target - done, dt, bdata)
            violations += newly
            steps += target - done
            done = target
            t = b if done == n else a + done * dt
            if strict_invariants and newly:
                raise InvariantViolationError(
                    f"state left the admissible region near t = {t:.6g} s "
                    f"({newly} offending steps); the stability budget should "
                    "forbid this — likely an inconsistent manual dt")
            if next_tick <= t + _TIME_FUZZ:
                times.append(t)
                snaps.append(advancer.capture())
                while next_tick <= t + _TIME_FUZZ:
                    next_tick += cadence
        grab_probe(b)

    if abs(times[-1] - horizon) > _TIME_FUZZ:
        times.append(horizon)
        snaps.append(advancer.capture())

    recorded = {
        "times": np.asarray(times),
        "solids": np.stack([s for s, _ in snaps]),
        "solubles": np.stack([s for _, s in snaps]),
        "probe_times": np.asarray(probes),
        "probe_solids": np.stack([probe_snaps[p][0] for p in probes])
        if probes else np.zeros((0, *snaps[0][0].shape)),
        "probe_solubles": np.stack([probe_snaps[p][1] for p in probes])
        if probes else np.zeros((0, *snaps[0][1].shape)),
    }
    return recorded, steps, violations


def mass_residual(mass_start: np.ndarray, mass_end: np.ndarray,
                  audit: np.ndarray, audit_abs: np.ndarray) -> float:
    """Worst per-component conservation defect relative to throughput."""
    gap = np.abs(mass_end - mass_start - audit)
    scale = np.maximum(np.maximum(np.abs(mass_start), audit_abs), 1e-30)
    return float((gap / scale).max())


def simulate(scenario: Scenario, n_cells: int, horizon: float, *,
             method: str = "cs", safety: float = DEFAULT_SAFETY,
             cadence: float | None = None,
             probe_times: tuple[float, ...] = (),
             strict_invariants: bool = False,
             use_compiled: bool = True) -> RunResult:
    """Run one simulation to ``horizon`` seconds and collect snapshots."""
    if horizon < 0.0:
        raise ConfigurationError(f"horizon must be nonnegative, got {horizon}")
    if method == "xp":
        from .percentage_scheme import simulate_xp
        return simulate_xp(scenario, n_cells, horizon, safety=safety,
                           cadence=cadence, probe_times=probe_times,
                           strict_invariants=strict_invariants,
                           use_compiled=use_compiled)
    if method != "cs":
        raise ConfigurationError(f"unknown method {method!r}; use 'cs' or 'xp'")

    grid = scenario.build_grid(n_cells)
    max_feed = scenario.feed_flow.max_over(max(horizon, _TIME_FUZZ))
    budget = compute_budget(grid, scenario.laws, scenario.reactions,
                            scenario.diffusion, max_feed, safety)
    solids, solubles = scenario.initial_state(grid)

    if use_compiled and _supports_kernel(scenario.laws, scenario.reactions):
        advancer = _CsKernelAdvancer(grid, scenario.laws, scenario.reactions,
                                     scenario.diffusion, solids, solubles)
    else:
        advancer = _CsNumpyAdvancer(grid, scenario.laws, scenario.reactions,
                                    scenario.diffusion, solids, solubles)

    start_mass = advancer.masses()
    tic = time.perf_counter()
    recorded, steps, violations = run_windows(
        scenario, grid, horizon, budget.dt_max, cadence, probe_times,
        advancer, strict_invariants)
    wall = time.perf_counter() - tic
    residual = mass_residual(start_mass, advancer.masses(),
                             advancer.audit, advancer.audit_abs)
    if violations:
        log.warning("%d steps left the admissible region (method cs, N=%d)",
                    violations, n_cells)

    report = RunReport(method="cs", n_cells=n_cells, steps=steps,
                       dt_limit=budget.dt_max, violations=violations,
                       mass_residual=residual, wall_seconds=wall,
                       budget=budget)
    return RunResult(scenario=scenario, grid=grid, report=report, **recorded)
