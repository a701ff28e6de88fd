"""Independent cross-check scheme evolving totals and percentage vectors.

This scheme discretizes the same settling model in a different state
representation: the total solids ``X`` and the fractions each component
contributes to its phase (``P_X`` for solids within the sludge, ``P_L`` for
solubles within the liquid).  Convective fluxes use the Godunov flux of the
batch curve instead of interface-velocity upwinding, the compression
primitive integrates ``v_hs * sigma_e'`` directly, and percentages are
advected with upwinding on the sign of the phase flux.  None of the core
flux code is shared with :mod:`settlesim.stepping`'s scheme, which makes the
two mutually independent checks on each other.

Restrictions inherited from the representation: constant vessel area and no
soluble diffusion.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constitutive import ConstitutiveSet
from .errors import ConfigurationError
from .geometry import Grid
from .reactions import DenitrificationKinetics, ReactionModel
from .scenario import BoundaryData, Scenario, face_bulk_flow
from .stepping import (DEFAULT_SAFETY, INVARIANT_SLACK, RunReport, RunResult,
                       _supports_kernel, mass_residual, run_windows)

log = logging.getLogger(__name__)


def godunov_flux(laws: ConstitutiveSet, left, right):
    """Godunov numerical flux of the unimodal batch curve f(X) = X v_hs(X).

    For a concave-then-convex unimodal f this reduces to the min of f at the
    left state capped at the peak and f at the right state floored at it.
    """
    xhat = laws.peak_concentration
    return np.minimum(laws.batch_flux(np.minimum(left, xhat)),
                      laws.batch_flux(np.maximum(right, xhat)))


@dataclass(frozen=True)
class XpBudget:
    """Stability budget of the percentage scheme."""

    beta_x: float
    beta_px: float
    beta_pl: float
    q_norm: float
    dt_max: float
    safety: float
    ingredients: dict[str, float] = field(default_factory=dict)


def xp_budget(grid: Grid, laws: ConstitutiveSet,
              reactions: ReactionModel | None, q_norm: float,
              safety: float = DEFAULT_SAFETY) -> XpBudget:
    """Largest admissible step for the percentage scheme.

    Three rates protect the three state blocks: the totals (batch-flux slope,
    compression curvature and total reaction sensitivity), the solid
    percentages, and the liquid percentages (phase flux over the minimum
    liquid content).
    """
    if not 0.0 < safety <= 1.0:
        raise ConfigurationError(f"safety factor must be in (0, 1], got {safety}")
    norms = laws.norms
    dz = grid.dz
    if reactions is not None:
        bounds = reactions.derivative_bounds()
        m_own = bounds.solids_own
        m_total = bounds.solids_total
        m_total_s = bounds.total_from_solubles
    else:
        m_own = m_total = m_total_s = 0.0
    convect = norms.batch_flux_slope / dz
    compress = norms.xp_primitive_slope / dz ** 2
    beta_x = convect + compress + m_total + laws.density_ratio * m_total_s
    beta_px = convect + compress + m_own
    beta_pl = ((norms.batch_flux / dz + norms.xp_primitive / dz ** 2)
               / (laws.rho_solid - laws.x_max) + m_own)
    rate = q_norm / dz + max(beta_x, beta_px, beta_pl)
    ingredients = {
        "batch_flux_sup": norms.batch_flux,
        "batch_flux_slope_sup": norms.batch_flux_slope,
        "primitive_at_max": norms.xp_primitive,
        "primitive_slope_sup": norms.xp_primitive_slope,
        "reaction_solids": m_own,
        "reaction_solids_total": m_total,
        "reaction_total_from_solubles": m_total_s,
        "density_ratio": laws.density_ratio,
        "rho_solid": laws.rho_solid,
        "x_max": laws.x_max,
    }
    return XpBudget(beta_x=beta_x, beta_px=beta_px, beta_pl=beta_pl,
                    q_norm=q_norm, dt_max=safety / rate, safety=safety,
                    ingredients=ingredients)


def max_bulk_speed(scenario: Scenario, horizon: float, area: float) -> float:
    """Largest |q| over the horizon: max of Q_e and Q_u over the area."""
    horizon = max(horizon, 1e-9)
    breaks = np.concatenate([[0.0], scenario.schedule_breakpoints(horizon),
                             [horizon]])
    speed = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        t = 0.5 * (a + b)
        speed = max(speed, scenario.effluent_flow(t),
                    scenario.underflow.value_at(t))
    return speed / area


def split_state(solids: np.ndarray, solubles: np.ndarray,
                laws: ConstitutiveSet
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concentrations -> (total, solid percentages, liquid percentages).

    Cells with no solids get the uniform percentage vector, matching the
    scheme's carry-over rule for vanishing totals.
    """
    total = solids.sum(axis=1)
    k_c = solids.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pct_solids = np.where(total[:, None] > 0.0,
                              solids / total[:, None], 1.0 / k_c)
    liquid = laws.rho_fluid - laws.density_ratio * total
    pct_liquid = solubles / liquid[:, None]
    return total, pct_solids, pct_liquid


def merge_state(total: np.ndarray, pct_solids: np.ndarray,
                pct_liquid: np.ndarray, laws: ConstitutiveSet
                ) -> tuple[np.ndarray, np.ndarray]:
    """(total, percentages) -> concentration arrays (solids, solubles)."""
    liquid = laws.rho_fluid - laws.density_ratio * total
    return pct_solids * total[:, None], pct_liquid * liquid[:, None]


class _XpNumpyAdvancer:
    """Reference stepping loop for the percentage scheme."""

    def __init__(self, grid: Grid, laws: ConstitutiveSet,
                 reactions: ReactionModel | None, area: float,
                 solids: np.ndarray, solubles: np.ndarray):
        self.grid = grid
        self.laws = laws
        self.reactions = reactions
        self.area = area
        self.total, self.pct_solids, self.pct_liquid = split_state(
            solids, solubles, laws)
        width = solids.shape[1] + solubles.shape[1]
        self.audit = np.zeros(width)
        self.audit_abs = np.zeros(width)

    def capture(self) -> tuple[np.ndarray, np.ndarray]:
        return merge_state(self.total, self.pct_solids, self.pct_liquid,
                           self.laws)

    def masses(self) -> np.ndarray:
        solids, solubles = self.capture()
        volume = self.area * self.grid.dz
        return volume * np.concatenate([solids.sum(axis=0),
                                        solubles.sum(axis=0)])

    def advance(self, n_steps: int, dt: float, bdata: BoundaryData) -> int:
        grid, laws = self.grid, self.laws
        _, q_face = face_bulk_flow(grid, bdata)
        dz = grid.dz
        kc = self.pct_solids.shape[1]
        gamma_f = grid.gamma_faces
        gamma_c = grid.gamma_cells
        feed_velocity = bdata.feed_flow / self.area
        volume = self.area * dz
        feed = np.zeros(grid.n_cells + 2)
        feed[grid.feed_cell] = 1.0
        ratio = laws.density_ratio
        violations = 0
        for _ in range(n_steps):
            left = np.concatenate([[0.0], self.total])
            right = np.concatenate([self.total, [0.0]])
            qp = np.maximum(q_face, 0.0)
            qm = np.minimum(q_face, 0.0)
            prim = laws.xp_compression_primitive
            flux_x = (qp * left + qm * right
                      + gamma_f * (godunov_flux(laws, left, right)
                                   - (prim(right) - prim(left)) / dz))
            fp = np.maximum(flux_x, 0.0)[:, None]
            fm = np.minimum(flux_x, 0.0)[:, None]
            px_l = np.vstack([np.zeros(kc), self.pct_solids])
            px_r = np.vstack([self.pct_solids, np.zeros(kc)])
            flux_px = fp * px_l + fm * px_r
            flux_l = laws.rho_fluid * q_face - ratio * flux_x
            lp = np.maximum(flux_l, 0.0)[:, None]
            lm = np.minimum(flux_l, 0.0)[:, None]
            pl_l = np.vstack([np.zeros(self.pct_liquid.shape[1]),
                              self.pct_liquid])
            pl_r = np.vstack([self.pct_liquid, np.zeros_like(pl_l[:1])])
            flux_pl = lp * pl_l + lm * pl_r

            liquid = laws.rho_fluid - ratio * self.total
            solids = self.pct_solids * self.total[:, None]
            solubles = self.pct_liquid * liquid[:, None]
            if self.reactions is not None:
                rate_c, rate_s = self.reactions.rates(solids, solubles)
                rate_total = rate_c.sum(axis=1)
            else:
                rate_c = np.zeros_like(solids)
                rate_s = np.zeros_like(solubles)
                rate_total = np.zeros_like(self.total)

            new_x = (self.total
                     + dt / dz * (-np.diff(flux_x)
                                  + feed * bdata.feed_solids.sum()
                                  * feed_velocity)
                     + dt * gamma_c * rate_total)
            psi_x = (solids
                     + dt / dz * (-np.diff(flux_px, axis=0)
                                  + feed[:, None] * bdata.feed_solids
                                  * feed_velocity)
                     + dt * gamma_c[:, None] * rate_c)
            psi_l = (solubles
                     + dt / dz * (-np.diff(flux_pl, axis=0)
                                  + feed[:, None] * bdata.feed_solubles
                                  * feed_velocity)
                     + dt * gamma_c[:, None] * rate_s)
            new_liquid = laws.rho_fluid - ratio * new_x
            with np.errstate(invalid="ignore", divide="ignore"):
                new_px = np.where(new_x[:, None] > 0.0,
                                  psi_x / new_x[:, None], self.pct_solids)
            new_pl = psi_l / new_liquid[:, None]

            gated = gamma_c[:, None]
            self.audit += dt * np.concatenate([
                bdata.feed_flow * bdata.feed_solids
                - self.area * (flux_px[-1] - flux_px[0])
                + volume * (gated * rate_c).sum(axis=0),
                bdata.feed_flow * bdata.feed_solubles
                - self.area * (flux_pl[-1] - flux_pl[0])
                + volume * (gated * rate_s).sum(axis=0)])
            self.audit_abs += dt * np.concatenate([
                bdata.feed_flow * np.abs(bdata.feed_solids)
                + self.area * (np.abs(flux_px[-1]) + np.abs(flux_px[0]))
                + volume * (gated * np.abs(rate_c)).sum(axis=0),
                bdata.feed_flow * np.abs(bdata.feed_solubles)
                + self.area * (np.abs(flux_pl[-1]) + np.abs(flux_pl[0]))
                + volume * (gated * np.abs(rate_s)).sum(axis=0)])

            self.total, self.pct_solids, self.pct_liquid = new_x, new_px, new_pl
            bad = (new_x.min() < -INVARIANT_SLACK
                   or new_x.max() > laws.x_max + INVARIANT_SLACK
                   or new_px.min() < -INVARIANT_SLACK
                   or new_px.max() > 1.0 + INVARIANT_SLACK
                   or new_pl.min() < -INVARIANT_SLACK
                   or new_pl.max() > 1.0 + INVARIANT_SLACK)
            if bad:
                violations += 1
        return violations


class _XpKernelAdvancer:
    """Drives the compiled percentage-scheme kernel."""

    def __init__(self, grid: Grid, laws: ConstitutiveSet,
                 reactions: DenitrificationKinetics | None, area: float,
                 solids: np.ndarray, solubles: np.ndarray):
        self.grid = grid
        self.laws = laws
        self.area = area
        total, pct_solids, pct_liquid = split_state(solids, solubles, laws)
        self.total = np.ascontiguousarray(total)
        self.pct_solids = np.ascontiguousarray(pct_solids)
        self.pct_liquid = np.ascontiguousarray(pct_liquid)
        width = solids.shape[1] + solubles.shape[1]
        self.audit = np.zeros(width)
        self.audit_abs = np.zeros(width)
        table = laws._xp_table
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
        return merge_state(self.total, self.pct_solids, self.pct_liquid,
                           self.laws)

    def masses(self) -> np.ndarray:
        solids, solubles = self.capture()
        volume = self.area * self.grid.dz
        return volume * np.concatenate([solids.sum(axis=0),
                                        solubles.sum(axis=0)])

    def advance(self, n_steps: int, dt: float, bdata: BoundaryData) -> int:
        grid, laws = self.grid, self.laws
        _, q_face = face_bulk_flow(grid, bdata)
        lo, hi, step, values, slopes = self._table
        return _kernels.xp_advance(
            self.total, self.pct_solids, self.pct_liquid, n_steps, dt,
            grid.dz, self._gamma_faces, self._gamma_cells,
            np.ascontiguousarray(q_face), grid.feed_cell,
            bdata.feed_flow / self.area,
            np.ascontiguousarray(bdata.feed_solids),
            np.ascontiguousarray(bdata.feed_solubles),
            self.area, laws.rho_fluid, laws.rho_solid, laws.density_ratio,
            laws.x_max, laws.peak_concentration,
            laws.v0, laws.x_bar, laws.eta,
            lo, hi, step, values, slopes,
            self._kin_on, self._kin, INVARIANT_SLACK,
            self.audit, self.audit_abs)


def simulate_xp(scenario: Scenario, n_cells: int, horizon: float, *,
                safety: float = DEFAULT_SAFETY, cadence: float | None = None,
                probe_times: tuple[float, ...] = (),
                strict_invariants: bool = False,
                use_compiled: bool = True) -> RunResult:
    """Run the percentage scheme; same calling convention as ``simulate``."""
    if not scenario.profile.is_constant:
        raise ConfigurationError(
            "the percentage scheme supports constant vessel area only; "
            f"scenario {scenario.name!r} has a varying profile")
    if np.any(scenario.diffusion != 0.0):
        raise ConfigurationError(
            "the percentage scheme has no soluble-diffusion terms; "
            "set all diffusion coefficients to zero to compare against it")
    if horizon < 0.0:
        raise ConfigurationError(f"horizon must be nonnegative, got {horizon}")

    grid = scenario.build_grid(n_cells)
    area = float(grid.area_cells[1])
    q_norm = max_bulk_speed(scenario, horizon, area)
    budget = xp_budget(grid, scenario.laws, scenario.reactions, q_norm, safety)
    solids, solubles = scenario.initial_state(grid)

    if use_compiled and _supports_kernel(scenario.laws, scenario.reactions):
        advancer = _XpKernelAdvancer(grid, scenario.laws, scenario.reactions,
                                     area, solids, solubles)
    else:
        advancer = _XpNumpyAdvancer(grid, scenario.laws, scenario.reactions,
                                    area, solids, solubles)

    start_mass = advancer.masses()
    tic = time.perf_counter()
    recorded, steps, violations = run_windows(
        scenario, grid, horizon, budget.dt_max, cadence, probe_times,
        advancer, strict_invariants)
    wall = time.perf_counter() - tic
    residual = mass_residual(start_mass, advancer.masses(),
                             advancer.audit, advancer.audit_abs)
    if violations:
        log.warning("%d steps left the admissible region (method xp, N=%d)",
                    violations, n_cells)

    report = RunReport(method="xp", n_cells=n_cells, steps=steps,
                       dt_limit=budget.dt_max, violations=violations,
                       mass_residual=residual, wall_seconds=wall,
                       budget=budget)
    return RunResult(scenario=scenario, grid=grid, report=report, **recorded)
