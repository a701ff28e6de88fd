"""Validation instruments: refinement errors, stability curves, eigenvalues.

Everything here consumes finished runs (or budgets) and produces plain data
structures ready for tables and plots; no plotting is done here.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constitutive import ConstitutiveSet
from .errors import ConfigurationError
from .percentage_scheme import max_bulk_speed, xp_budget
from .scenario import Scenario
from .stepping import RunResult, compute_budget, simulate

log = logging.getLogger(__name__)


def project_fine_to_coarse(fine: np.ndarray, coarse_cells: int) -> np.ndarray:
    """Average nested children of a fine profile onto a coarse grid.

    ``fine`` holds interior cell values, first axis the cells; the coarse
    cell count must divide the fine one so cells nest exactly.  Cell means
    make the projection conservative.
    """
    n_fine = fine.shape[0]
    if coarse_cells <= 0 or n_fine % coarse_cells:
        raise ConfigurationError(
            f"cannot project {n_fine} cells onto {coarse_cells}: "
            "grids must nest")
    ratio = n_fine // coarse_cells
    shaped = fine.reshape(coarse_cells, ratio, *fine.shape[1:])
    return shaped.mean(axis=1)


def relative_l1_error(coarse: np.ndarray, reference: np.ndarray
                      ) -> tuple[float, np.ndarray]:
    """Summed per-component relative L1 error against a finer reference.

    Both arrays hold interior cell values (cells, components).  Each
    component contributes ||coarse - projected reference|| / ||reference||,
    the norms being unweighted spatial L1 integrals (cell sums times the
    respective cell widths).  Components whose reference norm vanishes are
    skipped with a warning and reported as NaN.
    """
    projected = project_fine_to_coarse(reference, coarse.shape[0])
    gap = np.abs(coarse - projected).sum(axis=0) / coarse.shape[0]
    norm = np.abs(reference).sum(axis=0) / reference.shape[0]
    per_component = np.full(gap.shape, np.nan)
    alive = norm > 0.0
    per_component[alive] = gap[alive] / norm[alive]
    if not alive.all():
        log.warning("skipping %d component(s) with zero reference norm",
                    int((~alive).sum()))
    return float(per_component[alive].sum()), per_component


def observed_order(error_coarse: float, error_fine: float,
                   n_coarse: int, n_fine: int) -> float:
    """Convergence rate between two refinement levels.

    theta = -log(e_coarse / e_fine) / log(n_coarse / n_fine); equals 1 when
    the error halves as the cell count doubles.
    """
    if error_coarse <= 0.0 or error_fine <= 0.0:
        raise ConfigurationError("convergence order needs positive errors")
    if n_coarse == n_fine:
        raise ConfigurationError("convergence order needs distinct grids")
    return -np.log(error_coarse / error_fine) / np.log(n_coarse / n_fine)


def mass_balance_audit(result: RunResult) -> float:
    """Worst per-component conservation residual of a finished run."""
    return result.report.mass_residual


def total_variation(values: np.ndarray) -> float:
    """Total variation along the first axis (cell index)."""
    return float(np.abs(np.diff(values, axis=0)).sum())


def _state_matrix(result: RunResult, probe: int) -> np.ndarray:
    """Interior cell values of every component at one probe, (N, kC + kS)."""
    return np.hstack([result.probe_solids[probe][1:-1],
                      result.probe_solubles[probe][1:-1]])


def _final_matrix(result: RunResult) -> np.ndarray:
    return np.hstack([result.solids[-1][1:-1], result.solubles[-1][1:-1]])


@dataclass
class ErrorReport:
    """Refinement errors against a fine reference at several times."""

    method: str
    reference_cells: int
    n_values: tuple[int, ...]
    times: tuple[float, ...]
    errors: np.ndarray             # (n_times, n_N) summed relative errors
    orders: np.ndarray             # (n_times, n_N), NaN where undefined
    component_errors: np.ndarray   # (n_times, n_N, k_C + k_S)
    cpu_seconds: np.ndarray        # (n_N + 1,), reference last


def _worker_count(jobs: int, requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    return max(1, min(jobs, os.cpu_count() or 1))


def convergence_study(scenario: Scenario, n_values: tuple[int, ...],
                      times: tuple[float, ...], *,
                      reference_cells: int = 1024, method: str = "cs",
                      safety: float | None = None,
                      max_workers: int | None = None) -> ErrorReport:
    """Run a refinement ladder plus reference and tabulate errors and orders.

    The per-grid simulations run concurrently (the stepping kernels release
    the interpreter lock); each one is individually deterministic, so the
    report does not depend on scheduling.
    """
    n_values = tuple(int(n) for n in n_values)
    for n in n_values:
        if reference_cells % n:
            raise ConfigurationError(
                f"reference grid {reference_cells} must nest every "
                f"study grid; {n} does not divide it")
    horizon = float(max(times))
    kwargs = {"probe_times": tuple(times), "method": method}
    if safety is not None:
        kwargs["safety"] = safety
    ladder = n_values + (reference_cells,)
    with ThreadPoolExecutor(_worker_count(len(ladder), max_workers)) as pool:
        futures = [pool.submit(simulate, scenario, n, horizon, **kwargs)
                   for n in ladder]
        results = [f.result() for f in futures]
    reference = results[-1]

    n_components = (reference.probe_solids.shape[2]
                    + reference.probe_solubles.shape[2])
    errors = np.zeros((len(times), len(n_values)))
    component_errors = np.zeros((len(times), len(n_values), n_components))
    for ti in range(len(times)):
        ref_state = _state_matrix(reference, ti)
        for ni, run in enumerate(results[:-1]):
            total, per_component = relative_l1_error(
                _state_matrix(run, ti), ref_state)
            errors[ti, ni] = total
            component_errors[ti, ni] = per_component

    orders = np.full_like(errors, np.nan)
    for ti in range(len(times)):
        for ni in range(1, len(n_values)):
            if errors[ti, ni - 1] > 0.0 and errors[ti, ni] > 0.0:
                orders[ti, ni] = observed_order(
                    errors[ti, ni - 1], errors[ti, ni],
                    n_values[ni - 1], n_values[ni])

    return ErrorReport(
        method=method, reference_cells=reference_cells, n_values=n_values,
        times=tuple(float(t) for t in times), errors=errors, orders=orders,
        component_errors=component_errors,
        cpu_seconds=np.array([r.report.wall_seconds for r in results]))


@dataclass
class MethodComparison:
    """Distance between the two schemes on identical grids."""

    n_values: tuple[int, ...]
    horizon: float
    distances: np.ndarray            # (n_N,) summed relative L1 distances
    component_distances: np.ndarray  # (n_N, k_C + k_S)
    cpu_seconds: np.ndarray          # (n_N, 2) columns: cs, xp


def compare_methods(scenario: Scenario, n_values: tuple[int, ...],
                    horizon: float, *, safety: float | None = None,
                    max_workers: int | None = None) -> MethodComparison:
    """Run both schemes on each grid and measure their mutual L1 distance.

    The distance mirrors :func:`relative_l1_error` on a shared grid, with
    the percentage scheme as the denominator; both schemes converge to the
    same solution, so the distance should shrink under refinement.
    """
    n_values = tuple(int(n) for n in n_values)
    kwargs = {}
    if safety is not None:
        kwargs["safety"] = safety
    jobs = [(n, method) for n in n_values for method in ("cs", "xp")]
    with ThreadPoolExecutor(_worker_count(len(jobs), max_workers)) as pool:
        futures = {job: pool.submit(simulate, scenario, job[0], horizon,
                                    method=job[1], **kwargs)
                   for job in jobs}
        results = {job: f.result() for job, f in futures.items()}

    sample = _final_matrix(results[(n_values[0], "cs")])
    distances = np.zeros(len(n_values))
    component_distances = np.zeros((len(n_values), sample.shape[1]))
    cpu = np.zeros((len(n_values), 2))
    for ni, n in enumerate(n_values):
        cs_state = _final_matrix(results[(n, "cs")])
        xp_state = _final_matrix(results[(n, "xp")])
        total, per_component = relative_l1_error(cs_state, xp_state)
        distances[ni] = total
        component_distances[ni] = per_component
        cpu[ni, 0] = results[(n, "cs")].report.wall_seconds
        cpu[ni, 1] = results[(n, "xp")].report.wall_seconds
    return MethodComparison(n_values=n_values, horizon=horizon,
                            distances=distances,
                            component_distances=component_distances,
                            cpu_seconds=cpu)


@dataclass
class CflCurve:
    """Admissible-step data over a family of grids."""

    n_values: tuple[int, ...]
    dz: np.ndarray        # (n_N,) actual cell sizes
    dt_cs: np.ndarray     # (n_N,) settling-scheme budget
    dt_xp: np.ndarray     # (n_N,) percentage-scheme budget, NaN if unsupported


def cfl_curve(scenario: Scenario, cell_counts: tuple[int, ...],
              horizon: float, *, safety: float = 1.0,
              with_reactions: bool = True) -> CflCurve:
    """Evaluate both stability budgets over a grid family.

    No time stepping happens; this only evaluates the bounds, so it is cheap
    even for thousands of cells.  ``with_reactions=False`` drops the
    reaction sensitivities from the budgets, which removes the plateau the
    reaction terms impose at coarse resolutions.
    """
    reactions = scenario.reactions if with_reactions else None
    max_feed = scenario.feed_flow.max_over(max(horizon, 1e-9))
    xp_ok = scenario.profile.is_constant and not np.any(scenario.diffusion)
    n_values = tuple(int(n) for n in cell_counts)
    dz = np.zeros(len(n_values))
    dt_cs = np.zeros(len(n_values))
    dt_xp = np.full(len(n_values), np.nan)
    for i, n in enumerate(n_values):
        grid = scenario.build_grid(n)
        dz[i] = grid.dz
        dt_cs[i] = compute_budget(grid, scenario.laws, reactions,
                                  scenario.diffusion, max_feed,
                                  safety).dt_max
        if xp_ok:
            area = float(grid.area_cells[1])
            q_norm = max_bulk_speed(scenario, horizon, area)
            dt_xp[i] = xp_budget(grid, scenario.laws, reactions, q_norm,
                                 safety).dt_max
    return CflCurve(n_values=n_values, dz=dz, dt_cs=dt_cs, dt_xp=dt_xp)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x."""
    coeffs = np.polyfit(np.log(np.asarray(x, dtype=float)),
                        np.log(np.asarray(y, dtype=float)), 1)
    return float(coeffs[0])


def characteristic_speeds(laws: ConstitutiveSet, total_solids, bulk_velocity,
                          gamma=1.0) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of the convective flux pair at the given states.

    The first family rides the settling flux (bulk velocity plus batch-flux
    slope), the second the liquid phase (bulk velocity minus batch flux over
    the liquid content); both are real, and the first drops below the second
    as the batch curve flattens toward the packing limit.
    """
    x = np.asarray(total_solids, dtype=float)
    q = np.asarray(bulk_velocity, dtype=float)
    lam1 = q + gamma * laws.batch_flux_slope(x)
    lam2 = q - gamma * laws.batch_flux(x) / (laws.rho_solid - x)
    return lam1, lam2
