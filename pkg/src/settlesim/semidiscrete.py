"""Method-of-lines right-hand side for the coupled settling system.

The spatial discretisation turns the PDE system into one ODE per cell and
component.  This module assembles that right-hand side from the face fluxes
plus the feed source and (inside the vessel only) the reaction terms, and
offers a flat-vector adapter so generic ODE integrators can drive it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import fluxes
from .constitutive import ConstitutiveSet
from .errors import ConfigurationError, InvariantViolationError
from .geometry import Grid
from .reactions import ReactionModel
from .scenario import BoundaryData, Scenario, face_bulk_flow

log = logging.getLogger(__name__)


@dataclass
class State:
    """Cell concentrations including the two outlet pipe cells."""

    solids: np.ndarray    # (N + 2, k_C)
    solubles: np.ndarray  # (N + 2, k_S)
    time: float = 0.0

    @property
    def total_solids(self) -> np.ndarray:
        return self.solids.sum(axis=1)

    def copy(self) -> "State":
        return State(self.solids.copy(), self.solubles.copy(), self.time)

    def pack(self) -> np.ndarray:
        """Flatten cell-major: all solids of cell 0, its solubles, cell 1, ..."""
        return np.hstack([self.solids, self.solubles]).ravel()

    @classmethod
    def unpack(cls, flat: np.ndarray, n_solids: int, n_solubles: int,
               time: float = 0.0) -> "State":
        width = n_solids + n_solubles
        table = np.asarray(flat, dtype=float).reshape(-1, width)
        return cls(table[:, :n_solids].copy(), table[:, n_solids:].copy(), time)


def water_concentration(laws: ConstitutiveSet, solids: np.ndarray,
                        solubles: np.ndarray) -> np.ndarray:
    """Water mass per volume implied by the density constraint."""
    total = solids.sum(axis=-1)
    return (laws.rho_fluid - laws.density_ratio * total
            - solubles.sum(axis=-1))


def rhs_from_boundary(grid: Grid, laws: ConstitutiveSet, bdata: BoundaryData,
                      solids: np.ndarray, solubles: np.ndarray,
                      diffusion: np.ndarray,
                      reactions: ReactionModel | None = None,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of every cell value for frozen boundary data."""
    total = solids.sum(axis=1)
    _, q_face = face_bulk_flow(grid, bdata)
    v_face = fluxes.interface_velocity(grid, laws, q_face, total)
    phi_solids = fluxes.solids_flux(grid, v_face, solids)
    density = fluxes.total_flux_density(v_face, total)
    phi_solubles = fluxes.solubles_flux(grid, laws, q_face, density,
                                        solubles, total, diffusion)

    d_solids = -fluxes.divergence(grid, phi_solids)
    d_solubles = -fluxes.divergence(grid, phi_solubles)

    j = grid.feed_cell
    volume = grid.area_cells[j] * grid.dz
    d_solids[j] += bdata.feed_solids * (bdata.feed_flow / volume)
    d_solubles[j] += bdata.feed_solubles * (bdata.feed_flow / volume)

    if reactions is not None:
        rate_solids, rate_solubles = reactions.rates(solids, solubles)
        d_solids += grid.gamma_cells[:, None] * rate_solids
        d_solubles += grid.gamma_cells[:, None] * rate_solubles
    return d_solids, d_solubles


class OdeRhs:
    """Adapter ``f(t, y)`` over the packed state for generic ODE solvers.

    The flat layout is cell-major with the solid block before the soluble
    block within each cell; :meth:`State.pack` and :meth:`State.unpack`
    convert.  The callable is pure with respect to its arguments (inputs are
    copied before any adjustment), so instances may be shared across
    threads; only the excursion counter mutates.

    External integrators may overshoot the admissible region the explicit
    scheme itself preserves.  In ``"release"`` mode such excursions are
    repaired before evaluating the physics — negatives are zeroed and cells
    with excess total solids are scaled back to the ceiling — and counted in
    :attr:`events`; ``"debug"`` mode raises instead.
    """

    def __init__(self, scenario: Scenario, grid: Grid, mode: str = "release"):
        if mode not in ("release", "debug"):
            raise ConfigurationError(
                f"mode must be 'release' or 'debug', got {mode!r}")
        self.scenario = scenario
        self.grid = grid
        self.mode = mode
        self.events = 0

    def _admit(self, state: State, t: float) -> None:
        solids, solubles = state.solids, state.solubles
        x_max = self.scenario.laws.x_max
        negative = solids.min() < 0.0 or solubles.min() < 0.0
        total = solids.sum(axis=1)
        excess = total > x_max
        if not negative and not excess.any():
            return
        if self.mode == "debug":
            raise InvariantViolationError(
                f"state outside the admissible region at t = {t:.6g} s "
                f"(min concentration {min(solids.min(), solubles.min()):.3e},"
                f" max total solids {total.max():.6g})")
        self.events += 1
        if self.events in (1, 10, 100, 1000) or self.events % 10000 == 0:
            log.warning("repaired out-of-range state from the integrator "
                        "(%d event(s) so far)", self.events)
        np.clip(solids, 0.0, None, out=solids)
        np.clip(solubles, 0.0, None, out=solubles)
        total = solids.sum(axis=1)
        excess = total > x_max
        if excess.any():
            solids[excess] *= (x_max / total[excess])[:, None]

    def __call__(self, t: float, flat: np.ndarray) -> np.ndarray:
        state = State.unpack(flat, self.scenario.n_solids,
                             self.scenario.n_solubles, time=t)
        self._admit(state, t)
        d_solids, d_solubles = rhs_from_boundary(
            self.grid, self.scenario.laws, self.scenario.boundary_at(t),
            state.solids, state.solubles, self.scenario.diffusion,
            self.scenario.reactions)
        return np.hstack([d_solids, d_solubles]).ravel()


def make_ode_rhs(scenario: Scenario, grid: Grid,
                 mode: str = "release") -> OdeRhs:
    """Build the flat-vector right-hand side; see :class:`OdeRhs`."""
    return OdeRhs(scenario, grid, mode)
