"""Runtime scenario: SI schedules, initial profiles, boundary flows.

A :class:`Scenario` bundles everything a run needs — vessel profile, bulk-flow
and feed schedules, initial data, material laws, kinetics, and soluble
diffusion coefficients.  Schedules are piecewise constant; the stepping code
asks for exact interval averages so a step that straddles a jump still sees
the correct mean forcing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constitutive import ConstitutiveSet
from .errors import ConfigurationError
from .geometry import AreaProfile, Grid, build_grid
from .reactions import DenitrificationKinetics


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant forcing: value i holds on [starts[i], starts[i+1]),
    the last value extends forever. Values may be scalar or (k,)-vector rows."""

    starts: np.ndarray  # (m,) s, strictly increasing, starts[0] == 0
    values: np.ndarray  # (m,) or (m, k)

    def __post_init__(self) -> None:
        if len(self.starts) != len(self.values):
            raise ConfigurationError("schedule starts/values length mismatch")
        if len(self.starts) == 0 or self.starts[0] != 0.0:
            raise ConfigurationError("schedule must start at t = 0")
        if np.any(np.diff(self.starts) <= 0.0):
            raise ConfigurationError("schedule starts must be strictly increasing")

    def value_at(self, t: float):
        idx = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.values[max(idx, 0)]

    def average(self, t0: float, t1: float):
        """Exact mean of the schedule over [t0, t1] (t1 > t0 >= 0)."""
        if not t1 > t0:
            raise ConfigurationError(f"need t1 > t0, got [{t0}, {t1}]")
        upper = np.append(self.starts[1:], np.inf)
        lo = np.maximum(self.starts, t0)
        hi = np.minimum(upper, t1)
        w = np.clip(hi - lo, 0.0, None)
        if self.values.ndim == 1:
            return float(w @ self.values) / (t1 - t0)
        return (w @ self.values) / (t1 - t0)

    def max_over(self, horizon: float) -> float:
        """Largest value taken anywhere on [0, horizon] (scalar schedules)."""
        live = self._live(horizon)
        return float(np.max(self.values[live]))

    def min_over(self, horizon: float) -> float:
        live = self._live(horizon)
        return float(np.min(self.values[live]))

    def _live(self, horizon: float) -> np.ndarray:
        if horizon <= 0.0:
            return np.array([0])
        return np.nonzero(self.starts < horizon)[0]

    def breakpoints_within(self, t0: float, t1: float) -> np.ndarray:
        return self.starts[(self.starts > t0) & (self.starts < t1)]


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear profile of z used for initial data.

    Pieces must be contiguous; jumps are expressed by differing edge values of
    adjacent pieces.  Outside the covered range the end values extend
    constantly (the pipes start filled with the boundary state).
    """

    z_from: np.ndarray
    z_to: np.ndarray
    value_from: np.ndarray
    value_to: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.z_to <= self.z_from):
            raise ConfigurationError("profile pieces need z_to > z_from")
        if np.any(np.abs(self.z_to[:-1] - self.z_from[1:]) > 1e-9):
            raise ConfigurationError("profile pieces must be contiguous")

    def _value_in_piece(self, i: int, z) -> np.ndarray:
        s = (np.asarray(z) - self.z_from[i]) / (self.z_to[i] - self.z_from[i])
        return self.value_from[i] + (self.value_to[i] - self.value_from[i]) * s

    def integral(self, a: float, b: float) -> float:
        """Exact integral over [a, b] with constant end extensions."""
        if b <= a:
            return 0.0
        total = 0.0
        if a < self.z_from[0]:
            total += self.value_from[0] * (min(b, self.z_from[0]) - a)
        if b > self.z_to[-1]:
            total += self.value_to[-1] * (b - max(a, self.z_to[-1]))
        for i in range(len(self.z_from)):
            lo = max(a, float(self.z_from[i]))
            hi = min(b, float(self.z_to[i]))
            if hi > lo:
                # trapezoid is exact on a linear piece
                total += 0.5 * (self._value_in_piece(i, lo)
                                + self._value_in_piece(i, hi)) * (hi - lo)
        return float(total)

    def cell_averages(self, z_edges: np.ndarray) -> np.ndarray:
        return np.array([
            self.integral(a, b) / (b - a)
            for a, b in zip(z_edges[:-1], z_edges[1:])])

    def sample_points(self) -> np.ndarray:
        """All breakpoints — extrema of any stack of these profiles live here."""
        return np.unique(np.concatenate([self.z_from, self.z_to]))

    def value_at(self, z: float) -> float:
        if z < self.z_from[0]:
            return float(self.value_from[0])
        for i in range(len(self.z_from)):
            if z < self.z_to[i]:
                return float(self._value_in_piece(i, max(z, float(self.z_from[i]))))
        return float(self.value_to[-1])


@dataclass(frozen=True)
class BoundaryData:
    """Forcing for one instant or one averaging window (all SI)."""

    feed_flow: float           # Q_f [m^3/s]
    underflow: float           # Q_u [m^3/s]
    feed_solids: np.ndarray    # C_f (k_C,) [kg/m^3]
    feed_solubles: np.ndarray  # S_f (k_S,) [kg/m^3]

    @property
    def effluent_flow(self) -> float:
        """Q_e = Q_f - Q_u (no reaction-driven volume change)."""
        return self.feed_flow - self.underflow


@dataclass(frozen=True)
class Scenario:
    name: str
    profile: AreaProfile
    feed_flow: Schedule
    underflow: Schedule
    feed_solids: Schedule
    feed_solubles: Schedule
    initial_solids: tuple[PiecewiseLinear, ...]
    initial_solubles: tuple[PiecewiseLinear, ...]
    laws: ConstitutiveSet
    reactions: Optional[DenitrificationKinetics]
    diffusion: np.ndarray  # (k_S,) m^2/s

    # -- structure --------------------------------------------------------
    @property
    def n_solids(self) -> int:
        return len(self.initial_solids)

    @property
    def n_solubles(self) -> int:
        return len(self.initial_solubles)

    @property
    def solid_names(self) -> tuple[str, ...]:
        if self.reactions is not None:
            return tuple(self.reactions.solid_names)
        return tuple(f"C{k + 1}" for k in range(self.n_solids))

    @property
    def soluble_names(self) -> tuple[str, ...]:
        if self.reactions is not None:
            return tuple(self.reactions.soluble_names)
        return tuple(f"S{k + 1}" for k in range(self.n_solubles))

    def build_grid(self, n_cells: int) -> Grid:
        return build_grid(self.profile, n_cells)

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        """Check the standing physical assumptions; raise ConfigurationError."""
        probe = np.union1d(self.feed_flow.starts, self.underflow.starts)
        q_f = np.array([self.feed_flow.value_at(t) for t in probe])
        q_u = np.array([self.underflow.value_at(t) for t in probe])
        if np.any(q_u <= 0.0):
            raise ConfigurationError("underflow must stay positive")
        if np.any(q_f < q_u - 1e-15):
            raise ConfigurationError("feed flow must stay >= underflow")
        c_f = np.atleast_2d(self.feed_solids.values)
        if np.any(c_f < 0.0):
            raise ConfigurationError("feed solids must be nonnegative")
        if np.any(c_f.sum(axis=1) > self.laws.x_max + 1e-12):
            raise ConfigurationError(
                f"total feed solids must stay below x_max = {self.laws.x_max}")
        if np.any(np.atleast_2d(self.feed_solubles.values) < 0.0):
            raise ConfigurationError("feed solubles must be nonnegative")
        zs = np.unique(np.concatenate(
            [p.sample_points() for p in self.initial_solids + self.initial_solubles]))
        # half-open pieces: probe both sides of every breakpoint
        zs = np.unique(np.concatenate([zs, zs - 1e-12, zs + 1e-12]))
        solids0 = np.array([[p.value_at(z) for z in zs] for p in self.initial_solids])
        if np.any(solids0 < 0.0):
            raise ConfigurationError("initial solids must be nonnegative")
        if np.any(solids0.sum(axis=0) > self.laws.x_max + 1e-12):
            raise ConfigurationError("initial total solids must stay below x_max")
        if any(np.any(np.array([p.value_at(z) for z in zs]) < 0.0)
               for p in self.initial_solubles):
            raise ConfigurationError("initial solubles must be nonnegative")
        if len(self.diffusion) != self.n_solubles:
            raise ConfigurationError("diffusion length must match solubles")

    # -- forcing ----------------------------------------------------------
    def boundary_at(self, t: float) -> BoundaryData:
        return BoundaryData(
            feed_flow=float(self.feed_flow.value_at(t)),
            underflow=float(self.underflow.value_at(t)),
            feed_solids=np.asarray(self.feed_solids.value_at(t), dtype=float),
            feed_solubles=np.asarray(self.feed_solubles.value_at(t), dtype=float))

    def boundary_average(self, t0: float, t1: float) -> BoundaryData:
        return BoundaryData(
            feed_flow=self.feed_flow.average(t0, t1),
            underflow=self.underflow.average(t0, t1),
            feed_solids=np.asarray(self.feed_solids.average(t0, t1), dtype=float),
            feed_solubles=np.asarray(self.feed_solubles.average(t0, t1), dtype=float))

    def schedule_breakpoints(self, horizon: float) -> np.ndarray:
        pts = np.concatenate([
            s.breakpoints_within(0.0, horizon)
            for s in (self.feed_flow, self.underflow,
                      self.feed_solids, self.feed_solubles)])
        return np.unique(pts)

    def effluent_flow(self, t: float) -> float:
        return float(self.feed_flow.value_at(t)) - float(self.underflow.value_at(t))

    # -- sampled fields ---------------------------------------------------
    def initial_state(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """Cell averages of the initial profiles, (N+2, k_C) and (N+2, k_S)."""
        edges = grid.z_faces
        solids = np.column_stack([p.cell_averages(edges) for p in self.initial_solids])
        solubles = np.column_stack([p.cell_averages(edges) for p in self.initial_solubles])
        return solids, solubles


def face_bulk_flow(grid: Grid, bdata: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    """Volumetric bulk flow through every face and the face velocity.

    Above the feed layer the net flow is Q_u - Q_f (upward, negative), at and
    below it is Q_u (downward, positive).  Returns (Q_face [m^3/s],
    q_face = Q_face / A_face [m/s]), both of shape (N+3,).
    """
    q_face = bdata.underflow - bdata.feed_flow * grid.faces_above_feed
    return q_face, q_face / grid.area_faces
