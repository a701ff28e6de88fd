"""Vessel geometry: cross-sectional area profiles and the staggered grid.

The vertical coordinate z increases downward.  The feed inlet sits at z = 0,
the effluent level at z = -H (top) and the underflow level at z = B (bottom).
The grid covers the vessel with N interior cells plus one outer cell at each
end; faces and cells carry exact area averages of the (piecewise cylinder /
cone) profile, with the profile extended constantly outside the vessel.

Index conventions used everywhere downstream:

* cells ``j = 0 .. N+1``; cell 0 is the effluent pipe, cell N+1 the underflow
  pipe, cells ``1..N`` are inside the vessel,
* faces ``m = 0 .. N+2``; face m separates cells m-1 and m and sits at
  ``z = -H + (m-1) dz``, so face 1 is the effluent level and face N+1 the
  underflow level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

_JOIN_TOL = 1e-9  # m, tolerance for segment contiguity checks


@dataclass(frozen=True)
class AreaSegment:
    """One axisymmetric piece of the vessel wall: cylinder or (truncated) cone.

    The radius varies linearly in z, so the area is quadratic; integrals are
    evaluated in closed form.
    """

    z_top: float        # m
    z_bottom: float     # m
    radius_top: float   # m
    radius_bottom: float

    def __post_init__(self) -> None:
        if not self.z_bottom > self.z_top:
            raise ConfigurationError(
                f"segment needs z_bottom > z_top, got [{self.z_top}, {self.z_bottom}]")
        if min(self.radius_top, self.radius_bottom) <= 0.0:
            raise ConfigurationError("segment radii must be positive")

    @classmethod
    def cylinder(cls, z_top: float, z_bottom: float, area: float) -> "AreaSegment":
        r = math.sqrt(area / math.pi)
        return cls(z_top, z_bottom, r, r)

    @classmethod
    def cone(cls, z_top: float, z_bottom: float,
             area_top: float, area_bottom: float) -> "AreaSegment":
        return cls(z_top, z_bottom,
                   math.sqrt(area_top / math.pi), math.sqrt(area_bottom / math.pi))

    @property
    def length(self) -> float:
        return self.z_bottom - self.z_top

    def radius_at(self, z):
        s = (np.asarray(z, dtype=float) - self.z_top) / self.length
        return self.radius_top + (self.radius_bottom - self.radius_top) * s

    def area_at(self, z):
        return math.pi * self.radius_at(z) ** 2

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the area over [a, b] (must lie inside the segment)."""
        if b <= a:
            return 0.0
        dr = self.radius_bottom - self.radius_top
        if dr == 0.0:
            return math.pi * self.radius_top ** 2 * (b - a)
        # antiderivative of pi*r(z)^2 is pi*L*r^3/(3*dr) with L the length
        ra = float(self.radius_at(a))
        rb = float(self.radius_at(b))
        return math.pi * self.length * (rb ** 3 - ra ** 3) / (3.0 * dr)


@dataclass(frozen=True)
class AreaProfile:
    """Contiguous stack of area segments covering the vessel depth.

    Adjacent segments may meet with different areas, which models a step in
    the wall; point evaluation at such a joint returns the lower segment's
    value, but every consumer below uses integrals, where the joint has
    measure zero.  Outside [z_top, z_bottom] the end areas extend constantly.
    """

    segments: tuple[AreaSegment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ConfigurationError("area profile needs at least one segment")
        for up, down in zip(self.segments, self.segments[1:]):
            if abs(up.z_bottom - down.z_top) > _JOIN_TOL:
                raise ConfigurationError(
                    f"area segments not contiguous at z = {up.z_bottom}")

    @classmethod
    def constant(cls, area: float, z_top: float, z_bottom: float) -> "AreaProfile":
        return cls((AreaSegment.cylinder(z_top, z_bottom, area),))

    @property
    def z_top(self) -> float:
        return self.segments[0].z_top

    @property
    def z_bottom(self) -> float:
        return self.segments[-1].z_bottom

    @property
    def is_constant(self) -> bool:
        radii = [s.radius_top for s in self.segments] + [s.radius_bottom for s in self.segments]
        return max(radii) - min(radii) <= 1e-12 * max(radii)

    def area_at(self, z):
        zs = np.asarray(z, dtype=float)
        out = np.empty_like(zs, dtype=float)
        flat = np.atleast_1d(out)
        zf = np.atleast_1d(zs)
        flat[:] = math.pi * self.segments[-1].radius_bottom ** 2
        flat[zf < self.segments[0].z_top] = math.pi * self.segments[0].radius_top ** 2
        for seg in reversed(self.segments):
            inside = (zf >= seg.z_top) & (zf < seg.z_bottom)
            flat[inside] = seg.area_at(zf[inside])
        last = self.segments[-1]
        flat[zf == last.z_bottom] = float(last.area_at(last.z_bottom))
        return float(out) if zs.ndim == 0 else out

    def integral(self, a: float, b: float) -> float:
        """Integral of the area over [a, b] with constant end extensions."""
        if b <= a:
            return 0.0
        total = 0.0
        top, bottom = self.z_top, self.z_bottom
        if a < top:
            total += math.pi * self.segments[0].radius_top ** 2 * (min(b, top) - a)
        if b > bottom:
            total += math.pi * self.segments[-1].radius_bottom ** 2 * (b - max(a, bottom))
        for seg in self.segments:
            lo = max(a, seg.z_top)
            hi = min(b, seg.z_bottom)
            if hi > lo:
                total += seg.integral(lo, hi)
        return total

    def average(self, a: float, b: float) -> float:
        return self.integral(a, b) / (b - a)


@dataclass(frozen=True)
class AreaConstants:
    """Grid/area ratios entering the stability budgets."""

    m1: float     # max over interior cells of A_face / A_cell
    m2: float     # max over interior cells of (A_face_top + A_face_bottom) / A_cell
    a_min: float  # smallest interior cell area [m^2]


@dataclass(frozen=True)
class Grid:
    n_cells: int              # N, interior cells
    depth_above_feed: float   # H [m]
    depth_below_feed: float   # B [m]
    dz: float                 # (H + B) / N [m]
    feed_cell: int            # index j_f of the cell receiving the feed
    z_faces: np.ndarray       # (N+3,)
    z_centers: np.ndarray     # (N+2,)
    area_faces: np.ndarray    # (N+3,) m^2
    area_cells: np.ndarray    # (N+2,) m^2
    gamma_faces: np.ndarray   # (N+3,) 1.0 strictly inside the vessel
    gamma_cells: np.ndarray   # (N+2,) 1.0 for cells inside the vessel
    faces_above_feed: np.ndarray  # (N+3,) 1.0 where the bulk flow is Q_u - Q_f

    @property
    def interior(self) -> slice:
        """Cells inside the vessel (excludes the two outer pipe cells)."""
        return slice(1, self.n_cells + 1)

    @cached_property
    def constants(self) -> AreaConstants:
        j = np.arange(1, self.n_cells + 1)
        top = self.area_faces[j]
        bottom = self.area_faces[j + 1]
        cells = self.area_cells[j]
        return AreaConstants(
            m1=float(np.max(np.maximum(top, bottom) / cells)),
            m2=float(np.max((top + bottom) / cells)),
            a_min=float(cells.min()),
        )


def build_grid(profile: AreaProfile, n_cells: int) -> Grid:
    """Discretize the vessel described by ``profile`` into ``n_cells`` cells.

    The profile must span [-H, B] with the feed level z = 0 strictly inside.
    """
    if n_cells < 2:
        raise ConfigurationError(f"need at least 2 cells, got {n_cells}")
    if not (profile.z_top < 0.0 < profile.z_bottom):
        raise ConfigurationError(
            "area profile must span the feed level z = 0 "
            f"(got [{profile.z_top}, {profile.z_bottom}])")
    depth_above = -profile.z_top
    depth_below = profile.z_bottom
    height = depth_above + depth_below
    dz = height / n_cells
    # ceil(H / dz) without dividing by the rounded dz; the nudge absorbs
    # float fuzz when H is an exact multiple of dz
    feed_cell = math.ceil(depth_above * n_cells / height - 1e-9)
    if not 1 <= feed_cell <= n_cells:
        raise ConfigurationError("feed level does not fall in an interior cell")

    m = np.arange(n_cells + 3)
    z_faces = -depth_above + (m - 1) * dz
    z_centers = -depth_above + (np.arange(n_cells + 2) - 0.5) * dz
    area_faces = np.array(
        [profile.average(z - 0.5 * dz, z + 0.5 * dz) for z in z_faces])
    area_cells = np.array(
        [profile.average(z_faces[j], z_faces[j + 1]) for j in range(n_cells + 2)])
    gamma_faces = ((m >= 2) & (m <= n_cells)).astype(float)
    j = np.arange(n_cells + 2)
    gamma_cells = ((j >= 1) & (j <= n_cells)).astype(float)
    faces_above_feed = (m <= feed_cell).astype(float)
    return Grid(
        n_cells=n_cells,
        depth_above_feed=depth_above,
        depth_below_feed=depth_below,
        dz=dz,
        feed_cell=feed_cell,
        z_faces=z_faces,
        z_centers=z_centers,
        area_faces=area_faces,
        area_cells=area_cells,
        gamma_faces=gamma_faces,
        gamma_cells=gamma_cells,
        faces_above_feed=faces_above_feed,
    )
