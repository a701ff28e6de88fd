"""Face fluxes for the explicit upwind settling scheme.

Reference numpy implementation; the compiled time-stepping kernels mirror
these formulas exactly and are cross-checked against this module in the
test suite.

Layout: a vessel with N interior cells carries N + 2 cell values (index 0 is
the effluent pipe, N + 1 the underflow pipe) and N + 3 faces, face m sitting
between cells m - 1 and m.  Outer ghost states (above the effluent pipe,
below the underflow pipe) are identically zero: nothing re-enters the vessel
through the outlets.
"""
from __future__ import annotations

import numpy as np

from .constitutive import ConstitutiveSet
from .geometry import Grid


def with_ghosts(cell_values: np.ndarray) -> np.ndarray:
    """Pad the cell axis with one zero ghost entry on each side."""
    pad = [(1, 1)] + [(0, 0)] * (cell_values.ndim - 1)
    return np.pad(cell_values, pad)


def upwind(face_velocity: np.ndarray, left: np.ndarray,
           right: np.ndarray) -> np.ndarray:
    """Upwind combination v^- * right + v^+ * left at every face.

    ``left`` is the state in the cell above the face, ``right`` the state in
    the cell below; downward velocity (positive) carries the upper state.
    """
    vm = np.minimum(face_velocity, 0.0)
    vp = np.maximum(face_velocity, 0.0)
    if left.ndim == 2:
        vm, vp = vm[:, None], vp[:, None]
    return vm * right + vp * left


def interface_velocity(grid: Grid, laws: ConstitutiveSet, q_face: np.ndarray,
                       total_solids: np.ndarray) -> np.ndarray:
    """Solids phase velocity at every face.

    Bulk velocity plus, on faces strictly inside the vessel, hindered
    settling evaluated at the downstream (lower) cell minus the upwind
    difference quotient of the compression primitive.
    """
    xg = with_ghosts(total_solids)
    xl, xr = xg[:-1], xg[1:]
    compression = (laws.compression_primitive(xr)
                   - laws.compression_primitive(xl)) / grid.dz
    return q_face + grid.gamma_faces * (laws.settling_velocity(xr) - compression)


def solids_flux(grid: Grid, face_velocity: np.ndarray,
                solids: np.ndarray) -> np.ndarray:
    """Volumetric solids flux A * (v^- C_below + v^+ C_above) per face."""
    cg = with_ghosts(solids)
    return grid.area_faces[:, None] * upwind(face_velocity, cg[:-1], cg[1:])


def total_flux_density(face_velocity: np.ndarray,
                       total_solids: np.ndarray) -> np.ndarray:
    """Area-free flux density of total solids X at every face."""
    xg = with_ghosts(total_solids)
    return upwind(face_velocity, xg[:-1], xg[1:])


def solubles_flux(grid: Grid, laws: ConstitutiveSet, q_face: np.ndarray,
                  flux_density: np.ndarray, solubles: np.ndarray,
                  total_solids: np.ndarray,
                  diffusion: np.ndarray) -> np.ndarray:
    """Volumetric soluble flux per face.

    The carrier flux density rho_X * q - F_X is upwinded against the
    soluble concentration scaled by the local liquid volume fraction
    surrogate (rho_X - X); constant molecular diffusion acts only on faces
    strictly inside the vessel.
    """
    sg = with_ghosts(solubles)
    xg = with_ghosts(total_solids)
    sl, sr = sg[:-1], sg[1:]
    xl, xr = xg[:-1], xg[1:]
    carrier = laws.rho_solid * q_face - flux_density
    cm = np.minimum(carrier, 0.0)[:, None]
    cp = np.maximum(carrier, 0.0)[:, None]
    advect = (cm * sr / (laws.rho_solid - xr)[:, None]
              + cp * sl / (laws.rho_solid - xl)[:, None])
    diffuse = (grid.gamma_faces[:, None] * diffusion[None, :]
               * (sr - sl) / grid.dz)
    return grid.area_faces[:, None] * (advect - diffuse)


def divergence(grid: Grid, face_flux: np.ndarray) -> np.ndarray:
    """Per-cell flux difference [Phi]_below - [Phi]_above over cell volume."""
    delta = np.diff(face_flux, axis=0)
    volume = grid.area_cells * grid.dz
    if face_flux.ndim == 2:
        volume = volume[:, None]
    return delta / volume
