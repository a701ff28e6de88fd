"""Constitutive laws for hindered settling and sediment compressibility.

The builtin material model combines a power-law hindered-settling velocity
with a linear effective-stress closure above a critical (gel) concentration.
Compression enters the solids flux through the primitive of the compression
diffusivity, which is precomputed here as a monotone lookup table so that hot
loops never integrate anything.  Everything downstream (face fluxes, CFL
budgets, both stepping schemes) consumes this module through
:class:`ConstitutiveSet`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConfigurationError, DomainError

# Absolute slack accepted on [0, x_max] range checks; covers accumulated
# floating-point drift of states produced by the monotone schemes.
RANGE_SLACK = 1e-9

# Quadrature acceptance for the primitive tables (absolute, on values ~1e-4).
_TABLE_TOL = 1e-10


@dataclass(frozen=True)
class HermiteTable:
    """Cubic-Hermite interpolant of a primitive on a uniform grid.

    Node values come from quadrature of the integrand and node slopes are the
    integrand itself, so the interpolated derivative tracks the integrand to
    O(step^3) instead of the O(step) a piecewise-linear table would give.
    """

    lo: float
    hi: float
    step: float
    values: np.ndarray  # (n,)
    slopes: np.ndarray  # (n,) integrand at the nodes

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        scalar = arr.ndim == 0
        t = (np.clip(arr, self.lo, self.hi) - self.lo) / self.step
        idx = np.clip(t.astype(np.int64), 0, len(self.values) - 2)
        s = t - idx
        y0 = self.values[idx]
        y1 = self.values[idx + 1]
        d0 = self.slopes[idx] * self.step
        d1 = self.slopes[idx + 1] * self.step
        s2 = s * s
        s3 = s2 * s
        out = (y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
               + d0 * (s3 - 2.0 * s2 + s)
               + y1 * (-2.0 * s3 + 3.0 * s2)
               + d1 * (s3 - s2))
        out = np.where(arr <= self.lo, 0.0, out)
        out = np.where(arr >= self.hi, self.values[-1], out)
        return float(out) if scalar else out

    def assert_monotone(self) -> None:
        """Fail loudly if any cubic segment dips (guards the flux bound
        |D(a) - D(b)| <= D(hi) used by the stability proofs)."""
        y0, y1 = self.values[:-1], self.values[1:]
        d0 = self.slopes[:-1] * self.step
        d1 = self.slopes[1:] * self.step
        # derivative of the Hermite cubic in local coordinates is a quadratic
        # a*s^2 + b*s + c with:
        a = 6.0 * (y0 - y1) + 3.0 * (d0 + d1)
        b = 6.0 * (y1 - y0) - 4.0 * d0 - 2.0 * d1
        c = d0
        cand = np.minimum(c, a + b + c)  # endpoints s = 0, 1
        vertex = np.where(np.abs(a) > 0.0, -b / np.where(a == 0.0, 1.0, 2.0 * a), -1.0)
        inside = (vertex > 0.0) & (vertex < 1.0)
        qv = (a * vertex + b) * vertex + c
        cand = np.where(inside, np.minimum(cand, qv), cand)
        floor = -1e-15 * max(1.0, float(np.max(np.abs(self.values))))
        if float(cand.min()) < floor:
            raise ConfigurationError(
                "primitive table lost monotonicity (segment slope "
                f"{float(cand.min()):.3e}); integrand may be invalid")


def _cumulative_table(integrand, lo: float, hi: float, nodes: int) -> HermiteTable:
    """Cumulative integral of ``integrand`` on a uniform grid.

    Composite Simpson per node interval, accepted only if halving the panel
    width moves no node value by more than ``_TABLE_TOL``.
    """
    if nodes < 8:
        raise ConfigurationError(f"need at least 8 table nodes, got {nodes}")
    grid = np.linspace(lo, hi, nodes)
    h = grid[1] - grid[0]

    def panel_sums(per: int) -> np.ndarray:
        # `per` Simpson panels inside each node interval
        m = 2 * per
        offs = np.arange(m + 1) / m  # (m+1,)
        pts = grid[:-1, None] + offs[None, :] * h
        # the very first point sits on the kink of the integrand; evaluate the
        # right-limit there so Simpson sees the smooth branch
        pts[0, 0] = np.nextafter(lo, hi)
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return (h / (3.0 * m)) * (integrand(pts) * w).sum(axis=1)

    coarse = np.concatenate(([0.0], np.cumsum(panel_sums(1))))
    fine = np.concatenate(([0.0], np.cumsum(panel_sums(2))))
    drift = float(np.max(np.abs(fine - coarse)))
    if drift > _TABLE_TOL:
        raise ConfigurationError(
            f"primitive quadrature did not converge (Richardson drift {drift:.3e})")
    slopes = integrand(np.maximum(grid, np.nextafter(lo, hi)))
    table = HermiteTable(lo=float(lo), hi=float(hi), step=float(h),
                         values=fine, slopes=slopes)
    table.assert_monotone()
    return table


def _sup_abs(fn, lo: float, hi: float, samples: int = 4001) -> float:
    """Supremum of |fn| on [lo, hi]: dense scan plus bounded refinement
    bracketed to 1e-12."""
    xs = np.linspace(lo, hi, samples)
    vals = np.abs(np.asarray(fn(xs), dtype=float))
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, samples - 1)]
    best = float(vals[i])
    if b > a:
        res = minimize_scalar(lambda u: -abs(float(fn(u))), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@dataclass(frozen=True)
class SupNorms:
    """Material sup-norms consumed by the stability budgets (all SI)."""

    settling_velocity: float        # sup v_hs = v_hs(0)  [m/s]
    settling_slope: float           # sup |v_hs'|         [m/s per kg/m^3]
    compression_diffusivity: float  # ess-sup d_C         [m^2/s]
    compression_primitive: float    # D_C(x_max)          [m^2/s * kg/m^3]
    batch_flux: float               # sup v_hs(X) X       [kg/(m^2 s)]
    batch_flux_slope: float         # sup |(v_hs X)'|     [m/s]
    xp_primitive: float             # XP compression primitive at x_max
    xp_primitive_slope: float       # ess-sup of its integrand


@dataclass(frozen=True)
class ConstitutiveSet:
    """Material parameters plus derived laws for one sludge.

    Defaults are the calibrated secondary-settling values used by all builtin
    scenarios.  Subclass and override the law methods to plug in another
    family; anything that is not this exact class automatically falls back to
    the pure-NumPy stepping path.
    """

    v0: float = 1.76e-3        # max hindered-settling velocity [m/s]
    x_bar: float = 3.87        # settling-velocity scale concentration [kg/m^3]
    eta: float = 3.58          # settling-velocity exponent [-]
    x_crit: float = 5.0        # gel point: compression starts above [kg/m^3]
    alpha: float = 0.2         # effective-stress slope above gel point [m^2/s^2]
    rho_solid: float = 1050.0  # solids density [kg/m^3]
    rho_fluid: float = 998.0   # fluid density [kg/m^3]
    gravity: float = 9.81      # [m/s^2]
    x_max: float = 30.0        # admissible-region ceiling [kg/m^3]
    table_nodes: int = 4096

    def __post_init__(self) -> None:
        if min(self.v0, self.x_bar, self.alpha, self.gravity) <= 0.0:
            raise ConfigurationError("v0, x_bar, alpha and gravity must be positive")
        if self.eta <= 1.0:
            raise ConfigurationError("eta must exceed 1 (unimodal batch flux)")
        if not 0.0 < self.x_crit < self.x_max:
            raise ConfigurationError("need 0 < x_crit < x_max")
        if not self.rho_fluid < self.rho_solid:
            raise ConfigurationError("solid must be denser than fluid")
        if not self.x_max < self.rho_solid:
            raise ConfigurationError("x_max must stay below the solids density")

    # -- plain parameters -------------------------------------------------
    @property
    def delta_rho(self) -> float:
        """Buoyancy density excess rho_solid - rho_fluid [kg/m^3]."""
        return self.rho_solid - self.rho_fluid

    @property
    def density_ratio(self) -> float:
        """rho_fluid / rho_solid, the factor converting X to displaced water."""
        return self.rho_fluid / self.rho_solid

    @property
    def is_builtin_family(self) -> bool:
        """True when the fast jitted kernels may inline the laws."""
        return type(self) is ConstitutiveSet

    # -- laws -------------------------------------------------------------
    def _validated(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.size:
            lo = float(arr.min())
            hi = float(arr.max())
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise DomainError("non-finite solids concentration")
            if lo < -RANGE_SLACK or hi > self.x_max + RANGE_SLACK:
                raise DomainError(
                    f"solids concentration outside [0, {self.x_max}]: "
                    f"range [{lo:.6g}, {hi:.6g}]")
        return np.clip(arr, 0.0, self.x_max)

    def settling_velocity(self, x):
        """Hindered settling velocity v0 / (1 + (X/x_bar)^eta) [m/s]."""
        arr = self._validated(x)
        out = self.v0 / (1.0 + (arr / self.x_bar) ** self.eta)
        return float(out) if np.ndim(x) == 0 else out

    def settling_slope(self, x):
        """Derivative of the settling velocity with respect to X."""
        arr = self._validated(x)
        u = arr / self.x_bar
        out = -self.v0 * self.eta * u ** (self.eta - 1.0) / (
            self.x_bar * (1.0 + u ** self.eta) ** 2)
        return float(out) if np.ndim(x) == 0 else out

    def stress_slope(self, x):
        """Effective-stress derivative: 0 up to the gel point, alpha above.

        The value exactly at x_crit is taken as 0 (one-sided convention);
        integrals over the active range use the right-limit.
        """
        arr = self._validated(x)
        out = np.where(arr > self.x_crit, self.alpha, 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def compression_diffusivity(self, x):
        """Degenerate diffusivity d_C(X) = v_hs rho_s sigma_e' / (X g drho)."""
        arr = self._validated(x)
        arr = np.atleast_1d(arr)
        out = np.zeros_like(arr)
        active = arr > self.x_crit
        if np.any(active):
            xa = arr[active]
            out[active] = (self.settling_velocity(xa) * self.rho_solid
                           * self.stress_slope(xa)
                           / (xa * self.gravity * self.delta_rho))
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    def compression_primitive(self, x):
        """D_C(X) = integral of the compression diffusivity from the gel point."""
        self._validated(x)
        return self._compression_table(x)

    def xp_compression_primitive(self, x):
        """Primitive rho_s/(g drho) * int v_hs sigma_e' used by the xp scheme
        (no 1/X factor, so it is not the same integral as D_C)."""
        self._validated(x)
        return self._xp_table(x)

    def batch_flux(self, x):
        """Batch settling flux f(X) = v_hs(X) X [kg/(m^2 s)]."""
        arr = self._validated(x)
        out = self.settling_velocity(arr) * arr
        return float(out) if np.ndim(x) == 0 else out

    def batch_flux_slope(self, x):
        """f'(X) = v_hs(X) + X v_hs'(X)."""
        arr = self._validated(x)
        out = self.settling_velocity(arr) + arr * self.settling_slope(arr)
        return float(out) if np.ndim(x) == 0 else out

    # -- derived objects (built once, cached) -----------------------------
    @cached_property
    def _compression_table(self) -> HermiteTable:
        def integrand(pts):
            return (self.settling_velocity(pts) * self.rho_solid * self.alpha
                    / (pts * self.gravity * self.delta_rho))
        return _cumulative_table(integrand, self.x_crit, self.x_max, self.table_nodes)

    @cached_property
    def _xp_table(self) -> HermiteTable:
        def integrand(pts):
            return (self.settling_velocity(pts) * self.rho_solid * self.alpha
                    / (self.gravity * self.delta_rho))
        return _cumulative_table(integrand, self.x_crit, self.x_max, self.table_nodes)

    @cached_property
    def peak_concentration(self) -> float:
        """Maximizer of the batch flux (root of f' found by bracketed root
        solving; the batch flux is unimodal for eta > 1)."""
        fp = self.batch_flux_slope
        if fp(0.0) <= 0.0:
            raise ConfigurationError("batch flux not increasing at X = 0")
        xs = np.linspace(0.0, self.x_max, 512)
        signs = np.asarray(fp(xs))
        below = np.nonzero(signs < 0.0)[0]
        if len(below) == 0:
            raise ConfigurationError("batch flux has no interior maximum below x_max")
        hi = xs[below[0]]
        lo = xs[below[0] - 1]
        return float(brentq(fp, lo, hi, xtol=1e-12))

    @cached_property
    def norms(self) -> SupNorms:
        eps = np.nextafter(self.x_crit, self.x_max)
        d_sup = max(_sup_abs(self.compression_diffusivity, eps, self.x_max),
                    float(self.compression_diffusivity(eps)))

        def xp_integrand(u):
            return (self.settling_velocity(u) * self.rho_solid * self.alpha
                    / (self.gravity * self.delta_rho))

        return SupNorms(
            settling_velocity=_sup_abs(self.settling_velocity, 0.0, self.x_max),
            settling_slope=_sup_abs(self.settling_slope, 0.0, self.x_max),
            compression_diffusivity=d_sup,
            compression_primitive=float(self._compression_table.values[-1]),
            batch_flux=_sup_abs(self.batch_flux, 0.0, self.x_max),
            batch_flux_slope=_sup_abs(self.batch_flux_slope, 0.0, self.x_max),
            xp_primitive=float(self._xp_table.values[-1]),
            xp_primitive_slope=_sup_abs(xp_integrand, eps, self.x_max),
        )
