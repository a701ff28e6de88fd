"""Biokinetic reaction models coupling solid and soluble components.

The builtin model is anoxic denitrification: ordinary heterotrophic organisms
(X_OHO) grow on readily biodegradable substrate (S_S) using nitrate (S_NO3)
as electron acceptor, producing nitrogen gas (S_N2) and decaying into
undegradable organics (X_U).

A reaction model exposes ``rates`` plus conservative bounds on its state
derivatives; the bounds feed straight into the time-step budgets, so they must
dominate the true suprema over the admissible region (being loose only costs
time-step size, never correctness).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class ReactionBounds:
    """Suprema of reaction-rate derivatives over the admissible region [1/s].

    ``solubles`` is taken over *all* pairs (component, variable), not just the
    diagonal; that is what makes the reaction part of the soluble stability
    budget an honest Lipschitz bound for the coupled system.
    """

    solids_own: float           # |d R_solid^k / d C^k|
    solids_total: float         # |d (sum_k R_solid^k) / d C^k|
    solubles: float             # |d R_soluble^k / d S^l|, any k, l
    total_from_solubles: float  # |d (sum_k R_solid^k) / d S^l|

    @property
    def largest(self) -> float:
        return max(self.solids_own, self.solids_total,
                   self.solubles, self.total_from_solubles)


@runtime_checkable
class ReactionModel(Protocol):
    """Anything that can sit in the reaction slot of a scenario."""

    solid_names: tuple[str, ...]
    soluble_names: tuple[str, ...]

    def rates(self, solids: np.ndarray, solubles: np.ndarray): ...

    def derivative_bounds(self) -> ReactionBounds: ...


@dataclass(frozen=True)
class DenitrificationKinetics:
    """Two-solid / three-soluble denitrification kinetics.

    Defaults are the calibrated values shared by all builtin scenarios.  With
    ``biomass_cap="ramp"`` the solid rates are scaled down linearly once the
    total solids concentration passes ``ramp_fraction * x_max``, reaching zero
    at ``x_max``; this makes the net solids production non-positive at the
    ceiling, which the admissible-region guarantee for packed beds needs.
    The default leaves growth uncapped, matching the calibrated scenarios
    whose states stay far from the ceiling.
    """

    yield_coeff: float = 0.67          # Y, biomass produced per substrate [-]
    decay_rate: float = 6.94e-6        # b [1/s]
    inert_fraction: float = 0.2        # f_P, decayed biomass ending up inert [-]
    mu_max: float = 5.56e-5            # max specific growth rate [1/s]
    half_sat_no3: float = 5e-4         # K for nitrate [kg/m^3]
    half_sat_substrate: float = 0.02   # K for substrate [kg/m^3]
    x_max: float = 30.0                # solids ceiling the cap ramps toward [kg/m^3]
    biomass_cap: str = "none"          # "none" | "ramp"
    ramp_fraction: float = 0.95

    solid_names = ("X_OHO", "X_U")
    soluble_names = ("S_NO3", "S_S", "S_N2")

    def __post_init__(self) -> None:
        if self.biomass_cap not in ("none", "ramp"):
            raise ValueError(f"unknown biomass_cap {self.biomass_cap!r}")
        if not 0.0 < self.ramp_fraction < 1.0:
            raise ValueError("ramp_fraction must lie in (0, 1)")

    @property
    def nitrate_yield(self) -> float:
        """Nitrate consumed (= nitrogen gas produced) per biomass grown:
        (1 - Y) / (2.86 Y), the 2.86 being the oxygen equivalent of nitrate."""
        return (1.0 - self.yield_coeff) / (2.86 * self.yield_coeff)

    def growth_rate(self, solubles: np.ndarray) -> np.ndarray:
        """Specific growth rate mu(S): double Monod in nitrate and substrate."""
        s_no3 = solubles[..., 0]
        s_s = solubles[..., 1]
        return (self.mu_max
                * s_no3 / (self.half_sat_no3 + s_no3)
                * s_s / (self.half_sat_substrate + s_s))

    def cap_factor(self, total_solids: np.ndarray) -> np.ndarray:
        """Growth-limiting factor Z(X): 1 below the ramp, 0 at x_max."""
        if self.biomass_cap == "none":
            return np.ones_like(np.asarray(total_solids, dtype=float))
        start = self.ramp_fraction * self.x_max
        return np.clip((self.x_max - np.asarray(total_solids, dtype=float))
                       / (self.x_max - start), 0.0, 1.0)

    def rates(self, solids: np.ndarray, solubles: np.ndarray):
        """Reaction rates (kg/m^3/s) for solids and solubles.

        Accepts any matching leading shape; the last axis is the component.
        """
        mu = self.growth_rate(solubles)
        x_oho = solids[..., 0]
        z = self.cap_factor(solids.sum(axis=-1))
        b = self.decay_rate
        r_solids = np.stack([
            x_oho * z * (mu - b),
            x_oho * z * self.inert_fraction * b,
        ], axis=-1)
        r_solubles = np.stack([
            -self.nitrate_yield * mu * x_oho,
            ((1.0 - self.inert_fraction) * b - mu / self.yield_coeff) * x_oho,
            self.nitrate_yield * mu * x_oho,
        ], axis=-1)
        return r_solids, r_solubles

    def total_solids_rate(self, solids: np.ndarray, solubles: np.ndarray) -> np.ndarray:
        """Net rate of the total solids concentration X = sum_k C^k."""
        mu = self.growth_rate(solubles)
        z = self.cap_factor(solids.sum(axis=-1))
        return (mu - (1.0 - self.inert_fraction) * self.decay_rate) * solids[..., 0] * z

    def derivative_bounds(self) -> ReactionBounds:
        """Closed-form conservative suprema over the admissible region.

        The growth rate obeys mu <= mu_max, |dmu/dS_NO3| <= mu_max/K_NO3 and
        |dmu/dS_S| <= mu_max/K_S.  The ramp cap contributes an extra
        |Z'| X <= x_max / ((1 - ramp_fraction) x_max) through the product rule
        on solid derivatives.
        """
        b = self.decay_rate
        cap_gain = 1.0
        if self.biomass_cap == "ramp":
            cap_gain += 1.0 / (1.0 - self.ramp_fraction)
        mu_slope = self.mu_max * max(1.0 / self.half_sat_no3,
                                     1.0 / self.half_sat_substrate)
        per_soluble = max(self.nitrate_yield, 1.0 / self.yield_coeff)
        return ReactionBounds(
            solids_own=max(self.mu_max, b) * cap_gain,
            solids_total=max(self.mu_max - (1.0 - self.inert_fraction) * b,
                             (1.0 - self.inert_fraction) * b) * cap_gain,
            solubles=self.x_max * per_soluble * mu_slope,
            total_from_solubles=self.x_max * mu_slope,
        )


def estimate_derivative_bounds(model: ReactionModel,
                               solids_cap: float,
                               solubles_cap: float,
                               log2_samples: int = 20,
                               margin: float = 1.05) -> ReactionBounds:
    """Sampled fallback bounds for models without closed-form derivatives.

    Scans a Sobol design over the state box with central differences and
    inflates the observed suprema by ``margin``.  Intended for plugged-in
    models only; the builtin kinetics have exact bounds.
    """
    k_c = len(model.solid_names)
    k_s = len(model.soluble_names)
    sampler = qmc.Sobol(d=k_c + k_s, scramble=False)
    pts = sampler.random_base2(m=log2_samples)
    solids = pts[:, :k_c] * solids_cap
    solubles = pts[:, k_c:] * solubles_cap

    own = total_own = sol = total_sol = 0.0
    for axis in range(k_c):
        h = 1e-6 * solids_cap
        hi = solids.copy()
        hi[:, axis] = np.minimum(hi[:, axis] + h, solids_cap)
        lo = solids.copy()
        lo[:, axis] = np.maximum(lo[:, axis] - h, 0.0)
        span = hi[:, axis] - lo[:, axis]
        rc_hi, _ = model.rates(hi, solubles)
        rc_lo, _ = model.rates(lo, solubles)
        diff = (rc_hi - rc_lo) / span[:, None]
        own = max(own, float(np.abs(diff[:, axis]).max()))
        total_own = max(total_own, float(np.abs(diff.sum(axis=1)).max()))
    for axis in range(k_s):
        h = 1e-6 * solubles_cap
        hi = solubles.copy()
        hi[:, axis] = np.minimum(hi[:, axis] + h, solubles_cap)
        lo = solubles.copy()
        lo[:, axis] = np.maximum(lo[:, axis] - h, 0.0)
        span = hi[:, axis] - lo[:, axis]
        rc_hi, rs_hi = model.rates(solids, hi)
        rc_lo, rs_lo = model.rates(solids, lo)
        sol = max(sol, float((np.abs(rs_hi - rs_lo) / span[:, None]).max()))
        total_sol = max(total_sol, float(
            (np.abs((rc_hi - rc_lo).sum(axis=1)) / span).max()))
    return ReactionBounds(
        solids_own=own * margin,
        solids_total=total_own * margin,
        solubles=sol * margin,
        total_from_solubles=total_sol * margin,
    )
