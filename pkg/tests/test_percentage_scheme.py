"""Percentage-representation scheme: Godunov flux, budget, parity, refusals."""
import numpy as np
import pytest

from settlesim import (ConfigurationError, builtin_spec, compile_spec,
                       godunov_flux, simulate_xp, xp_budget)
from settlesim.percentage_scheme import (_XpNumpyAdvancer, max_bulk_speed,
                                         merge_state, split_state)
from settlesim.scenario import BoundaryData

HOUR = 3600.0
PEAK = 2.969842333023776
PEAK_FLUX = 3.7668882865347386e-3


def test_godunov_consistency(laws):
    xs = np.linspace(0.0, 30.0, 501)
    assert np.allclose(godunov_flux(laws, xs, xs), laws.batch_flux(xs), rtol=1e-13)


def test_godunov_rarefaction_through_the_peak(laws):
    # states straddling the peak from below release the maximum flux
    assert godunov_flux(laws, 30.0, 0.0) == pytest.approx(PEAK_FLUX, rel=1e-9)
    # aligned states on opposite slopes: the smaller flux wins
    assert godunov_flux(laws, 0.0, 30.0) == 0.0


def test_godunov_branch_identities(laws):
    rng = np.random.default_rng(61)
    # increasing branch: left state decides
    left = rng.uniform(0.0, PEAK, 200)
    right = np.minimum(left + rng.uniform(0.0, PEAK / 2, 200), PEAK)
    assert np.allclose(godunov_flux(laws, left, right),
                       laws.batch_flux(left), rtol=1e-13)
    # decreasing branch: right state decides
    left = rng.uniform(PEAK, 30.0, 200)
    right = np.maximum(left, rng.uniform(PEAK, 30.0, 200))
    assert np.allclose(godunov_flux(laws, left, right),
                       laws.batch_flux(right), rtol=1e-13)


def test_godunov_is_monotone(laws):
    xs = np.linspace(0.0, 30.0, 200)
    left, right = np.meshgrid(xs, xs, indexing="ij")
    table = godunov_flux(laws, left, right)
    assert np.all(np.diff(table, axis=0) >= -1e-18)
    assert np.all(np.diff(table, axis=1) <= 1e-18)


def test_xp_budget_from_frozen_norms(example1):
    grid = example1.build_grid(16)  # dz = 0.25
    q_norm = 2.9166666666666667e-4
    budget = xp_budget(grid, example1.laws, example1.reactions, q_norm, 1.0)
    dz = 0.25
    convect = 1.76e-3 / dz
    compress = 2.0688506547025313e-4 / dz ** 2
    ratio = 998.0 / 1050.0
    beta_x = convect + compress + 5.0048e-5 + ratio * 3.336
    beta_px = convect + compress + 5.56e-5
    beta_pl = (PEAK_FLUX / dz + 4.801832448745942e-4 / dz ** 2) / 1020.0 + 5.56e-5
    assert budget.beta_x == pytest.approx(beta_x, rel=1e-9)
    assert budget.beta_px == pytest.approx(beta_px, rel=1e-9)
    assert budget.beta_pl == pytest.approx(beta_pl, rel=1e-9)
    assert budget.dt_max == pytest.approx(
        1.0 / (q_norm / dz + max(beta_x, beta_px, beta_pl)), rel=1e-9)
    with pytest.raises(ConfigurationError):
        xp_budget(grid, example1.laws, None, q_norm, 0.0)


def test_max_bulk_speed_scans_both_outlets(example1):
    # largest bulk speed over 9 h is the initial effluent draw
    assert max_bulk_speed(example1, 9.0 * HOUR, 400.0) == pytest.approx(
        420.0 / HOUR / 400.0, rel=1e-12)
    # scales inversely with the cross-section
    assert max_bulk_speed(example1, 9.0 * HOUR, 800.0) == pytest.approx(
        0.5 * max_bulk_speed(example1, 9.0 * HOUR, 400.0), rel=1e-12)


def test_split_merge_round_trip(laws):
    rng = np.random.default_rng(62)
    solids = rng.uniform(0.1, 12.0, size=(40, 2))
    solubles = rng.uniform(0.0, 8.0e-3, size=(40, 3))
    total, pct_solids, pct_liquid = split_state(solids, solubles, laws)
    assert np.allclose(pct_solids.sum(axis=1), 1.0, rtol=1e-12)
    back_solids, back_solubles = merge_state(total, pct_solids, pct_liquid, laws)
    assert np.allclose(back_solids, solids, rtol=1e-12)
    assert np.allclose(back_solubles, solubles, rtol=1e-12)


def test_split_handles_vanishing_solids(laws):
    solids = np.zeros((3, 2))
    solubles = np.full((3, 3), 2.0e-3)
    total, pct_solids, pct_liquid = split_state(solids, solubles, laws)
    assert np.all(total == 0.0)
    assert np.all(pct_solids == 0.5)  # uniform carry-over percentages
    back_solids, back_solubles = merge_state(total, pct_solids, pct_liquid, laws)
    assert np.all(back_solids == 0.0)
    assert np.allclose(back_solubles, solubles, rtol=1e-12)


def test_constant_state_is_preserved_strictly_inside(example1):
    """With no bulk flow and no feed, a uniform state is a fixed point of the
    update in every cell whose two faces both carry the settling flux; the
    two vessel-edge cells exchange with the settling-free outlet faces."""
    grid = example1.build_grid(16)
    x0, s0 = 5.0, 4.0e-3
    solids = np.tile([0.6 * x0, 0.4 * x0], (18, 1))
    solubles = np.full((18, 3), s0)
    advancer = _XpNumpyAdvancer(grid, example1.laws, None, 400.0,
                                solids, solubles)
    total0 = advancer.total.copy()
    pct_s0 = advancer.pct_solids.copy()
    pct_l0 = advancer.pct_liquid.copy()
    bdata = BoundaryData(0.0, 0.0, np.zeros(2), np.zeros(3))
    budget = xp_budget(grid, example1.laws, None, 0.0, 1.0)
    assert advancer.advance(1, budget.dt_max, bdata) == 0
    assert np.array_equal(advancer.total[2:16], total0[2:16])
    assert np.array_equal(advancer.pct_solids[2:16], pct_s0[2:16])
    assert np.array_equal(advancer.pct_liquid[2:16], pct_l0[2:16])
    assert advancer.total[1] < x0   # drains through its settling face
    assert advancer.total[16] > x0  # receives settling, only bulk (zero) leaves
    advancer.advance(2, budget.dt_max, bdata)
    assert np.array_equal(advancer.total[4:14], total0[4:14])


def test_xp_kernel_matches_numpy_reference(example1):
    fast = simulate_xp(example1, 24, 900.0, use_compiled=True)
    slow = simulate_xp(example1, 24, 900.0, use_compiled=False)
    assert fast.report.steps == slow.report.steps
    assert np.abs(fast.solids[-1] - slow.solids[-1]).max() < 1e-10
    assert np.abs(fast.solubles[-1] - slow.solubles[-1]).max() < 1e-10


def test_xp_run_stays_admissible(example1):
    result = simulate_xp(example1, 32, HOUR)
    assert result.report.method == "xp"
    assert result.report.violations == 0
    assert result.report.mass_residual <= 1e-10
    x = result.total_solids(-1)
    assert x.min() >= -1e-12 and x.max() <= 30.0 + 1e-12


def test_xp_refuses_varying_area(example2):
    with pytest.raises(ConfigurationError):
        simulate_xp(example2, 16, 60.0)


def test_xp_refuses_soluble_diffusion():
    spec = builtin_spec("example1")
    with_diffusion = compile_spec(
        spec.model_copy(update={"diffusion": [0.0, 0.0, 3.0e-6]}))
    with pytest.raises(ConfigurationError):
        simulate_xp(with_diffusion, 16, 60.0)
