"""Refinement studies, scheme comparison, step-budget curves, error metrics."""
import logging

import numpy as np
import pytest

from settlesim import (ConfigurationError, cfl_curve, characteristic_speeds,
                       compare_methods, convergence_study, observed_order,
                       project_fine_to_coarse, relative_l1_error,
                       total_variation)
from settlesim.harness import loglog_slope

V_HS_30 = 1.1511705666264762e-6


def test_projection_averages_nested_children():
    fine = np.arange(8.0).reshape(8, 1)
    coarse = project_fine_to_coarse(fine, 4)
    assert np.array_equal(coarse, [[0.5], [2.5], [4.5], [6.5]])
    # cell means keep the (equal-weight) integral
    assert coarse.mean() == fine.mean()
    multi = project_fine_to_coarse(np.random.default_rng(7).random((12, 5)), 3)
    assert multi.shape == (3, 5)


def test_projection_requires_nesting():
    with pytest.raises(ConfigurationError):
        project_fine_to_coarse(np.zeros((10, 2)), 4)
    with pytest.raises(ConfigurationError):
        project_fine_to_coarse(np.zeros((8, 2)), 0)


def test_relative_l1_error_small_cases():
    total, per = relative_l1_error(np.array([[1.0], [2.0]]),
                                   np.array([[2.0], [2.0]]))
    assert total == pytest.approx(0.25, rel=1e-14)
    assert per[0] == pytest.approx(0.25, rel=1e-14)
    # projection happens internally when the reference is finer
    ref = np.ones((4, 1))
    assert relative_l1_error(np.array([[2.0], [0.0]]), ref)[0] == \
        pytest.approx(1.0, rel=1e-14)
    assert relative_l1_error(np.ones((2, 1)), ref)[0] == 0.0


def test_relative_l1_error_skips_dead_components(caplog):
    coarse = np.array([[1.0, 3.0], [1.0, 3.0]])
    reference = np.array([[2.0, 0.0], [2.0, 0.0]])
    with caplog.at_level(logging.WARNING):
        total, per = relative_l1_error(coarse, reference)
    assert total == pytest.approx(0.5, rel=1e-14)
    assert np.isnan(per[1])
    assert "zero reference norm" in caplog.text


def test_observed_order():
    assert observed_order(0.2, 0.1, 32, 64) == pytest.approx(1.0, rel=1e-12)
    assert observed_order(0.4042, 0.2471, 32, 64) == pytest.approx(
        0.7099743110509511, rel=1e-12)
    with pytest.raises(ConfigurationError):
        observed_order(0.0, 0.1, 32, 64)
    with pytest.raises(ConfigurationError):
        observed_order(0.2, 0.1, 64, 64)


def test_total_variation():
    assert total_variation(np.array([0.0, 1.0, 0.0, 2.0])) == 4.0
    two = total_variation(np.array([[0.0, 1.0], [1.0, 1.0], [0.0, 0.0]]))
    assert two == pytest.approx(3.0, rel=1e-14)


def test_loglog_slope_recovers_power_law():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert loglog_slope(x, 3.0 * x ** 2) == pytest.approx(2.0, rel=1e-12)
    assert loglog_slope(x, 5.0 / x) == pytest.approx(-1.0, rel=1e-12)


def test_characteristic_speeds(laws):
    x = np.array([0.5, 30.0])
    lam1, lam2 = characteristic_speeds(laws, x, 0.0)
    # dilute suspensions: the settling family is the faster one, downward
    assert lam1[0] > lam2[0]
    assert lam1[0] > 0.0
    # at the packing limit the ordering flips
    assert lam1[1] < lam2[1] < 0.0
    assert lam2[1] == pytest.approx(-30.0 * V_HS_30 / 1020.0, rel=1e-9)
    # gamma = 0 leaves only the bulk motion
    off1, off2 = characteristic_speeds(laws, x, -2.0e-4, gamma=0.0)
    assert np.all(off1 == -2.0e-4) and np.all(off2 == -2.0e-4)
    # bulk velocity shifts both families rigidly
    shift1, shift2 = characteristic_speeds(laws, x, 1.0e-3)
    assert np.allclose(shift1 - lam1, 1.0e-3, rtol=1e-12)
    assert np.allclose(shift2 - lam2, 1.0e-3, rtol=1e-12)


def test_convergence_study_smoke(example1):
    report = convergence_study(example1, (8, 16), (600.0, 1200.0),
                               reference_cells=32)
    assert report.method == "cs"
    assert report.errors.shape == (2, 2)
    assert np.all(report.errors > 0.0)
    # refinement reduces the error at every probed time
    assert np.all(report.errors[:, 1] < report.errors[:, 0])
    assert np.all(np.isnan(report.orders[:, 0]))
    assert np.all(np.isfinite(report.orders[:, 1]))
    assert report.component_errors.shape == (2, 2, 5)
    assert report.cpu_seconds.shape == (3,)


def test_convergence_study_requires_nested_reference(example1):
    with pytest.raises(ConfigurationError):
        convergence_study(example1, (12,), (600.0,), reference_cells=32)


def test_compare_methods_smoke(example1):
    comparison = compare_methods(example1, (8, 16), 900.0)
    assert comparison.n_values == (8, 16)
    assert comparison.distances.shape == (2,)
    assert np.all(comparison.distances > 0.0)
    assert comparison.component_distances.shape == (2, 5)
    assert comparison.cpu_seconds.shape == (2, 2)


def test_cfl_curve_matches_stepper_budget(example1):
    curve = cfl_curve(example1, (16, 32), 9 * 3600.0)
    assert np.allclose(curve.dz, [0.25, 0.125], rtol=1e-12)
    assert curve.dt_cs[0] == pytest.approx(0.20077503233498947, rel=1e-9)
    assert curve.dt_cs[1] == pytest.approx(0.2007056273817805, rel=1e-9)
    assert np.all(np.isfinite(curve.dt_xp))
    relaxed = cfl_curve(example1, (16, 32), 9 * 3600.0, with_reactions=False)
    # reaction sensitivities impose a resolution-independent plateau ...
    assert abs(curve.dt_cs[1] / curve.dt_cs[0] - 1.0) < 1e-3
    # ... and dropping them frees the coarse grids dramatically
    assert relaxed.dt_cs[0] > 40.0 * curve.dt_cs[0]
    assert relaxed.dt_cs[1] > 15.0 * curve.dt_cs[1]
    assert relaxed.dt_cs[1] < relaxed.dt_cs[0]


def test_cfl_curve_marks_xp_unsupported(example2):
    curve = cfl_curve(example2, (10,), 60.0)
    assert np.isfinite(curve.dt_cs[0])
    assert np.isnan(curve.dt_xp[0])
