"""Face fluxes and the method-of-lines right-hand side."""
import numpy as np
import pytest

from settlesim import (AreaProfile, ConfigurationError, InvariantViolationError,
                       State, build_grid, make_ode_rhs, rhs_from_boundary,
                       water_concentration)
from settlesim import fluxes
from settlesim.scenario import face_bulk_flow

Q_ABOVE = -2.9166666666666667e-4  # example1 bulk face velocity above the feed
V_HS_6 = 3.031390475041877e-4
COMPRESSION_5_TO_6 = 5.958227616187418e-4  # (D_C(6) - D_C(5)) / 0.05


@pytest.fixture(scope="module")
def grid05():
    profile = AreaProfile.constant(400.0, -1.0, 3.0)
    return build_grid(profile, 80)  # dz = 0.05


def test_with_ghosts_pads_zeros():
    arr = np.array([1.0, 2.0])
    assert np.array_equal(fluxes.with_ghosts(arr), [0.0, 1.0, 2.0, 0.0])
    mat = np.ones((2, 3))
    padded = fluxes.with_ghosts(mat)
    assert padded.shape == (4, 3)
    assert np.all(padded[0] == 0.0) and np.all(padded[-1] == 0.0)


def test_upwind_picks_the_upstream_state():
    v = np.array([1.0, -1.0, 0.0])
    left = np.array([10.0, 10.0, 10.0])
    right = np.array([20.0, 20.0, 20.0])
    assert np.array_equal(fluxes.upwind(v, left, right), [10.0, -20.0, 0.0])
    # vector states: the velocity broadcasts over the component axis
    left2 = np.tile([1.0, 2.0], (3, 1))
    right2 = np.tile([5.0, 6.0], (3, 1))
    out = fluxes.upwind(v, left2, right2)
    assert np.array_equal(out[0], [1.0, 2.0])
    assert np.array_equal(out[1], [-5.0, -6.0])


def test_interface_velocity_reduces_to_bulk_outside_vessel(grid05, laws):
    q_face = np.full(83, 1.3e-4)
    x = np.full(82, 6.0)  # compression active everywhere inside
    v = fluxes.interface_velocity(grid05, laws, q_face, x)
    for m in (0, 1, 81, 82):  # faces with gamma = 0
        assert v[m] == q_face[m]
    assert np.all(v[2:81] != q_face[2:81])


def test_interface_velocity_hindered_settling_only(grid05, laws):
    # clear-to-loose interface below the gel point: no compression term
    x = np.zeros(82)
    x[39] = 3.0       # left cell, below gel
    x[40] = 3.87      # right cell: v_hs(x_bar) = v0 / 2
    q_face = np.full(83, Q_ABOVE)
    v = fluxes.interface_velocity(grid05, laws, q_face, x)
    assert v[40] == pytest.approx(Q_ABOVE + 0.5 * 1.76e-3, rel=1e-12)
    assert v[40] == pytest.approx(5.883333333333333e-4, rel=1e-12)


def test_interface_velocity_compression_quotient(grid05, laws):
    x = np.zeros(82)
    x[39] = 5.0
    x[40] = 6.0
    v = fluxes.interface_velocity(grid05, laws, np.zeros(83), x)
    assert v[40] == pytest.approx(V_HS_6 - COMPRESSION_5_TO_6, rel=1e-9)
    assert v[40] < 0.0  # compression pushes back up across this jump


def test_solids_flux_ghost_faces(grid05, laws):
    solids = np.full((82, 2), 1.5)
    x = solids.sum(axis=1)
    # upward flow everywhere: the top face discharges, nothing enters below
    q_face = np.full(83, -1.0e-4)
    v = fluxes.interface_velocity(grid05, laws, q_face, x)
    phi = fluxes.solids_flux(grid05, v, solids)
    assert np.allclose(phi[0], grid05.area_faces[0] * v[0] * solids[0], rtol=1e-14)
    assert np.all(phi[-1] == 0.0)  # v < 0 at the bottom face: ghost state enters
    # downward flow: bottom face discharges the underflow pipe cell
    q_face = np.full(83, 2.0e-4)
    v = fluxes.interface_velocity(grid05, laws, q_face, x)
    phi = fluxes.solids_flux(grid05, v, solids)
    assert np.all(phi[0] == 0.0)
    assert np.allclose(phi[-1], grid05.area_faces[-1] * v[-1] * solids[-1], rtol=1e-14)


def test_component_fluxes_sum_to_total_density(grid05, laws):
    rng = np.random.default_rng(31)
    solids = rng.uniform(0.0, 12.0, size=(82, 2))
    x = solids.sum(axis=1)
    q_face = np.full(83, Q_ABOVE)
    v = fluxes.interface_velocity(grid05, laws, q_face, x)
    phi = fluxes.solids_flux(grid05, v, solids)
    density = fluxes.total_flux_density(v, x)
    assert np.allclose(phi.sum(axis=1), grid05.area_faces * density, rtol=1e-13)


def test_solids_flux_is_monotone(laws):
    """F(X_above, X_below) is nondecreasing in the state above and
    nonincreasing in the state below, for any bulk velocity."""
    n = 200
    xs = np.linspace(0.0, 30.0, n)
    left, right = np.meshgrid(xs, xs, indexing="ij")
    # pack the pairs into one long chain so every even face sees one pair
    pairs = n * n
    profile = AreaProfile.constant(1.0, -1.0, 2 * pairs * 0.05 - 1.0)
    grid = build_grid(profile, 2 * pairs)
    x = np.zeros(2 * pairs + 2)
    x[1::2][:pairs] = left.ravel()
    x[2::2] = right.ravel()
    for q in (-3.0e-4, 0.0, 1.0e-3):
        v = fluxes.interface_velocity(grid, laws, np.full(2 * pairs + 3, q), x)
        table = fluxes.total_flux_density(v, x)[2:2 * pairs + 1:2].reshape(n, n)
        assert np.all(np.diff(table, axis=0) >= -1e-15)  # in the state above
        assert np.all(np.diff(table, axis=1) <= 1e-15)   # in the state below


def test_solubles_ride_the_bulk_in_clear_water(grid05, laws):
    solubles = np.full((82, 3), 4.0e-3)
    x = np.zeros(82)
    q = 2.0e-4
    q_face = np.full(83, q)
    density = np.zeros(83)
    phi = fluxes.solubles_flux(grid05, laws, q_face, density, solubles, x,
                               diffusion=np.zeros(3))
    expected = grid05.area_faces[:, None] * q * solubles[0][None, :]
    assert np.allclose(phi[1:-1], expected[1:-1], rtol=1e-12)


def test_soluble_diffusion_acts_only_inside(grid05, laws):
    solubles = np.zeros((82, 3))
    solubles[:41, 0] = 6.0e-3  # step profile in the first component
    x = np.zeros(82)
    phi = fluxes.solubles_flux(grid05, laws, np.zeros(83), np.zeros(83),
                               solubles, x, diffusion=np.array([1.0e-5, 0.0, 0.0]))
    assert np.all(phi[0] == 0.0)
    assert np.all(phi[1] == 0.0)   # gamma = 0: no diffusion through face 1
    expected = -400.0 * 1.0e-5 * (0.0 - 6.0e-3) / 0.05
    assert phi[41, 0] == pytest.approx(expected, rel=1e-12)
    assert np.all(phi[:, 1:] == 0.0)


def test_divergence_of_constant_flux_vanishes(grid05):
    flux = np.full(83, 3.21)
    assert np.allclose(fluxes.divergence(grid05, flux), 0.0, atol=1e-18)
    flux2 = np.tile([1.0, -2.0], (83, 1))
    assert np.allclose(fluxes.divergence(grid05, flux2), 0.0, atol=1e-18)


def test_rhs_feed_source_only(example1):
    grid = example1.build_grid(16)
    bdata = example1.boundary_at(0.0)
    solids = np.zeros((18, 2))
    solubles = np.zeros((18, 3))
    d_solids, d_solubles = rhs_from_boundary(
        grid, example1.laws, bdata, solids, solubles, example1.diffusion,
        example1.reactions)
    j = grid.feed_cell
    gain = bdata.feed_flow / (grid.area_cells[j] * grid.dz)
    assert np.allclose(d_solids[j], bdata.feed_solids * gain, rtol=1e-12)
    assert np.allclose(d_solubles[j], bdata.feed_solubles * gain, rtol=1e-12)
    mask = np.ones(18, dtype=bool)
    mask[j] = False
    assert np.all(d_solids[mask] == 0.0)
    assert np.all(d_solubles[mask] == 0.0)


def test_rhs_conserves_mass_exactly(example1):
    grid = example1.build_grid(32)
    bdata = example1.boundary_at(0.0)
    rng = np.random.default_rng(33)
    solids = rng.uniform(0.0, 10.0, size=(34, 2))
    solubles = rng.uniform(0.0, 6.0e-3, size=(34, 3))
    d_solids, d_solubles = rhs_from_boundary(
        grid, example1.laws, bdata, solids, solubles, example1.diffusion,
        reactions=None)
    volume = grid.area_cells * grid.dz
    # reconstruct the boundary fluxes the divergence telescopes down to
    total = solids.sum(axis=1)
    _, q_face = face_bulk_flow(grid, bdata)
    v = fluxes.interface_velocity(grid, example1.laws, q_face, total)
    phi_c = fluxes.solids_flux(grid, v, solids)
    density = fluxes.total_flux_density(v, total)
    phi_s = fluxes.solubles_flux(grid, example1.laws, q_face, density,
                                 solubles, total, example1.diffusion)
    gain_c = volume @ d_solids
    gain_s = volume @ d_solubles
    assert np.allclose(gain_c, bdata.feed_flow * bdata.feed_solids
                       + phi_c[0] - phi_c[-1], rtol=1e-12)
    assert np.allclose(gain_s, bdata.feed_flow * bdata.feed_solubles
                       + phi_s[0] - phi_s[-1], rtol=1e-12)


def test_water_concentration_values(laws):
    assert water_concentration(laws, np.zeros((1, 2)), np.zeros((1, 3)))[0] == 998.0
    solids = np.array([[20.0, 10.0]])
    solubles = np.zeros((1, 3))
    assert water_concentration(laws, solids, solubles)[0] == pytest.approx(
        969.4857142857143, rel=1e-12)
    solubles = np.array([[1.0, 2.0, 3.0]])
    assert water_concentration(laws, solids, solubles)[0] == pytest.approx(
        969.4857142857143 - 6.0, rel=1e-12)


def test_state_pack_round_trip():
    rng = np.random.default_rng(34)
    state = State(solids=rng.normal(size=(5, 2)), solubles=rng.normal(size=(5, 3)),
                  time=7.0)
    flat = state.pack()
    assert flat.shape == (25,)
    # cell-major: solids of cell 0 first, then its solubles
    assert np.array_equal(flat[:2], state.solids[0])
    assert np.array_equal(flat[2:5], state.solubles[0])
    again = State.unpack(flat, 2, 3, time=state.time)
    assert np.array_equal(again.solids, state.solids)
    assert np.array_equal(again.solubles, state.solubles)
    assert np.array_equal(state.total_solids, state.solids.sum(axis=1))


def test_ode_rhs_matches_direct_evaluation(example1):
    grid = example1.build_grid(16)
    solids, solubles = example1.initial_state(grid)
    rhs = make_ode_rhs(example1, grid)
    flat = State(solids, solubles).pack()
    out = State.unpack(rhs(0.0, flat), 2, 3)
    d_solids, d_solubles = rhs_from_boundary(
        grid, example1.laws, example1.boundary_at(0.0), solids, solubles,
        example1.diffusion, example1.reactions)
    assert np.allclose(out.solids, d_solids, rtol=1e-14)
    assert np.allclose(out.solubles, d_solubles, rtol=1e-14)
    assert rhs.events == 0
    # purity: the input vector is never modified
    flat2 = flat.copy()
    rhs(0.0, flat)
    assert np.array_equal(flat, flat2)


def test_ode_rhs_debug_mode_raises(example1):
    grid = example1.build_grid(16)
    solids, solubles = example1.initial_state(grid)
    solids[5, 0] = -1.0
    rhs = make_ode_rhs(example1, grid, mode="debug")
    with pytest.raises(InvariantViolationError):
        rhs(0.0, State(solids, solubles).pack())


def test_ode_rhs_release_mode_repairs(example1):
    grid = example1.build_grid(16)
    solids, solubles = example1.initial_state(grid)
    solids[5, 0] = -1.0
    solids[8] = [25.0, 10.0]  # total above the ceiling
    rhs = make_ode_rhs(example1, grid, mode="release")
    out = rhs(0.0, State(solids, solubles).pack())
    assert np.all(np.isfinite(out))
    assert rhs.events == 1
    with pytest.raises(ConfigurationError):
        make_ode_rhs(example1, grid, mode="strict")
