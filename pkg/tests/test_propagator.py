import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qheat.errors import DomainError, SingularCoefficientError, SolverError
from qheat.oracle import SingleParticleModel, single_particle_u_v
from qheat.propagator import (
    TimeGrid,
    Trajectory,
    check_resolution,
    markovian_rates,
    markovian_trajectory,
    master_coefficients,
    propagate,
    solve_u,
    solve_v,
)
from qheat.spectral import Discrete, Ohmic, bose


def test_time_grid():
    g = TimeGrid(2.0, 4)
    np.testing.assert_allclose(g.times, [0, 0.5, 1.0, 1.5, 2.0])
    assert g.refined().n_steps == 8
    for bad in ((0.0, 4), (1.0, 0), (np.inf, 3), (1.0, 2.5)):
        with pytest.raises(DomainError):
            TimeGrid(*bad)


def test_free_evolution_is_exactly_unitary():
    grid = TimeGrid(50.0, 5000)
    u = solve_u(Ohmic(0.0, 1.0, 10.0), 1.3, grid)
    assert np.max(np.abs(np.abs(u) - 1)) <= 1e-12
    # trapezoid phase error is O(w0**3 dt**2 t)
    assert np.max(np.abs(u - np.exp(-1.3j * grid.times))) < 1e-3
    v = solve_v(Ohmic(0.0, 1.0, 10.0), 1.0, u, grid)
    assert np.all(v == 0)


def test_rabi_oscillation():
    # resonant single mode: u = cos(g t) exp(-i w0 t), v = nbar sin(g t)**2
    w0, g, beta = 1.0, 0.2, 0.7
    grid = TimeGrid(20.0, 2000)
    tr = propagate(Discrete(((w0, g),)), w0, beta, grid)
    t = grid.times
    np.testing.assert_allclose(tr.u, np.cos(g * t) * np.exp(-1j * w0 * t), atol=1e-9)
    np.testing.assert_allclose(tr.v, bose(beta, w0) * np.sin(g * t) ** 2, atol=1e-9)


def _rabi_error(n_steps, extrapolate):
    w0, g = 1.0, 0.3
    grid = TimeGrid(10.0, n_steps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = propagate(Discrete(((1.4, g),)), w0, 1.0, grid, extrapolate=extrapolate)
    ref = single_particle_u_v(SingleParticleModel(w0, ((1.4, g),)), 1.0, grid.times)
    return np.max(np.abs(tr.u - ref.u))


def test_convergence_orders():
    plain = _rabi_error(200, False) / _rabi_error(400, False)
    rich = _rabi_error(200, True) / _rabi_error(400, True)
    assert 3.5 < plain < 4.5
    assert 12 < rich < 20


@settings(max_examples=15)
@given(st.lists(st.tuples(st.floats(0.2, 3.0), st.floats(0.0, 0.4)), min_size=1, max_size=5),
       st.floats(0.5, 2.0), st.floats(0.1, 5.0))
def test_discrete_bath_matches_matrix_exponential(modes, w0, beta):
    sd = Discrete(tuple(modes))
    grid = TimeGrid(8.0, 1600)
    tr = propagate(sd, w0, beta, grid)
    ref = single_particle_u_v(SingleParticleModel(w0, sd.modes), beta, grid.times)
    scale = 1 + max(bose(beta, w) for w, _ in sd.modes)
    assert np.max(np.abs(tr.u - ref.u)) <= 1e-7
    assert np.max(np.abs(tr.v - ref.v)) <= 1e-7 * scale
    assert tr.violations() == []


def test_trajectory_invariants_reported():
    grid = TimeGrid(1.0, 2)
    bad = Trajectory(grid, np.array([1.0, 1.1, 0.5], dtype=complex), np.array([0.0, -1.0, 0.1]), 1.0)
    assert set(bad.violations()) == {"|u| > 1", "v < 0"}


def test_resolution_warning():
    with pytest.warns(UserWarning, match="phase"):
        assert not check_resolution(Ohmic(0.05, 1.0, 10.0), 1.0, TimeGrid(30.0, 3000))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_resolution(Ohmic(0.05, 1.0, 10.0), 1.0, TimeGrid(30.0, 6000))


def test_input_validation():
    grid = TimeGrid(1.0, 10)
    with pytest.raises(DomainError):
        propagate(Ohmic(0.1, 1.0, 1.0), 1.0, 0.0, grid)
    with pytest.raises(DomainError):
        propagate(Ohmic(0.1, 1.0, 1.0), -1.0, 1.0, grid)
    with pytest.raises(DomainError):
        solve_u(Ohmic(0.1, 1.0, 1.0), 1.0, grid, mu=np.ones(3))


def test_unstable_step_raises():
    # a kernel of the wrong sign (no positive density has one) makes u grow
    grid = TimeGrid(10.0, 100)
    with pytest.raises(SolverError):
        solve_u(Ohmic(0.1, 1.0, 1.0), 1.0, grid, mu=-np.ones(101))


def test_markovian_trajectory_closed_form():
    sd = Ohmic(0.01, 1.0, 10.0)
    kappa, delta = markovian_rates(sd, 1.0)
    assert kappa == pytest.approx(np.pi * 0.01 * np.exp(-0.1))
    tr = markovian_trajectory(sd, 1.0, 0.2, TimeGrid(50 / kappa, 100))
    np.testing.assert_allclose(np.abs(tr.u), np.exp(-kappa * tr.times), rtol=1e-13)
    assert tr.v[-1] == pytest.approx(bose(0.2, 1.0), rel=1e-12)


def test_master_coefficients_of_markov_trajectory():
    sd = Ohmic(0.02, 1.0, 10.0)
    kappa, delta = markovian_rates(sd, 1.0)
    tr = markovian_trajectory(sd, 1.0, 0.5, TimeGrid(10.0, 2000))
    mc = master_coefficients(tr)
    np.testing.assert_allclose(mc.gamma_t, kappa, rtol=1e-8)
    np.testing.assert_allclose(mc.Omega_t, 1.0 + delta, rtol=1e-8)
    np.testing.assert_allclose(mc.gamma_beta_t, 2 * kappa * bose(0.5, 1.0), rtol=1e-7)


def test_master_coefficients_converge_to_fourth_order():
    sd = Ohmic(0.15, 1.0, 10.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        coarse = master_coefficients(propagate(sd, 1.0, 0.2, TimeGrid(10.0, 1000)))
        fine = master_coefficients(propagate(sd, 1.0, 0.2, TimeGrid(10.0, 2000)))
    g_c, g_f = coarse.gamma_t, fine.gamma_t[::2]
    rich = g_f + (g_f - g_c) / 15
    assert np.max(np.abs(g_f - rich)) <= 1e-4
    # non-Markovian memory: the dissipation rate changes sign
    assert np.count_nonzero(np.diff(np.sign(g_f[1:]))) >= 1


def test_master_coefficients_singular_where_u_vanishes():
    grid = TimeGrid(2.0, 4)
    u = np.array([1.0, 0.5, 0.0, 0.5, 0.8], dtype=complex)
    with pytest.raises(SingularCoefficientError) as exc:
        master_coefficients(Trajectory(grid, u, np.zeros(5), 1.0))
    assert exc.value.index == 2
