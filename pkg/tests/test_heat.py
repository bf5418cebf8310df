import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from qheat.errors import DomainError, TruncationError
from qheat.heat import (
    GIBBS_TAIL,
    HeatSetup,
    admissible_strip,
    characteristic_function,
    choose_l_max,
    effective_beta,
    gibbs_tail,
    heat_distribution,
    initial_level_prob,
    integral_ft_value,
    log_transition_probability,
    markovian_heat_stats,
    mean_heat,
    partition_function,
    steady_state_stats,
    transition_matrix,
    transition_probability,
    xi_grid,
)
from qheat.propagator import markovian_rates
from qheat.spectral import Ohmic, Semicircle, bose
from qheat.spectrum import asymptotic_state

u_mod = st.floats(0.0, 1.0)
phase = st.floats(0.0, 2 * np.pi)
v_pos = st.floats(1e-3, 10.0)


def _u(r, phi):
    return r * np.exp(1j * phi)


def _setup(u, v, beta_s=1.2, beta_b=0.2, w0=1.0):
    return HeatSetup(beta_s, beta_b, w0, choose_l_max(beta_s, w0, u, v))


def _brute_p(u, v, l, lp):
    """Direct sum of the channel formula with binomials from scipy."""
    M = 1 / (1 + v)
    a, b, c = M**2 * abs(u) ** 2, M * v, 1 - M * abs(u) ** 2
    return M * sum(special.comb(l, m) * special.comb(lp, m) * a**m * b ** (lp - m) * c ** (l - m)
                   for m in range(min(l, lp) + 1))


def test_transition_probability_small_levels_against_direct_sum():
    u, v = 0.6 * np.exp(0.3j), 0.4
    for l in range(5):
        for lp in range(5):
            assert transition_probability(u, v, l, lp) == pytest.approx(_brute_p(u, v, l, lp), rel=1e-12)


def test_limiting_channels():
    np.testing.assert_allclose(transition_matrix(1.0, 0.0, 10), np.eye(11), atol=1e-15)
    P = transition_matrix(0.0, 0.0, 10)
    np.testing.assert_allclose(P[0], 1.0)
    np.testing.assert_allclose(P[1:], 0.0)


@settings(max_examples=40)
@given(u_mod, phase, st.floats(0.0, 10.0))
def test_matrix_matches_scalar_and_columns_normalised(r, phi, v):
    u = _u(r, phi)
    P = transition_matrix(u, v, 30)
    for l, lp in ((0, 0), (3, 7), (12, 5), (30, 29)):
        assert P[lp, l] == pytest.approx(transition_probability(u, v, l, lp), rel=1e-11, abs=1e-300)
    # columns of low levels lose only the tail beyond l' = 30
    n = abs(u) ** 2 * 5 + v
    if (n / (1 + n)) ** 31 < 1e-12:
        assert P[:, 5].sum() == pytest.approx(1.0, abs=1e-10)


@given(u_mod, phase, v_pos, st.integers(0, 40), st.integers(0, 40))
def test_detailed_balance_property(r, phi, v, l, lp):
    u = _u(r, phi)
    beta = effective_beta(1.0, u, v)
    diff = log_transition_probability(u, v, l, lp) - log_transition_probability(u, v, lp, l)
    assert abs(np.expm1(diff + beta * (lp - l))) <= 1e-10


@settings(max_examples=30)
@given(st.floats(0.05, 1.0), phase, st.floats(1e-3, 3.0), st.floats(0.3, 3.0))
def test_generalized_fluctuation_theorem(r, phi, v, beta_s):
    u = _u(r, phi)
    setup = _setup(u, v, beta_s=beta_s)
    dist = heat_distribution(setup, u, v)
    beta = effective_beta(1.0, u, v)
    assert integral_ft_value(dist, beta - beta_s) == pytest.approx(1.0, abs=1e-6)
    assert dist.total == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=30)
@given(st.floats(0.05, 1.0), phase, st.floats(1e-3, 3.0))
def test_permutation_symmetry(r, phi, v):
    u = _u(r, phi)
    setup = _setup(u, v)
    beta = float(effective_beta(1.0, u, v))
    xi = xi_grid(setup, u, v, 41, mirror_beta=beta)
    chi = characteristic_function(xi, setup, u, v)
    mirror = characteristic_function(beta - setup.beta_s - xi, setup, u, v)
    assert np.max(np.abs(chi - mirror) / chi) <= 1e-8


def test_chi_matches_distribution_sum():
    # generous truncation: exp(xi Q) amplifies the discarded tail
    u, v = 0.7 * np.exp(1j), 0.3
    setup = HeatSetup(1.2, 0.2, 1.0, 80)
    dist = heat_distribution(setup, u, v)
    for xi in (-1.0, -0.3, 0.2, 0.5):
        assert integral_ft_value(dist, xi) == pytest.approx(characteristic_function(xi, setup, u, v), rel=1e-8)
    assert characteristic_function(0.0, setup, u, v) == pytest.approx(1.0, abs=1e-14)


def test_chi_finite_difference_moments():
    u, v = 0.8 * np.exp(0.2j), 0.5
    setup = HeatSetup(1.2, 0.2, 1.0, 80)
    dist = heat_distribution(setup, u, v)
    h = 1e-4
    c = characteristic_function(np.array([-h, 0.0, h]), setup, u, v)
    first = (c[2] - c[0]) / (2 * h)
    second = (c[2] - 2 * c[1] + c[0]) / h**2
    assert first == pytest.approx(dist.moment(1), rel=1e-5)
    assert second == pytest.approx(dist.moment(2), rel=1e-5)
    assert dist.moment(1) == pytest.approx(mean_heat(setup, u, v), rel=1e-9)


def test_strip_and_domain_errors():
    u, v = 0.5, 0.4
    setup = _setup(u, v)
    lo, hi = admissible_strip(setup, u, v)
    assert lo == -setup.beta_s
    assert hi > effective_beta(1.0, u, v) - setup.beta_s
    with pytest.raises(DomainError, match="partition pole"):
        characteristic_function(-setup.beta_s - 0.1, setup, u, v)
    with pytest.raises(DomainError, match="MGF strip"):
        characteristic_function(hi + 0.1, setup, u, v)
    assert admissible_strip(setup, 1.0, 0.0)[1] == np.inf
    with pytest.raises(DomainError):
        xi_grid(setup, 1.0, 0.0)


def test_effective_beta_domain():
    with pytest.raises(DomainError):
        effective_beta(1.0, 1.0, 0.0)
    assert effective_beta(1.0, 0.0, 1.0) == pytest.approx(np.log(2.0))


def test_truncation_rules():
    L = choose_l_max(0.5, 1.0)
    assert gibbs_tail(0.5, 1.0, L) < GIBBS_TAIL <= gibbs_tail(0.5, 1.0, L - 1)
    with pytest.raises(TruncationError):
        HeatSetup(0.5, 1.0, 1.0, L - 1)
    with pytest.raises(TruncationError):
        choose_l_max(0.5, 1.0, 1.0, 1e6)
    hot = HeatSetup(2.0, 1.0, 1.0, choose_l_max(2.0, 1.0))
    with pytest.raises(TruncationError):
        heat_distribution(hot, 0.5, 5.0)  # evolved state far hotter than the Gibbs cutoff
    with pytest.raises(DomainError):
        HeatSetup(-1.0, 1.0, 1.0, 10)
    with pytest.raises(DomainError):
        transition_probability(1.5, 0.1, 1, 1)


def test_initial_state():
    setup = HeatSetup(1.0, 1.0, 1.0, 30)
    p = initial_level_prob(setup, np.arange(31))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert p[0] == pytest.approx(1 / partition_function(1.0, 1.0))


def test_markovian_statistics():
    sd = Ohmic(0.05, 1.0, 10.0)
    setup = HeatSetup(1.2, 0.2, 1.0, choose_l_max(1.2, 1.0))
    kappa, _ = markovian_rates(sd, 1.0)
    xi, chi, q = markovian_heat_stats(setup, sd, 3.0)
    assert xi.size == 41
    u = np.exp(-kappa * 3.0)
    v = bose(0.2, 1.0) * -np.expm1(-2 * kappa * 3.0)
    np.testing.assert_allclose(chi, characteristic_function(xi, setup, u, v), rtol=1e-10)
    assert q == pytest.approx(mean_heat(setup, u, v), rel=1e-12)
    # Markov dynamics obey the ordinary fluctuation theorem
    _, chi_jw, _ = markovian_heat_stats(setup, sd, 3.0, xi=[0.2 - 1.2])
    assert chi_jw[0] == pytest.approx(1.0, rel=1e-12)


def test_steady_state_stats_oscillate():
    sd = Semicircle(0.12, 0.03, 1.0)
    asym = asymptotic_state(sd, 1.05, 5.0)
    setup = HeatSetup(1.0, 5.0, 1.05, choose_l_max(1.0, 1.05))
    t = np.linspace(0, 2 * np.pi / asym.beat_frequency, 9)
    ss = steady_state_stats(setup, asym, t)
    assert ss.chi.shape == (9, ss.xi.size)
    assert ss.mean_heat[0] == pytest.approx(ss.mean_heat[-1], rel=1e-10)
    assert np.ptp(ss.beta_eff) > 0
