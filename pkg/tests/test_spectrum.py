import warnings

import numpy as np
import pytest
from scipy import integrate as sci_integrate
from scipy import optimize, special

from qheat.errors import DomainError
from qheat.propagator import TimeGrid, propagate
from qheat.spectral import Discrete, Ohmic, Semicircle
from qheat.spectrum import (
    BoundStateSet,
    asymptotic_state,
    asymptotic_u,
    background_theta,
    background_weight,
    find_bound_states,
    ohmic_threshold,
    pole_function,
    residue_weight,
    sum_rule,
)


def _semicircle_pole_closed(sd, w0, E):
    x = E - sd.big_omega
    shift = sd.g**2 / (2 * sd.zeta**2) * (x - np.sign(x) * np.sqrt(x * x - 4 * sd.zeta**2))
    return w0 + shift - E


def _semicircle_thresholds(zeta, big_omega, w0):
    """Couplings at which the upper and lower bound states detach from the band."""
    return np.sqrt(zeta * (big_omega + 2 * zeta - w0)), np.sqrt(zeta * (w0 - big_omega + 2 * zeta))


@pytest.mark.parametrize("E", [0.5, 0.93, 0.9399, 1.0601, 1.1, 2.0])
def test_semicircle_pole_quadrature_matches_closed_form(E):
    sd = Semicircle(0.12, 0.03, 1.0)
    assert pole_function(sd, 1.05, E, method="quadrature") == pytest.approx(
        _semicircle_pole_closed(sd, 1.05, E), rel=1e-10, abs=1e-12)


def test_pole_function_rejects_continuum():
    with pytest.raises(DomainError):
        pole_function(Semicircle(0.12, 0.03, 1.0), 1.05, 1.0)
    with pytest.raises(DomainError):
        pole_function(Ohmic(0.1, 1.0, 10.0), 1.0, 0.5)


def test_ohmic_bound_state_matches_exponential_integral():
    # s = 1 and E < 0: Delta(E) = eta (-wc + E exp(-E/wc) Ei(E/wc))
    eta, wc, w0 = 0.15, 10.0, 1.0

    def f(E):
        return w0 + eta * (-wc + E * np.exp(-E / wc) * special.expi(E / wc)) - E

    E_ref = optimize.brentq(f, -20.0, -1e-9, xtol=1e-15)
    m2, _ = sci_integrate.quad(lambda w: eta * w * np.exp(-w / wc) / (E_ref - w) ** 2, 0, np.inf,
                               epsabs=0, epsrel=1e-12, limit=200)
    bound = find_bound_states(Ohmic(eta, 1.0, wc), w0)
    assert bound.count == 1
    assert bound.energies[0] == pytest.approx(E_ref, rel=1e-10)
    assert bound.weights[0] == pytest.approx(1 / (1 + m2), rel=1e-9)


@pytest.mark.parametrize("sd, w0", [(Ohmic(0.15, 1.0, 10.0), 1.0), (Semicircle(0.12, 0.03, 1.0), 1.05),
                                    (Ohmic(0.3, 0.5, 5.0), 1.0)])
def test_residue_integral_and_derivative_agree(sd, w0):
    bound = find_bound_states(sd, w0)
    assert bound.count >= 1
    for E, Z in bound.states:
        assert residue_weight(sd, w0, E, method="derivative") == pytest.approx(Z, rel=1e-8)


def test_ohmic_threshold_scan():
    assert ohmic_threshold(Ohmic(0.1, 1.0, 10.0)) == pytest.approx(1.0)
    assert find_bound_states(Ohmic(0.09, 1.0, 10.0), 1.0).count == 0
    assert find_bound_states(Ohmic(0.11, 1.0, 10.0), 1.0).count == 1


@pytest.mark.parametrize("zeta, w0", [(0.08, 1.05), (0.03, 1.05)])
def test_semicircle_threshold_scan(zeta, w0):
    g_up, g_low = _semicircle_thresholds(zeta, 1.0, w0)
    gs = np.linspace(0.005, 0.2, 80)
    counts = np.array([find_bound_states(Semicircle(g, zeta, 1.0), w0).count for g in gs])
    expected = (gs > g_up).astype(int) + (gs > g_low).astype(int)
    np.testing.assert_array_equal(counts, expected)


def test_sm1_thresholds_order():
    g_up, g_low = _semicircle_thresholds(0.08, 1.0, 1.05)
    assert g_up == pytest.approx(0.0938, abs=1e-4)
    assert g_low == pytest.approx(0.1296, abs=1e-4)


def test_edge_root_is_discarded_with_warning():
    # exactly at threshold the root coincides with the band edge
    with pytest.warns(UserWarning, match="band edge"):
        bound = find_bound_states(Ohmic(0.1, 1.0, 10.0), 1.0)
    assert bound.count == 0


def test_empty_and_discrete_densities():
    bound = find_bound_states(Ohmic(0.0, 1.0, 10.0), 1.3)
    assert bound.states == ((1.3, 1.0),)
    with pytest.raises(DomainError):
        find_bound_states(Discrete(((1.0, 0.1),)), 1.0)
    with pytest.raises(ValueError):
        BoundStateSet((1.0, 2.0, 3.0), (0.1, 0.1, 0.1))


@pytest.mark.parametrize("sd, w0", [(Ohmic(0.05, 1.0, 10.0), 1.0), (Ohmic(0.15, 1.0, 10.0), 1.0),
                                    (Semicircle(0.12, 0.03, 1.0), 1.05), (Semicircle(0.04, 0.08, 1.0), 1.05),
                                    (Ohmic(0.05, 2.0, 3.0), 1.0)])
def test_sum_rule(sd, w0):
    assert sum_rule(sd, w0) == pytest.approx(1.0, abs=1e-8)


def test_background_theta_positive_on_support_only():
    sd = Semicircle(0.12, 0.03, 1.0)
    w = np.array([0.9, 0.95, 1.0, 1.05, 1.1])
    th = background_theta(sd, 1.05, w)
    assert th[0] == th[-1] == 0.0
    assert np.all(th[1:-1] > 0)
    assert background_weight(Discrete(((1.0, 0.1),)), 1.0) == 0.0


def test_two_bound_states_beat():
    sd = Semicircle(0.12, 0.03, 1.0)
    asym = asymptotic_state(sd, 1.05, 5.0)
    lo, hi = asym.bound.energies
    assert lo < sd.support[0] and hi > sd.support[1]
    assert asym.beat_frequency == pytest.approx(hi - lo)
    period = 2 * np.pi / asym.beat_frequency
    assert asym.v(0.0) == pytest.approx(asym.v(period), rel=1e-12)
    t = np.linspace(0, period, 7)
    np.testing.assert_allclose(np.abs(asym.u(t)), np.abs(asymptotic_u(asym.bound, t)))


def test_asymptotic_v_matches_trajectory_plateau():
    # no bound state at eta = 0.05: v(inf) is the thermal continuum integral
    sd = Ohmic(0.05, 1.0, 10.0)
    asym = asymptotic_state(sd, 1.0, 0.2)
    assert asym.bound.count == 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = propagate(sd, 1.0, 0.2, TimeGrid(60.0, 6000))
    assert tr.v[-1] == pytest.approx(asym.v_constant, rel=1e-3)


def test_asymptotic_u_plateau_with_bound_state():
    sd = Ohmic(0.15, 1.0, 10.0)
    asym = asymptotic_state(sd, 1.0, 0.2)
    assert asym.bound.count == 1
    assert asym.v_cross_amplitude == 0.0
    assert np.abs(asym.u(100.0)) == pytest.approx(asym.bound.weights[0])
