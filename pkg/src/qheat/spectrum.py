"""Bound states of the oscillator-plus-bath Hamiltonian and long-time limits.

In the one-excitation sector an eigenvalue E outside the bath continuum
solves ``y(E) = E`` with ``y(E) = w0 + int J(w)/(E - w) dw``.  Each such root
is a bound state of residue ``Z = 1/(1 + int J(w)/(E - w)**2 dw)``, and

    u(t) = sum_n Z_n exp(-i E_n t) + int Theta(w) exp(-i w t) dw,

where the continuum part dephases at long times.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, NumericalError
from .spectral import (
    Discrete,
    Ohmic,
    Semicircle,
    SpectralDensity,
    bose,
    evaluate_density,
    integrate_density,
    is_empty,
    lamb_shift,
)

EDGE_EXCLUSION = 1e-9
ROOT_TOL = 1e-12
SPECTRUM_RTOL = 1e-12
# nested integrals (Theta needs a principal value per node) must fail fast
NESTED_MAX_PANELS = 1024


@dataclass(frozen=True)
class BoundStateSet:
    """Isolated poles sorted by energy, each with its residue weight Z."""

    energies: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.energies) != len(self.weights):
            raise ValueError("energies and weights differ in length")
        if len(self.energies) > 2:
            raise ValueError("at most two bound states are supported")

    @property
    def count(self) -> int:
        return len(self.energies)

    @property
    def states(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.energies, self.weights))

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))


@dataclass(frozen=True)
class AsymptoticState:
    """Long-time u and v: v(t) = v_constant + v_cross_amplitude * cos(beat_frequency * t)."""

    bound: BoundStateSet
    v_constant: float
    v_cross_amplitude: float
    beat_frequency: float

    def u(self, t):
        return asymptotic_u(self.bound, t)

    def v(self, t):
        return self.v_constant + self.v_cross_amplitude * np.cos(self.beat_frequency * np.asarray(t, dtype=float))


def _outside(sd: SpectralDensity, E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if isinstance(sd, Discrete) or is_empty(sd):
        if isinstance(sd, Discrete) and sd.modes:
            return ~np.isin(E, sd.omegas)
        return np.ones(E.shape, dtype=bool)
    a, b = sd.support
    if isinstance(sd, Ohmic):
        # the Ohmic continuum is unbounded above in principle
        return E <= a
    return (E <= a) | (E >= b)


def pole_function(sd: SpectralDensity, omega0: float, E, *, method: str = "auto"):
    """Return ``y(E) - E = w0 + int J(w)/(E - w) dw - E``.

    Band edges are allowed when the integral converges there.
    """
    E_arr = np.asarray(E, dtype=float)
    if not np.all(np.isfinite(E_arr)):
        raise DomainError("E must be finite")
    if not np.all(_outside(sd, E_arr)):
        raise DomainError("E lies inside the continuum, where the pole equation has no isolated roots")
    return omega0 + lamb_shift(sd, E, method=method, rtol=SPECTRUM_RTOL) - E


def _inverse_square_moment(sd: SpectralDensity, E: float) -> float:
    """int J(w)/(E - w)**2 dw for E outside the support."""
    if isinstance(sd, Semicircle):
        x = E - sd.big_omega
        root = np.sqrt(x * x - 4 * sd.zeta**2)
        if root == 0:
            return np.inf
        return sd.g**2 / (2 * sd.zeta**2) * (abs(x) / root - 1.0)
    if isinstance(sd, Ohmic) and E == 0 and sd.s <= 1:
        return np.inf
    return float(integrate_density(sd, lambda w: 1.0 / (E - w) ** 2, rtol=SPECTRUM_RTOL))


def residue_weight(sd: SpectralDensity, omega0: float, E: float, *, method: str = "integral") -> float:
    """Residue Z of the pole at E.

    ``method="integral"`` uses ``1/(1 + int J/(E - w)**2)``;
    ``method="derivative"`` uses ``-1/f'(E)`` for ``f = y - E`` with a
    five-point difference kept outside the continuum.
    """
    if method == "integral":
        return float(1.0 / (1.0 + _inverse_square_moment(sd, E)))
    if method != "derivative":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(sd, Discrete) or is_empty(sd):
        return 1.0
    a, b = sd.support
    dist = a - E if E <= a else E - b
    h = 1e-2 * min(dist, 1.0)
    if not h > 0:
        raise DomainError("the derivative is undefined at a band edge")
    x = E + h * np.array([-2.0, -1.0, 1.0, 2.0])
    f = pole_function(sd, omega0, x)
    deriv = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    return float(-1.0 / deriv)


def _refine(f, lo: float, hi: float) -> float:
    root = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


def _bracket_below(f, edge: float, start: float) -> float:
    """Walk down from ``edge - start`` until f is positive (f decreases with E)."""
    step = start
    for _ in range(200):
        if f(edge - step) > 0:
            return edge - step
        step *= 2
    raise NumericalError("could not bracket a bound state below the continuum")


def _bracket_above(f, edge: float, start: float) -> float:
    step = start
    for _ in range(200):
        if f(edge + step) < 0:
            return edge + step
        step *= 2
    raise NumericalError("could not bracket a bound state above the continuum")


def _keep(E: float, edge: float) -> bool:
    if abs(E - edge) < EDGE_EXCLUSION:
        warnings.warn(
            f"root E = {E:.15g} lies within {EDGE_EXCLUSION} of the band edge {edge:.15g}; discarded",
            stacklevel=3,
        )
        return False
    return True


def find_bound_states(sd: SpectralDensity, omega0: float) -> BoundStateSet:
    """All isolated roots of ``y(E) = E`` outside the continuum.

    ``f(E) = y(E) - E`` strictly decreases on every interval outside the
    support, so each interval holds at most one root, present exactly when
    ``f`` changes sign between the band edge and infinity.
    """
    if not omega0 > 0:
        raise DomainError(f"omega0 must be positive, got {omega0}")
    if is_empty(sd):
        return BoundStateSet((float(omega0),), (1.0,))
    if isinstance(sd, Discrete):
        raise DomainError("bound states are defined for continuous densities only")

    def f(E):
        return float(pole_function(sd, omega0, E))

    found = []
    a, b = sd.support
    if isinstance(sd, Ohmic):
        if f(a) < 0:
            lo = _bracket_below(f, a, max(1.0, sd.omega_c))
            E = _refine(f, lo, a)
            if _keep(E, a):
                found.append(E)
    else:
        margin = 10 * sd.g
        if f(a) < 0:
            E = _refine(f, _bracket_below(f, a, margin), a)
            if _keep(E, a):
                found.append(E)
        if f(b) > 0:
            E = _refine(f, b, _bracket_above(f, b, margin))
            if _keep(E, b):
                found.append(E)
    weights = tuple(residue_weight(sd, omega0, E) for E in found)
    return BoundStateSet(tuple(found), weights)


def background_theta(sd: SpectralDensity, omega0: float, omega):
    """Branch-cut density Theta(w) = J/([w - w0 - Delta(w)]**2 + [pi J]**2); zero off the support."""
    w = np.asarray(omega, dtype=float)
    j = evaluate_density(sd, w)
    out = np.zeros(w.shape)
    on = np.asarray(j > 0)
    if np.any(on):
        wj = w[on]
        jj = np.asarray(j)[on]
        detune = wj - omega0 - lamb_shift(sd, wj)
        out[on] = jj / (detune**2 + (np.pi * jj) ** 2)
    return out[()] if out.ndim == 0 else out


def _theta_over_j(sd, omega0):
    def weight(w):
        j = evaluate_density(sd, w)
        detune = w - omega0 - lamb_shift(sd, w)
        return 1.0 / (detune**2 + (np.pi * j) ** 2)

    return weight


def _theta_breakpoints(sd, omega0):
    # keep a panel edge at the bare resonance, near which Theta peaks
    a, b = sd.support
    return [omega0] if a < omega0 < b else []


def background_weight(sd: SpectralDensity, omega0: float, *, rtol: float = 1e-10) -> float:
    """Total continuum weight int Theta(w) dw."""
    if isinstance(sd, Discrete) or is_empty(sd):
        return 0.0
    return float(integrate_density(sd, _theta_over_j(sd, omega0), rtol=rtol,
                                   breakpoints=_theta_breakpoints(sd, omega0), max_panels=NESTED_MAX_PANELS))


def sum_rule(sd: SpectralDensity, omega0: float, bound: BoundStateSet | None = None) -> float:
    """Sum of the bound-state residues and the continuum weight; equals 1."""
    bound = find_bound_states(sd, omega0) if bound is None else bound
    return bound.total_weight + background_weight(sd, omega0)


def asymptotic_u(bound: BoundStateSet, t):
    """Long-time dissipation function sum_n Z_n exp(-i E_n t)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for E, Z in bound.states:
        out = out + Z * np.exp(-1j * E * t)
    return out[()] if out.ndim == 0 else out


def asymptotic_state(sd: SpectralDensity, omega0: float, beta_b: float,
                     bound: BoundStateSet | None = None, *, rtol: float = 1e-10) -> AsymptoticState:
    """Long-time limit of v split into a constant and a beat term.

    ``v(t) -> int nbar(w) [Theta(w) + J(w) |sum_n Z_n exp(-i E_n t)/(w - E_n)|**2] dw``.
    Expanding the modulus gives the diagonal terms (constant) and, for two
    bound states, a cross term oscillating at ``|E_+ - E_-|``.
    """
    if not beta_b > 0:
        raise DomainError(f"beta_b must be positive, got {beta_b}")
    bound = find_bound_states(sd, omega0) if bound is None else bound
    if isinstance(sd, Discrete) or is_empty(sd):
        return AsymptoticState(bound, 0.0, 0.0, 0.0)
    theta = _theta_over_j(sd, omega0)
    Es = np.array(bound.energies)
    Zs = np.array(bound.weights)

    def weight(w):
        occ = bose(beta_b, w)
        cols = [occ * theta(w)]
        for E, Z in zip(Es, Zs):
            cols.append(occ * (Z / (w - E)) ** 2)
        if bound.count == 2:
            cols.append(occ * 2 * Zs[0] * Zs[1] / ((w - Es[0]) * (w - Es[1])))
        return np.stack(cols, axis=1)

    parts = np.atleast_1d(integrate_density(sd, weight, rtol=rtol, breakpoints=_theta_breakpoints(sd, omega0),
                                            max_panels=NESTED_MAX_PANELS))
    n_diag = 1 + bound.count
    v_const = float(parts[:n_diag].sum())
    if bound.count == 2:
        return AsymptoticState(bound, v_const, float(parts[-1]), float(abs(Es[1] - Es[0])))
    return AsymptoticState(bound, v_const, 0.0, 0.0)


def asymptotic_v(sd: SpectralDensity, omega0: float, beta_b: float, bound: BoundStateSet, t):
    """Long-time noise function; t-independent unless there are two bound states."""
    return asymptotic_state(sd, omega0, beta_b, bound).v(t)


def ohmic_threshold(sd: Ohmic) -> float:
    """Bare frequency below which an Ohmic bath without hard cutoff binds a state."""
    return float(sd.eta * sd.omega_c * special.gamma(sd.s))
