"""Two-point-measurement heat statistics of the damped oscillator.

The reduced dynamics is a Gaussian channel fixed by the pair ``(u, v)`` at
time tau.  From a Gibbs initial state at ``beta_s`` it yields

    chi(xi) = Z(beta_s + xi)/Z(beta_s) / [1 + (1 - exp(xi w0)) nbar(beta_s + xi)],
    nbar(b) = |u|**2/(exp(b w0) - 1) + v,

and the Fock transition probabilities

    P[l', l] = M sum_m C(l, m) C(l', m) |J1|**(2m) J2**(l'-m) (1 - J3)**(l-m),

with ``M = 1/(1+v)``, ``J1 = M u``, ``J2 = M v``, ``J3 = M |u|**2``.  These
obey detailed balance at ``beta_eff = log(1 + (1 - |u|**2)/v)/w0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, TruncationError
from .spectral import SpectralDensity, bose

GIBBS_TAIL = 1e-10
L_MAX_CAP = 512
V_FLOOR = 1e-12
TAIL_ERROR = 1e-6
XI_POINTS = 41


def _check_beta(beta, omega0):
    if not (np.all(np.asarray(beta) > 0) and omega0 > 0):
        raise DomainError("beta and omega0 must be positive (the trace diverges otherwise)")


def gibbs_tail(beta: float, omega0: float, l_max: int) -> float:
    """Truncation measure exp(-beta w0 (l_max + 1))/(1 - exp(-beta w0))."""
    x = beta * omega0
    return float(np.exp(-x * (l_max + 1)) / -np.expm1(-x))


@dataclass(frozen=True)
class HeatSetup:
    beta_s: float
    beta_b: float
    omega0: float
    l_max: int

    def __post_init__(self):
        if not (self.beta_s > 0 and self.beta_b > 0 and self.omega0 > 0):
            raise DomainError("beta_s, beta_b and omega0 must be positive")
        if int(self.l_max) != self.l_max or self.l_max < 1:
            raise DomainError(f"l_max must be a positive integer, got {self.l_max}")
        object.__setattr__(self, "l_max", int(self.l_max))
        tail = gibbs_tail(self.beta_s, self.omega0, self.l_max)
        if not tail < GIBBS_TAIL:
            raise TruncationError(
                f"Gibbs tail {tail:.3g} at l_max = {self.l_max} exceeds {GIBBS_TAIL}; increase l_max",
                estimate=tail,
            )


@dataclass(frozen=True)
class HeatDistribution:
    """Probability mass ``probs[i]`` at heat ``q_offsets[i] * omega0``."""

    omega0: float
    q_offsets: np.ndarray
    probs: np.ndarray

    @property
    def heat(self) -> np.ndarray:
        return self.q_offsets * self.omega0

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def moment(self, k: int = 1) -> float:
        return float(np.dot(self.probs, self.heat**k))


def partition_function(beta, omega0):
    """Z(beta) = 1/(1 - exp(-beta w0))."""
    _check_beta(beta, omega0)
    return 1.0 / -np.expm1(-np.multiply(beta, omega0))


def nbar(beta, omega0, u, v):
    """Mean occupation |u|**2/(exp(beta w0) - 1) + v of the evolved state."""
    _check_beta(beta, omega0)
    return np.abs(u) ** 2 * bose(beta, omega0) + v


def characteristic_function(xi, setup: HeatSetup, u, v):
    """Moment generating function chi(xi) = <exp(xi Q)> of the heat."""
    xi = np.asarray(xi, dtype=float)
    b = setup.beta_s + xi
    if np.any(b <= 0):
        raise DomainError(f"partition pole: xi must exceed -beta_s = {-setup.beta_s}")
    w = setup.omega0
    denom = 1.0 - np.expm1(xi * w) * nbar(b, w, u, v)
    if np.any(denom <= 0):
        bad = float(np.min(denom))
        raise DomainError(f"outside MGF strip: denominator {bad:.6g} <= 0")
    ratio = -np.expm1(-setup.beta_s * w) / -np.expm1(-b * w)
    out = ratio / denom
    return out[()] if out.ndim == 0 else out


def _mgf_denominator(xi, setup, u, v):
    w = setup.omega0
    return 1.0 - np.expm1(xi * w) * nbar(setup.beta_s + xi, w, u, v)


def admissible_strip(setup: HeatSetup, u, v) -> tuple[float, float]:
    """Open interval of xi on which chi is finite.

    The lower end is the partition pole ``-beta_s``; the upper end is the
    first zero of the denominator, found by bisection (``inf`` if ``v = 0``).
    """
    if not v > 0:
        return -setup.beta_s, np.inf
    # times (exp((beta_s + xi) w0) - 1) the denominator is a downward
    # quadratic in exp(xi w0), positive at xi = 0: exactly one positive zero
    hi = 1.0 / setup.omega0
    while _mgf_denominator(hi, setup, u, v) > 0:
        hi *= 2
    root = optimize.brentq(lambda x: _mgf_denominator(x, setup, u, v), 0.0, hi,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return -setup.beta_s, float(root)


def xi_grid(setup: HeatSetup, u, v, n: int = XI_POINTS, mirror_beta: float | None = None) -> np.ndarray:
    """``n`` evenly spaced interior points of the admissible strip.

    With ``mirror_beta`` the grid is restricted to the part of the strip that
    the reflection ``xi -> mirror_beta - beta_s - xi`` maps into itself, so
    symmetry checks never leave the strip.  That part is
    ``(-beta_s, min(xi_max, mirror_beta))``.
    """
    lo, hi = admissible_strip(setup, u, v)
    if mirror_beta is not None:
        hi = min(hi, mirror_beta)
    if not np.isfinite(hi):
        raise DomainError("the admissible strip is unbounded; v must be positive")
    return np.linspace(lo, hi, n + 2)[1:-1]


def mean_heat(setup: HeatSetup, u, v):
    """<Q> = w0 [v + (1 - |u|**2)/(1 - exp(beta_s w0))]."""
    w = setup.omega0
    return w * (v - (1.0 - np.abs(u) ** 2) * bose(setup.beta_s, w))


def effective_beta(omega0: float, u, v, v_floor: float = V_FLOOR):
    """Inverse temperature at which the transition probabilities obey detailed balance.

    Undefined (raises) where ``v <= v_floor``, in particular at tau = 0.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v <= v_floor):
        raise DomainError(f"effective temperature undefined for v <= {v_floor} (0/0 at early times)")
    out = np.log1p((1.0 - np.abs(u) ** 2) / v) / omega0
    return out[()] if np.ndim(out) == 0 else out


def initial_level_prob(setup: HeatSetup, l):
    """Gibbs weight of Fock level l at beta_s."""
    l = np.asarray(l)
    if np.any(l < 0) or np.any(l > setup.l_max):
        raise DomainError(f"level must lie in [0, {setup.l_max}]")
    x = setup.beta_s * setup.omega0
    out = -np.expm1(-x) * np.exp(-x * l)
    return out[()] if out.ndim == 0 else out


def _log_factorials(n: int) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n + 1)))])


def _channel_logs(u, v):
    au2 = float(np.abs(u) ** 2)
    if v < 0 or not np.isfinite(v):
        raise DomainError(f"v must be finite and non-negative, got {v}")
    if au2 > 1 + 1e-12:
        raise DomainError(f"|u|**2 = {au2} exceeds 1")
    au2 = min(au2, 1.0)
    log_m = -np.log1p(v)
    # log|J1|**2, log J2 and log(1 - J3) with 1 - J3 = (1 + v - |u|**2) M
    return log_m, au2, v, 1.0 + v - au2


def log_transition_probability(u, v, l, l_prime) -> float:
    """Natural log of P[l', l]; ``-inf`` for an exact zero."""
    l, lp = int(l), int(l_prime)
    if l < 0 or lp < 0:
        raise DomainError("Fock levels must be non-negative")
    log_m, a, vv, c = _channel_logs(u, v)
    lf = _log_factorials(max(l, lp))
    m = np.arange(min(l, lp) + 1)
    log_binom = (lf[l] - lf[m] - lf[l - m]) + (lf[lp] - lf[m] - lf[lp - m])
    # every factor carries M, so (J1, J2, 1 - J3) -> M * (|u|**2, v, 1 + v - |u|**2)
    with np.errstate(divide="ignore"):
        terms = (log_binom + special.xlogy(m, a) + special.xlogy(lp - m, vv) + special.xlogy(l - m, c)
                 + (l + lp + 1) * log_m)
    return float(special.logsumexp(terms))


def transition_probability(u, v, l, l_prime) -> float:
    """Probability P[l', l] of finding level l' at tau after measuring l at 0."""
    return float(np.exp(log_transition_probability(u, v, l, l_prime)))


def transition_matrix(u, v, l_max: int) -> np.ndarray:
    """All P[l', l] for ``0 <= l, l' <= l_max`` (rows l', columns l)."""
    log_m, a, vv, c = _channel_logs(u, v)
    L = int(l_max)
    lf = _log_factorials(L)
    lev = np.arange(L + 1)
    acc = np.full((L + 1, L + 1), -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for m in range(L + 1):
            k = lev[m:]
            lb = lf[k] - lf[m] - lf[k - m]
            # rows l' >= m, columns l >= m
            lp, l = k[:, None], k[None, :]
            t = (lb[:, None] + lb[None, :] + special.xlogy(m, a) + special.xlogy(lp - m, vv)
                 + special.xlogy(l - m, c) + (l + lp + 1) * log_m)
            acc[m:, m:] = np.logaddexp(acc[m:, m:], t)
    return np.exp(acc)


def choose_l_max(beta_s: float, omega0: float, u=1.0, v=0.0, *, tail: float = GIBBS_TAIL,
                 cap: int = L_MAX_CAP) -> int:
    """Smallest truncation with Gibbs and evolved-state tails below ``tail``.

    The evolved state is thermal with mean ``n = |u|**2 nbar(beta_s) + v``, so
    its tail beyond L is ``(n/(1+n))**(L+1)``.
    """
    _check_beta(beta_s, omega0)
    x = beta_s * omega0
    need_gibbs = (np.log(tail) + np.log(-np.expm1(-x))) / -x - 1
    n = float(np.abs(u) ** 2 * bose(beta_s, omega0) + v)
    need_evolved = np.log(tail) / np.log(n / (1 + n)) - 1 if n > 0 else 0.0
    L = max(1, int(np.floor(max(need_gibbs, need_evolved))) + 1)
    while gibbs_tail(beta_s, omega0, L) >= tail:
        L += 1
    if L > cap:
        raise TruncationError(f"l_max = {L} exceeds the cap {cap}; the evolved state is too hot",
                              estimate=float(L))
    return L


def heat_distribution(setup: HeatSetup, u, v) -> HeatDistribution:
    """Distribution of Q = (l' - l) w0 over all retained level pairs."""
    L = setup.l_max
    P = transition_matrix(u, v, L)
    p0 = initial_level_prob(setup, np.arange(L + 1))
    joint = P * p0[None, :]
    q = np.arange(-L, L + 1)
    # offset l' - l is constant along diagonals of joint[l', l]
    probs = np.array([np.trace(joint, offset=-k) for k in q])
    missing = 1.0 - probs.sum()
    if missing > TAIL_ERROR:
        raise TruncationError(
            f"truncation at l_max = {L} loses probability {missing:.3g}; increase l_max",
            estimate=float(missing),
        )
    return HeatDistribution(setup.omega0, q, probs)


def integral_ft_value(dist: HeatDistribution, beta_weight: float) -> float:
    """<exp(beta_weight Q)> under ``dist``, summed in log space."""
    if beta_weight == 0:
        return dist.total
    with np.errstate(divide="ignore"):
        return float(np.exp(special.logsumexp(beta_weight * dist.heat, b=dist.probs)))


def markovian_heat_stats(setup: HeatSetup, sd: SpectralDensity, tau: float, xi=None):
    """Born-Markov characteristic function on ``xi`` and mean heat at ``tau``.

    Returns ``(xi, chi, mean)``; ``xi`` defaults to the admissible grid.
    """
    from .propagator import markovian_rates

    kappa, delta = markovian_rates(sd, setup.omega0)
    w, bs = setup.omega0, setup.beta_s
    u2 = np.exp(-2 * kappa * tau)
    v_ma = bose(setup.beta_b, w) * -np.expm1(-2 * kappa * tau)
    if xi is None:
        xi = xi_grid(setup, np.sqrt(u2), v_ma) if v_ma > V_FLOOR else np.array([0.0])
    xi = np.asarray(xi, dtype=float)
    big_v = v_ma * -np.expm1((bs + xi) * w) - u2
    chi = np.exp(xi * w) * np.expm1(bs * w) / (np.expm1((bs + xi) * w) + big_v * np.expm1(xi * w))
    mean = w * (v_ma + (1 - u2) / -np.expm1(bs * w))
    return xi, chi, float(mean)


@dataclass(frozen=True)
class SteadyStateStats:
    times: np.ndarray
    beta_eff: np.ndarray
    mean_heat: np.ndarray
    xi: np.ndarray
    chi: np.ndarray  # shape (len(times), len(xi))


def steady_state_stats(setup: HeatSetup, asym, t, xi=None) -> SteadyStateStats:
    """Long-time beta_eff, chi and <Q> from the bound-state asymptotics.

    With two bound states every output oscillates at the beat frequency.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u2 = np.abs(asym.u(t)) ** 2
    v = np.broadcast_to(asym.v(t), t.shape)
    w, bs = setup.omega0, setup.beta_s
    beta = effective_beta(w, np.sqrt(u2), v)
    mean = w * (v + (1 - u2) / -np.expm1(bs * w))
    if xi is None:
        xi = xi_grid(setup, np.sqrt(u2[0]), float(v[0]))
    xi = np.asarray(xi, dtype=float)
    big_v = v[:, None] * -np.expm1((bs + xi[None, :]) * w) - u2[:, None]
    chi = (np.exp(xi * w) * np.expm1(bs * w)
           / (np.expm1((bs + xi[None, :]) * w) + big_v * np.expm1(xi * w)))
    return SteadyStateStats(t, beta, mean, xi, chi)
