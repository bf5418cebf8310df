"""Bath spectral densities and the kernels derived from them.

Three models are supported:

* :class:`Ohmic` -- ``J(w) = eta * w**s * wc**(1-s) * exp(-w/wc)``, optionally
  with a hard upper cutoff ``omega_cut``.
* :class:`Semicircle` -- the band of a coupled-resonator array,
  ``J(w) = g**2 / (2 pi zeta**2) * sqrt(4 zeta**2 - (w - Omega)**2)``.
* :class:`Discrete` -- a finite set of modes ``(omega_k, g_k)``.

All frequencies are in units of a reference frequency chosen by the caller
(hbar = 1), and times in its inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .errors import DomainError
from .quadrature import MAX_PANELS, integrate

# Ohmic effective support: w_max = omega_c * max(40, 10/s).  The integrand
# w**s exp(-w/wc) is below 1e-16 of its peak beyond this point.
OHMIC_CUTOFF_FACTOR = 40.0
KERNEL_RTOL = 1e-11
_T_CHUNK = 256


@dataclass(frozen=True)
class Ohmic:
    eta: float
    s: float
    omega_c: float
    omega_cut: float | None = None

    def __post_init__(self):
        if not self.eta >= 0:
            raise DomainError(f"eta must be non-negative, got {self.eta}")
        if not self.s > 0:
            raise DomainError(f"Ohmicity s must be positive, got {self.s}")
        if not self.omega_c > 0:
            raise DomainError(f"omega_c must be positive, got {self.omega_c}")
        if self.omega_cut is not None and not self.omega_cut > 0:
            raise DomainError(f"omega_cut must be positive, got {self.omega_cut}")

    @property
    def omega_max(self) -> float:
        w = self.omega_c * max(OHMIC_CUTOFF_FACTOR, 10.0 / self.s)
        return w if self.omega_cut is None else min(w, self.omega_cut)

    @property
    def support(self) -> tuple[float, float]:
        return 0.0, self.omega_max


@dataclass(frozen=True)
class Semicircle:
    g: float
    zeta: float
    big_omega: float

    def __post_init__(self):
        if not self.g >= 0:
            raise DomainError(f"g must be non-negative, got {self.g}")
        if not self.zeta > 0:
            raise DomainError(f"zeta must be positive, got {self.zeta}")
        if not self.big_omega - 2 * self.zeta > 0:
            raise DomainError("the band [Omega - 2 zeta, Omega + 2 zeta] must lie above zero")

    @property
    def support(self) -> tuple[float, float]:
        return self.big_omega - 2 * self.zeta, self.big_omega + 2 * self.zeta


@dataclass(frozen=True)
class Discrete:
    modes: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        modes = tuple((float(w), float(g)) for w, g in self.modes)
        if any(not w > 0 for w, _ in modes):
            raise DomainError("discrete mode frequencies must be positive")
        object.__setattr__(self, "modes", modes)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([w for w, _ in self.modes], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([g for _, g in self.modes], dtype=float)

    @property
    def support(self) -> tuple[float, float]:
        if not self.modes:
            return 0.0, 0.0
        w = self.omegas
        return float(w.min()), float(w.max())


SpectralDensity = Union[Ohmic, Semicircle, Discrete]


def is_empty(sd: SpectralDensity) -> bool:
    """True when the density vanishes identically."""
    if isinstance(sd, Ohmic):
        return sd.eta == 0
    if isinstance(sd, Semicircle):
        return sd.g == 0
    return not np.any(sd.couplings)


def characteristic_frequency(sd: SpectralDensity) -> float:
    """Fastest frequency the kernels oscillate or vary at, used to pick dt."""
    if isinstance(sd, Ohmic):
        return sd.omega_c if sd.omega_cut is None else min(sd.omega_c, sd.omega_cut)
    return sd.support[1]


def bose(beta, omega):
    """Bose occupation 1/(exp(beta*omega) - 1)."""
    # written with exp(-x) so large beta*omega underflows to 0 instead of overflowing
    x = np.multiply(beta, omega)
    return np.exp(-x) / -np.expm1(-x)


def _scalar_out(like, value):
    return value[()] if np.ndim(like) == 0 else value


def evaluate_density(sd: SpectralDensity, omega):
    """Return J(omega); zero outside the support.

    Discrete densities are sums of delta functions and have no pointwise
    value; they return zero everywhere.
    """
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("omega must be finite")
    if isinstance(sd, Ohmic):
        pos = w > 0
        if sd.omega_cut is not None:
            pos &= w <= sd.omega_cut
        wp = np.where(pos, w, 1.0)
        j = sd.eta * wp**sd.s * sd.omega_c ** (1 - sd.s) * np.exp(-wp / sd.omega_c)
        out = np.where(pos, j, 0.0)
    elif isinstance(sd, Semicircle):
        x = w - sd.big_omega
        inside = np.abs(x) < 2 * sd.zeta
        root = np.sqrt(np.clip(4 * sd.zeta**2 - x**2, 0.0, None))
        out = np.where(inside, sd.g**2 / (2 * np.pi * sd.zeta**2) * root, 0.0)
    else:
        out = np.zeros_like(w)
    return _scalar_out(omega, out)


def _thermal_density(sd: Ohmic, beta: float, w: np.ndarray) -> np.ndarray:
    """J(w)/(exp(beta w) - 1) for an Ohmic density with the w -> 0 limit resolved."""
    out = np.empty_like(w)
    zero = w == 0
    nz = ~zero
    out[nz] = evaluate_density(sd, w[nz]) * bose(beta, w[nz])
    if np.any(zero):
        if sd.s == 1:
            # limit of eta w exp(-w/wc) / (exp(beta w) - 1)
            out[zero] = sd.eta / beta
        else:
            out[zero] = 0.0 if sd.s > 1 else np.inf
    return out


def integrate_density(sd: SpectralDensity, weight, *, rtol: float = KERNEL_RTOL,
                      atol: float = 0.0, breakpoints=(), max_panels: int = MAX_PANELS):
    """Return the integral of ``J(w) * weight(w)`` over the support.

    ``weight`` receives a 1-D node array and returns ``(n,)`` or ``(n, m)``.
    Semicircle integrals use ``w = Omega + 2 zeta cos(theta)``, which turns
    the square-root band edges into a smooth periodic integrand.
    """
    if isinstance(sd, Discrete):
        if not sd.modes:
            probe = np.asarray(weight(np.array([1.0])))
            return np.zeros(probe.shape[1:])[()] if probe.ndim > 1 else 0.0
        w, g = sd.omegas, sd.couplings
        vals = np.asarray(weight(w))
        g2 = g**2 if vals.ndim == 1 else (g**2)[:, None]
        return (g2 * vals).sum(axis=0)[()]
    if isinstance(sd, Semicircle):
        pref = 2 * sd.g**2 / np.pi

        def f(theta):
            w = sd.big_omega + 2 * sd.zeta * np.cos(theta)
            vals = np.asarray(weight(w))
            jac = pref * np.sin(theta) ** 2
            return vals * (jac if vals.ndim == 1 else jac[:, None])

        bps = [np.arccos(np.clip((b - sd.big_omega) / (2 * sd.zeta), -1, 1)) for b in breakpoints]
        return integrate(f, 0.0, np.pi, rtol=rtol, atol=atol, breakpoints=bps, max_panels=max_panels)
    lo, hi = sd.support

    def f(w):
        vals = np.asarray(weight(w))
        j = evaluate_density(sd, w)
        return vals * (j if vals.ndim == 1 else j[:, None])

    return integrate(f, lo, hi, rtol=rtol, atol=atol, breakpoints=breakpoints, max_panels=max_panels)


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise DomainError("kernel times must be finite and non-negative")
    return t


def _oscillatory(sd, weight_fn, times, rtol):
    """Integral of J(w) weight_fn(w) exp(-i w t) for each t, chunked over t.

    Tolerances are relative to the t = 0 value, which bounds the modulus at
    every t for a positive weight.
    """
    flat = np.atleast_1d(times).ravel()
    atol = rtol * abs(integrate_density(sd, weight_fn, rtol=rtol))
    out = np.empty(flat.size, dtype=complex)
    if isinstance(sd, Semicircle):
        # factor out the band-centre carrier so the quadrature sees only the
        # slow envelope exp(-2i zeta t cos theta)
        carrier = np.exp(-1j * sd.big_omega * flat)
        shift = sd.big_omega
    else:
        carrier = np.ones(flat.size)
        shift = 0.0
    for start in range(0, flat.size, _T_CHUNK):
        tc = flat[start:start + _T_CHUNK]

        def weight(w, tc=tc):
            return weight_fn(w)[:, None] * np.exp(-1j * np.outer(w - shift, tc))

        out[start:start + _T_CHUNK] = np.atleast_1d(integrate_density(sd, weight, rtol=rtol, atol=atol))
    out *= carrier
    return out.reshape(np.shape(times))


def memory_kernel_mu(sd: SpectralDensity, t, *, method: str = "auto", rtol: float = KERNEL_RTOL):
    """Memory kernel mu(t) = int J(w) exp(-i w t) dw.

    ``method="auto"`` uses closed forms where they exist (Ohmic without hard
    cutoff, semicircle, discrete); ``method="quadrature"`` always integrates.
    """
    t = _check_times(t)
    if isinstance(sd, Discrete):
        if not sd.modes:
            return _scalar_out(t, np.zeros(t.shape, dtype=complex))
        phase = np.exp(-1j * np.multiply.outer(t, sd.omegas))
        return _scalar_out(t, phase @ sd.couplings**2)
    if method == "auto" and isinstance(sd, Ohmic) and sd.omega_cut is None:
        a = 1.0 / sd.omega_c + 1j * t
        pref = sd.eta * sd.omega_c ** (1 - sd.s) * special.gamma(sd.s + 1)
        return _scalar_out(t, pref * a ** (-(sd.s + 1)))
    if method == "auto" and isinstance(sd, Semicircle):
        x = 2 * sd.zeta * t
        safe = np.where(x == 0, 1.0, x)
        ratio = np.where(x == 0, 1.0, 2 * special.j1(safe) / safe)
        return _scalar_out(t, sd.g**2 * ratio * np.exp(-1j * sd.big_omega * t))
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    return _scalar_out(t, _oscillatory(sd, np.ones_like, t, rtol))


def noise_kernel_nu(sd: SpectralDensity, beta_b: float, t, *, rtol: float = KERNEL_RTOL):
    """Noise kernel nu(t) = int J(w) exp(-i w t) / (exp(beta_b w) - 1) dw."""
    if not beta_b > 0:
        raise DomainError(f"beta_b must be positive, got {beta_b}")
    t = _check_times(t)
    if isinstance(sd, Discrete):
        if not sd.modes:
            return _scalar_out(t, np.zeros(t.shape, dtype=complex))
        phase = np.exp(-1j * np.multiply.outer(t, sd.omegas))
        return _scalar_out(t, phase @ (sd.couplings**2 * bose(beta_b, sd.omegas)))
    if isinstance(sd, Ohmic):
        if sd.eta == 0:
            return _scalar_out(t, np.zeros(t.shape, dtype=complex))
        # integrate the thermal density directly so the w -> 0 limit is exact
        lo, hi = sd.support
        flat = np.atleast_1d(t).ravel()
        out = np.empty(flat.size, dtype=complex)
        atol = rtol * integrate(lambda w: _thermal_density(sd, beta_b, w), lo, hi, rtol=rtol)
        for start in range(0, flat.size, _T_CHUNK):
            tc = flat[start:start + _T_CHUNK]

            def f(w, tc=tc):
                return _thermal_density(sd, beta_b, w)[:, None] * np.exp(-1j * np.outer(w, tc))

            out[start:start + _T_CHUNK] = integrate(f, lo, hi, rtol=rtol, atol=atol)
        return _scalar_out(t, out.reshape(t.shape))
    return _scalar_out(t, _oscillatory(sd, lambda w: bose(beta_b, w), t, rtol))


@dataclass(frozen=True)
class KernelSamples:
    times: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    beta_b: float


def tabulate_kernels(sd: SpectralDensity, beta_b: float, times) -> KernelSamples:
    times = np.asarray(times, dtype=float)
    return KernelSamples(times, memory_kernel_mu(sd, times), noise_kernel_nu(sd, beta_b, times), beta_b)


def _semicircle_hilbert(sd: Semicircle, omega):
    """Closed-form principal-value integral of J(w')/(w - w')."""
    x = np.asarray(omega, dtype=float) - sd.big_omega
    r2 = 4 * sd.zeta**2
    outside = np.abs(x) >= 2 * sd.zeta
    root = np.sqrt(np.clip(x**2 - r2, 0.0, None))
    val = np.where(outside, x - np.sign(x) * root, x)
    return sd.g**2 / (2 * sd.zeta**2) * val


def lamb_shift(sd: SpectralDensity, omega, *, method: str = "auto", rtol: float = 1e-12):
    """Principal-value shift Delta(w) = P int J(w')/(w - w') dw'.

    Inside the support the pole is removed by singularity subtraction,
    ``int [J(w') - J(w)]/(w - w') dw' + J(w) log((w - a)/(b - w))`` over
    the support ``[a, b]``.
    """
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("omega must be finite")
    if isinstance(sd, Discrete):
        if not sd.modes:
            return _scalar_out(omega, np.zeros_like(w))
        diff = np.subtract.outer(w, sd.omegas)
        safe = np.where(diff == 0, np.inf, diff)
        return _scalar_out(omega, (sd.couplings**2 / safe).sum(axis=-1))
    if isinstance(sd, Semicircle) and method == "auto":
        return _scalar_out(omega, _semicircle_hilbert(sd, w))
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if is_empty(sd):
        return _scalar_out(omega, np.zeros_like(w))

    a, b = sd.support
    flat = np.atleast_1d(w).ravel()
    inside = (flat > a) & (flat < b)
    out = np.empty(flat.size)
    step = 64

    # off the support (band edges included) the integrand has no pole; the
    # density's own substitution keeps square-root edges smooth
    idx = np.flatnonzero(~inside)
    for start in range(0, idx.size, step):
        pts = flat[idx[start:start + step]]
        out[idx[start:start + step]] = np.atleast_1d(
            integrate_density(sd, lambda x, pts=pts: 1.0 / (pts - x[:, None]), rtol=rtol))

    idx = np.flatnonzero(inside)
    for start in range(0, idx.size, step):
        pole_c = flat[idx[start:start + step]]
        sub_c = evaluate_density(sd, pole_c)

        def fc(x, sub_c=sub_c, pole_c=pole_c):
            num = evaluate_density(sd, x)[:, None] - sub_c
            den = pole_c - x[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                q = num / den
            return np.where(den == 0, 0.0, q)

        # poles as panel edges keep every node off the removable singularity
        vals = np.atleast_1d(integrate(fc, a, b, rtol=rtol, breakpoints=list(pole_c)))
        out[idx[start:start + step]] = vals + sub_c * np.log((pole_c - a) / (b - pole_c))
    return _scalar_out(omega, out.reshape(w.shape))


def discretize_bath(sd: SpectralDensity, n_modes: int, omega_max: float | None = None) -> Discrete:
    """Midpoint discretisation of a continuous density into ``n_modes`` modes.

    Ohmic densities are sampled on ``n_modes`` uniform panels of ``(0, omega_max]``
    (default: the effective support); semicircles on the exact band.  The
    couplings ``g_k = sqrt(J(w_k) dw)`` make ``sum g_k**2 exp(-i w_k t)`` the
    midpoint rule for mu(t).
    """
    if n_modes < 1:
        raise DomainError(f"n_modes must be at least 1, got {n_modes}")
    if isinstance(sd, Discrete):
        return sd
    if isinstance(sd, Semicircle):
        lo, hi = sd.support
    else:
        lo, hi = 0.0, sd.omega_max if omega_max is None else float(omega_max)
        if not hi > 0:
            raise DomainError("omega_max must be positive")
    dw = (hi - lo) / n_modes
    w = lo + dw * (np.arange(n_modes) + 0.5)
    g = np.sqrt(evaluate_density(sd, w) * dw)
    return Discrete(tuple(zip(w.tolist(), g.tolist())))
