"""Dissipation function u(t) and noise function v(t) of the damped oscillator.

u solves the Volterra integro-differential equation

    du/dt + i w0 u + int_0^t mu(t - t1) u(t1) dt1 = 0,   u(0) = 1,

and v is the double integral

    v(t) = int_0^t int_0^t u*(t1) nu(t1 - t2) u(t2) dt1 dt2.

Both are discretised with the trapezoidal rule on a uniform grid, which is
second order in dt with an error expansion in even powers of dt, so one
Richardson step (``extrapolate=True``) lifts the result to fourth order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularCoefficientError, SolverError, NumericalError
from .spectral import (
    SpectralDensity,
    bose,
    characteristic_frequency,
    evaluate_density,
    lamb_shift,
    memory_kernel_mu,
    noise_kernel_nu,
)

# trapezoidal Volterra schemes want ~20 points per fastest oscillation
MAX_PHASE_PER_STEP = 0.05
U_BLOWUP = 1e-6
IMAG_RESIDUE_MAX = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise DomainError(f"t_end must be positive and finite, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor)


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    u: np.ndarray
    v: np.ndarray
    beta_b: float

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def violations(self, tol: float = 1e-9) -> list[str]:
        """Names of the trajectory invariants that do not hold."""
        bad = []
        if self.u[0] != 1:
            bad.append("u(0) != 1")
        if self.v[0] != 0:
            bad.append("v(0) != 0")
        if np.max(np.abs(self.u)) > 1 + tol:
            bad.append("|u| > 1")
        if np.min(self.v) < -tol:
            bad.append("v < 0")
        return bad


@dataclass(frozen=True)
class MasterCoefficients:
    times: np.ndarray
    Omega_t: np.ndarray
    gamma_t: np.ndarray
    gamma_beta_t: np.ndarray


def check_resolution(sd: SpectralDensity, omega0: float, grid: TimeGrid) -> bool:
    """Warn and return False when dt is too coarse for the fastest frequency."""
    fastest = max(omega0, characteristic_frequency(sd))
    ok = fastest * grid.dt <= MAX_PHASE_PER_STEP * (1 + 1e-12)
    if not ok:
        warnings.warn(
            f"dt = {grid.dt:.4g} gives a phase of {fastest * grid.dt:.3g} rad per step "
            f"(> {MAX_PHASE_PER_STEP}); consider n_steps >= {int(np.ceil(grid.t_end * fastest / MAX_PHASE_PER_STEP))}",
            stacklevel=2,
        )
    return ok


def solve_u(sd: SpectralDensity, omega0: float, grid: TimeGrid, mu=None) -> np.ndarray:
    """Dissipation function on the grid, second order in dt.

    Each step is the trapezoidal corrector for the ODE part combined with a
    trapezoidal convolution.  The equation is linear, so the corrector is
    solved exactly instead of being iterated from a predictor.

    Parameters
    ----------
    mu : array, optional
        Pre-tabulated memory kernel at ``grid.times``.
    """
    n, h = grid.n_steps, grid.dt
    mu = memory_kernel_mu(sd, grid.times) if mu is None else np.asarray(mu, dtype=complex)
    if mu.shape != (n + 1,):
        raise DomainError("kernel table does not match the grid")
    u = np.zeros(n + 1, dtype=complex)
    u[0] = 1.0
    force = -1j * omega0 * u[0]
    denom = 1.0 + 0.5 * h * (1j * omega0 + 0.5 * h * mu[0])
    for k in range(n):
        # convolution at t_{k+1} without its (unknown) u_{k+1} end point
        conv = h * (0.5 * mu[k + 1] * u[0] + np.dot(mu[k:0:-1], u[1:k + 1]))
        u[k + 1] = (u[k] + 0.5 * h * (force - conv)) / denom
        if abs(u[k + 1]) > 1 + U_BLOWUP:
            raise SolverError(
                f"|u| = {abs(u[k + 1]):.6g} exceeds 1 at t = {(k + 1) * h:.6g}; reduce dt"
            )
        force = -1j * omega0 * u[k + 1] - conv - 0.5 * h * mu[0] * u[k + 1]
    return u


def solve_v(sd: SpectralDensity, beta_b: float, u, grid: TimeGrid, nu=None) -> np.ndarray:
    """Noise function on the grid by an incremental two-dimensional trapezoid.

    The double sum ``x^H N x`` (``x`` the trapezoid-weighted u, ``N`` the
    Hermitian Toeplitz matrix of nu) is grown one grid point at a time; each
    step needs two running convolutions of nu with ``x``, so the total work
    is O(n_steps**2).  The imaginary part of the new diagonal block only
    monitors the Hermiticity of the kernel table and is discarded.
    """
    if not beta_b > 0:
        raise DomainError(f"beta_b must be positive, got {beta_b}")
    n, h = grid.n_steps, grid.dt
    a = np.asarray(u, dtype=complex)
    if a.shape != (n + 1,):
        raise DomainError("u does not match the grid")
    nu = noise_kernel_nu(sd, beta_b, grid.times) if nu is None else np.asarray(nu, dtype=complex)
    # lag table: lags[n + k] = nu(k dt) for k >= 0, conj(nu(-k dt)) for k < 0
    lags = np.concatenate([np.conj(nu[:0:-1]), nu])
    x = np.zeros(n + 1, dtype=complex)
    v = np.zeros(n + 1)
    total = 0.0 + 0.0j
    worst = 0.0
    half = 0.5 * h
    for k in range(n):
        p, q = k, k + 1
        xs = np.conj(x[: q + 1])
        # sum_i conj(x_i) nu(t_i - t_p), and likewise for q; the mirrored
        # terms delta^H N x are their conjugates because the table is Hermitian
        c_p = np.dot(xs, lags[n - p: n + 2])
        c_q = np.dot(xs, lags[n - q: n + 1])
        dp, dq = half * a[p], half * a[q]
        cross = 2.0 * (c_p * dp + c_q * dq).real
        corner = (np.conj(dp) * lags[n] * dp + np.conj(dp) * lags[n - 1] * dq
                  + np.conj(dq) * lags[n + 1] * dp + np.conj(dq) * lags[n] * dq)
        total += cross + corner
        x[p] += dp
        x[q] += dq
        v[q] = total.real
        worst = max(worst, abs(total.imag))
    if worst > IMAG_RESIDUE_MAX:
        raise NumericalError(
            f"imaginary residue {worst:.3g} in v; the noise kernel table is not Hermitian",
            estimate=worst,
        )
    return v


def richardson(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    """Combine second-order results on grids dt and dt/2 at the coarse points."""
    return (4.0 * fine[::2] - coarse) / 3.0


def propagate(sd: SpectralDensity, omega0: float, beta_b: float, grid: TimeGrid,
              *, extrapolate: bool = True) -> Trajectory:
    """Solve u and v together, optionally Richardson-extrapolated.

    With ``extrapolate`` the kernels are tabulated once on the half-step grid
    and the coarse solve reuses every second sample.
    """
    if not beta_b > 0:
        raise DomainError(f"beta_b must be positive, got {beta_b}")
    if not omega0 > 0:
        raise DomainError(f"omega0 must be positive, got {omega0}")
    check_resolution(sd, omega0, grid)
    if extrapolate:
        fine_grid = grid.refined(2)
        t = fine_grid.times
        mu, nu = memory_kernel_mu(sd, t), noise_kernel_nu(sd, beta_b, t)
        u_f = solve_u(sd, omega0, fine_grid, mu)
        v_f = solve_v(sd, beta_b, u_f, fine_grid, nu)
        u_c = solve_u(sd, omega0, grid, mu[::2])
        v_c = solve_v(sd, beta_b, u_c, grid, nu[::2])
        u, v = richardson(u_c, u_f), richardson(v_c, v_f)
        u[0], v[0] = 1.0, 0.0
    else:
        t = grid.times
        u = solve_u(sd, omega0, grid, memory_kernel_mu(sd, t))
        v = solve_v(sd, beta_b, u, grid, noise_kernel_nu(sd, beta_b, t))
    return Trajectory(grid, u, v, beta_b)


def markovian_rates(sd: SpectralDensity, omega0: float) -> tuple[float, float]:
    """Born-Markov decay rate kappa = pi J(w0) and Lamb shift Delta(w0)."""
    return float(np.pi * evaluate_density(sd, omega0)), float(lamb_shift(sd, omega0))


def markovian_trajectory(sd: SpectralDensity, omega0: float, beta_b: float, grid: TimeGrid) -> Trajectory:
    """Closed-form Born-Markov u and v on the grid."""
    if not beta_b > 0:
        raise DomainError(f"beta_b must be positive, got {beta_b}")
    kappa, delta = markovian_rates(sd, omega0)
    t = grid.times
    u = np.exp(-kappa * t - 1j * (omega0 + delta) * t)
    v = bose(beta_b, omega0) * -np.expm1(-2 * kappa * t)
    return Trajectory(grid, u, v, beta_b)


def _derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite differences: central inside, one-sided at the two end points each side."""
    if f.size < 5:
        return np.gradient(f, h, edge_order=2 if f.size > 2 else 1)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def master_coefficients(traj: Trajectory, tol: float = 1e-10) -> MasterCoefficients:
    """Renormalised frequency, dissipation and noise coefficients of the exact master equation.

    Derivatives are fourth-order central differences, one-sided at the ends,
    matching the order of the extrapolated trajectory.
    """
    small = np.flatnonzero(np.abs(traj.u) <= tol)
    if small.size:
        i = int(small[0])
        raise SingularCoefficientError(
            f"|u| <= {tol} at t = {traj.times[i]:.6g}; coefficients are singular there", index=i
        )
    h = traj.grid.dt
    du = _derivative(traj.u, h)
    dv = _derivative(traj.v, h)
    ratio = du / traj.u
    gamma = -ratio.real
    return MasterCoefficients(traj.times, -ratio.imag, gamma, dv + 2 * traj.v * gamma)
