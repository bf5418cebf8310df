"""Brute-force ground truth for the oscillator-plus-bath model.

Two independent routes:

* the single-excitation propagator of a finite bath, exact because the
  rotating-wave Hamiltonian conserves excitation number, giving u(t) and v(t)
  by one Hermitian eigendecomposition;
* a full Fock-space simulation of the two-point energy measurement on a
  few modes, giving the transition matrix P[l', l] without any use of the
  Gaussian-channel formulas.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericalError
from .heat import HeatDistribution, choose_l_max
from .propagator import TimeGrid, Trajectory
from .spectral import Discrete, bose

FOCK_DIM_CAP = 65536
BATH_TAIL_MAX = 1e-8
_T_BLOCK = 512


@dataclass(frozen=True)
class SingleParticleModel:
    """System mode plus a finite set of bath modes in the one-excitation sector."""

    omega0: float
    modes: tuple[tuple[float, float], ...]

    @classmethod
    def from_density(cls, sd: Discrete, omega0: float) -> "SingleParticleModel":
        return cls(omega0, sd.modes)

    @property
    def dimension(self) -> int:
        return len(self.modes) + 1

    def matrix(self) -> np.ndarray:
        n = self.dimension
        h = np.zeros((n, n))
        h[0, 0] = self.omega0
        for k, (w, g) in enumerate(self.modes, start=1):
            h[k, k] = w
            h[0, k] = h[k, 0] = g
        return h


def single_particle_u_v(model: SingleParticleModel, beta_b: float, times) -> Trajectory:
    """u(t) = [exp(-iht)]_00 and v(t) = sum_k nbar(w_k) |[exp(-iht)]_0k|**2."""
    if not beta_b > 0:
        raise DomainError(f"beta_b must be positive, got {beta_b}")
    times = np.asarray(times, dtype=float)
    try:
        energies, vecs = np.linalg.eigh(model.matrix())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    row0 = vecs[0]
    occ = bose(beta_b, np.array([w for w, _ in model.modes])) if model.modes else None
    u = np.empty(times.size, dtype=complex)
    v = np.zeros(times.size)
    for start in range(0, times.size, _T_BLOCK):
        sl = slice(start, start + _T_BLOCK)
        phases = np.exp(-1j * np.outer(times[sl], energies))
        u[sl] = phases @ (row0 * row0)
        if occ is not None:
            amp = (phases * row0) @ vecs[1:].T
            v[sl] = (np.abs(amp) ** 2) @ occ
    n = times.size - 1
    grid = TimeGrid(float(times[-1]) if n else 1.0, max(n, 1))
    return Trajectory(grid, u, v, beta_b)


@dataclass(frozen=True)
class FockModel:
    """Truncated product Fock space of the system and up to three bath modes.

    ``n_max`` is the per-mode cutoff of the bath modes; ``n_sys`` the cutoff of
    the system oscillator (defaults to ``n_max``).
    """

    omega0: float
    modes: tuple[tuple[float, float], ...]
    n_max: int
    beta_s: float
    beta_b: float
    n_sys: int | None = None

    def __post_init__(self):
        if len(self.modes) > 3:
            raise ConfigError("the Fock oracle supports at most three bath modes")
        if self.n_max < 1 or (self.n_sys is not None and self.n_sys < 1):
            raise ConfigError("Fock cutoffs must be at least 1")
        if self.dimension > FOCK_DIM_CAP:
            raise ConfigError(f"Fock dimension {self.dimension} exceeds the cap {FOCK_DIM_CAP}")
        if self.thermal_tail() >= BATH_TAIL_MAX:
            raise ConfigError(
                f"bath thermal tail {self.thermal_tail():.3g} at n_max = {self.n_max} is not below {BATH_TAIL_MAX}"
            )

    @property
    def system_cutoff(self) -> int:
        return self.n_max if self.n_sys is None else self.n_sys

    @property
    def dimension(self) -> int:
        return (self.system_cutoff + 1) * (self.n_max + 1) ** len(self.modes)

    def bath_populations(self) -> np.ndarray:
        """Renormalised truncated Gibbs weights of every bath occupation tuple."""
        levels = np.arange(self.n_max + 1)
        p = np.ones(1)
        for w, _ in self.modes:
            pk = np.exp(-self.beta_b * w * levels)
            p = np.multiply.outer(p, pk / pk.sum()).ravel()
        return p

    def thermal_tail(self) -> float:
        """Largest discarded Gibbs weight among the bath modes."""
        return max((float(np.exp(-self.beta_b * w * (self.n_max + 1))) for w, _ in self.modes), default=0.0)


def _sectors(model: FockModel):
    """Basis states grouped by total excitation number (conserved by H)."""
    ranges = [range(model.system_cutoff + 1)] + [range(model.n_max + 1)] * len(model.modes)
    states = list(itertools.product(*ranges))
    by_n: dict[int, list[tuple[int, ...]]] = {}
    for st in states:
        by_n.setdefault(sum(st), []).append(st)
    return by_n


def _sector_hamiltonian(model: FockModel, states):
    index = {st: i for i, st in enumerate(states)}
    freqs = np.array([model.omega0] + [w for w, _ in model.modes])
    h = np.diag(np.array(states, dtype=float) @ freqs)
    for i, st in enumerate(states):
        l = st[0]
        for k, (_, g) in enumerate(model.modes, start=1):
            # g a^dag b_k: moves one quantum from mode k to the system
            if st[k] > 0:
                tgt = list(st)
                tgt[0] += 1
                tgt[k] -= 1
                j = index.get(tuple(tgt))
                if j is not None:
                    amp = g * np.sqrt((l + 1) * st[k])
                    h[j, i] += amp
                    h[i, j] += amp
    return h


def fock_transition_matrix(model: FockModel, tau: float) -> np.ndarray:
    """P[l', l] from the two-point measurement on the truncated Fock space.

    Every block of fixed total excitation number is exponentiated through its
    Hermitian eigendecomposition.
    """
    if not np.isfinite(tau):
        raise DomainError("tau must be finite")
    n_sys = model.system_cutoff
    p_bath = model.bath_populations()
    bath_shape = (model.n_max + 1,) * len(model.modes)
    P = np.zeros((n_sys + 1, n_sys + 1))
    for states in _sectors(model).values():
        h = _sector_hamiltonian(model, states)
        e, vecs = np.linalg.eigh(h)
        U = (vecs * np.exp(-1j * e * tau)) @ vecs.conj().T
        prob = np.abs(U) ** 2  # prob[final, initial]
        arr = np.array(states)
        sys_level = arr[:, 0]
        bath_idx = np.ravel_multi_index(arr[:, 1:].T, bath_shape) if model.modes else np.zeros(len(states), int)
        weight = p_bath[bath_idx]
        contrib = prob * weight[None, :]
        # sum over initial bath states (weighted) and final bath states
        np.add.at(P, (sys_level[:, None], sys_level[None, :]), contrib)
    return P


def fock_two_point_measurement(model: FockModel, tau: float):
    """Transition matrix and the induced heat distribution.

    The initial system populations are the Gibbs weights at ``beta_s``
    restricted to the levels kept and renormalised.
    """
    P = fock_transition_matrix(model, tau)
    n_sys = model.system_cutoff
    levels = np.arange(n_sys + 1)
    p0 = np.exp(-model.beta_s * model.omega0 * levels)
    p0 /= p0.sum()
    q = np.arange(-n_sys, n_sys + 1)
    probs = np.zeros(q.size)
    joint = P * p0[None, :]
    for lp in range(n_sys + 1):
        np.add.at(probs, lp - levels + n_sys, joint[lp])
    return P, HeatDistribution(model.omega0, q, probs)


def gibbs_cutoff(beta_s: float, omega0: float) -> int:
    """System cutoff whose discarded Gibbs weight meets the heat-module tail rule."""
    return choose_l_max(beta_s, omega0)
