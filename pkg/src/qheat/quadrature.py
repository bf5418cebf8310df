"""Adaptive composite Gauss-Legendre quadrature.

The integrand is called with a 1-D array of nodes and may return either one
value per node or a row of values per node, so a whole family of integrals
(for example a kernel at many times) shares one adaptive partition.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureError

RTOL = 1e-11
ORDER = 20
MAX_PANELS = 1 << 17
# elements (nodes x components) evaluated per integrand call
_CHUNK = 1 << 21


@lru_cache(maxsize=8)
def _rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def fixed_nodes(edges, order: int = ORDER):
    """Nodes and weights of the composite rule on consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _rule(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


class _Panels:
    """Evaluates per-panel Gauss-Legendre sums with bounded memory."""

    def __init__(self, f, order):
        self.f = f
        self.x, self.w = _rule(order)
        self.order = order
        self.width = None  # number of components, learned on first call

    def __call__(self, lo, hi):
        n = lo.size
        if n == 0:
            shape = (0,) if self.width is None else (0, self.width)
            return np.zeros(shape), np.zeros(shape)
        step = n if self.width is None else max(1, _CHUNK // (self.order * max(self.width, 1)))
        vals, absvals = [], []
        for start in range(0, n, step):
            a, b = lo[start:start + step], hi[start:start + step]
            half = 0.5 * (b - a)
            nodes = (0.5 * (a + b))[:, None] + half[:, None] * self.x
            y = np.asarray(self.f(nodes.ravel()))
            if self.width is None:
                self.width = 1 if y.ndim == 1 else y.shape[1]
                self.vector = y.ndim > 1
            y = y.reshape(a.size, self.order, -1)
            wk = half[:, None] * self.w
            vals.append(np.einsum("pk,pkm->pm", wk, y))
            absvals.append(np.einsum("pk,pkm->pm", np.abs(wk), np.abs(y)))
        return np.concatenate(vals), np.concatenate(absvals)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    rtol: float = RTOL,
    atol: float = 0.0,
    order: int = ORDER,
    breakpoints: Sequence[float] = (),
    max_panels: int = MAX_PANELS,
    full_output: bool = False,
):
    """Integrate ``f`` over ``[a, b]`` by adaptive panel bisection.

    Every panel whose Gauss-Legendre estimate disagrees with the sum over its
    two halves is split, until the summed disagreement falls below
    ``max(atol, rtol * |I|)``.  Panels with integrable endpoint singularities
    are graded geometrically by the same mechanism.

    Parameters
    ----------
    f : callable
        Vectorised integrand.  Receives nodes of shape ``(n,)`` and returns
        shape ``(n,)`` or ``(n, m)``.
    a, b : float
        Finite integration limits, ``a <= b``.
    rtol, atol : float
        Relative and absolute tolerance.  The relative tolerance is measured
        against the largest component of the integral.
    breakpoints : sequence of float
        Points where the integrand is known to be rough; they become panel
        edges of the initial partition.
    full_output : bool
        Also return ``(error_estimate, n_panels)``.

    Returns
    -------
    value : float, complex or ndarray
    """
    a, b = float(a), float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise QuadratureError("integration limits must be finite")
    if b < a:
        raise QuadratureError(f"empty interval [{a}, {b}]")
    if a == b:
        z = np.zeros(np.asarray(f(np.array([a]))).shape[1:])
        z = z[()] if z.ndim == 0 else z
        return (z, 0.0, 0) if full_output else z

    inner = sorted({float(p) for p in breakpoints if a < p < b})
    edges = np.array([a, *inner, b])
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    est = _Panels(f, order)
    whole, _ = est(lo, hi)

    done = np.zeros(whole.shape[1], dtype=whole.dtype)
    done_abs = np.zeros(whole.shape[1])
    done_err = 0.0
    eps = np.finfo(float).eps
    while True:
        mid = 0.5 * (lo + hi)
        left, left_abs = est(lo, mid)
        right, right_abs = est(mid, hi)
        fine = left + right
        err = np.max(np.abs(fine - whole), axis=1)
        total = done + fine.sum(axis=0)
        total_abs = done_abs + (left_abs + right_abs).sum(axis=0)
        scale = max(atol, rtol * np.max(np.abs(total)), 64 * eps * np.max(total_abs))
        if done_err + err.sum() <= scale:
            break
        if 2 * lo.size > max_panels:
            raise QuadratureError(
                f"quadrature did not converge on [{a}, {b}] within {max_panels} panels",
                estimate=float(done_err + err.sum()),
            )
        # accept the cheapest panels while they fit in half the remaining budget
        order_ = np.argsort(err, kind="stable")
        budget = 0.5 * max(scale - done_err, 0.0)
        n_ok = int(np.searchsorted(np.cumsum(err[order_]), budget, side="right"))
        ok = np.zeros(lo.size, dtype=bool)
        ok[order_[:n_ok]] = True
        done = done + fine[ok].sum(axis=0)
        done_abs = done_abs + (left_abs[ok] + right_abs[ok]).sum(axis=0)
        done_err += float(err[ok].sum())
        keep = ~ok
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        # restore left-to-right order so summation order is reproducible
        idx = np.argsort(lo, kind="stable")
        lo, hi, whole = lo[idx], hi[idx], whole[idx]

    value = total if est.vector else total[0]
    if full_output:
        return value, float(done_err + err.sum()), int(2 * lo.size)
    return value
