"""psi-fractional integrals and derivatives of sampled functions.

Every kernel integral is taken in ``u = psi(tau)``, so no singular kernel
is ever handed to a generic quadrature. Integrals are product-trapezoid
sums built from the solver's corrector weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import special as sps

from .abm import KernelWeights
from .special import gamma_fn
from .weights import WeightFunction, make_builtin

_IDENTITY = make_builtin("identity")


@dataclass(frozen=True)
class SampledFunction:
    """Samples ``values[i] = f(grid[i])``; values may be scalars or d-vectors."""

    grid: np.ndarray
    values: np.ndarray
    uniform_h: Optional[float] = None

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid must be 1-d with at least two points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if len(values) != len(grid):
            raise ValueError(f"{len(values)} values for {len(grid)} grid points")
        if self.uniform_h is not None:
            dev = np.max(np.abs(np.diff(grid) - self.uniform_h))
            if dev > 1e-12 * self.uniform_h:
                raise ValueError(f"grid deviates from uniform step {self.uniform_h} by {dev:.3e}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, f: Callable, start: float, h: float, n: int) -> "SampledFunction":
        grid = start + h * np.arange(n + 1)
        return cls(grid, np.array([f(t) for t in grid]), uniform_h=h)

    @classmethod
    def from_trajectory(cls, traj) -> "SampledFunction":
        h = traj.meta.get("h")
        return cls(traj.grid, traj.states, uniform_h=h)

    def __len__(self) -> int:
        return len(self.grid)

    def map(self, fn: Callable) -> "SampledFunction":
        """Apply ``fn`` to every sample (e.g. an objective along a trajectory)."""
        return SampledFunction(self.grid, np.array([fn(v) for v in self.values]), self.uniform_h)


def _check_index(f: SampledFunction, t_index: int) -> None:
    if not 1 <= t_index < len(f):
        raise IndexError(f"t_index must lie in [1, {len(f) - 1}], got {t_index}")


class FracIntegrator:
    """Reusable ``I^order`` on one grid; cheaper than repeated :func:`frac_integral`."""

    def __init__(self, grid, w: WeightFunction, order: float):
        if not 0.0 < order <= 1.0:
            raise ValueError(f"order must lie in (0, 1]: {order}")
        self.kw = KernelWeights(grid, w, order)
        self.scale = 1.0 / gamma_fn(order)

    def at(self, values, t_index: int):
        a = self.kw.a(t_index - 1)
        return self.scale * (a @ np.asarray(values, dtype=float)[: t_index + 1])

    def all(self, values) -> np.ndarray:
        """Integral at every node; index 0 is zero."""
        values = np.asarray(values, dtype=float)
        out = np.zeros_like(values)
        for k in range(1, len(values)):
            out[k] = self.at(values, k)
        return out


def frac_integral(f: SampledFunction, w: WeightFunction, alpha: float, t_index: int):
    """``(I^alpha_{l,psi} f)(t_index)`` by the product trapezoid rule."""
    _check_index(f, t_index)
    return FracIntegrator(f.grid[: t_index + 1], w, alpha).at(f.values, t_index)


def weighted_derivative(f: SampledFunction, w: WeightFunction) -> np.ndarray:
    """``J_psi f = f' / psi'`` at every node, as a difference quotient in ``psi``.

    Interior nodes use the three-point formula on the nonuniform ``psi``
    grid; both ends use one-sided second-order formulas. Differencing in
    ``psi`` avoids dividing by ``psi' = 0`` at the start of ``t^k``.
    """
    p = w(f.grid)
    v = f.values
    h = np.diff(p)
    if v.ndim > 1:
        h = h[:, None]
    d = np.diff(v, axis=0) / h
    if len(p) < 3:
        return np.repeat(d[:1], len(p), axis=0)
    # derivatives of the local quadratic interpolant, from divided differences
    out = np.empty_like(v)
    hl, hr = h[:-1], h[1:]
    out[1:-1] = (hr * d[:-1] + hl * d[1:]) / (hl + hr)
    out[0] = d[0] - h[0] * (d[1] - d[0]) / (h[0] + h[1])
    out[-1] = d[-1] + h[-1] * (d[-1] - d[-2]) / (h[-2] + h[-1])
    return out


def _graded_weights(u: np.ndarray, n: int, alpha: float):
    """Weights of ``I^{1-alpha}(alpha u^(alpha-1) q)`` at node ``n`` with ``q`` linear in ``s``.

    Returns the left/right node weights per cell, already divided by
    ``Gamma(1 - alpha)``; the singular factor is integrated exactly.
    """
    U = u[n]
    x = np.minimum(u[: n + 1] / U, 1.0)
    s = u[: n + 1] ** alpha
    m0 = alpha * sps.beta(alpha, 1 - alpha) * np.diff(sps.betainc(alpha, 1 - alpha, x))
    m1 = alpha * U**alpha * sps.beta(2 * alpha, 1 - alpha) * np.diff(sps.betainc(2 * alpha, 1 - alpha, x))
    ds = np.diff(s)
    scale = 1.0 / gamma_fn(1 - alpha)
    return scale * (s[1:] * m0 - m1) / ds, scale * (m1 - s[:-1] * m0) / ds


def _graded_slopes(f: SampledFunction, w: WeightFunction, alpha: float):
    u = w(f.grid) - w(f.grid[0])
    s = u**alpha
    return u, weighted_derivative(SampledFunction(s, f.values), _IDENTITY)


def caputo_deriv_estimate(f: SampledFunction, w: WeightFunction, alpha: float, t_index: int):
    """``(I^{1-alpha} J_psi f)(t_index)``; for ``alpha = 1`` just ``J_psi f``.

    ``J_psi f`` is written as ``alpha u**(alpha-1) df/ds`` with
    ``u = psi - psi(l)`` and ``s = u**alpha``. The slope ``df/ds`` comes
    from three-point differences over the whole sample and is taken
    piecewise linear in ``s``; the factor ``u**(alpha-1)`` and the kernel
    are integrated exactly. Solutions of fractional flows behave like
    ``c0 + c1 s`` near ``l``, which this resolves where differencing in
    ``t`` does not.
    """
    _check_index(f, t_index)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1]: {alpha}")
    if alpha == 1.0:
        return weighted_derivative(f, w)[t_index]
    u, q = _graded_slopes(f, w, alpha)
    wl, wr = _graded_weights(u, t_index, alpha)
    return wl @ q[:t_index] + wr @ q[1 : t_index + 1]


def caputo_deriv_all(f: SampledFunction, w: WeightFunction, alpha: float) -> np.ndarray:
    """:func:`caputo_deriv_estimate` at every node ``1..N``; index 0 is ``nan``."""
    if alpha == 1.0:
        out = weighted_derivative(f, w).astype(float)
        out[0] = np.nan
        return out
    u, q = _graded_slopes(f, w, alpha)
    out = np.full(q.shape, np.nan)
    for n in range(1, len(f)):
        wl, wr = _graded_weights(u, n, alpha)
        out[n] = wl @ q[:n] + wr @ q[1 : n + 1]
    return out


class ProbeResult(NamedTuple):
    lhs: float
    rhs: float
    slack: float


def chain_rule_probe(traj: SampledFunction, g, w: WeightFunction, alpha: float, t_index: int) -> ProbeResult:
    """Compare ``D^alpha g(x(t))`` with ``<grad g(x(t)), D^alpha x(t)>``.

    For convex ``g`` the first should not exceed the second, so
    ``slack = rhs - lhs`` is expected to be non-negative up to
    discretisation error. ``g`` needs ``f`` and ``grad`` attributes.
    """
    composed = traj.map(g.f)
    lhs = float(caputo_deriv_estimate(composed, w, alpha, t_index))
    dx = np.atleast_1d(caputo_deriv_estimate(traj, w, alpha, t_index))
    rhs = float(np.dot(np.atleast_1d(g.grad(traj.values[t_index])), dx))
    return ProbeResult(lhs, rhs, rhs - lhs)


def jensen_probe(traj: SampledFunction, phi: Callable, w: WeightFunction, alpha: float, t_index: int) -> ProbeResult:
    """Both sides of the fractional Jensen inequality at ``t_index``.

    ``lhs = phi(mean)`` and ``rhs = mean of phi`` for the weighted average
    ``Gamma(alpha+1) / (psi(t)-psi(l))**alpha * I^alpha``.
    """
    _check_index(traj, t_index)
    integ = FracIntegrator(traj.grid[: t_index + 1], w, alpha)
    u = float(w(traj.grid[t_index]) - w(traj.grid[0]))
    norm = gamma_fn(alpha + 1) / u**alpha
    mean = norm * integ.at(traj.values, t_index)
    lhs = float(phi(mean))
    rhs = float(norm * integ.at(np.array([phi(v) for v in traj.values[: t_index + 1]]), t_index))
    return ProbeResult(lhs, rhs, rhs - lhs)
