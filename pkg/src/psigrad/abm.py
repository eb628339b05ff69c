"""Adams-Bashforth-Moulton predictor-corrector for psi-fractional IVPs.

The scheme integrates the Volterra form of ``D^alpha x = g(t, x)`` with a
piecewise-constant predictor and a piecewise-linear (hat basis) corrector.
All kernel integrals are taken in the variable ``u = psi(tau)``, so the
predictor weights are closed-form and the corrector weights only need the
smooth cell integrals of ``(psi(t_{k+1}) - psi(tau))**alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special as sps

from .special import gamma_fn, ml_eval
from .weights import WeightFunction

Rhs = Callable[[float, np.ndarray], np.ndarray]

OVERFLOW_GUARD = 1e12
N_GAUSS = 16


class DivergenceError(RuntimeError):
    """The state left the overflow guard; ``trajectory`` holds the steps so far."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


class ReferenceUnavailableError(ValueError):
    pass


@dataclass(frozen=True)
class FractionalIVP:
    """``D^alpha x = g(t, x)`` on ``t >= start``.

    Exactly one of ``x0`` (Caputo, ``x(start) = x0``) or ``rl_init``
    (Riemann-Liouville, ``I^{1-alpha} x(start+) = rl_init``) must be given.
    """

    alpha: float
    w: WeightFunction
    rhs: Rhs
    x0: Optional[np.ndarray] = None
    rl_init: Optional[np.ndarray] = None
    start: Optional[float] = None
    lipschitz: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1]: {self.alpha}")
        if (self.x0 is None) == (self.rl_init is None):
            raise ValueError("set exactly one of x0 (Caputo) or rl_init (Riemann-Liouville)")
        if self.start is None:
            object.__setattr__(self, "start", self.w.start)
        if self.start < self.w.start:
            raise ValueError("IVP starts before the weight's domain")
        for name in ("x0", "rl_init"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(v, dtype=float)))

    @property
    def kind(self) -> str:
        return "caputo" if self.x0 is not None else "riemann_liouville"

    @property
    def init(self) -> np.ndarray:
        return self.x0 if self.x0 is not None else self.rl_init


@dataclass(frozen=True)
class AbmConfig:
    h: float
    n_steps: int
    corrector_iters: int = 5
    corrector_weights: str = "exact"

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.corrector_iters < 1:
            raise ValueError("corrector_iters must be >= 1")
        if self.corrector_weights not in ("exact", "paper_approx"):
            raise ValueError(f"unknown corrector_weights {self.corrector_weights!r}")

    @classmethod
    def from_horizon(cls, h: float, T: float, start: float = 0.0, **kw) -> "AbmConfig":
        n = round((T - start) / h)
        if n < 1 or abs(n * h - (T - start)) > 1e-12 * max(1.0, abs(T - start)) + 1e-12:
            raise ValueError(f"h={h} does not divide the horizon [{start}, {T}]")
        return cls(h=h, n_steps=n, **kw)


@dataclass
class Trajectory:
    grid: np.ndarray
    states: np.ndarray
    predictor_states: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.states) != len(self.grid):
            raise ValueError("states and grid lengths differ")

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def truncated(self, n: int) -> "Trajectory":
        pred = None if self.predictor_states is None else self.predictor_states[:n]
        return Trajectory(self.grid[:n], self.states[:n], pred, dict(self.meta))


# {{{ coefficients


def _uniformish(grid: np.ndarray) -> None:
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")


class KernelWeights:
    """Per-grid cache of the predictor and corrector weights of one order.

    ``b(k)`` returns ``b_{0..k,k+1}``; ``a(k)`` returns ``a_{0..k+1,k+1}``.
    Neither includes the ``1/Gamma(order)`` prefactor.
    """

    def __init__(self, grid, w: WeightFunction, order: float):
        self.t = np.asarray(grid, dtype=float)
        _uniformish(self.t)
        self.order = float(order)
        self.w = w
        self.psi = w(self.t)
        self.widths = np.diff(self.t)

        x, wq = np.polynomial.legendre.leggauss(N_GAUSS)
        self._wgl = wq / 2
        self._psi_gl = w(self.t[:-1, None] + self.widths[:, None] * (x[None, :] + 1) / 2)

        # last cell: Gauss-Jacobi with weight (1-x)^order absorbs the endpoint cusp
        xj, wj = sps.roots_jacobi(N_GAUSS, self.order, 0.0)
        self._wjac = wj
        self._gap_jac = (1 - xj) / 2  # (t_{k+1} - tau) / h_k
        self._psi_jac = w(self.t[1:, None] - self.widths[:, None] * self._gap_jac[None, :])

    def B(self, k: int) -> np.ndarray:
        """``(psi(t_{k+1}) - psi(t_i))**order / order`` for ``i = 0..k+1``."""
        P = self.psi[k + 1]
        return (P - self.psi[: k + 2]) ** self.order / self.order

    def b(self, k: int) -> np.ndarray:
        B = self.B(k)
        return B[:-1] - B[1:]

    def J(self, k: int) -> np.ndarray:
        """Cell averages ``(1/h_i) int_{cell i} (psi(t_{k+1}) - psi)^order / order``."""
        p = self.order
        P = self.psi[k + 1]
        out = np.empty(k + 1)
        if k:
            out[:k] = ((P - self._psi_gl[:k]) ** p) @ self._wgl / p
        hk = self.widths[k]
        ratio = (P - self._psi_jac[k]) / (self._gap_jac * hk)
        out[k] = (hk / 2) ** (p + 1) * (self._wjac @ ratio**p) / (p * hk)
        return out

    def a(self, k: int, mode: str = "exact") -> np.ndarray:
        if mode == "paper_approx":
            return self.a_paper_approx(k)
        J = self.J(k)
        out = np.empty(k + 2)
        out[0] = self.B(k)[0] - J[0]
        out[1 : k + 1] = J[:-1] - J[1:]
        out[k + 1] = J[k]
        return out

    def a_paper_approx(self, k: int) -> np.ndarray:
        # verbatim left/right-endpoint rule; its i = 0 entry is identically zero
        B = self.B(k)
        out = np.empty(k + 2)
        out[0] = B[0] - B[0]
        out[1 : k + 1] = B[1 : k + 1] - B[2 : k + 2]
        out[k + 1] = B[k]
        return out


def b_coeff(i: int, k: int, w: WeightFunction, alpha: float, grid) -> float:
    """Predictor weight ``int_{t_i}^{t_{i+1}} (psi(t_{k+1}) - psi)^(alpha-1) psi' dtau``."""
    if not 0 <= i <= k:
        raise IndexError(f"need 0 <= i <= k, got i={i}, k={k}")
    grid = np.asarray(grid, dtype=float)
    P, pi, pj = w(grid[k + 1]), w(grid[i]), w(grid[i + 1])
    return float(((P - pi) ** alpha - (P - pj) ** alpha) / alpha)


def b_coeffs(k: int, w: WeightFunction, alpha: float, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)[: k + 2]
    psi = w(grid)
    B = (psi[k + 1] - psi) ** alpha / alpha
    return B[:-1] - B[1:]


def a_coeffs(k: int, w: WeightFunction, alpha: float, grid, mode: str = "exact") -> np.ndarray:
    """Corrector weights ``a_{0..k+1,k+1}`` on the first ``k + 2`` grid nodes."""
    grid = np.asarray(grid, dtype=float)
    if len(grid) < k + 2:
        raise ValueError(f"grid needs {k + 2} nodes, has {len(grid)}")
    return KernelWeights(grid[: k + 2], w, alpha).a(k, mode)


# }}}


# {{{ solvers


def _check_state(x: np.ndarray, k: int, traj_fn) -> None:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > OVERFLOW_GUARD:
        raise DivergenceError(f"state exceeded {OVERFLOW_GUARD:g} at step {k}", traj_fn())


def _grid(ivp: FractionalIVP, cfg: AbmConfig) -> np.ndarray:
    return ivp.start + cfg.h * np.arange(cfg.n_steps + 1)


def _meta(ivp: FractionalIVP, cfg: AbmConfig, **extra) -> dict:
    return {
        "alpha": ivp.alpha,
        "weight": ivp.w.label,
        "h": cfg.h,
        "corrector_iters": cfg.corrector_iters,
        "corrector_weights": cfg.corrector_weights,
        "kind": ivp.kind,
        **extra,
    }


def abm_solve(ivp: FractionalIVP, cfg: AbmConfig) -> Trajectory:
    """Solve a Caputo-type IVP with the predictor-corrector scheme."""
    if ivp.kind != "caputo":
        raise ValueError("abm_solve needs a Caputo IVP (x0); use rl_solve")
    alpha, g = ivp.alpha, ivp.rhs
    t = _grid(ivp, cfg)
    n = cfg.n_steps
    x0 = ivp.x0
    d = x0.size
    ginv = 1.0 / gamma_fn(alpha)
    kw = KernelWeights(t, ivp.w, alpha)

    x = np.empty((n + 1, d))
    xp = np.full((n + 1, d), np.nan)
    G = np.empty((n + 1, d))
    x[0] = x0
    G[0] = g(t[0], x0)

    def partial(upto):
        return lambda: Trajectory(t[:upto], x[:upto], xp[:upto], _meta(ivp, cfg, diverged=True))

    for k in range(n):
        pred = x0 + ginv * (kw.b(k) @ G[: k + 1])
        a = kw.a(k, cfg.corrector_weights)
        hist = x0 + ginv * (a[: k + 1] @ G[: k + 1])
        _check_state(pred, k + 1, partial(k + 1))
        xp[k + 1] = pred
        xc = pred
        for _ in range(cfg.corrector_iters):
            xc = hist + ginv * a[k + 1] * np.asarray(g(t[k + 1], xc), dtype=float)
        _check_state(xc, k + 1, partial(k + 1))
        x[k + 1] = xc
        G[k + 1] = g(t[k + 1], xc)

    return Trajectory(t, x, xp, _meta(ivp, cfg))


SINGULAR_CELLS = 32


def _kernel_moments(lo, hi, U: float, alpha: float):
    """``int (U - v)^(alpha-1) v^(alpha-1) v^(m alpha) dv`` over ``[lo, hi]``, m = 0, 1."""
    xl, xh = np.minimum(lo / U, 1.0), np.minimum(hi / U, 1.0)
    m0 = U ** (2 * alpha - 1) * sps.beta(alpha, alpha) * (sps.betainc(alpha, alpha, xh) - sps.betainc(alpha, alpha, xl))
    m1 = U ** (3 * alpha - 1) * sps.beta(2 * alpha, alpha) * (
        sps.betainc(2 * alpha, alpha, xh) - sps.betainc(2 * alpha, alpha, xl)
    )
    return m0, m1


def _singular_weights(u: np.ndarray, n: int, m: int, alpha: float):
    """Weights on ``G_1..G_m`` for the integral over ``[u_0, u_m]`` at node ``n``.

    ``G`` is modelled as ``u**(alpha-1) V`` with ``V`` piecewise linear in
    ``s = u**alpha`` (the natural variable of Mittag-Leffler-type
    solutions); the first cell extrapolates the ``[u_1, u_2]`` segment.
    Returns the corrector weights and the left-endpoint (predictor) weights.
    """
    U = u[n]
    s = u[: m + 1] ** alpha
    scale = u[1 : m + 1] ** (1 - alpha)
    corr = np.zeros(m)
    pred = np.zeros(m)
    m0, m1 = _kernel_moments(u[0], u[1], U, alpha)
    pred[0] += m0
    if m == 1:
        corr[0] += m0
    else:
        ds = s[2] - s[1]
        corr[0] += (s[2] * m0 - m1) / ds
        corr[1] += (m1 - s[1] * m0) / ds
        lo, hi = u[1:m], u[2 : m + 1]
        m0, m1 = _kernel_moments(lo, hi, U, alpha)
        sl, sh = s[1:m], s[2 : m + 1]
        ds = sh - sl
        corr[:-1] += (sh * m0 - m1) / ds
        corr[1:] += (m1 - sl * m0) / ds
        pred[:-1] += m0
    return corr * scale, pred * scale


def rl_solve(ivp: FractionalIVP, cfg: AbmConfig) -> Trajectory:
    """Solve a Riemann-Liouville-type IVP through its Volterra form.

    The singular term ``y0 (psi(t) - psi(a))**(alpha-1) / Gamma(alpha)`` is
    added analytically. On the first ``SINGULAR_CELLS`` cells the integrand
    is written as ``u**(alpha-1) V`` (``u = psi - psi(a)``) and ``V`` is
    interpolated instead, so the weights absorb the singular layer; later
    cells use the standard predictor/corrector weights. ``states[0]`` is
    ``nan``; the initial datum is kept in ``meta["rl_init"]``.
    """
    if ivp.kind != "riemann_liouville":
        raise ValueError("rl_solve needs a Riemann-Liouville IVP (rl_init)")
    alpha, g = ivp.alpha, ivp.rhs
    if alpha == 1.0:
        caputo = FractionalIVP(alpha, ivp.w, g, x0=ivp.rl_init, start=ivp.start, lipschitz=ivp.lipschitz)
        traj = abm_solve(caputo, cfg)
        traj.meta.update(kind="riemann_liouville", rl_init=ivp.rl_init.tolist())
        return traj
    if cfg.corrector_weights != "exact":
        raise ValueError("rl_solve supports only exact corrector weights")

    t = _grid(ivp, cfg)
    n = cfg.n_steps
    y0 = ivp.rl_init
    d = y0.size
    ginv = 1.0 / gamma_fn(alpha)
    kw = KernelWeights(t, ivp.w, alpha)
    u = kw.psi - kw.psi[0]
    sing = np.zeros((n + 1, d))
    sing[1:] = ginv * y0[None, :] * u[1:, None] ** (alpha - 1)

    y = np.full((n + 1, d), np.nan)
    yp = np.full((n + 1, d), np.nan)
    G = np.full((n + 1, d), np.nan)
    meta = _meta(ivp, cfg, rl_init=y0.tolist())

    def partial(upto):
        return lambda: Trajectory(t[:upto], y[:upto], yp[:upto], dict(meta, diverged=True))

    first = 0
    if n >= 2:
        # starting block: nodes 1 and 2 share the extrapolated first-cell model
        m0, m1 = _kernel_moments(u[0], u[1], u[1], alpha)
        s1, s2 = u[1] ** alpha, u[2] ** alpha
        c1 = np.array([(s2 * m0 - m1) * u[1] ** (1 - alpha), (m1 - s1 * m0) * u[2] ** (1 - alpha)]) / (s2 - s1)
        c2, _ = _singular_weights(u, 2, 2, alpha)
        y1, y2 = sing[1].copy(), sing[2].copy()
        yp[1], yp[2] = y1, y2
        for _ in range(2 * cfg.corrector_iters):
            g1 = np.asarray(g(t[1], y1), dtype=float)
            g2 = np.asarray(g(t[2], y2), dtype=float)
            y1 = sing[1] + ginv * (c1[0] * g1 + c1[1] * g2)
            y2 = sing[2] + ginv * (c2[0] * g1 + c2[1] * g2)
        _check_state(np.concatenate([y1, y2]), 2, partial(1))
        y[1], y[2] = y1, y2
        G[1], G[2] = g(t[1], y1), g(t[2], y2)
        first = 2

    for k in range(first, n):
        nxt = k + 1
        m = min(SINGULAR_CELLS, nxt)
        corr_s, pred_s = _singular_weights(u, nxt, m, alpha)
        pred = sing[nxt] + ginv * (pred_s[: min(m, k)] @ G[1 : min(m, k) + 1])
        if m < nxt:
            # standard cells m..k on nodes m..k+1
            B, J = kw.B(k), kw.J(k)
            a = np.empty(nxt - m + 1)
            a[0] = B[m] - J[m]
            a[1:-1] = J[m:k] - J[m + 1 : k + 1]
            a[-1] = J[k]
            pred = pred + ginv * (kw.b(k)[m:] @ G[m : k + 1])
            hist = sing[nxt] + ginv * (corr_s @ G[1 : m + 1] + a[:-1] @ G[m : k + 1])
            implicit = a[-1]
        else:
            hist = sing[nxt] + ginv * (corr_s[:-1] @ G[1:m])
            implicit = corr_s[-1]
        _check_state(pred, nxt, partial(nxt))
        yp[nxt] = pred
        yc = pred
        for _ in range(cfg.corrector_iters):
            yc = hist + ginv * implicit * np.asarray(g(t[nxt], yc), dtype=float)
        _check_state(yc, nxt, partial(nxt))
        y[nxt] = yc
        G[nxt] = g(t[nxt], yc)

    return Trajectory(t, y, yp, meta)


def solve(ivp: FractionalIVP, cfg: AbmConfig) -> Trajectory:
    return abm_solve(ivp, cfg) if ivp.kind == "caputo" else rl_solve(ivp, cfg)


# }}}


# {{{ convergence order


def linear_test(alpha: float, w: WeightFunction, lam: float = 1.0, x0: float = 1.0):
    """``D^alpha x = -lam x`` with ``x(l) = x0`` and its exact solution.

    Returns ``(ivp, exact)`` where ``exact(t) = x0 E_alpha(-lam (psi(t) - psi(l))**alpha)``.
    """
    ivp = FractionalIVP(alpha, w, lambda t, x: -lam * x, x0=[x0])
    p0 = float(w(w.start))

    def exact(t):
        t = np.asarray(t, dtype=float)
        u = w(t) - p0
        return x0 * np.vectorize(lambda v: ml_eval((alpha, 1.0), -lam * v**alpha))(u)

    return ivp, exact


@dataclass
class OrderResult:
    hs: list
    errors: list
    orders: list


def empirical_order(
    ivp: FractionalIVP,
    base_cfg: AbmConfig,
    n_halvings: int,
    reference: "Callable[[float], np.ndarray] | str" = "richardson",
) -> OrderResult:
    """Observed order ``log2(err(h) / err(h/2))`` at the final time.

    ``reference`` is either the exact solution ``t -> x(t)`` or
    ``"richardson"``, which compares successive refinements instead.
    """
    levels = n_halvings + 1
    if isinstance(reference, str) and reference == "richardson" and levels < 3:
        raise ReferenceUnavailableError("Richardson estimation needs at least three levels")
    if n_halvings < 2:
        raise ValueError("n_halvings must be >= 2")
    T = ivp.start + base_cfg.h * base_cfg.n_steps
    hs, finals = [], []
    for j in range(levels):
        cfg = AbmConfig(
            h=base_cfg.h / 2**j,
            n_steps=base_cfg.n_steps * 2**j,
            corrector_iters=base_cfg.corrector_iters,
            corrector_weights=base_cfg.corrector_weights,
        )
        traj = solve(ivp, cfg)
        hs.append(cfg.h)
        finals.append(traj.states[-1])

    if callable(reference):
        exact = np.atleast_1d(np.asarray(reference(T), dtype=float))
        errors = [float(np.max(np.abs(x - exact))) for x in finals]
        orders = [math.log2(errors[j] / errors[j + 1]) for j in range(levels - 1)]
    elif reference == "richardson":
        errors = [float(np.max(np.abs(finals[j] - finals[j + 1]))) for j in range(levels - 1)]
        orders = [math.log2(errors[j] / errors[j + 1]) for j in range(levels - 2)]
    else:
        raise ReferenceUnavailableError(f"unknown reference {reference!r}")
    return OrderResult(hs, errors, orders)


# }}}
