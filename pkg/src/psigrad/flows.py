"""Fractional gradient flows ``D^alpha z = -beta grad f(z) + g(t)`` and their rate bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional

import numpy as np

from .abm import AbmConfig, FractionalIVP, KernelWeights, Trajectory, solve
from .fraccalc import FracIntegrator
from .objectives import MissingConstantError, Objective
from .special import gamma_fn, ml_eval
from .weights import WeightFunction

#: RL bound checks skip the singular layer ``t < l + SKIP_STEPS * h``.
SKIP_STEPS = 10


@dataclass(frozen=True)
class FlowSpec:
    kind: str
    objective: Objective
    beta: float
    alpha: float
    w: WeightFunction
    init: np.ndarray
    T: float
    h: float
    perturbation: Optional[Callable[[float], np.ndarray]] = None
    corrector_iters: int = 5

    def __post_init__(self) -> None:
        if self.kind not in ("caputo", "riemann_liouville"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1]: {self.alpha}")
        if not self.T > self.start:
            raise ValueError("horizon T must exceed the start")
        init = np.atleast_1d(np.asarray(self.init, dtype=float))
        if init.shape != (self.objective.dim,):
            raise ValueError(f"init has shape {init.shape}, objective needs ({self.objective.dim},)")
        object.__setattr__(self, "init", init)
        AbmConfig.from_horizon(self.h, self.T, self.start)  # validates divisibility

    @property
    def start(self) -> float:
        return self.w.start

    def rhs(self) -> Callable:
        grad, beta, pert = self.objective.grad, self.beta, self.perturbation
        if pert is None:
            return lambda t, x: -beta * grad(x)
        return lambda t, x: -beta * grad(x) + np.asarray(pert(t), dtype=float)

    def ivp(self) -> FractionalIVP:
        key = "x0" if self.kind == "caputo" else "rl_init"
        return FractionalIVP(self.alpha, self.w, self.rhs(), start=self.start, **{key: self.init})

    def config(self) -> AbmConfig:
        return AbmConfig.from_horizon(self.h, self.T, self.start, corrector_iters=self.corrector_iters)


def run_flow(spec: FlowSpec) -> Trajectory:
    traj = solve(spec.ivp(), spec.config())
    traj.meta.update(objective=spec.objective.name, beta=spec.beta)
    return traj


def averaged_iterate(traj: Trajectory, w: WeightFunction, alpha: float) -> Trajectory:
    """``Gamma(alpha+1) / (psi(t)-psi(l))**alpha * I^alpha z`` at ``t_1 .. t_N``."""
    integ = FracIntegrator(traj.grid, w, alpha)
    u = w(traj.grid) - w(traj.grid[0])
    norm = gamma_fn(alpha + 1) / u[1:] ** alpha
    avg = np.array([integ.at(traj.states, k) for k in range(1, len(traj))])
    return Trajectory(traj.grid[1:], avg * norm[:, None], meta=dict(traj.meta, averaged=True))


@dataclass
class BoundReport:
    times: np.ndarray
    observed: np.ndarray
    bound: np.ndarray
    tol: np.ndarray
    violated_at: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violated_at

    @property
    def worst_margin(self) -> float:
        """Largest ``observed - bound - tol``; negative means every point passes."""
        return float(np.max(self.observed - self.bound - self.tol))

    def to_csv(self, path) -> Path:
        path = Path(path)
        bad = self.observed > self.bound + self.tol
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "observed", "bound", "violated"])
            for t, o, b, v in zip(self.times, self.observed, self.bound, bad):
                wr.writerow([f"{t:.12e}", f"{o:.12e}", f"{b:.12e}", int(v)])
        return path


def _report(times, observed, bound, info, abs_tol=1e-6, rel_tol=1e-3) -> BoundReport:
    tol = abs_tol + rel_tol * np.abs(bound)
    bad = observed > bound + tol
    return BoundReport(times, observed, bound, tol, [float(t) for t in times[bad]], info)


def rl_initial_energy(traj: Trajectory, w: WeightFunction, alpha: float, y_star, cutoff_steps: int = SKIP_STEPS) -> float:
    """Finite stand-in for ``phi_0 = I^{1-alpha} ||z - y*||^2 / 2`` at ``l+``.

    For ``alpha < 1`` and a nonzero datum the exact value is infinite (the
    state blows up like ``u**(alpha-1)``). The integral is instead taken
    over ``[t_1, t_c]`` with ``t_c = l + cutoff_steps * h``. Dropping the
    first cell and evaluating later than ``l+`` both lower the value, so a
    bound built on it is stricter than the stated one.
    """
    c = cutoff_steps
    if len(traj) <= c:
        raise ValueError("trajectory too short for the energy cutoff")
    energy = 0.5 * np.sum((traj.states[1 : c + 1] - y_star) ** 2, axis=1)
    if alpha == 1.0:
        return float(0.5 * np.sum((traj.states[0] - y_star) ** 2))
    kw = KernelWeights(traj.grid[1 : c + 1], w, 1.0 - alpha)
    return float(kw.a(c - 2) @ energy / gamma_fn(1.0 - alpha))


def check_ml_bound(
    traj: Trajectory,
    spec: FlowSpec,
    which: str = "state_sq",
    abs_tol: float = 1e-6,
    rel_tol: float = 1e-3,
) -> BoundReport:
    """Compare a flow against its Mittag-Leffler envelope.

    Caputo: ``||z - y*||^2 <= ||z0 - y*||^2 E_alpha(-beta m_f u^alpha)``;
    the objective gap uses ``M_f / 2`` times the same right-hand side.
    Riemann-Liouville: ``||z - y*||^2 <= 2 phi_0 u^(alpha-1) E_{alpha,alpha}(-beta m_f u^alpha)``
    and the gap uses ``M_f phi_0`` in place of ``2 phi_0``; points with
    ``t < l + 10 h`` are skipped and ``phi_0`` comes from
    :func:`rl_initial_energy`.
    """
    obj = spec.objective
    obj.require("m_f", "y_star")
    if which == "objective_gap":
        obj.require("M_f", "f_star")
    elif which != "state_sq":
        raise ValueError(f"unknown bound {which!r}")
    alpha, beta, w = spec.alpha, spec.beta, spec.w
    y_star = np.asarray(obj.y_star, dtype=float)
    u_all = w(traj.grid) - w(spec.start)
    rate = beta * obj.m_f

    if which == "state_sq":
        observed_all = np.sum((traj.states - y_star) ** 2, axis=1)
    else:
        observed_all = np.array([obj.f(z) for z in traj.states]) - obj.f_star

    info = {"kind": spec.kind, "which": which}
    if spec.kind == "caputo" or alpha == 1.0:
        sl = slice(0, len(traj))
        lam = float(np.sum((traj.states[0] - y_star) ** 2)) if spec.kind == "caputo" else float(np.sum((spec.init - y_star) ** 2))
        const = lam if which == "state_sq" else 0.5 * obj.M_f * lam
        u = u_all[sl]
        env = np.array([ml_eval((alpha, 1.0), -rate * ui**alpha) for ui in u])
    else:
        sl = slice(SKIP_STEPS, len(traj))
        phi0 = rl_initial_energy(traj, w, alpha, y_star)
        info["phi0"] = phi0
        const = 2 * phi0 if which == "state_sq" else obj.M_f * phi0
        u = u_all[sl]
        env = u ** (alpha - 1) * np.array([ml_eval((alpha, alpha), -rate * ui**alpha) for ui in u])
    return _report(traj.grid[sl], observed_all[sl], const * env, info, abs_tol, rel_tol)


def check_averaged_rate(traj: Trajectory, spec: FlowSpec, abs_tol: float = 1e-3) -> BoundReport:
    """``f(z_avg(t)) - f* <= Gamma(alpha+1) lambda(l) / (beta u^alpha)`` for ``t > l + 10 h``."""
    obj = spec.objective
    obj.require("y_star", "f_star")
    avg = averaged_iterate(traj, spec.w, spec.alpha)
    lam = 0.5 * float(np.sum((traj.states[0] - obj.y_star) ** 2))
    keep = avg.grid > spec.start + SKIP_STEPS * spec.h
    t = avg.grid[keep]
    u = spec.w(t) - spec.w(spec.start)
    observed = np.array([obj.f(z) for z in avg.states[keep]]) - obj.f_star
    bound = gamma_fn(spec.alpha + 1) * lam / (spec.beta * u**spec.alpha)
    return _report(t, observed, bound, {"which": "averaged_gap", "lambda0": lam}, abs_tol, 0.0)


class RateFit(NamedTuple):
    omega: float
    intercept: float
    residual: float


def exponential_rate_fit(times, observed, w: WeightFunction) -> RateFit:
    """Least-squares fit ``log observed ~ c - omega psi(t)``.

    Diagnostic only: a finite horizon cannot decide whether an exponential
    rate in ``psi`` exists, so nothing is asserted from the result.
    """
    obs = np.asarray(observed, dtype=float)
    mask = obs > 0
    if mask.sum() < 2:
        raise ValueError("need at least two positive observations")
    x = w(np.asarray(times, dtype=float)[mask])
    y = np.log(obs[mask])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = float(math.sqrt(res[0] / mask.sum())) if res.size else 0.0
    return RateFit(-float(slope), float(icpt), r)


def require_beta_above(spec: FlowSpec) -> None:
    """Perturbed strong-convexity results need ``beta > 1 / m_f``."""
    m = spec.objective.m_f
    if m is None:
        raise MissingConstantError("perturbed bound needs m_f")
    if not spec.beta > 1.0 / m:
        raise ValueError(f"beta={spec.beta} must exceed 1/m_f={1.0 / m}")
