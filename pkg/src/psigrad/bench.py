"""RK4 baseline, benchmark sweeps and threshold timing."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .abm import OVERFLOW_GUARD, DivergenceError, Trajectory
from .flows import FlowSpec, run_flow
from .objectives import Objective, by_name
from .weights import from_config

THREADS_ENV = "PSIGRAD_THREADS"


def rk4_flow(objective: Objective, beta: float, z0, h: float, T: float, start: float = 0.0) -> Trajectory:
    """Classical RK4 on ``y' = -beta grad f(y)``."""
    n = round((T - start) / h)
    if n < 1:
        raise ValueError("horizon shorter than one step")
    grad = objective.grad
    t = start + h * np.arange(n + 1)
    y = np.empty((n + 1, np.size(z0)))
    y[0] = z0

    def F(x):
        return -beta * grad(x)

    for k in range(n):
        x = y[k]
        k1 = F(x)
        k2 = F(x + 0.5 * h * k1)
        k3 = F(x + 0.5 * h * k2)
        k4 = F(x + h * k3)
        nxt = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > OVERFLOW_GUARD:
            meta = {"method": "rk4", "h": h, "diverged": True}
            raise DivergenceError(f"RK4 state exceeded {OVERFLOW_GUARD:g} at step {k + 1}", Trajectory(t[: k + 1], y[: k + 1], meta=meta))
        y[k + 1] = nxt
    return Trajectory(t, y, meta={"method": "rk4", "h": h, "beta": beta, "objective": objective.name})


def time_to_threshold(times, distances, eps: float) -> Optional[float]:
    """First time with ``distance <= eps``, or ``None``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = np.asarray(distances, dtype=float)
    hit = np.flatnonzero(d <= eps)
    return float(np.asarray(times)[hit[0]]) if hit.size else None


@dataclass(frozen=True)
class SweepSpec:
    objective: str
    init: tuple
    alphas: tuple = (0.5, 0.8)
    weights: tuple = ({"family": "identity"},)
    beta: float = 1.0
    h: float = 1e-3
    T: float = 10.0
    include_rk4: bool = True
    corrector_iters: int = 5
    objective_params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for a in self.alphas:
            if not 0.0 < a <= 1.0:
                raise ValueError(f"alpha must lie in (0, 1]: {a}")
        for wc in self.weights:
            from_config(wc)


class SweepItem(NamedTuple):
    label: str
    trajectory: Optional[Trajectory]
    distance: np.ndarray
    error: Optional[str] = None


def _label(alpha: float, wlabel: str) -> str:
    return f"alpha={alpha:g},psi={wlabel}"


def _distance(traj: Trajectory, y_star) -> np.ndarray:
    return np.linalg.norm(traj.states - y_star, axis=1)


def _worker_count(n: int) -> int:
    env = os.environ.get(THREADS_ENV)
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n))


def run_sweep(s: SweepSpec, y_star=None) -> list:
    """One :class:`SweepItem` per ``(alpha, psi)`` pair, then RK4 if requested.

    Solver failures are recorded on the item (with the partial trajectory
    when the solver diverged) instead of aborting the sweep. Items come
    back in spec order regardless of how the pool schedules them.
    """
    if not s.alphas:
        return []
    obj = by_name(s.objective, **s.objective_params)
    if y_star is None:
        obj.require("y_star")
        y_star = obj.y_star
    y_star = np.asarray(y_star, dtype=float)
    init = np.asarray(s.init, dtype=float)

    jobs = []
    for a in s.alphas:
        for wc in s.weights:
            w = from_config(wc)
            spec = FlowSpec("caputo", obj, s.beta, a, w, init, T=w.start + s.T, h=s.h, corrector_iters=s.corrector_iters)
            jobs.append((_label(a, w.label), lambda spec=spec: run_flow(spec)))
    if s.include_rk4:
        jobs.append(("rk4", lambda: rk4_flow(obj, s.beta, init, s.h, s.T)))

    def run(job):
        label, fn = job
        try:
            traj = fn()
        except DivergenceError as exc:
            traj = exc.trajectory
            dist = _distance(traj, y_star) if traj is not None else np.array([])
            return SweepItem(label, traj, dist, f"diverged: {exc}")
        except (ValueError, ArithmeticError) as exc:
            return SweepItem(label, None, np.array([]), f"{type(exc).__name__}: {exc}")
        return SweepItem(label, traj, _distance(traj, y_star))

    with ThreadPoolExecutor(max_workers=_worker_count(len(jobs))) as pool:
        return list(pool.map(run, jobs))


def summarize(items, eps: float = 0.1) -> list:
    """Rows ``(label, time_to_eps, final_distance)``."""
    rows = []
    for it in items:
        if it.trajectory is None or it.distance.size == 0:
            rows.append((it.label, None, None))
            continue
        rows.append((it.label, time_to_threshold(it.trajectory.grid, it.distance, eps), float(it.distance[-1])))
    return rows


def _fmt(v) -> str:
    return "" if v is None else f"{v:.12e}"


def write_sweep_csvs(items, out_dir, eps: float = 0.1) -> list:
    """Per-label ``t, x_0.., distance`` files plus ``summary.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for it in items:
        if it.trajectory is None:
            continue
        name = "series_" + "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in it.label) + ".csv"
        p = out / name
        tr = it.trajectory
        with p.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", *[f"x_{i}" for i in range(tr.dim)], "distance"])
            for t, x, d in zip(tr.grid, tr.states, it.distance):
                wr.writerow([_fmt(t), *[_fmt(v) for v in x], _fmt(d)])
        paths.append(p)
    p = out / "summary.csv"
    with p.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["label", "time_to_eps", "final_distance", "error"])
        for (label, tte, fin), it in zip(summarize(items, eps), items):
            wr.writerow([label, _fmt(tte), _fmt(fin), it.error or ""])
    paths.append(p)
    return paths
