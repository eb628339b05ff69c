"""``psigrad`` command-line front end.

Exit codes: 0 pass, 1 usage or config error, 2 accuracy failure, 3 divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .abm import AbmConfig, DivergenceError, FractionalIVP, empirical_order, linear_test, solve
from .bench import SweepSpec, run_sweep, summarize, write_sweep_csvs
from .objectives import by_name
from .picard import PolyRhs, picard_iterate, spike_location, write_iterates_csv
from .svg import Panel, write_svg
from .weights import WeightDomainError, from_config, parse_weight

EXIT_OK, EXIT_USAGE, EXIT_ACCURACY, EXIT_DIVERGED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


# {{{ io helpers


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    timestamp: str
    outputs: list = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _fmt(v: float) -> str:
    return f"{v:.12e}"


def write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_trajectory_csv(path: Path, traj) -> Path:
    header = ["t", *[f"x_{i}" for i in range(traj.dim)]]
    return write_csv(path, header, ([float(t), *map(float, x)] for t, x in zip(traj.grid, traj.states)))


def _finish(command: str, cfg: dict, out: Path, outputs) -> None:
    m = RunManifest(
        command=command,
        config_hash=config_hash(cfg),
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        outputs=[str(p) for p in outputs],
    )
    m.write(out)


# }}}


# {{{ commands


def _weights_from_flag(spec: str):
    names = [s for s in spec.split(",") if s.strip()]
    if not names:
        raise UsageError("at least one weight is required")
    return [parse_weight(n) for n in names]


def cmd_validate(args) -> int:
    weights = _weights_from_flag(args.weights)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols, header, worst = [], ["t"], {}
    grid = None
    for w in weights:
        ivp, exact = linear_test(args.alpha, w)
        traj = solve(ivp, AbmConfig.from_horizon(args.h, w.start + args.T, w.start, corrector_iters=args.corrector_iters))
        num = traj.states[:, 0]
        ex = exact(traj.grid)
        err = np.abs(num - ex)
        worst[w.label] = float(err.max())
        grid = traj.grid
        cols.extend([num, ex, err])
        header.extend([f"numeric[{w.label}]", f"exact[{w.label}]", f"abs_err[{w.label}]"])
    rows = ([float(grid[i]), *(float(c[i]) for c in cols)] for i in range(len(grid)))
    paths = [write_csv(out / "validate.csv", header, rows)]

    sol = Panel(f"D^a x = -x, alpha = {args.alpha:g}", ylabel="x(t)")
    errp = Panel("absolute error", ylabel="|x_k - x(t_k)|", log_y=True)
    for j, w in enumerate(weights):
        sol.add(f"{w.label} (ABM)", grid, cols[3 * j])
        sol.add(f"{w.label} (exact)", grid, cols[3 * j + 1])
        errp.add(w.label, grid, cols[3 * j + 2])
    paths.append(write_svg(out / "validate.svg", [sol, errp]))
    _finish("validate", vars_cfg(args), out, paths)

    for label, e in worst.items():
        print(f"{label:>12s}  max abs error {e:.3e}")
    return EXIT_OK if max(worst.values()) <= args.threshold else EXIT_ACCURACY


def _rhs_from_config(rc: dict, dim: int):
    kind = rc.get("type", "linear")
    if kind == "zero":
        return lambda t, x: np.zeros_like(x)
    if kind == "linear":
        A = np.atleast_2d(np.asarray(rc.get("A", np.zeros((dim, dim))), dtype=float))
        c = np.asarray(rc.get("c", np.zeros(dim)), dtype=float)
        if A.shape != (dim, dim) or c.shape != (dim,):
            raise ConfigError(f"linear rhs needs A of shape ({dim},{dim}) and c of length {dim}")
        return lambda t, x: A @ x + c
    if kind == "gradient":
        params = dict(rc.get("objective_params", {}))
        obj = by_name(rc["objective"], **params)
        beta = float(rc.get("beta", 1.0))
        if obj.dim != dim:
            raise ConfigError(f"objective {obj.name} has dimension {obj.dim}, initial state has {dim}")
        return lambda t, x: -beta * obj.grad(x)
    if kind == "polynomial":
        if dim != 1:
            raise ConfigError("polynomial rhs is scalar")
        poly = PolyRhs({(i, j): c for i, j, c in rc["terms"]})
        return lambda t, x: np.atleast_1d(poly(t, x))
    raise ConfigError(f"unknown rhs type {kind!r}")


def build_ivp(cfg: dict):
    """``(ivp, AbmConfig)`` from a ``solve`` config (see ``docs/config.md``)."""
    try:
        prob, sol = cfg["problem"], cfg["solver"]
        w = from_config(prob.get("weight", {"family": "identity"}))
        kind = prob.get("kind", "caputo")
        key = {"caputo": "x0", "riemann_liouville": "rl_init"}.get(kind)
        if key is None:
            raise ConfigError(f"unknown problem kind {kind!r}")
        init = np.atleast_1d(np.asarray(prob[key], dtype=float))
        rhs = _rhs_from_config(prob.get("rhs", {}), init.size)
        ivp = FractionalIVP(float(prob["alpha"]), w, rhs, start=w.start, **{key: init})
        abm = AbmConfig.from_horizon(
            float(sol["h"]),
            float(sol["T"]),
            w.start,
            corrector_iters=int(sol.get("corrector_iters", 5)),
            corrector_weights=sol.get("corrector_weights", "exact"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ivp, abm


def cmd_solve(args) -> int:
    if not args.config:
        raise UsageError("solve needs --config")
    cfg = load_config(args.config)
    ivp, abm = build_ivp(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj = solve(ivp, abm)
    except DivergenceError as exc:
        paths = []
        if exc.trajectory is not None:
            paths.append(write_trajectory_csv(out / "trajectory.csv", exc.trajectory))
        _finish("solve", cfg, out, paths)
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    paths = [write_trajectory_csv(out / "trajectory.csv", traj)]
    _finish("solve", cfg, out, paths)
    print(f"wrote {len(traj)} samples to {paths[0]}")
    return EXIT_OK


def build_sweep(cfg: dict) -> tuple:
    try:
        s = dict(cfg["sweep"])
    except KeyError as exc:
        raise ConfigError("config needs a [sweep] table") from exc
    eps = float(s.pop("eps", 0.1))
    log_scale = bool(s.pop("log_scale", True))
    try:
        spec = SweepSpec(
            objective=s.pop("objective"),
            init=tuple(float(v) for v in s.pop("init")),
            alphas=tuple(float(a) for a in s.pop("alphas", (0.5, 0.8))),
            weights=tuple(s.pop("weights", ({"family": "identity"},))),
            beta=float(s.pop("beta", 1.0)),
            h=float(s.pop("h", 1e-3)),
            T=float(s.pop("T", 10.0)),
            include_rk4=bool(s.pop("include_rk4", True)),
            corrector_iters=int(s.pop("corrector_iters", 5)),
            objective_params=dict(s.pop("objective_params", {})),
        )
        by_name(spec.objective, **spec.objective_params)
    except KeyError as exc:
        raise ConfigError(f"missing sweep key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if s:
        raise ConfigError(f"unknown sweep keys: {sorted(s)}")
    return spec, eps, log_scale


def cmd_optimize(args) -> int:
    if not args.config:
        raise UsageError("optimize needs --config")
    cfg = load_config(args.config)
    spec, eps, log_scale = build_sweep(cfg)
    out = Path(args.out)
    items = run_sweep(spec)
    paths = write_sweep_csvs(items, out, eps)
    panel = Panel(f"{spec.objective}: distance to the minimiser", ylabel="||z - y*||", log_y=log_scale)
    for it in items:
        if it.trajectory is not None and it.distance.size:
            panel.add(it.label, it.trajectory.grid, it.distance)
    paths.append(write_svg(out / "distance.svg", [panel]))
    _finish("optimize", cfg, out, paths)
    for label, tte, fin in summarize(items, eps):
        tt = "never" if tte is None else f"{tte:.4g}"
        fd = "n/a" if fin is None else f"{fin:.3e}"
        print(f"{label:>28s}  time to {eps:g}: {tt:>8s}  final distance {fd}")
    for it in items:
        if it.error:
            print(f"{it.label}: {it.error}", file=sys.stderr)
    return EXIT_OK


def cmd_order(args) -> int:
    if args.n_halvings < 2:
        raise UsageError("--n-halvings must be at least 2")
    w = parse_weight(args.weight)
    ivp, exact = linear_test(args.alpha, w)
    base = AbmConfig.from_horizon(args.h, w.start + args.T, w.start, corrector_iters=args.corrector_iters)
    res = empirical_order(ivp, base, args.n_halvings, reference=exact)
    need = 1 + args.alpha - 0.25
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    print(f"{'h':>12s} {'error':>12s} {'order':>8s}")
    for j, (h, e) in enumerate(zip(res.hs, res.errors)):
        order = res.orders[j - 1] if j else float("nan")
        rows.append([h, e, order])
        print(f"{h:12.4e} {e:12.4e} {order:8.3f}" if j else f"{h:12.4e} {e:12.4e} {'':>8s}")
    paths = [write_csv(out / "order.csv", ["h", "error", "order"], rows)]
    _finish("order", vars_cfg(args), out, paths)
    ok = min(res.orders) >= need
    print(f"required order >= {need:.3f}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ACCURACY


PICARD_RHS = {(0, 0): 1.0, (0, 1): -2.0, (0, 2): -1.0}


def cmd_picard_compare(args) -> int:
    k, alpha = 4.0, 0.5
    w = parse_weight("t4")
    poly = PolyRhs(PICARD_RHS)
    ivp = FractionalIVP(alpha, w, lambda t, x: np.atleast_1d(poly(t, x)), x0=[0.0])
    traj = solve(ivp, AbmConfig.from_horizon(args.h, args.T, corrector_iters=args.corrector_iters))
    phis = picard_iterate(poly, 0.0, k, alpha, args.m)
    pic = phis[-1](traj.grid)
    abm = traj.states[:, 0]
    diff = np.abs(pic - abm)
    win = traj.grid <= args.window + 1e-12
    worst = float(np.max(diff[win]))
    spike = spike_location(traj.grid, pic, abm, args.spike_tol, after=args.window)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ([float(t), float(a), float(p), float(d)] for t, a, p, d in zip(traj.grid, abm, pic, diff))
    paths = [write_csv(out / "picard.csv", ["t", "abm", "picard", "abs_diff"], rows)]
    paths.append(write_iterates_csv(out / "iterates.csv", phis))
    bounded = np.clip(pic, -1.0, 2.0)
    overlay = Panel("g = 1 - 2x - x^2, psi = t^4, alpha = 1/2", ylabel="x(t)")
    overlay.add("ABM", traj.grid, abm).add(f"Picard m={args.m} (clipped)", traj.grid, bounded)
    gap = Panel("|Picard - ABM|", ylabel="difference", log_y=True).add("gap", traj.grid, diff)
    paths.append(write_svg(out / "picard.svg", [overlay, gap]))
    _finish("picard-compare", vars_cfg(args), out, paths)

    print(f"max |picard - abm| on [0, {args.window:g}]: {worst:.3e} (tolerance {args.tol:g})")
    print("spike: " + ("none detected" if spike is None else f"departure > {args.spike_tol:g} from t = {spike:.4f}"))
    return EXIT_OK if worst <= args.tol else EXIT_ACCURACY


# }}}


# {{{ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def vars_cfg(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "config")}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="psigrad", description="psi-fractional gradient flows and ABM solver experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--corrector-iters", type=int, default=5)

    v = sub.add_parser("validate", help="linear test equation against Mittag-Leffler solutions")
    v.add_argument("--alpha", type=float, default=0.5)
    v.add_argument("--weights", help="comma-separated weights, e.g. t,t2,t3,t4")
    v.add_argument("--h", type=float, default=1e-3)
    v.add_argument("--T", type=float, default=1.0)
    v.add_argument("--threshold", type=float, default=1e-3)
    common(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="solve an IVP described by a config file")
    common(s)
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("optimize", help="run a benchmark sweep described by a config file")
    common(o)
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("order", help="empirical convergence order on the linear test")
    r.add_argument("--alpha", type=float, default=0.5)
    r.add_argument("--weight", default="t")
    r.add_argument("--h", type=float, default=4e-3, help="coarsest step")
    r.add_argument("--T", type=float, default=1.0)
    r.add_argument("--n-halvings", type=int, default=2)
    common(r)
    r.set_defaults(func=cmd_order)

    c = sub.add_parser("picard-compare", help="ABM against Picard iterates for g = 1 - 2x - x^2")
    c.add_argument("--m", type=int, default=8, help="Picard iterations")
    c.add_argument("--h", type=float, default=1e-4)
    c.add_argument("--T", type=float, default=1.0)
    c.add_argument("--window", type=float, default=0.5)
    c.add_argument("--tol", type=float, default=1e-3)
    c.add_argument("--spike-tol", type=float, default=0.1)
    common(c)
    c.set_defaults(func=cmd_picard_compare)
    return p


def _apply_config_defaults(parser, argv) -> None:
    """Flag commands read defaults from the ``[<command>]`` table of ``--config``."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command in (None, "solve", "optimize"):
        return
    table = load_config(known.config).get(known.command, {})
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices.get(known.command)
    if sp is None:
        return
    dests = {a.dest for a in sp._actions}
    defaults = {k.replace("-", "_"): v for k, v in table.items()}
    unknown = set(defaults) - dests
    if unknown:
        raise ConfigError(f"unknown keys in [{known.command}]: {sorted(unknown)}")
    if "weights" in defaults and isinstance(defaults["weights"], list):
        defaults["weights"] = ",".join(defaults["weights"])
    sp.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "validate" and not args.weights:
            raise UsageError("validate needs --weights (e.g. --weights t,t2)")
        return args.func(args)
    except (UsageError, WeightDomainError) as exc:
        parser.print_usage(sys.stderr)
        print(f"psigrad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"psigrad: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"psigrad: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
