"""Weight functions ``psi`` generating the fractional operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

log = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray], np.ndarray]

FAMILIES = ("identity", "power", "hadamard_log", "t_log1p")


class WeightDomainError(ValueError):
    pass


@dataclass(frozen=True)
class WeightFunction:
    """A strictly increasing kernel ``psi`` with its derivatives.

    Calling the object evaluates ``psi``; ``deriv`` and ``second_deriv``
    are vectorised maps. ``start`` is the left end of the domain.
    """

    func: ScalarMap
    deriv: ScalarMap
    second_deriv: Optional[ScalarMap]
    start: float
    label: str
    family: Optional[str] = None
    params: dict = field(default_factory=dict)
    #: Known to satisfy ``sup psi = inf``; ``None`` when not certifiable.
    unbounded: Optional[bool] = None

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def d1(self, t):
        return self.deriv(np.asarray(t, dtype=float))

    def d2(self, t):
        if self.second_deriv is None:
            raise AttributeError(f"weight {self.label!r} has no second derivative")
        return self.second_deriv(np.asarray(t, dtype=float))

    def config(self) -> dict:
        if self.family is None:
            raise ValueError("custom weights have no config representation")
        return {"family": self.family, **self.params, "l": self.start}


def _power_label(k: float) -> str:
    return "t" if k == 1 else f"t^{k:g}"


def make_builtin(family: str, l: float = 0.0, k: float | None = None) -> WeightFunction:
    """Build one of the built-in weights with exact derivatives.

    ``family`` is ``identity``, ``power`` (needs ``k > 0``), ``hadamard_log``
    (needs ``l >= 1``) or ``t_log1p`` (needs ``l >= 0``).
    """
    l = float(l)
    if family == "identity":
        return WeightFunction(
            func=lambda t: t + 0.0,
            deriv=lambda t: np.ones_like(t),
            second_deriv=lambda t: np.zeros_like(t),
            start=l,
            label="t",
            family="identity",
            unbounded=True,
        )
    if family == "power":
        if k is None or not k > 0:
            raise WeightDomainError(f"power weight needs k > 0, got {k}")
        if l < 0:
            raise WeightDomainError(f"power weight is defined for t >= 0, got start {l}")
        k = float(k)
        return WeightFunction(
            func=lambda t: t**k,
            deriv=lambda t: k * t ** (k - 1) if k != 1 else np.ones_like(t),
            second_deriv=lambda t: k * (k - 1) * t ** (k - 2) if k not in (1.0, 2.0) else np.full_like(t, k * (k - 1)),
            start=l,
            label=_power_label(k),
            family="power",
            params={"k": k},
            unbounded=True,
        )
    if family == "hadamard_log":
        if l < 1:
            raise WeightDomainError(f"ln(t) weight needs start >= 1, got {l}")
        return WeightFunction(
            func=np.log,
            deriv=lambda t: 1.0 / t,
            second_deriv=lambda t: -1.0 / t**2,
            start=l,
            label="ln(t)",
            family="hadamard_log",
            unbounded=True,
        )
    if family == "t_log1p":
        if l < 0:
            raise WeightDomainError(f"t*ln(t+1) weight needs start >= 0, got {l}")
        return WeightFunction(
            func=lambda t: t * np.log1p(t),
            deriv=lambda t: np.log1p(t) + t / (1 + t),
            second_deriv=lambda t: 1 / (1 + t) + 1 / (1 + t) ** 2,
            start=l,
            label="t*ln(t+1)",
            family="t_log1p",
            unbounded=True,
        )
    raise WeightDomainError(f"unknown weight family {family!r}; expected one of {FAMILIES}")


def custom(
    func: ScalarMap,
    deriv: ScalarMap | None = None,
    second_deriv: ScalarMap | None = None,
    start: float = 0.0,
    label: str = "custom",
) -> WeightFunction:
    """Wrap a user-supplied ``psi``; missing derivatives use central differences."""
    if deriv is None:

        def deriv(t):
            d = 1e-6 * np.maximum(1.0, np.abs(t))
            return (func(t + d) - func(t - d)) / (2 * d)

    if second_deriv is None:

        def second_deriv(t):
            d = 1e-4 * np.maximum(1.0, np.abs(t))
            return (func(t + d) - 2 * func(t) + func(t - d)) / d**2

    log.warning("unboundedness of custom weight %r cannot be certified; skipping that check", label)
    return WeightFunction(func, deriv, second_deriv, float(start), label, unbounded=None)


def from_config(cfg: dict) -> WeightFunction:
    """``{"family": "power", "k": 4.0, "l": 0.0}`` -> weight."""
    cfg = dict(cfg)
    family = cfg.pop("family")
    l = cfg.pop("l", 0.0)
    k = cfg.pop("k", None)
    if cfg:
        raise ValueError(f"unexpected weight keys: {sorted(cfg)}")
    return make_builtin(family, l=l, k=k)


_SHORTHAND = {
    "t": ("identity", None),
    "ln": ("hadamard_log", None),
    "log": ("hadamard_log", None),
    "tlog1p": ("t_log1p", None),
    "t*ln(t+1)": ("t_log1p", None),
}


def parse_weight(name: str, l: float = 0.0) -> WeightFunction:
    """Parse CLI shorthand such as ``t``, ``t2``, ``t^4``, ``tlog1p``, ``ln``."""
    key = name.strip().lower()
    if key in _SHORTHAND:
        family, k = _SHORTHAND[key]
        if family == "hadamard_log" and l < 1:
            l = 1.0
        return make_builtin(family, l=l, k=k)
    if key.startswith("t"):
        rest = key[1:].lstrip("^")
        try:
            k = float(rest)
        except ValueError:
            pass
        else:
            return make_builtin("power", l=l, k=k) if k != 1 else make_builtin("identity", l=l)
    raise WeightDomainError(f"cannot parse weight {name!r}")


class AssumptionReport(NamedTuple):
    ok: bool
    violations: list


def check_assumptions(w: WeightFunction, grid, require_convex: bool = False) -> AssumptionReport:
    """Check positivity of ``psi'`` (and ``psi'' >= 0`` if asked) on ``grid``.

    At the domain start ``psi'`` may vanish (``t^2``, ``t^4`` and
    ``t*ln(t+1)`` all do at 0); strict growth of ``psi`` is checked instead.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(grid < w.start):
        raise ValueError("grid points precede the weight's start")
    violations = []
    d1 = w.d1(grid)
    for t, v in zip(grid, d1):
        if t == w.start and v >= 0:
            continue
        if not v > 0:
            violations.append((float(t), "psi'<=0"))
    vals = w(np.sort(grid))
    for t, dv in zip(np.sort(grid)[1:], np.diff(vals)):
        if not dv > 0:
            violations.append((float(t), "psi not increasing"))
    if require_convex:
        if w.second_deriv is None:
            violations.append((float(grid[0]), "psi'' unavailable"))
        else:
            for t, v in zip(grid, w.d2(grid)):
                if v < 0:
                    violations.append((float(t), "psi''<0"))
    if w.unbounded is None:
        log.warning("unboundedness of %r not certified", w.label)
    elif not w.unbounded:
        violations.append((float(grid[-1]), "psi bounded"))
    return AssumptionReport(not violations, violations)
