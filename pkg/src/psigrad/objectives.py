"""Benchmark objectives with analytic gradients and curvature constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class NonSPDError(ValueError):
    pass


class MissingConstantError(ValueError):
    """A bound check needs ``m_f``, ``M_f`` or ``y_star`` that the objective lacks."""


@dataclass(frozen=True)
class Objective:
    name: str
    dim: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    m_f: Optional[float] = None
    M_f: Optional[float] = None
    y_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    convex: bool = True
    #: points where ``grad`` is a conventional value rather than a derivative
    nonsmooth_at: tuple = ()
    params: dict = field(default_factory=dict)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise MissingConstantError(f"objective {self.name!r} lacks {', '.join(missing)}")


def make_booth() -> Objective:
    A = np.array([[1.0, 2.0], [2.0, 1.0]])
    c = np.array([7.0, 5.0])
    eig = np.linalg.eigvalsh(2 * A.T @ A)

    def f(x):
        r = A @ np.asarray(x, dtype=float) - c
        return float(r @ r)

    def grad(x):
        return 2 * A.T @ (A @ np.asarray(x, dtype=float) - c)

    return Objective(
        "booth", 2, f, grad, m_f=float(eig[0]), M_f=float(eig[-1]), y_star=np.array([1.0, 3.0]), f_star=0.0
    )


def make_zakharov(n: int = 2) -> Objective:
    # ||x||^2 is 2-strongly convex and s^2 + s^4 (s linear in x) is convex,
    # so m_f = 2 holds globally; the quartic term rules out a global M_f.
    if n < 1:
        raise ValueError("n must be >= 1")
    c = 0.5 * np.arange(1, n + 1)

    def f(x):
        x = np.asarray(x, dtype=float)
        s = c @ x
        return float(x @ x + s**2 + s**4)

    def grad(x):
        x = np.asarray(x, dtype=float)
        s = c @ x
        return 2 * x + (2 * s + 4 * s**3) * c

    return Objective("zakharov", n, f, grad, m_f=2.0, y_star=np.zeros(n), f_star=0.0, params={"n": n})


def make_neg_radial_exp(rate: float = -0.5) -> Objective:
    """``f(x) = -exp(rate * ||x||)`` in two dimensions.

    With the default ``rate = -0.5`` the function has its minimum ``-1`` at
    the origin, where it is not differentiable; ``grad(0)`` is reported as 0.
    ``rate = 0.5`` gives the growing variant, which has no minimiser.
    """
    rate = float(rate)

    def f(x):
        return float(-np.exp(rate * np.linalg.norm(x)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        if r == 0.0:
            return np.zeros_like(x)
        return -rate * np.exp(rate * r) * x / r

    decaying = rate < 0
    return Objective(
        "negexp",
        2,
        f,
        grad,
        y_star=np.zeros(2) if decaying else None,
        f_star=-1.0 if decaying else None,
        convex=False,
        nonsmooth_at=((0.0, 0.0),),
        params={"rate": rate},
    )


def make_quadratic(Q, b=None) -> Objective:
    """``f(x) = x'Qx/2 - b'x`` for symmetric positive-definite ``Q``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    d = Q.shape[0]
    if Q.shape != (d, d) or not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise NonSPDError("Q must be a symmetric square matrix")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise NonSPDError("Q is not positive definite") from exc
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    if b.shape != (d,):
        raise ValueError(f"b must have shape ({d},)")
    eig = np.linalg.eigvalsh(Q)
    y = np.linalg.solve(Q, b)

    def f(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ Q @ x - b @ x)

    def grad(x):
        return Q @ np.asarray(x, dtype=float) - b

    return Objective(
        "quadratic",
        d,
        f,
        grad,
        m_f=float(eig[0]),
        M_f=float(eig[-1]),
        y_star=y,
        f_star=f(y),
        params={"Q": Q.tolist(), "b": b.tolist()},
    )


_FACTORIES = {
    "booth": make_booth,
    "zakharov": make_zakharov,
    "negexp": make_neg_radial_exp,
    "quadratic": make_quadratic,
}


def by_name(name: str, **params) -> Objective:
    """Look up ``booth``, ``zakharov``, ``negexp`` or ``quadratic`` by name."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; expected one of {sorted(_FACTORIES)}") from None
    return factory(**params)


def fd_gradient_error(obj: Objective, x, delta: float = 1e-6) -> float:
    """``||grad(x) - FD(x)|| / (1 + ||grad(x)||)`` with central differences."""
    x = np.asarray(x, dtype=float)
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = delta
        fd[i] = (obj.f(x + e) - obj.f(x - e)) / (2 * delta)
    g = obj.grad(x)
    return float(np.linalg.norm(g - fd) / (1 + np.linalg.norm(g)))
