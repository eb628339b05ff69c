"""Symbolic Picard iteration for polynomial right-hand sides with ``psi = t^k``.

For ``psi(t) = t^k`` and start 0 the fractional integral maps monomials to
monomials, ``I^alpha t^r = Gamma(r/k + 1) / Gamma(r/k + alpha + 1) t^(r + alpha k)``,
so every Picard iterate of a polynomial equation is a (generalised)
polynomial with real exponents.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .special import gamma_ratio

TERM_CAP = 2000
_KEY_DIGITS = 10


class TermExplosionError(RuntimeError):
    pass


def _key(r: float) -> float:
    return round(float(r), _KEY_DIGITS)


@dataclass(frozen=True)
class FracPolynomial:
    """``sum_j c_j t**r_j`` with distinct, sorted, non-negative exponents."""

    terms: tuple = ()

    def __post_init__(self) -> None:
        merged: dict[float, float] = {}
        for c, r in self.terms:
            if r < 0:
                raise ValueError(f"negative exponent {r}")
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient {c} at exponent {r}")
            k = _key(r)
            merged[k] = merged.get(k, 0.0) + float(c)
        cleaned = tuple((c, r) for r, c in sorted(merged.items()) if c != 0.0)
        if len(cleaned) > TERM_CAP:
            raise TermExplosionError(f"{len(cleaned)} terms exceed the cap of {TERM_CAP}")
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def constant(cls, c: float) -> "FracPolynomial":
        return cls(((float(c), 0.0),))

    @classmethod
    def monomial(cls, c: float, r: float) -> "FracPolynomial":
        return cls(((float(c), float(r)),))

    @property
    def exponents(self) -> list:
        return [r for _, r in self.terms]

    @property
    def coefficients(self) -> list:
        return [c for c, _ in self.terms]

    @property
    def degree(self) -> float:
        return self.terms[-1][1] if self.terms else 0.0

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "FracPolynomial | float") -> "FracPolynomial":
        if not isinstance(other, FracPolynomial):
            other = FracPolynomial.constant(other)
        return FracPolynomial(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "FracPolynomial":
        return FracPolynomial(tuple((-c, r) for c, r in self.terms))

    def __sub__(self, other) -> "FracPolynomial":
        return self + (-other if isinstance(other, FracPolynomial) else -float(other))

    def __mul__(self, other: "FracPolynomial | float") -> "FracPolynomial":
        if not isinstance(other, FracPolynomial):
            return FracPolynomial(tuple((c * float(other), r) for c, r in self.terms))
        acc: dict[float, float] = {}
        for c1, r1 in self.terms:
            for c2, r2 in other.terms:
                k = _key(r1 + r2)
                acc[k] = acc.get(k, 0.0) + c1 * c2
            if len(acc) > TERM_CAP:
                raise TermExplosionError(f"product exceeds {TERM_CAP} terms")
        return FracPolynomial(tuple((c, r) for r, c in acc.items()))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "FracPolynomial":
        if n < 0 or int(n) != n:
            raise ValueError("only non-negative integer powers")
        out = FracPolynomial.constant(1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        with np.errstate(over="ignore", invalid="ignore"):
            for c, r in self.terms:
                out = out + c * (t**r if r else 1.0)
        return out

    def to_rows(self) -> list:
        return [(r, c) for c, r in self.terms]


def frac_integrate_poly(p: FracPolynomial, k: float, alpha: float) -> FracPolynomial:
    """``I^alpha_{0, t^k}`` of ``p``, term by term."""
    if not k > 0:
        raise ValueError("k must be positive")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1]: {alpha}")
    shift = alpha * k
    return FracPolynomial(
        tuple((c * gamma_ratio(r / k + 1, r / k + alpha + 1), r + shift) for c, r in p.terms)
    )


class PolyRhs:
    """Polynomial right-hand side ``g(t, x) = sum c_ij t^i x^j``.

    ``coeffs`` maps ``(i, j)`` to ``c_ij``; ``i`` may be real, ``j`` is a
    non-negative integer.
    """

    def __init__(self, coeffs: Mapping[tuple, float]):
        self.coeffs = {(float(i), int(j)): float(c) for (i, j), c in coeffs.items()}
        if any(j < 0 for _, j in self.coeffs):
            raise ValueError("x powers must be non-negative")

    def __call__(self, t, x):
        return sum(c * np.power(t, i) * np.power(x, j) for (i, j), c in self.coeffs.items())

    def compose(self, phi: FracPolynomial) -> FracPolynomial:
        """``s -> g(s, phi(s))`` expanded symbolically."""
        powers = {0: FracPolynomial.constant(1.0)}
        for j in range(1, max((j for _, j in self.coeffs), default=0) + 1):
            powers[j] = powers[j - 1] * phi
        out = FracPolynomial()
        for (i, j), c in self.coeffs.items():
            out = out + powers[j] * FracPolynomial.monomial(c, i)
        return out


def picard_iterate(g: PolyRhs, x0: float, k: float, alpha: float, m_max: int) -> list:
    """Iterates ``phi_0 .. phi_m_max`` of ``phi <- x0 + I^alpha g(., phi)``."""
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    phis = [FracPolynomial.constant(x0)]
    for _ in range(m_max):
        phis.append(frac_integrate_poly(g.compose(phis[-1]), k, alpha) + x0)
    return phis


def spike_location(t, picard_vals, reference_vals, tol: float = 0.1, after: float = 0.0) -> Optional[float]:
    """First ``t > after`` where the Picard iterate departs from ``reference`` by more than ``tol``."""
    t = np.asarray(t, dtype=float)
    gap = np.abs(np.asarray(picard_vals, dtype=float) - np.asarray(reference_vals, dtype=float))
    bad = np.flatnonzero((t > after) & ~(gap <= tol))
    return float(t[bad[0]]) if bad.size else None


def write_iterates_csv(path, phis: Iterable[FracPolynomial]) -> Path:
    """One row per term: ``iterate, exponent, coefficient``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["iterate", "exponent", "coefficient"])
        for m, p in enumerate(phis):
            for r, c in p.to_rows():
                wr.writerow([m, f"{r:.12e}", f"{c:.12e}"])
    return path
