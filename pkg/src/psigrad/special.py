"""Gamma and two-parameter Mittag-Leffler functions on the real line."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special as sps

#: Arguments below ``-Z_SWITCH`` use the asymptotic expansion.
Z_SWITCH = 12.0
#: Power series is used for ``|z| <= Z_SERIES`` (no cancellation there).
Z_SERIES = 1.0
ASYMPTOTIC_TERMS = 10
SERIES_MAX_TERMS = 500


class PoleError(ValueError):
    """Gamma evaluated at a non-positive integer."""


class AccuracyWarning(UserWarning):
    """A Mittag-Leffler branch could not reach its accuracy target."""


def gamma_fn(x: float) -> float:
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"Gamma has a pole at {x}")
    return math.gamma(x)


def rgamma(x: float) -> float:
    """Reciprocal gamma, zero at the poles."""
    return float(sps.rgamma(x))


def gamma_ratio(a: float, b: float) -> float:
    """``Gamma(a) / Gamma(b)`` for positive ``a``, ``b`` without overflow."""
    if a <= 0 or b <= 0:
        return gamma_fn(a) / gamma_fn(b)
    return math.exp(math.lgamma(a) - math.lgamma(b))


@dataclass(frozen=True)
class MittagLefflerParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1]: {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive: {self.beta}")

    @property
    def completely_monotone(self) -> bool:
        """Whether ``E(-t)`` is completely monotone on ``t >= 0``."""
        return self.beta >= self.alpha


def _ml_series(alpha: float, beta: float, z: float) -> float:
    if z == 0.0:
        return rgamma(beta)
    logz = math.log(abs(z))
    negative = z < 0
    terms = []
    for j in range(SERIES_MAX_TERMS):
        try:
            mag = math.exp(j * logz - math.lgamma(j * alpha + beta))
        except OverflowError:
            warnings.warn(f"E_{{{alpha},{beta}}}({z}) overflows", AccuracyWarning, stacklevel=3)
            return math.inf
        term = -mag if (negative and j % 2) else mag
        terms.append(term)
        partial = math.fsum(terms)
        if mag < 1e-16 * abs(partial) or mag == 0.0:
            return partial
    warnings.warn(
        f"Mittag-Leffler series truncated after {SERIES_MAX_TERMS} terms "
        f"(alpha={alpha}, beta={beta}, z={z})",
        AccuracyWarning,
        stacklevel=3,
    )
    return math.fsum(terms)


def _ml_extended(alpha: float, beta: float, z: float) -> float:
    """Power series in extended precision, sized to absorb the cancellation."""
    digits = 30 + int(abs(z) ** (1 / alpha) / math.log(10)) + 1
    with mpmath.workdps(digits):
        zz = mpmath.mpf(z)
        a, b = mpmath.mpf(alpha), mpmath.mpf(beta)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        eps = mpmath.mpf(10) ** (-25)
        peak = int(abs(z) ** (1 / alpha) / alpha) + 2
        for j in range(100000):
            term = power * mpmath.rgamma(j * a + b)
            total += term
            if j > peak and abs(term) <= eps * abs(total):
                break
            power *= zz
        return float(total)


def _ml_asymptotic(alpha: float, beta: float, z: float) -> float:
    return -math.fsum(z ** (-k) * rgamma(beta - alpha * k) for k in range(1, ASYMPTOTIC_TERMS + 1))


def _ml_kernel(chi: float, alpha: float, beta: float, z: float) -> float:
    num = chi * math.sin(math.pi * (1 - beta)) - z * math.sin(math.pi * (1 - beta + alpha))
    den = chi * chi - 2 * chi * z * math.cos(alpha * math.pi) + z * z
    return chi ** ((1 - beta) / alpha) * math.exp(-(chi ** (1 / alpha))) * num / den / (alpha * math.pi)


def _ml_integral(alpha: float, beta: float, z: float) -> float:
    # alpha < 1, beta < 1 + alpha; for z > 0 the exponential residue is added by the caller
    value, _ = integrate.quad(
        _ml_kernel, 0.0, np.inf, args=(alpha, beta, z), epsabs=0.0, epsrel=1e-12, limit=200
    )
    return value


def ml_eval(p: MittagLefflerParams | tuple[float, float], z: float) -> float:
    """Evaluate ``E_{alpha,beta}(z)`` for real ``z``.

    Branches: power series for ``|z| <= 1``, a real integral
    representation on ``[-12, -1)`` and for ``z > 1`` (plus the exponential
    residue there), and the algebraic asymptotic expansion below ``-12``.
    ``alpha = 1`` is routed to ``exp``/``1F1``; ``beta >= 1 + alpha`` falls
    back to the series or to extended precision.
    """
    if not isinstance(p, MittagLefflerParams):
        p = MittagLefflerParams(*p)
    alpha, beta = p.alpha, p.beta
    z = float(z)
    if not math.isfinite(z):
        if z == -math.inf:
            return 0.0
        raise ValueError(f"non-finite argument {z}")

    if alpha == 1.0:
        if beta == 1.0:
            return math.exp(z)
        if abs(z) <= Z_SERIES or z > 0:
            return _ml_series(alpha, beta, z)
        return float(sps.hyp1f1(1.0, beta, z)) * rgamma(beta)

    if abs(z) <= Z_SERIES:
        return _ml_series(alpha, beta, z)
    if beta >= 1 + alpha:
        # outside the integral representation
        return _ml_extended(alpha, beta, z)
    if z > 0:
        try:
            residue = z ** ((1 - beta) / alpha) * math.exp(z ** (1 / alpha)) / alpha
        except OverflowError:
            warnings.warn(f"E_{{{alpha},{beta}}}({z}) overflows", AccuracyWarning, stacklevel=2)
            return math.inf
        return residue + _ml_integral(alpha, beta, z)
    if z < -Z_SWITCH:
        return _ml_asymptotic(alpha, beta, z)
    return _ml_integral(alpha, beta, z)


def ml_eval_array(alpha: float, beta: float, z) -> np.ndarray:
    p = MittagLefflerParams(alpha, beta)
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    flat_in, flat_out = z.ravel(), out.ravel()
    for i, zi in enumerate(flat_in):
        flat_out[i] = ml_eval(p, zi)
    return out


def branch_disagreement(alpha: float, beta: float = 1.0, z: float = -Z_SWITCH) -> float:
    """Absolute gap between the integral and asymptotic branches at ``z``.

    Emits an :class:`AccuracyWarning` if the gap exceeds ``1e-3``.
    """
    if alpha == 1.0:
        exact = ml_eval((alpha, beta), z)
        gap = abs(exact - _ml_asymptotic(alpha, beta, z))
    else:
        gap = abs(_ml_integral(alpha, beta, z) - _ml_asymptotic(alpha, beta, z))
    if gap > 1e-3:
        warnings.warn(f"branch gap {gap:.3e} at z={z} (alpha={alpha})", AccuracyWarning, stacklevel=2)
    return gap


def ml_decay_envelope(alpha: float, scale: float, w, t: float) -> float:
    """``E_alpha(-scale * (psi(t) - psi(start))**alpha)``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if t < w.start:
        raise ValueError(f"t={t} precedes the weight's start {w.start}")
    u = w(t) - w(w.start)
    return ml_eval((alpha, 1.0), -scale * u**alpha)
