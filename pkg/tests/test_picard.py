import csv
import math

import numpy as np
import pytest

from psigrad.abm import AbmConfig, FractionalIVP, abm_solve
from psigrad.picard import (
    FracPolynomial,
    PolyRhs,
    TermExplosionError,
    frac_integrate_poly,
    picard_iterate,
    spike_location,
    write_iterates_csv,
)
from psigrad.special import gamma_fn, ml_eval
from psigrad.weights import make_builtin

RICCATI = PolyRhs({(0, 0): 1.0, (0, 1): -2.0, (0, 2): -1.0})
DECAY = PolyRhs({(0, 1): -1.0})


def test_polynomial_normalises_terms():
    p = FracPolynomial(((1.0, 2.0), (3.0, 0.5), (-1.0, 2.0), (2.0, 0.0)))
    assert p.exponents == [0.0, 0.5]
    assert p.coefficients == [2.0, 3.0]
    assert p(0.0) == 2.0
    assert p.degree == 0.5
    with pytest.raises(ValueError):
        FracPolynomial(((1.0, -1.0),))
    with pytest.raises(ValueError):
        FracPolynomial(((math.nan, 1.0),))


def test_polynomial_arithmetic():
    t = FracPolynomial.monomial(1.0, 1.0)
    p = (t + 1) ** 2 - 2 * t
    assert p.to_rows() == [(0.0, 1.0), (2.0, 1.0)]
    x = np.linspace(0, 2, 7)
    assert np.allclose(p(x), x**2 + 1)
    with pytest.raises(ValueError):
        t ** -1


def test_integrate_constant_square_weight():
    q = frac_integrate_poly(FracPolynomial.constant(1.0), 2.0, 0.5)
    assert q.exponents == [1.0]
    assert q.coefficients[0] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)


def test_integrate_classical():
    q = frac_integrate_poly(FracPolynomial.monomial(1.0, 1.0), 1.0, 1.0)
    assert q.to_rows() == [(2.0, pytest.approx(0.5))]
    assert len(frac_integrate_poly(FracPolynomial(), 3.0, 0.4)) == 0


@pytest.mark.parametrize("k, alpha, r", [(1, 0.5, 0.0), (4, 0.5, 3.0), (2, 0.3, 1.5)])
def test_integrate_matches_gamma_formula(k, alpha, r):
    q = frac_integrate_poly(FracPolynomial.monomial(2.0, r), k, alpha)
    (exp, coef), = q.to_rows()
    assert exp == pytest.approx(r + alpha * k)
    assert coef == pytest.approx(2.0 * gamma_fn(r / k + 1) / gamma_fn(r / k + alpha + 1), rel=1e-12)


def test_picard_classical_exponential():
    phis = picard_iterate(DECAY, 1.0, 1.0, 1.0, 4)
    want = [(float(j), (-1) ** j / math.factorial(j)) for j in range(5)]
    assert phis[-1].to_rows() == [(r, pytest.approx(c, rel=1e-14)) for r, c in want]


def test_picard_zero_rhs():
    phis = picard_iterate(PolyRhs({}), 0.7, 2.0, 0.5, 5)
    assert all(p.to_rows() == [(0.0, 0.7)] for p in phis)


def test_picard_m0_is_constant():
    phis = picard_iterate(RICCATI, 0.3, 4.0, 0.5, 0)
    assert len(phis) == 1 and phis[0].to_rows() == [(0.0, 0.3)]


@pytest.mark.parametrize("k, alpha", [(1.0, 0.5), (2.0, 0.5), (4.0, 0.25), (1.0, 0.7)])
def test_picard_reproduces_mittag_leffler_partial_sums(k, alpha):
    m = 12
    phi = picard_iterate(DECAY, 1.0, k, alpha, m)[-1]
    want = [(alpha * k * j, (-1) ** j / gamma_fn(alpha * j + 1)) for j in range(m + 1)]
    for (r, c), (wr, wc) in zip(phi.to_rows(), want):
        assert r == pytest.approx(wr) and c == pytest.approx(wc, rel=1e-12)
    t = np.array([0.05, 0.1, 0.2])
    exact = [ml_eval((alpha, 1.0), -(s**k) ** alpha) for s in t]
    assert np.allclose(phi(t), exact, atol=1e-12)


def test_picard_increments_shrink_near_zero():
    phis = picard_iterate(DECAY, 1.0, 1.0, 0.5, 10)
    leads = [abs((b - a).coefficients[-1]) for a, b in zip(phis, phis[1:])]
    assert all(y < x for x, y in zip(leads[2:], leads[3:]))
    t = 0.1
    steps = [abs(float(b(t) - a(t))) for a, b in zip(phis, phis[1:])]
    assert steps[-1] < 1e-6 * steps[0]


def test_term_cap():
    g = PolyRhs({(0.3183, 0): 1.0, (0.0, 3): 1.0})
    with pytest.raises(TermExplosionError):
        picard_iterate(g, 0.1, 1.0, 0.41421, 12)


def test_riccati_agrees_with_solver_near_zero():
    phi = picard_iterate(RICCATI, 0.0, 4.0, 0.5, 8)[-1]
    ivp = FractionalIVP(0.5, make_builtin("power", k=4), RICCATI, x0=[0.0])
    traj = abm_solve(ivp, AbmConfig.from_horizon(1e-3, 0.5))
    assert np.max(np.abs(phi(traj.grid) - traj.states[:, 0])) < 5e-3


def test_spike_location():
    t = np.linspace(0, 1, 11)
    ref = np.zeros(11)
    pic = np.where(t > 0.65, 1.0, 0.01)
    assert spike_location(t, pic, ref) == pytest.approx(0.7)
    assert spike_location(t, pic, ref, after=0.8) == pytest.approx(0.9)
    assert spike_location(t, ref, ref) is None
    pic[3] = np.inf
    assert spike_location(t, pic, ref) == pytest.approx(0.3)


def test_iterates_csv(tmp_path):
    phis = picard_iterate(DECAY, 1.0, 1.0, 1.0, 2)
    path = write_iterates_csv(tmp_path / "it.csv", phis)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["iterate", "exponent", "coefficient"]
    assert len(rows) == 1 + 1 + 2 + 3
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 1, 2, 2, 2]
    assert float(rows[-1][2]) == pytest.approx(0.5)
