import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psigrad.weights import (
    WeightDomainError,
    check_assumptions,
    custom,
    from_config,
    make_builtin,
    parse_weight,
)

BUILTINS = [
    ("identity", None, 0.0),
    ("power", 2.0, 0.0),
    ("power", 4.0, 0.0),
    ("power", 0.5, 0.0),
    ("hadamard_log", None, 1.0),
    ("t_log1p", None, 0.0),
]


def test_identity_example():
    w = make_builtin("identity")
    assert (w(2.0), w.d1(2.0), w.d2(2.0)) == (2.0, 1.0, 0.0)
    assert w.label == "t"


def test_power_example():
    w = make_builtin("power", l=0.0, k=2)
    assert (w(3.0), w.d1(3.0), w.d2(3.0)) == (9.0, 6.0, 2.0)
    assert w.label == "t^2"


def test_log_example():
    w = make_builtin("hadamard_log", l=1.0)
    assert w(math.e) == pytest.approx(1.0)
    assert w.d1(math.e) == pytest.approx(0.367879, abs=1e-6)
    assert w.label == "ln(t)"


def test_labels():
    assert make_builtin("t_log1p").label == "t*ln(t+1)"
    assert make_builtin("power", k=4).label == "t^4"


@pytest.mark.parametrize(
    "family, kw",
    [("hadamard_log", {"l": 0.5}), ("power", {"k": 0}), ("power", {"k": -1}), ("power", {"k": 2, "l": -1}), ("nope", {})],
)
def test_domain_errors(family, kw):
    with pytest.raises(WeightDomainError):
        make_builtin(family, **kw)


@pytest.mark.parametrize("family, k, l", BUILTINS)
def test_finite_difference_consistency(family, k, l):
    w = make_builtin(family, l=l, k=k)
    d = 1e-5
    for t in np.linspace(l + 0.01, l + 5, 25):
        fd = (w(t + d) - w(t - d)) / (2 * d)
        assert abs(fd - w.d1(t)) <= 1e-4 * max(1.0, abs(w.d1(t)))
        fd2 = (w.d1(t + d) - w.d1(t - d)) / (2 * d)
        assert abs(fd2 - w.d2(t)) <= 1e-4 * max(1.0, abs(w.d2(t)))


def test_check_assumptions_examples():
    assert check_assumptions(make_builtin("identity"), [0, 1, 2], require_convex=True).ok
    assert check_assumptions(make_builtin("power", k=2), [0, 1], require_convex=True).ok
    rep = check_assumptions(make_builtin("hadamard_log", l=1), [1, 2, 4], require_convex=True)
    assert not rep.ok
    assert [t for t, why in rep.violations if why == "psi''<0"] == [1.0, 2.0, 4.0]


def test_log_weight_ok_without_convexity():
    assert check_assumptions(make_builtin("hadamard_log", l=1), [1, 2, 4]).ok


def test_check_assumptions_flags_decreasing_custom():
    w = custom(lambda t: -t, start=0.0, label="neg")
    rep = check_assumptions(w, [0.0, 0.5, 1.0])
    reasons = {why for _, why in rep.violations}
    assert not rep.ok and {"psi'<=0", "psi not increasing"} <= reasons


def test_check_assumptions_rejects_bad_grid():
    with pytest.raises(ValueError):
        check_assumptions(make_builtin("hadamard_log", l=1), [0.5, 1.0])
    with pytest.raises(ValueError):
        check_assumptions(make_builtin("identity"), [])


def test_custom_weight_fd_derivatives(caplog):
    with caplog.at_level(logging.WARNING, logger="psigrad.weights"):
        w = custom(np.sinh, start=0.0, label="sinh")
    assert "cannot be certified" in caplog.text
    t = np.linspace(0, 3, 7)
    assert np.allclose(w.d1(t), np.cosh(t), rtol=1e-8)
    assert np.allclose(w.d2(t), np.sinh(t), atol=1e-4)
    assert w.unbounded is None
    with caplog.at_level(logging.WARNING, logger="psigrad.weights"):
        check_assumptions(w, t)
    assert "not certified" in caplog.text


def test_config_roundtrip():
    for family, k, l in BUILTINS:
        w = make_builtin(family, l=l, k=k)
        w2 = from_config(w.config())
        assert w2.label == w.label and w2.start == w.start
    assert from_config({"family": "power", "k": 4.0, "l": 0.0}).label == "t^4"
    with pytest.raises(ValueError):
        from_config({"family": "identity", "bogus": 1})
    with pytest.raises(ValueError):
        custom(np.exp).config()


@pytest.mark.parametrize(
    "name, label", [("t", "t"), ("t2", "t^2"), ("t^4", "t^4"), ("T3", "t^3"), ("tlog1p", "t*ln(t+1)"), ("ln", "ln(t)")]
)
def test_parse_weight(name, label):
    assert parse_weight(name).label == label


def test_parse_weight_rejects_garbage():
    with pytest.raises(WeightDomainError):
        parse_weight("banana")


@given(
    idx=st.integers(0, len(BUILTINS) - 1),
    pts=st.lists(st.floats(0.0, 50.0), min_size=2, max_size=30, unique=True),
)
@settings(max_examples=80, deadline=None)
def test_strictly_increasing_on_random_grids(idx, pts):
    family, k, l = BUILTINS[idx]
    w = make_builtin(family, l=l, k=k)
    grid = np.sort(np.asarray(pts) + l)
    vals = w(grid)
    gaps = np.diff(grid)
    assert np.all(np.diff(vals)[gaps > 1e-9] > 0)
    assert np.all(w.d1(grid[grid > l + 1e-3]) > 0)
