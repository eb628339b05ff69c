"""psi-fractional gradient flows, a generalised ABM solver and its validation tools."""

__version__ = "0.1.0"

from .abm import (
    AbmConfig,
    DivergenceError,
    FractionalIVP,
    Trajectory,
    a_coeffs,
    abm_solve,
    b_coeff,
    empirical_order,
    linear_test,
    rl_solve,
    solve,
)
from .objectives import Objective, by_name, make_booth, make_neg_radial_exp, make_quadratic, make_zakharov
from .special import MittagLefflerParams, gamma_fn, ml_decay_envelope, ml_eval
from .weights import WeightFunction, check_assumptions, make_builtin, parse_weight

__all__ = [
    "AbmConfig",
    "DivergenceError",
    "FractionalIVP",
    "MittagLefflerParams",
    "Objective",
    "Trajectory",
    "WeightFunction",
    "a_coeffs",
    "abm_solve",
    "b_coeff",
    "by_name",
    "check_assumptions",
    "empirical_order",
    "gamma_fn",
    "linear_test",
    "make_booth",
    "make_builtin",
    "make_neg_radial_exp",
    "make_quadratic",
    "make_zakharov",
    "ml_decay_envelope",
    "ml_eval",
    "parse_weight",
    "rl_solve",
    "solve",
]
