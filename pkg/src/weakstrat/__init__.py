"""Weak Stratonovich calculus for fractional Brownian motion with H = 1/6."""
from .expr import SmoothFn, antiderivative, differentiate, equal, evaluate, parse
from .fbm import Path, covariance, increments, sample_path, sample_paths
from .riemann import (
    Circle,
    Const,
    CubicVar,
    FromFunction,
    LinComb,
    SeqExpr,
    StepFunction,
    nested_circle,
    parse_seq,
    power_sum,
    realize,
    triple_sum,
)
from .stratcalc import (
    Decomposition,
    Element,
    LimitDescriptor,
    check_ito_formula,
    check_substitution_rule,
    check_theorem_main,
    circle,
    cubic_variation,
    decompose,
    from_function,
    integral_against_cubic,
    kappa,
    kappa_squared,
    limit_descriptor,
    triple_covariation_element,
)
from .verify import ConvergenceReport, joint_correlation_test, law_test, simulate_limit, ucp_test

__version__ = "0.1.0"
