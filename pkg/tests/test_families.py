import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadratura.config import WorkingBox
from quadratura.errors import StructureError
from quadratura.families import (ExponentialShapeIntegral, ExprFamily, FunctionFamily,
                                 QuadratureIntegral, check_admissible, check_equivalence,
                                 check_theta, effective_parameter_test, eval_integral,
                                 fundamental_equality_residual, match_initial_value)
from quadratura.systems import QuadratureSystem

EXAMPLE_SYS = QuadratureSystem(["1", "x*exp(u1)"], 0.0, (0.0, 2.0))
EXAMPLE = QuadratureIntegral(EXAMPLE_SYS, "exp(-v1)*v2")


def example_closed_form(x, c1, c2):
    # exp(-x - c1) (e^c1 ((x - 1) e^x + 1) + c2)
    return math.exp(-x - c1) * (math.exp(c1) * ((x - 1) * math.exp(x) + 1) + c2)


@pytest.mark.parametrize("x, c", [(1.0, (0.0, 0.0)), (0.4, (0.7, -1.1)), (2.0, (-1.5, 2.0))])
def test_example_matches_closed_form(x, c):
    assert eval_integral(EXAMPLE, x, c) == pytest.approx(example_closed_form(x, *c), abs=1e-9)


def test_example_value_at_one():
    # x - 1 + e^(-x) at x = 1
    assert eval_integral(EXAMPLE, 1.0, [0.0, 0.0]) == pytest.approx(math.exp(-1), abs=1e-10)


def test_initial_value_needs_no_solve():
    assert EXAMPLE.initial_value([0.3, 1.7]) == pytest.approx(math.exp(-0.3) * 1.7)


def test_gradients_match_finite_differences():
    fam = QuadratureIntegral(QuadratureSystem(["cos(x)", "sin(u1) + x"], 0.0, (0.0, 1.0)),
                             "v1*v2 + v2^3", "w + sin(x)*w")
    c = np.array([0.3, -0.2])
    g = fam.gradient(0.8, c)
    fd = FunctionFamily(lambda x, cc: fam.value(x, cc), 2, 0.0, (0.0, 1.0)).gradient(0.8, c)
    assert np.allclose(g, fd, atol=1e-6)


def test_exponential_shape_outer_function():
    fam = ExponentialShapeIntegral(QuadratureSystem(["-1", "x*exp(-u1)"], 0.0, (0.0, 2.0)), "v1")
    assert fam.outer_arity() == 1
    # exp(-x) (int t e^t dt + C)
    assert fam.value(1.0, [0.0, 0.5]) == pytest.approx(math.exp(-1) * (1 + 0.5), abs=1e-9)


def test_outer_function_variable_check():
    with pytest.raises(StructureError):
        QuadratureIntegral(EXAMPLE_SYS, "v3")
    with pytest.raises(StructureError):
        QuadratureIntegral(EXAMPLE_SYS, "v1", theta="y")


def test_admissibility():
    assert check_admissible("exp(-v1)*v2", 2).admissible
    rep = check_admissible("v2^2", 2)
    assert not rep.admissible and rep.sign_change
    assert not check_admissible("v1", 2).admissible
    assert check_theta("w^3 + w", [0.0, 1.0], [-1.0, 0.0, 1.0]).admissible
    assert not check_theta("w^2", [0.0], [-1.0, 1.0]).admissible


def test_fundamental_equality_example_and_control():
    assert fundamental_equality_residual(EXAMPLE, 1, 2, samples=30) < 1e-6
    control = ExprFamily("c1*x + c2", interval=(0.0, 2.0))
    assert fundamental_equality_residual(control, 1, 2, samples=[(1.0, np.zeros(2))]) > 0.1


def test_fundamental_equality_index_errors():
    with pytest.raises(ValueError):
        fundamental_equality_residual(EXAMPLE, 1, 1)
    with pytest.raises(ValueError):
        fundamental_equality_residual(EXAMPLE, 1, 3)


def test_expr_family_parameters_default_sorted():
    fam = ExprFamily("c2*x + c1", interval=(0.0, 1.0))
    assert fam.param_dim == 2
    assert fam.value(1.0, [1.0, 2.0]) == 3.0
    assert np.allclose(fam.gradient(0.5, [0.0, 0.0]), [1.0, 0.5])


def test_match_initial_value_with_bracket_growth():
    fam = ExprFamily("x + c", interval=(0.0, 1.0))
    assert match_initial_value(fam, 50.0) == pytest.approx(50.0)
    bounded = ExprFamily("x + sin(c)", interval=(0.0, 1.0))
    assert match_initial_value(bounded, 3.0) is None


def test_equivalence_positive_and_negative():
    normal = ExponentialShapeIntegral(QuadratureSystem(["-1", "x*exp(-u1)"], 0.0, (0.0, 2.0)),
                                      "v1")
    rep = check_equivalence(EXAMPLE, normal)
    assert rep.equivalent and rep.max_gap < 1e-6
    a = ExprFamily("x + c", interval=(0.0, 1.0))
    b = ExprFamily("2*x + d", interval=(0.0, 1.0))
    rep = check_equivalence(a, b)
    assert not rep.equivalent and rep.max_gap == pytest.approx(1.0, abs=1e-9)


def test_equivalence_reports_unattained_values():
    a = ExprFamily("x + c", interval=(0.0, 1.0))
    b = ExprFamily("x + sin(d)", interval=(0.0, 1.0))
    rep = check_equivalence(a, b, box=WorkingBox.uniform(1, -3, 3))
    assert not rep.equivalent and rep.diagnostics


def test_equivalence_needs_common_domain():
    with pytest.raises(ValueError):
        check_equivalence(ExprFamily("x + c", interval=(0.0, 1.0)),
                          ExprFamily("x + c", interval=(0.0, 2.0)))


def test_effective_parameter_test():
    rep = effective_parameter_test(EXAMPLE)
    assert rep.passed and rep.reconstruction_gap < 1e-6
    control = ExprFamily("c1*x + c2", interval=(0.0, 2.0))
    assert not effective_parameter_test(control).passed


@settings(max_examples=10)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_equivalence_is_reflexive(a, b):
    fam = ExprFamily(f"x*({a!r}) + c", interval=(0.0, 1.0))
    assert check_equivalence(fam, fam, c_samples=[[b]]).max_gap < 1e-9


@settings(max_examples=10)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.0, 2.0))
def test_example_constants_compensate(c1, c2, x):
    # value depends on (c1, c2) only through the value at the base point
    d = EXAMPLE.initial_value([c1, c2])
    assert EXAMPLE.value(x, [c1, c2]) == pytest.approx(EXAMPLE.value(x, [0.0, d]), abs=1e-8)
