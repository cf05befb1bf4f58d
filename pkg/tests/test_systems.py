import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadratura.config import WorkingBox
from quadratura.errors import QuadratureSystemError
from quadratura.systems import (QuadratureSystem, check_independence, eval_system,
                                invariance_probe)

EXAMPLE = QuadratureSystem(["1", "x*exp(u1)"], 0.0, (0.0, 2.0))


def test_example_values_against_closed_form():
    # s1 = x, s2 = int_0^x t e^(t + c1) dt = e^c1 ((x - 1) e^x + 1)
    for x, c1 in [(1.0, 0.0), (0.5, 0.3), (2.0, -1.2)]:
        s = eval_system(EXAMPLE, x, [c1])
        assert s[0] == pytest.approx(x, abs=1e-12)
        assert s[1] == pytest.approx(math.exp(c1) * ((x - 1) * math.exp(x) + 1), abs=1e-9)


def test_base_point_values_are_zero():
    assert np.all(eval_system(EXAMPLE, 0.0, [1.5]) == 0.0)


def test_backward_integration_from_interior_base_point():
    sys = QuadratureSystem(["cos(x)"], 1.0, (0.0, 2.0))
    s = sys.evaluate_grid([0.0, 2.0], [0.0])
    assert s[0, 0] == pytest.approx(math.sin(0.0) - math.sin(1.0), abs=1e-10)
    assert s[1, 0] == pytest.approx(math.sin(2.0) - math.sin(1.0), abs=1e-10)


def test_breakpoints_handle_kinks():
    # |x - 1| has a kink at the declared breakpoint
    sys = QuadratureSystem(["sqrt((x - 1)^2)"], 0.0, (0.0, 2.0), breakpoints=[1.0])
    assert sys.evaluate(2.0, [0.0])[0] == pytest.approx(1.0, abs=1e-10)


def test_sensitivities_match_closed_form():
    _, J = EXAMPLE.evaluate_grid([0.3], [0.0, 0.0], sensitivities=True)
    # d s2 / d c1 = s2 itself at c1 = 0
    s2 = (0.3 - 1) * math.exp(0.3) + 1
    assert J[0, 1, 0] == pytest.approx(s2, abs=1e-9)
    assert J[0, 0, 0] == 0.0 and J[0, 1, 1] == 0.0


def test_sensitivities_match_finite_differences():
    sys = QuadratureSystem(["cos(x)", "sin(u1)*x", "u1*u2 + x"], 0.0, (0.0, 1.5))
    c = np.array([0.2, -0.4, 0.0])
    _, J = sys.evaluate_grid([1.5], c, sensitivities=True)
    h = 1e-5
    for k in range(2):
        up, down = c.copy(), c.copy()
        up[k] += h
        down[k] -= h
        fd = (sys.evaluate(1.5, up) - sys.evaluate(1.5, down)) / (2 * h)
        assert np.allclose(J[0, :, k], fd, atol=1e-6)


@pytest.mark.parametrize("integrands, interval, msg", [
    ([], (0, 1), "at least one"),
    (["u1"], (0, 1), "may only use"),
    (["1", "u2"], (0, 1), "may only use"),
    (["1"], (1, 1), "degenerate"),
])
def test_invalid_systems(integrands, interval, msg):
    with pytest.raises(QuadratureSystemError, match=msg):
        QuadratureSystem(integrands, interval[0], interval)


def test_base_point_outside_interval():
    with pytest.raises(QuadratureSystemError):
        QuadratureSystem(["1"], 3.0, (0.0, 1.0))


def test_wrong_constant_count():
    with pytest.raises(QuadratureSystemError):
        EXAMPLE.evaluate(1.0, [1.0, 2.0, 3.0])


def test_independence_of_example():
    rep = check_independence(EXAMPLE)
    assert rep.independent
    assert rep.smallest_singular_value >= rep.threshold
    assert len(rep.pivot_points) == 2


def test_dependent_system_reported():
    rep = check_independence(QuadratureSystem(["1", "1"], 0.0, (0.0, 2.0)))
    assert not rep.independent
    assert "dependent" in rep.summary()


def test_dependence_only_at_some_constants_is_found():
    # phi2 = x * u1 vanishes identically at u1 = 0; a later witness exposes independence
    rep = check_independence(QuadratureSystem(["1", "x*u1"], 0.0, (0.0, 1.0)))
    assert rep.independent
    assert rep.witness_constants != (0.0,)


def test_probe_constant_and_nonconstant():
    assert invariance_probe("5", EXAMPLE).probe_deviation == 0.0
    rep = invariance_probe("c1 + c2", EXAMPLE)
    assert rep.probe_deviation > 1e-3
    assert not rep.invariant()


def test_systems_are_hashable_values():
    a = QuadratureSystem(["1", "x*exp(u1)"], 0.0, (0.0, 2.0))
    assert a == EXAMPLE and hash(a) == hash(EXAMPLE)
    assert a.replace(["1", "x"]) != a


def test_working_box_validation():
    with pytest.raises(ValueError):
        WorkingBox(((1.0, 2.0),))
    assert WorkingBox.uniform(2).resized(3).dim == 3


@given(st.floats(-2, 2), st.floats(0.1, 2.0))
def test_additive_constant_shift(a, x):
    # s2 = int cos(t + c1) dt
    sys = QuadratureSystem(["1", "cos(u1)"], 0.0, (0.0, 2.0))
    s = sys.evaluate(x, [a])
    assert s[1] == pytest.approx(math.sin(x + a) - math.sin(a), abs=1e-8)
