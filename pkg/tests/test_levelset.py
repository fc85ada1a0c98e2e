import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cuthho.levelset import (
    CircleLevelSet,
    EllipseLevelSet,
    LineLevelSet,
    PolynomialLevelSet,
    parse_levelset,
)


@pytest.mark.parametrize("text", ["line(1,0,-0.5)", "circle(0,0,0.5)", "ellipse(0.1,0,0.5,0.3)", "poly(-1,0,0,1,0,1)"])
def test_gradient_matches_finite_differences(text):
    ls = parse_levelset(text)
    x = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    e = 1e-6
    fd = np.column_stack([(ls.value(x + [e, 0]) - ls.value(x - [e, 0])) / (2 * e),
                          (ls.value(x + [0, e]) - ls.value(x - [0, e])) / (2 * e)])
    assert np.allclose(ls.gradient(x), fd, atol=1e-6)


def test_parse_arithmetic_and_errors():
    c = parse_levelset("circle(0, 0, pi/4)")
    assert isinstance(c, CircleLevelSet) and np.isclose(c.r, math.pi / 4)
    for bad in ["circle(0,0)", "square(1)", "circle(a,b,c)", "circle"]:
        with pytest.raises(ValueError):
            parse_levelset(bad)


def test_sign_convention_and_normal():
    c = CircleLevelSet(0, 0, 1)
    assert c.value(np.zeros((1, 2)))[0] < 0
    n = c.normal(np.array([[2.0, 0.0]]))
    assert np.allclose(n, [[1, 0]])


def test_negated_and_translated():
    ls = LineLevelSet(1, 0, -0.2)
    x = np.array([[0.0, 0.3], [0.5, 1.0]])
    assert np.allclose(ls.negated().value(x), -ls.value(x))
    t = ls.translated((0.1, 0.0))
    assert np.allclose(t.value(x + [0.1, 0.0]), ls.value(x))


def test_curvature_bounds():
    assert LineLevelSet(0, 1, 0).curvature_bound == 0
    assert np.isclose(CircleLevelSet(0, 0, 0.5).curvature_bound, 2.0)
    assert EllipseLevelSet(0, 0, 1.0, 0.5).curvature_bound >= 1.0 / 0.25 - 1e-12
    assert PolynomialLevelSet([0, 1, 0]).curvature_bound is None


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 2))
def test_circle_value_is_signed_distance_like(cx, cy, r):
    c = CircleLevelSet(cx, cy, r)
    p = np.array([[cx + r, cy]])
    assert abs(c.value(p)[0]) < 1e-9 * max(1.0, r)
