import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqkit import expr as ex
from pqkit.geometry import Chart

from helpers import random_expression

NAMES = ["x1", "x2", "x3", "x4", "y1", "y2", "y3", "y4"]


def at(**kw):
    vals = {n: 1.0 for n in NAMES}
    vals.update(kw)
    return vals


def fd(e, var, p, h=1e-5):
    hi, lo = dict(p), dict(p)
    hi[var] += h
    lo[var] -= h
    return (ex.evaluate(e, hi) - ex.evaluate(e, lo)) / (2 * h)


class TestParse:
    def test_product_plus_constant(self):
        e = ex.parse_expr("x1*y2 + 3", ["x1", "y2"])
        assert isinstance(e, ex.Add)
        assert ex.evaluate(e, {"x1": 2.0, "y2": 5.0}) == 13.0

    def test_quotient(self):
        e = ex.parse_expr("x2^2/(y2^2+y3^2)", NAMES)
        assert isinstance(e, ex.Div)
        assert ex.evaluate(e, at()) == 0.5

    def test_registered_function_node(self):
        e = ex.parse_expr("h((x2^2+x3^2)/(y2^2+y3^2))", NAMES)
        assert isinstance(e, ex.Call) and e.func.name == "h_one"

    def test_chart_object_accepted(self):
        e = ex.parse_expr("x1 + y4", Chart.standard(2))
        assert ex.evaluate(e, at(x1=2.0, y4=3.0)) == 5.0

    @pytest.mark.parametrize("src", ["x1 +", "(x1", "x1 ** 2", "2 3", "x1^y1", "x1^2.5"])
    def test_syntax_errors_carry_position(self, src):
        with pytest.raises(ex.ParseError) as info:
            ex.parse_expr(src, NAMES)
        assert info.value.pos >= 0

    def test_unknown_identifier(self):
        with pytest.raises(ex.UnknownIdentifier):
            ex.parse_expr("z9 + 1", NAMES)
        with pytest.raises(ex.UnknownIdentifier):
            ex.parse_expr("tan(x1)", NAMES)

    def test_unary_minus_binds_to_base(self):
        # the grammar applies '^' to a base, and '-' base is itself a base
        e = ex.parse_expr("-x1^2", NAMES)
        assert ex.evaluate(e, at(x1=3.0)) == 9.0
        assert ex.evaluate(ex.parse_expr("0-x1^2", NAMES), at(x1=3.0)) == -9.0

    def test_round_trip_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            e = random_expression(rng, NAMES, 5)
            back = ex.parse_expr(str(e), NAMES)
            p = dict(zip(NAMES, rng.uniform(0.5, 1.5, 8)))
            assert ex.evaluate(back, p) == pytest.approx(ex.evaluate(e, p), rel=1e-12, abs=1e-12)


class TestDifferentiate:
    def test_product(self):
        e = ex.parse_expr("x1*y2", NAMES)
        assert str(ex.differentiate(e, "x1")) == "y2"

    def test_quotient_rule_value(self):
        # d/dx3 (x2^2 / (x2^2 + x3^2)) = -2 x2^2 x3 / S^2 = -1/2 at x2 = x3 = 1
        e = ex.parse_expr("x2^2/(x2^2+x3^2)", NAMES)
        assert ex.evaluate(ex.differentiate(e, "x3"), at()) == pytest.approx(-0.5, abs=1e-15)
        assert fd(e, "x3", at()) == pytest.approx(-0.5, abs=1e-9)

    def test_chain_rule_through_registered_function(self):
        reg = ex.DEFAULT_REGISTRY.copy()
        reg.register("g", math.sin, "cos", np.sin)
        e = ex.parse_expr("g((x2^2+x3^2)/(y2^2+y3^2))", NAMES, reg)
        p = at(x2=0.7, x3=1.1, y2=0.9, y3=1.3)
        u = (0.7 ** 2 + 1.1 ** 2) / (0.9 ** 2 + 1.3 ** 2)
        expected = math.cos(u) * 2 * 0.7 / (0.9 ** 2 + 1.3 ** 2)
        assert ex.evaluate(ex.differentiate(e, "x2"), p) == pytest.approx(expected, rel=1e-14)

    def test_constant_profile_has_zero_derivative(self):
        e = ex.parse_expr("h_one(x2/y2)", NAMES)
        assert ex.differentiate(e, "x2").is_const(0.0)
        assert ex.evaluate(ex.differentiate(ex.parse_expr("h_id(x2/y2)", NAMES), "x2"), at(y2=2.0)) == 0.5

    def test_variable_outside_chart(self):
        with pytest.raises(ex.ExprError):
            ex.differentiate(ex.parse_expr("x1", NAMES), "t", NAMES)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            e1, e2 = random_expression(rng, NAMES, 4), random_expression(rng, NAMES, 4)
            a, b = rng.uniform(-3, 3, 2)
            p = dict(zip(NAMES, rng.uniform(0.5, 1.5, 8)))
            v = str(rng.choice(NAMES))
            lhs = ex.evaluate(ex.differentiate(a * e1 + b * e2, v), p)
            rhs = a * ex.evaluate(ex.differentiate(e1, v), p) + b * ex.evaluate(ex.differentiate(e2, v), p)
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), var=st.sampled_from(NAMES),
           coords=st.lists(st.floats(0.3, 2.0), min_size=8, max_size=8))
    def test_matches_finite_differences(self, seed, var, coords):
        e = random_expression(np.random.default_rng(seed), NAMES, 5)
        p = dict(zip(NAMES, coords))
        exact = ex.evaluate(ex.differentiate(e, var), p)
        assert abs(fd(e, var, p) - exact) <= 1e-6 * (1 + abs(exact))


class TestEvaluate:
    def test_constant(self):
        assert ex.evaluate(ex.Const(3.0), at()) == 3.0

    def test_propo_shape_at_ones(self):
        e = ex.parse_expr("x2*(y2^2+y3^2+y4^2)/(y2*(x2^2+x3^2+x4^2))", NAMES)
        assert ex.evaluate(e, at()) == 1.0

    def test_division_by_zero_names_node(self):
        e = ex.parse_expr("1/x1", NAMES)
        with pytest.raises(ex.EvaluationError) as info:
            ex.evaluate(e, at(x1=0.0))
        assert "x1" in str(info.value) and info.value.node is not None

    def test_domain_error(self):
        with pytest.raises(ex.EvaluationError):
            ex.evaluate(ex.parse_expr("sqrt(x1 - 2)", NAMES), at())
        with pytest.raises(ex.EvaluationError):
            ex.evaluate(ex.parse_expr("log(x1 - 1)", NAMES), at())

    def test_compiled_matches_tree_walk(self):
        rng = np.random.default_rng(11)
        exprs = [random_expression(rng, NAMES, 5) for _ in range(30)]
        f = ex.compile_exprs(exprs, NAMES)
        for _ in range(5):
            c = rng.uniform(0.5, 1.5, 8)
            p = ex.Point(NAMES, c)
            np.testing.assert_allclose(f(p), [ex.evaluate(e, p) for e in exprs], rtol=1e-12, atol=1e-12)

    def test_point_dimension_checked(self):
        with pytest.raises(ValueError):
            ex.Point(NAMES, [1.0, 2.0])
