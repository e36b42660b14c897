import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hlab import oracles
from hlab.expr import (DimensionError, EvalError, ExprSyntaxError, Point, UnsupportedFunction,
                       eval_jet2, euler_residual, evaluate, parse_scalar_field, serialize, values)


def test_ex1_first_spray_coefficient_parses():
    f = parse_scalar_field("((y1)^2 + (y2)^2)/2", 2)
    j = eval_jet2(f, Point([0.3, -1], [1, 2]))
    assert j.value == 2.5
    np.testing.assert_array_equal(j.dy, [1, 2])
    np.testing.assert_array_equal(j.dydy, np.eye(2))


def test_zero_field():
    f = parse_scalar_field("0", 3)
    j = eval_jet2(f, Point([1, 2, 3], [4, 5, 6]))
    assert j.value == 0.0
    for arr in (j.dx, j.dy, j.dxdx, j.dxdy, j.dydy):
        assert not arr.any()


def test_index_beyond_dimension():
    with pytest.raises(DimensionError):
        parse_scalar_field("y1*y3", 2)


@pytest.mark.parametrize("src", ["abs(y1)", "tan(x1)", "foo(y1)"])
def test_unsupported_functions(src):
    with pytest.raises(UnsupportedFunction):
        parse_scalar_field(src, 2)


@pytest.mark.parametrize("src,pos", [("y1 +", 4), ("(y1", 3), ("y1 $ 2", 3), ("", 0)])
def test_syntax_errors_report_position(src, pos):
    with pytest.raises(ExprSyntaxError) as exc:
        parse_scalar_field(src, 2)
    assert exc.value.pos == pos


def test_precedence():
    p = Point([0.0], [3.0])
    assert eval_jet2(parse_scalar_field("-y1^2", 1), p).value == -9.0
    # the exponent 3^2 is not a literal, so the real-power rule applies
    assert eval_jet2(parse_scalar_field("2^3^2", 1), p).value == pytest.approx(512.0, rel=1e-14)
    assert eval_jet2(parse_scalar_field("8/2/2", 1), p).value == 2.0
    assert eval_jet2(parse_scalar_field("1 - 2 - 3", 1), p).value == -4.0


def test_product_jet_at_ex1_point():
    j = eval_jet2(parse_scalar_field("2*y1*y2", 2), Point([0, 0], [1, 2]))
    assert j.value == 4.0
    np.testing.assert_array_equal(j.dy, [4, 2])
    np.testing.assert_array_equal(j.dydy, [[0, 2], [2, 0]])


def test_linear_coordinate():
    j = eval_jet2(parse_scalar_field("x1", 3), Point([0.7, 1, 2], [1, 1, 1]))
    assert j.value == 0.7
    np.testing.assert_array_equal(j.dx, [1, 0, 0])
    assert not j.dy.any() and not j.dxdx.any() and not j.dxdy.any() and not j.dydy.any()


def test_norm_gradient_matches_fd():
    f = parse_scalar_field("sqrt((y1)^2+(y2)^2)", 2)
    p = Point([0, 0], [3, 4])
    j = eval_jet2(f, p)
    assert j.value == pytest.approx(5.0, abs=1e-15)
    np.testing.assert_allclose(j.dy, [0.6, 0.8], atol=1e-15)
    _, g, _ = oracles.fd_gradient_hessian(f, p)
    np.testing.assert_allclose(j.dy, g[2:], atol=1e-8)


def test_hessians_are_exactly_symmetric():
    f = parse_scalar_field("sin(x1*y2)*exp(y1) + x2^3*y1*y2", 2)
    rng = np.random.default_rng(1)
    res = evaluate(f, rng.uniform(-1, 1, (50, 2)), rng.uniform(-1, 1, (50, 2)))
    H = res.jet.hessian()
    assert np.array_equal(H, np.swapaxes(H, 1, 2))


@pytest.mark.parametrize("src,deg,y,expected", [
    ("(y1)^2+(y2)^2", 2, [0.3, -1.7], 0.0),
    ("y1*y2*y2", 2, [1, 1], 1.0),
    ("x1*y1", 1, [2.5, -1], 0.0),
])
def test_euler_residual(src, deg, y, expected):
    f = parse_scalar_field(src, 2)
    assert euler_residual(f, Point([0.4, 0.1], y), deg) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("src,y", [("1/y1", [0.0, 1.0]), ("log(y1)", [-1.0, 1.0]),
                                   ("sqrt(y1)", [-1.0, 1.0]), ("y1^0.5", [-2.0, 1.0])])
def test_domain_violations_raise_eval_error(src, y):
    with pytest.raises(EvalError):
        eval_jet2(parse_scalar_field(src, 2), Point([0, 0], y))


def test_domain_violations_are_flagged_per_sample():
    f = parse_scalar_field("log(y1)", 1)
    res = evaluate(f, [[0.0], [0.0]], [[1.0], [-1.0]])
    assert res.bad.tolist() == [False, True]
    assert "log" in res.culprit


def test_real_power_uses_exp_log():
    f = parse_scalar_field("y1^1.5", 1)
    j = eval_jet2(f, Point([0], [4.0]))
    assert j.value == pytest.approx(8.0)
    assert j.dy[0] == pytest.approx(1.5 * 2.0)
    assert j.dydy[0, 0] == pytest.approx(0.75 / 2.0)


def test_jets_agree_with_finite_differences_on_1000_pairs():
    assert oracles.jet_vs_fd(count=1000, seed=0) <= 1e-6


def test_mixed_partials_match_swapped_order_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = parse_scalar_field(oracles.random_field_src(rng, 2), 2)
        p = Point(rng.uniform(-1, 1, 2), rng.uniform(-2, 2, 2))
        try:
            j = eval_jet2(f, p)
        except EvalError:
            continue
        # d/dy^l of the FD x-gradient, versus d/dx^k of the FD y-gradient
        h = 1e-4
        xy = np.zeros((2, 2))
        yx = np.zeros((2, 2))
        for l in range(2):
            e = np.eye(2)[l] * h
            gp = oracles.fd_gradient_hessian(f, Point(p.x, p.y + e))[1]
            gm = oracles.fd_gradient_hessian(f, Point(p.x, p.y - e))[1]
            xy[:, l] = (gp[:2] - gm[:2]) / (2 * h)
            gp = oracles.fd_gradient_hessian(f, Point(p.x + e, p.y))[1]
            gm = oracles.fd_gradient_hessian(f, Point(p.x - e, p.y))[1]
            yx[l, :] = (gp[2:] - gm[2:]) / (2 * h)
        scale = max(1.0, np.abs(j.dxdy).max())
        assert np.abs(j.dxdy - xy).max() <= 1e-5 * scale
        assert np.abs(j.dxdy - yx).max() <= 1e-5 * scale


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3))
def test_serialize_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    src = oracles.random_field_src(rng, n, depth=4)
    f = parse_scalar_field(src, n)
    g = parse_scalar_field(serialize(f.ast), n)
    assert g.ast == f.ast
    X = rng.uniform(-1, 1, (100, n))
    Y = rng.uniform(-2, 2, (100, n))
    np.testing.assert_array_equal(values(f, X, Y), values(g, X, Y))


def test_negative_literal_round_trip():
    f = parse_scalar_field("2^-1 * y1 - -3", 1)
    assert parse_scalar_field(str(f), 1).ast == f.ast
    assert eval_jet2(f, Point([0], [4])).value == pytest.approx(5.0)


def test_values_agree_with_jet_values():
    rng = np.random.default_rng(9)
    for _ in range(30):
        f = parse_scalar_field(oracles.random_field_src(rng, 2), 2)
        X, Y = rng.uniform(-1, 1, (20, 2)), rng.uniform(-2, 2, (20, 2))
        res = evaluate(f, X, Y)
        v = values(f, X, Y)
        ok = ~res.bad
        np.testing.assert_allclose(res.jet.v[ok], v[ok], rtol=1e-13, atol=1e-13)


def test_log_closed_form_value():
    f = parse_scalar_field("log(1 + y1)", 1)
    assert eval_jet2(f, Point([0], [1])).value == pytest.approx(math.log(2))
