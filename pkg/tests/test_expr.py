import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasisep.expr import (
    Binary,
    Const,
    DomainError,
    ParseError,
    PyFunction,
    Var,
    evaluate,
    gradient,
    gradient_many,
    parse,
    to_text,
)


def test_power_node():
    e = parse("x1^2")
    assert e.root == Binary("^", Var(0), Const(2.0))
    assert e.arity == 1


def test_cobb_douglas_text():
    e = parse("x1^0.5 * x2^0.5")
    assert isinstance(e.root, Binary) and e.root.op == "*"
    assert e.root.left.op == "^" and e.root.right.op == "^"
    assert e.arity == 2
    assert e([4.0, 9.0]) == pytest.approx(6.0)


def test_incomplete_input_offset():
    with pytest.raises(ParseError) as info:
        parse("x1 +")
    assert info.value.offset == 4


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("foo(x1)", "unknown function"),
        ("min(x1)", "at least 2"),
        ("exp(x1, x2)", "1 argument"),
        ("", "empty"),
        ("x1 ) ", "unexpected"),
        ("x0", "unknown variable"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse(text)


def test_eval_examples():
    assert evaluate(parse("x1^2"), [3.0]) == 9.0
    assert evaluate(parse("x1^1 * x2^2 * x3^3"), [1.0, 1.0, 1.0]) == 1.0
    with pytest.raises(DomainError):
        evaluate(parse("ln(x1)"), [0.0])


@pytest.mark.parametrize(
    "text, point",
    [("ln(x1)", [-1.0]), ("sqrt(x1)", [-1.0]), ("1/x1", [0.0]), ("x1^0.5", [-2.0]), ("0^-1 + x1", [1.0])],
)
def test_domain_errors_both_paths(text, point):
    e = parse(text)
    with pytest.raises(DomainError):
        e(point)
    with pytest.raises(DomainError):
        e.evaluate_many(np.array([point]))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(parse("x1 + x2"), [1.0])
    with pytest.raises(ValueError):
        parse("x1 + x3").evaluate_many(np.ones((2, 2)))


def test_unary_minus_and_precedence():
    assert parse("-x1^2")([3.0]) == -9.0
    assert parse("2^3^2")([]) == 512.0
    assert parse("8/2/2")([]) == 2.0
    assert parse("2 - 3 - 4")([]) == -5.0
    assert parse("1.5e1 + .5")([]) == 15.5


def test_min_max_abs_smoothness():
    assert parse("x1^2 + exp(x1)").is_smooth
    for t in ("abs(x1)", "min(x1, 1)", "max(x1, x2, 3)"):
        assert not parse(t).is_smooth
    assert parse("max(x1, x2, 3)")([1.0, 2.0]) == 3.0


def test_gradient_examples():
    assert gradient(parse("x1^2"), [3.0], 1e-5)[0] == pytest.approx(6.0, abs=1e-8)
    np.testing.assert_allclose(gradient(parse("x1*x2"), [2.0, 3.0], 1e-5), [3.0, 2.0], atol=1e-8)
    assert gradient(parse("5 + 0*x1"), [1.0], 1e-5)[0] == 0.0


def test_plain_central_difference_formula():
    e = parse("exp(x1) * x2")
    x, h = np.array([0.3, 2.0]), 1e-3
    g = gradient(e, x, h, richardson=False)
    for i in range(2):
        step = np.eye(2)[i] * h
        assert g[i] == pytest.approx((e(x + step) - e(x - step)) / (2 * h), rel=1e-14)


def test_gradient_rejects_bad_step():
    with pytest.raises(ValueError):
        gradient(parse("x1"), [1.0], 0.0)


def test_pyfunction_adapter():
    f = PyFunction(lambda x: x[0] ** 2 + x[1], 2)
    np.testing.assert_allclose(gradient_many(f, [[1.0, 0.0]]), [[2.0, 1.0]], atol=1e-8)
    with pytest.raises(DomainError):
        PyFunction(lambda x: np.nan, 1).evaluate_many([[0.0]])


def test_eval_is_pure():
    e = parse("exp(x1) * ln(1 + x2) / sqrt(x1 + x2)")
    pts = np.random.default_rng(1).uniform(0.1, 3, (50, 2))
    a, b = e.evaluate_many(pts), e.evaluate_many(pts)
    assert np.array_equal(a, b)
    assert all(e(p) == e(p) for p in pts[:5])


def test_vector_and_scalar_paths_agree():
    e = parse("min(x1, 2 - x1) * x2^1.5 + abs(x1 - x2) - exp(-x2)")
    pts = np.random.default_rng(2).uniform(0.1, 2, (40, 2))
    np.testing.assert_allclose(e.evaluate_many(pts), [e(p) for p in pts], rtol=1e-14)


# -- property tests ----------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["x1", "x2", "x3"]),
    st.floats(0.1, 5.0, allow_nan=False).map(lambda v: f"{v!r}"),
)


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    call = st.tuples(st.sampled_from(["exp", "abs"]), children).map(lambda t: f"{t[0]}(({t[1]}) / 10)")
    nary = st.tuples(st.sampled_from(["min", "max"]), children, children).map(lambda t: f"{t[0]}({t[1]}, {t[2]})")
    neg = children.map(lambda c: f"-{c}")
    return st.one_of(binary, call, nary, neg)


expressions = st.recursive(_leaf, _combine, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(expressions)
def test_print_parse_round_trip(text):
    e = parse(text)
    again = parse(to_text(e))
    pts = np.random.default_rng(0).uniform(-2, 2, (100, 3))
    a, b = e.evaluate_many(pts), again.evaluate_many(pts)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=10, max_size=10), st.integers(0, 2**31))
def test_cubic_gradient_matches_analytic(c, seed):
    # f = sum of all monomials of degree <= 3 in two variables
    terms = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]
    text = " + ".join(f"({ci!r})*x1^{i}*x2^{j}" for ci, (i, j) in zip(c, terms))
    e = parse(text)
    pts = np.random.default_rng(seed).uniform(-2, 2, (100, 2))
    x, y = pts[:, 0], pts[:, 1]
    gx = sum(ci * i * x ** max(i - 1, 0) * y**j for ci, (i, j) in zip(c, terms) if i)
    gy = sum(ci * j * x**i * y ** max(j - 1, 0) for ci, (i, j) in zip(c, terms) if j)
    g = gradient_many(e, pts, 1e-5)
    np.testing.assert_allclose(g[:, 0], gx, atol=1e-6)
    np.testing.assert_allclose(g[:, 1], gy, atol=1e-6)
