import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasisep.domain import (
    BoxDomain,
    contains,
    contains_many,
    in_normal_cone,
    normal_cone_residual,
    parse_box,
    project_normal_cone,
    restrict,
    sample,
)

INF = math.inf


def test_contains_examples():
    assert contains(BoxDomain.positive_orthant(2), [1.0, 1.0])
    assert not contains(BoxDomain((0,), (1,)), [0.0])
    assert contains(BoxDomain((0,), (1,), (True,), (True,)), [0.0])


def test_contains_dimension_mismatch():
    with pytest.raises(ValueError):
        contains(BoxDomain.positive_orthant(2), [1.0])


def test_invalid_boxes():
    with pytest.raises(ValueError):
        BoxDomain((1,), (1,))
    with pytest.raises(ValueError):
        BoxDomain((0,), (INF,), (False,), (True,))


def test_sample_examples():
    a = sample(BoxDomain((0,), (1,)), 5, 42, 10)
    b = sample(BoxDomain((0,), (1,)), 5, 42, 10)
    assert a.shape == (5, 1) and np.array_equal(a, b)
    assert np.all((a > 0) & (a < 1))
    c = sample(BoxDomain.positive_orthant(1), 3, 7, 10)
    assert c.shape == (3, 1) and np.all((c > 0) & (c < 10))


def test_sample_points_contained():
    box = BoxDomain((-INF, 0, 2), (INF, 1, 3), (False, True, False), (False, False, True))
    pts = sample(box, 500, 3)
    assert contains_many(box, pts).all()
    assert np.all(np.abs(pts[:, 0]) < 10)


def test_restrict_examples():
    r = restrict(BoxDomain.open((0, 0), (2, 2)), [1, 1], [1, 0])
    assert r.interval == (-1.0, 1.0)
    r = restrict(BoxDomain.positive_orthant(1), [1], [1])
    assert r.interval == (-1.0, INF)
    with pytest.raises(ValueError):
        restrict(BoxDomain.open((0, 0), (2, 2)), [1, 1], [0, 0])


def test_normal_cone_examples():
    box = BoxDomain.open((0, 0), (1, 1))
    assert in_normal_cone(box, [0.5, 0.5], [0, 0], 1e-9)
    assert not in_normal_cone(box, [0.5, 0.5], [0.1, 0], 1e-9)
    closed = BoxDomain((0,), (1,), (True,), (True,))
    assert in_normal_cone(closed, [1.0], [2.0])
    assert not in_normal_cone(closed, [1.0], [-2.0])
    assert in_normal_cone(closed, [0.0], [-0.5])
    np.testing.assert_allclose(project_normal_cone(closed, [1.0], [3.0]), [3.0])
    assert normal_cone_residual(closed, [1.0], [-3.0]) == pytest.approx(3.0)


def test_normal_cone_point_outside():
    with pytest.raises(ValueError):
        in_normal_cone(BoxDomain((0,), (1,)), [2.0], [0.0])


def test_product_and_block():
    a = BoxDomain.positive_orthant(1)
    b = BoxDomain((0, -1), (2, 1), (True, False), (False, True))
    p = a.product(b)
    assert p.dim == 3
    assert p.block(1, 3) == b


@pytest.mark.parametrize("text", ["(0,inf)", "(-inf,inf)x[0,1]", "[0.5,2)x(0,1e-3]", "(-2.5,-1)"])
def test_box_text_round_trip(text):
    box = parse_box(text)
    assert parse_box(box.to_text()) == box


@pytest.mark.parametrize("text", ["", "(0,1", "(1,0)", "[0,inf]", "(0,1)*(0,1)", "(a,1)", "(0,nan)"])
def test_bad_box_text(text):
    with pytest.raises(ValueError):
        parse_box(text)


_bounds = st.tuples(st.floats(-50, 50), st.floats(0.01, 50)).map(lambda t: (t[0], t[0] + t[1]))


@settings(max_examples=60, deadline=None)
@given(st.lists(_bounds, min_size=1, max_size=4), st.integers(0, 2**31))
def test_restrict_then_walk(bounds, seed):
    box = BoxDomain.open([b[0] for b in bounds], [b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    base = sample(box, 1, seed)[0]
    d = rng.normal(size=box.dim)
    r = restrict(box, base, d)
    lo, hi = r.interval
    assert lo < 0 < hi
    ts = rng.uniform(lo, hi, 50)
    inside = contains_many(box, base[None, :] + ts[:, None] * d[None, :])
    # endpoints of floating intervals may round onto a face
    assert inside.sum() >= 49


@settings(max_examples=60, deadline=None)
@given(st.lists(_bounds, min_size=1, max_size=4), st.integers(0, 2**31), st.floats(1e-6, 1.0))
def test_open_box_normal_cone_is_zero(bounds, seed, scale):
    box = BoxDomain.open([b[0] for b in bounds], [b[1] for b in bounds])
    x = sample(box, 1, seed)[0]
    v = np.random.default_rng(seed).normal(size=box.dim) * scale
    tol = 1e-3
    assert in_normal_cone(box, x, v, tol) == (np.linalg.norm(v) <= tol)
