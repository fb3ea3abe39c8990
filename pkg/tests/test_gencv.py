import numpy as np
import pytest

from quasisep.domain import BoxDomain
from quasisep.expr import DomainError, PyFunction, parse
from quasisep.gencv import (
    CONCAVE,
    LOGCONCAVE,
    PSEUDOCONCAVE,
    QC_GRADIENT,
    QUASICONCAVE,
    SEMISTRICT,
    ConcavityProperty,
    Kind,
    SamplingConfig,
    check_property,
    check_upper_level_necessary,
    r_concave,
    replay,
)

POS1 = BoxDomain.positive_orthant(1)
POS2 = BoxDomain.positive_orthant(2)
REAL1 = BoxDomain.real_space(1)
CFG = SamplingConfig(pairs=500)


def test_sqrt_is_concave():
    assert check_property("x1^0.5", POS1, CONCAVE, CFG).corroborated


def test_square_convex_but_quasiconcave():
    v = check_property("x1^2", POS1, CONCAVE, CFG)
    assert v.falsified and replay("x1^2", CONCAVE, v.witness) > 0
    assert check_property("x1^2", POS1, QUASICONCAVE, CFG).corroborated


def test_x2y_versus_x2_over_y():
    assert check_property("x1^2 * x2", POS2, QUASICONCAVE, CFG).corroborated
    v = check_property("x1^2 / x2", POS2, QUASICONCAVE, CFG)
    assert v.falsified
    x, y, z = v.witness.points
    f = parse("x1^2 / x2")
    assert f(z) < min(f(x), f(y))


def test_zero_concave_means_concave():
    assert r_concave(0.0).normalized() == CONCAVE
    assert check_property("x1^0.5", POS1, r_concave(0.0), CFG).corroborated
    assert ConcavityProperty.from_name("rconcave:0").normalized() == CONCAVE


def test_r_concave_directions():
    # e^{r g}: for g = ln x, r = 1 gives x (concave), r = -1 gives 1/x (convex)
    assert check_property("ln(x1)", POS1, r_concave(1.0), CFG).corroborated
    assert check_property("ln(x1)", POS1, r_concave(-1.0), CFG).corroborated
    assert check_property("ln(x1)", POS1, r_concave(2.0), CFG).falsified


def test_property_names():
    assert ConcavityProperty.from_name("rconcave:-1") == ConcavityProperty(Kind.RCONCAVE, -1.0)
    assert ConcavityProperty.from_name("Pseudoconcave") == PSEUDOCONCAVE
    with pytest.raises(ValueError):
        ConcavityProperty.from_name("convexish")
    with pytest.raises(ValueError):
        ConcavityProperty.from_name("rconcave")


def test_log_transform_needs_positive_values():
    with pytest.raises(DomainError):
        check_property("x1 - 1", POS1, LOGCONCAVE, CFG)


def test_semistrict_falsified_by_plateau():
    # flat then rising: g(y) > g(x) on the plateau without strict increase along the way
    f = "max(x1, 1) + max(x1 - 3, 0)"
    assert check_property(f, BoxDomain.open((0,), (4,)), QUASICONCAVE, CFG).corroborated
    step = "min(max(x1 - 1, 0), 1) + min(max(x1 - 3, 0), 1)"
    v = check_property(step, BoxDomain.open((0,), (5,)), SEMISTRICT, CFG)
    assert v.falsified and replay(step, SEMISTRICT, v.witness) > 0
    for smooth in ("x1^10", "exp(x1)", "x1^0.5", "-(x1 - 2)^2"):
        assert check_property(smooth, BoxDomain.open((0,), (10,)), SEMISTRICT, CFG).corroborated, smooth


def test_pseudoconcave_fails_at_inflection():
    v = check_property("x1^3", REAL1, PSEUDOCONCAVE, CFG, anchors=[[0.0]])
    assert v.falsified
    assert v.witness.points[0][0] == 0.0


def test_gradient_characterization():
    assert check_property("x1^0.5 * x2^0.5", POS2, QC_GRADIENT, CFG).corroborated
    assert check_property("x1^2 / x2", POS2, QC_GRADIENT, CFG).falsified


def test_witness_is_deterministic():
    a = check_property("x1^2 / x2", POS2, QUASICONCAVE, CFG)
    b = check_property("x1^2 / x2", POS2, QUASICONCAVE, CFG)
    assert a.witness.index == b.witness.index and a.witness.violation == b.witness.violation
    for p, q in zip(a.witness.points, b.witness.points):
        assert np.array_equal(p, q)


def test_callable_inputs():
    f = PyFunction(lambda x: -(x[0] - 1) ** 2, 1)
    assert check_property(f, REAL1, CONCAVE, CFG).corroborated


def test_upper_level_examples():
    assert check_upper_level_necessary("x1^0.5 * x2^0.5", POS2, [1.0, 1.0], CFG).corroborated
    assert check_upper_level_necessary("3 + 0*x1", POS1, [1.0], CFG).corroborated
    assert check_upper_level_necessary("x1", POS1, [1.0], CFG).corroborated


def test_upper_level_detects_non_quasiconcave():
    v = check_upper_level_necessary("x1^2 / x2", POS2, [1.0, 1.0], CFG)
    assert v.falsified


def test_verdict_serialization():
    v = check_property("x1^2", POS1, CONCAVE, CFG)
    d = v.to_dict()
    assert d["outcome"] == "falsified" and len(d["witness"]["points"]) == 3
