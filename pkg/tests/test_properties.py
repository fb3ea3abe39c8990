"""Invariants of the concavity hierarchy and of the product criterion."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import CORPUS, QUASICONCAVE as QC_ENTRIES, Entry, ids, monomial_factors
from hierarchy import INVARIANTS
from quasisep.cvindex import IndexConfig, index
from quasisep.domain import BoxDomain
from quasisep.gencv import (
    CONCAVE,
    LOGCONCAVE,
    PSEUDOCONCAVE,
    QUASICONCAVE,
    SamplingConfig,
    check_property,
    r_concave,
)
from quasisep.kkt import check_kkt_diff, check_mkkt
from quasisep.separable import Decision, decide_quasiconcave, factor_necessity_check
from quasisep.solve import cobb_douglas_problem, grid_oracle, solve_cobb_douglas, solve_csqp

CFG = SamplingConfig(pairs=400)
CHAIN = (CONCAVE, LOGCONCAVE, QUASICONCAVE)


def _verdicts(e: Entry, props):
    p = e.product()
    return [check_property(p, p.domain, prop, CFG) for prop in props]


@pytest.mark.parametrize("e", CORPUS, ids=ids(CORPUS))
@pytest.mark.parametrize("name", list(INVARIANTS))
def test_invariant(name, e):
    assert INVARIANTS[name](e) == []


@pytest.mark.parametrize("e", CORPUS, ids=ids(CORPUS))
def test_verdicts_match_closed_form(e):
    p = e.product()
    held = [not check_property(p, p.domain, prop, CFG).falsified for prop in (CONCAVE, LOGCONCAVE, QUASICONCAVE)]
    assert held == [e.concave, e.log_concave, e.qc]


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, -1.0, -3.0])
def test_r_concave_log(r):
    # e^{r ln x} = x^r is concave for 0 < r <= 1 and convex for r < 0
    pos = BoxDomain.positive_orthant(1)
    assert check_property("ln(x1)", pos, r_concave(r), CFG).corroborated == (r <= 1.0)
    assert check_property("ln(x1)", pos, PSEUDOCONCAVE, CFG).corroborated


def test_non_quasiconcave_factor_blocks_product():
    e = Entry("v", (("abs(x1 - 1) + 0.1", "(0,2)"), ("x2", "(0,inf)")), False, smooth=False)
    assert factor_necessity_check(e.product(), CFG).falsified
    assert check_property(e.product(), e.product().domain, QUASICONCAVE, CFG).falsified


@pytest.mark.parametrize("e", CORPUS, ids=ids(CORPUS))
def test_decision_matches_closed_form(e):
    d = decide_quasiconcave(e.product())
    assert d.quasiconcave is (Decision.YES if e.qc else Decision.NO)
    if e.qc and e.index is not None:
        _index_close(float(d.aggregate_index), e.index)


def _index_close(got, true):
    # the reported value is the falsified end of the bracket, so it sits at or
    # above the true index; how far above depends on sampling resolution (for
    # exp(-x^2) on |x| <= bound no exponent below 1 / (2 bound^2) is falsifiable)
    assert true - 5e-3 <= got <= true + max(0.1 * abs(true), 1e-2)


@pytest.mark.parametrize("e", [c for c in QC_ENTRIES if c.index is not None], ids=ids([c for c in QC_ENTRIES if c.index is not None]))
def test_aggregate_matches_joint_index(e):
    # the reciprocal-sum formula agrees with a direct estimate on the product
    p = e.product()
    joint = float(index(p, p.domain, IndexConfig()).index)
    agg = float(decide_quasiconcave(p).aggregate_index)
    _index_close(joint, e.index)
    _index_close(agg, e.index)


def test_log_concave_factors_give_log_concave_product():
    for e in CORPUS:
        p = e.product()
        if all(check_property(f.expr, f.domain, LOGCONCAVE, CFG).corroborated for f in p.factors):
            assert check_property(p, p.domain, LOGCONCAVE, CFG).corroborated, e.name


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.2, 3.0), min_size=1, max_size=3))
def test_monomial_index_reciprocal_sum(exps):
    # all exponents positive: index 1 / sum(a_i)
    p = Entry("m", monomial_factors(exps), True).product()
    d = decide_quasiconcave(p)
    assert d.quasiconcave is Decision.YES
    assert float(d.aggregate_index) == pytest.approx(1.0 / sum(exps), rel=2e-2, abs=2e-3)


@settings(max_examples=10, deadline=None)
@given(
    st.lists(st.floats(0.3, 3.0), min_size=2, max_size=2),
    st.lists(st.floats(0.5, 4.0), min_size=2, max_size=2),
    st.floats(1.0, 20.0),
)
def test_kkt_point_is_global_maximum(alpha, price, budget):
    prob = cobb_douglas_problem(alpha, price, budget)
    x, lam = solve_cobb_douglas(alpha, price, budget)
    assert check_kkt_diff(prob, x, [lam]).valid
    assert check_mkkt(prob, x, [lam]).valid
    hi = [budget / q for q in price]
    g = grid_oracle(prob, 120, box=([0.0, 0.0], hi))
    assert g.value <= prob.objective(x) * (1 + 1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.8, 0.8).filter(lambda d: abs(d) > 0.05))
def test_smooth_certificates_agree(delta):
    prob = cobb_douglas_problem([1, 2], [1, 1], 3)
    x, lam = solve_cobb_douglas([1, 2], [1, 1], 3)
    for m in (lam, lam * (1 + delta)):
        assert check_kkt_diff(prob, x, [m]).valid == check_mkkt(prob, x, [m]).valid


def test_solver_certificate_is_consistent_with_hierarchy():
    prob = cobb_douglas_problem([0.5, 1.5], [1.0, 2.0], 4.0)
    r = solve_csqp(prob)
    assert r.decision.quasiconcave is Decision.YES
    assert r.certification.is_global
    assert math.isclose(prob.objective(r.maximizer), r.value, rel_tol=1e-12)
