"""Hierarchy and index invariants, each checked on one corpus entry.

Every check returns a list of violation messages; an empty list means the
invariant held on the samples drawn.  The property suite runs them one at a
time and the acceptance suite counts violations over the whole corpus.
"""

import math

import numpy as np

from quasisep.cvindex import IndexConfig, index
from quasisep.domain import BoxDomain, sample
from quasisep.expr import DomainError, PyFunction
from quasisep.gencv import (
    CONCAVE,
    LOGCONCAVE,
    PSEUDOCONCAVE,
    QUASICONCAVE,
    SEMISTRICT,
    SamplingConfig,
    check_property,
    r_concave,
    replay,
)
from quasisep.separable import Decision, decide_quasiconcave, factor_necessity_check, make_product
from quasisep.superdiff import SuperdiffConfig, check_quasiconcave_superdiff, check_upper_level_superdiff

CFG = SamplingConfig()
LINE_CFG = SamplingConfig(pairs=200)
SD_CFG = SuperdiffConfig()
ICFG = IndexConfig()
TOL = ICFG.bisect_tol
LINES = 100
R_VALUES = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)
POWERS = (0.5, 2.0, 3.0)


def _held(f, dom, prop, cfg=CFG):
    return not check_property(f, dom, prop, cfg).falsified


def _vectorized(p, phi):
    return PyFunction(lambda X: phi(p.evaluate_many(X)), p.total_dimension, vectorized=True, smooth=p.is_smooth)


def _joint_index(p):
    return index(p, p.domain, ICFG).value


def _power(e, alpha):
    return make_product([(f"({t})^{alpha!r}", b) for t, b in _boxes(e)])


def _boxes(e):
    p = e.product()
    return [(t, f.domain) for (t, _), f in zip(e.factors, p.factors)]


def chain(e):
    p = e.product()
    c, lc, qc = (_held(p, p.domain, prop) for prop in (CONCAVE, LOGCONCAVE, QUASICONCAVE))
    out = []
    if c and not (lc and qc):
        out.append("concave but not log-concave or not quasiconcave")
    if lc and not qc:
        out.append("log-concave but not quasiconcave")
    return out


def semistrict(e):
    # asserted for differentiable functions only
    if not e.smooth:
        return []
    p = e.product()
    if _held(p, p.domain, PSEUDOCONCAVE) and not _held(p, p.domain, SEMISTRICT):
        return ["pseudoconcave but not semi-strictly quasiconcave"]
    return []


def lines(e):
    """Pseudoconcavity of f equals that of all its line restrictions.

    The lines are 100 random segments; when f is falsified the witness
    segment is added, since random lines alone rarely pass through it.
    """
    if not e.smooth:
        return []
    p = e.product()
    v = check_property(p, p.domain, PSEUDOCONCAVE, CFG)
    ends = sample(p.domain, 2 * LINES, [7, len(e.name)], 10.0)
    segments = list(zip(ends[:LINES], ends[LINES:]))
    unit = BoxDomain.open((0.0,), (1.0,))
    all_lines = True
    for a, b in segments:
        g = PyFunction(lambda T, a=a, b=b: p.evaluate_many(a + T[:, :1] * (b - a)), 1, vectorized=True)
        if check_property(g, unit, PSEUDOCONCAVE, LINE_CFG).falsified:
            all_lines = False
            break
    if v.falsified and all_lines:
        x, y = (np.asarray(q) for q in v.witness.points)
        g = PyFunction(lambda T: p.evaluate_many(x + T[:, :1] * (y - x)), 1, vectorized=True)
        w = type(v.witness)((np.zeros(1), np.ones(1)), None, 0.0, 0)
        all_lines = replay(g, PSEUDOCONCAVE, w, CFG) <= 0.0
    if v.falsified == all_lines:
        return [f"pseudoconcave on f: {not v.falsified}, on all line restrictions: {all_lines}"]
    return []


def rconcave(e):
    if not e.smooth:
        return []
    p = e.product()
    if _held(p, p.domain, PSEUDOCONCAVE):
        return []
    out = []
    for r in R_VALUES:
        try:
            held = _held(p, p.domain, r_concave(r))
        except DomainError:
            continue  # e^{r f} overflows on part of the sampled box
        if held:
            out.append(f"{r}-concave but not pseudoconcave")
    return out


def composition(e):
    p = e.product()
    if not _held(p, p.domain, QUASICONCAVE):
        return []
    out = []
    # exp is capped to stay finite; a nondecreasing outer map preserves quasiconcavity
    for name, phi in (("ln", np.log), ("exp", lambda v: np.exp(np.minimum(v, 700.0)))):
        if not _held(_vectorized(p, phi), p.domain, QUASICONCAVE):
            out.append(f"{name} of a quasiconcave function is not quasiconcave")
    return out


def factors(e):
    p = e.product()
    if _held(p, p.domain, QUASICONCAVE) and factor_necessity_check(p, CFG).falsified:
        return ["quasiconcave product with a non-quasiconcave factor"]
    return []


def index_logconcave(e):
    p = e.product()
    lc = _held(p, p.domain, LOGCONCAVE)
    i = _joint_index(p)
    if lc != (i >= -TOL):
        return [f"log-concave: {lc}, index {i}"]
    return []


def index_concave(e):
    p = e.product()
    c = _held(p, p.domain, CONCAVE)
    i = _joint_index(p)
    if c != (i >= 1.0 - TOL):
        return [f"concave: {c}, index {i}"]
    return []


def index_power(e):
    base = _joint_index(e.product())
    out = []
    for a in POWERS:
        got = _joint_index(_power(e, a))
        want = base / a
        if math.isinf(want) or math.isinf(got):
            ok = got == want
        else:
            ok = abs(got - want) <= 3 * TOL * max(1.0, abs(want))
        if not ok:
            out.append(f"index of f^{a} is {got}, expected {want}")
    return out


def index_quasiconcave(e):
    p = e.product()
    i = _joint_index(p)
    if math.isfinite(i) and not _held(p, p.domain, QUASICONCAVE):
        return [f"finite index {i} but not quasiconcave"]
    return []


def superdiff_characterization(e):
    p = e.product()
    if decide_quasiconcave(p).quasiconcave is not Decision.YES:
        return []
    v = check_quasiconcave_superdiff(p, p.domain, SD_CFG)
    return [f"descent covector toward a higher point: {v.witness}"] if v.falsified else []


def upper_level(e):
    p = e.product()
    if not e.qc:
        return []
    out = []
    for xb in sample(p.domain, 4, [3, len(e.name)], 10.0):
        v = check_upper_level_superdiff(p, p.domain, xb, SD_CFG)
        if v.falsified:
            out.append(f"upper-level inequality fails at {xb.tolist()}")
    return out


INVARIANTS = {
    "chain": chain,
    "semistrict": semistrict,
    "lines": lines,
    "rconcave": rconcave,
    "composition": composition,
    "factors": factors,
    "index-logconcave": index_logconcave,
    "index-concave": index_concave,
    "index-power": index_power,
    "index-quasiconcave": index_quasiconcave,
    "superdiff-characterization": superdiff_characterization,
    "upper-level": upper_level,
}
