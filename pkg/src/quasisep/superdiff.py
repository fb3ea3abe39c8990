"""Dini derivatives, upper-Dini superdifferentials and nonsmooth pseudoconcavity.

Directional limits are approximated on a fixed geometric step schedule:
the upper derivative takes the max of the tail-half quotients, the lower
derivative the min.  A covector ``x*`` belongs to the upper-Dini
superdifferential at ``x`` when ``<x*, v>`` dominates the lower Dini
derivative along every direction ``v``; here "every" means the coordinate
axes plus a batch of random unit directions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from quasisep.domain import BoxDomain, contains_many, sample
from quasisep.expr import DomainError, as_evaluable, gradient_many
from quasisep.gencv import Verdict, Witness

__all__ = [
    "SuperdiffConfig",
    "DiniEstimate",
    "SuperdiffCandidate",
    "dini_upper",
    "dini_lower",
    "candidate_supergradients",
    "superdiff_membership",
    "zero_in_superdiff",
    "check_d_pseudoconcave",
    "check_quasiconcave_superdiff",
    "check_upper_level_superdiff",
]


@dataclass(frozen=True)
class SuperdiffConfig:
    t0: float = 1e-2
    halvings: int = 20
    directions: int = 16  # random unit directions on top of the +-axes
    samples: int = 2000  # y samples for the concave (global) membership test
    pairs: int = 400  # (x, y) pairs for the pseudoconcavity tests
    grid: int = 5  # candidate values per kinked coordinate
    max_candidates: int = 3125
    kink_rel: float = 1e-3
    tol: float = 1e-6
    fd_step: float = 1e-5
    seed: int = 0
    bound: float = 10.0

    def with_(self, **kw) -> "SuperdiffConfig":
        return replace(self, **kw)

    @property
    def steps(self) -> np.ndarray:
        return self.t0 / 2.0 ** np.arange(self.halvings + 1)


@dataclass(frozen=True)
class DiniEstimate:
    value: float
    direction: np.ndarray
    steps_used: tuple
    monotone_tail: bool

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "direction": self.direction.tolist(),
            "steps_used": len(self.steps_used),
            "monotone_tail": self.monotone_tail,
        }


@dataclass(frozen=True)
class SuperdiffCandidate:
    point: np.ndarray
    covector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(-1))
        object.__setattr__(self, "covector", np.asarray(self.covector, dtype=float).reshape(-1))
        if self.point.shape != self.covector.shape:
            raise ValueError("point and covector must have the same dimension")


# --------------------------------------------------------------------------
# difference quotients


def _quotients(f, x: np.ndarray, V: np.ndarray, steps: np.ndarray, dom: Optional[BoxDomain]) -> np.ndarray:
    """(directions, steps) array of forward quotients ``(f(x + t v) - f(x)) / t``."""
    pts = x[None, None, :] + steps[None, :, None] * V[:, None, :]
    flat = pts.reshape(-1, x.size)
    if dom is not None and not np.all(contains_many(dom, flat)):
        raise DomainError("step schedule leaves the domain")
    fx = float(f.evaluate_many(x[None, :])[0])
    vals = f.evaluate_many(flat).reshape(V.shape[0], steps.size)
    return (vals - fx) / steps[None, :]


def _quotients_retry(f, x, V, cfg: SuperdiffConfig, dom) -> tuple:
    steps = cfg.steps
    try:
        return _quotients(f, x, V, steps, dom), steps
    except DomainError:
        steps = steps * 2.0**-10
        try:
            return _quotients(f, x, V, steps, dom), steps
        except DomainError as exc:
            raise DomainError(f"Dini step schedule leaves the domain at {x.tolist()}: {exc}") from None


def _tail(q: np.ndarray) -> np.ndarray:
    return q[..., q.shape[-1] // 2 :]


def _monotone(q: np.ndarray) -> bool:
    d = np.diff(q[-3:])
    return bool(np.all(d >= 0) or np.all(d <= 0))


def _point_dir(f, x, v):
    x = np.asarray(x, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if x.shape != v.shape:
        raise ValueError("point and direction must have the same dimension")
    return as_evaluable(f, x.size), x, v


def dini_upper(f, x, v, cfg: SuperdiffConfig | None = None, dom: BoxDomain | None = None) -> DiniEstimate:
    """Upper Dini derivative: max of the tail-half quotients."""
    cfg = cfg or SuperdiffConfig()
    f, x, v = _point_dir(f, x, v)
    q, steps = _quotients_retry(f, x, v[None, :], cfg, dom)
    q = q[0]
    return DiniEstimate(float(np.max(_tail(q))), v, tuple(steps.tolist()), _monotone(q))


def dini_lower(f, x, v, cfg: SuperdiffConfig | None = None, dom: BoxDomain | None = None) -> DiniEstimate:
    """Lower Dini derivative: min of the tail-half quotients."""
    cfg = cfg or SuperdiffConfig()
    f, x, v = _point_dir(f, x, v)
    q, steps = _quotients_retry(f, x, v[None, :], cfg, dom)
    q = q[0]
    return DiniEstimate(float(np.min(_tail(q))), v, tuple(steps.tolist()), _monotone(q))


def dini_lower_many(f, x, V, cfg: SuperdiffConfig | None = None, dom: BoxDomain | None = None) -> np.ndarray:
    cfg = cfg or SuperdiffConfig()
    x = np.asarray(x, dtype=float).reshape(-1)
    q, _ = _quotients_retry(as_evaluable(f, x.size), x, np.atleast_2d(V), cfg, dom)
    return np.min(_tail(q), axis=1)


def _probe_directions(n: int, cfg: SuperdiffConfig, salt=0) -> np.ndarray:
    eye = np.eye(n)
    rng = np.random.default_rng([cfg.seed, 11, salt])
    R = rng.normal(size=(cfg.directions, n))
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    return np.concatenate([eye, -eye, R])


def _value_scale(f, x) -> float:
    return max(1.0, abs(float(f.evaluate_many(x[None, :])[0])))


# --------------------------------------------------------------------------
# membership


def superdiff_membership(
    f,
    cand: SuperdiffCandidate,
    cfg: SuperdiffConfig | None = None,
    dom: BoxDomain | None = None,
    concave: bool = False,
) -> Verdict:
    """Is ``cand.covector`` in the superdifferential of ``f`` at ``cand.point``?

    For ``concave`` f the global supergradient inequality is checked on
    ``cfg.samples`` points of ``dom``; otherwise the Dini inequality
    ``<x*, v> >= lower Dini(f, x, v) - tol`` over the probe directions.
    """
    cfg = cfg or SuperdiffConfig()
    x, xs = cand.point, cand.covector
    f = as_evaluable(f, x.size)
    scale = _value_scale(f, x)
    if concave:
        if dom is None:
            raise ValueError("the concave membership test needs a domain to sample")
        Y = sample(dom, cfg.samples, [cfg.seed, 13], cfg.bound)
        fx = float(f.evaluate_many(x[None, :])[0])
        fy = f.evaluate_many(Y)
        gap = fy - (fx + (Y - x) @ xs)
        bad = np.flatnonzero(gap > cfg.tol * scale)
        if bad.size == 0:
            return Verdict(False, cfg.samples, prop="superdifferential")
        i = int(bad[0])
        return Verdict(True, i + 1, Witness((x, Y[i]), None, float(gap[i]), i), "superdifferential")
    V = _probe_directions(x.size, cfg)
    lower = dini_lower_many(f, x, V, cfg, dom)
    gap = lower - V @ xs
    bad = np.flatnonzero(gap > cfg.tol * scale)
    if bad.size == 0:
        return Verdict(False, V.shape[0], prop="superdifferential")
    i = int(bad[0])
    return Verdict(True, i + 1, Witness((x, V[i]), None, float(gap[i]), i), "superdifferential")


def zero_in_superdiff(f, x, cfg: SuperdiffConfig | None = None, dom: BoxDomain | None = None) -> Verdict:
    """0 is a supergradient iff no probe direction has a positive lower Dini derivative."""
    x = np.asarray(x, dtype=float).reshape(-1)
    v = superdiff_membership(f, SuperdiffCandidate(x, np.zeros_like(x)), cfg, dom)
    return replace(v, prop="zero-in-superdifferential")


def candidate_supergradients(
    f, x, cfg: SuperdiffConfig | None = None, dom: BoxDomain | None = None, extra=None
) -> np.ndarray:
    """Finite inner approximation of the superdifferential at ``x``.

    Per coordinate the admissible interval is ``[D(e_i), -D(-e_i)]`` with
    ``D`` the lower Dini derivative.  Coordinates where it is a point use the
    central-difference partial; kinked coordinates contribute ``cfg.grid``
    values.  The product set is then filtered by the Dini inequality on the
    probe directions.  An empty (0, n) array means no supergradient was
    found, as at a convex kink.  ``extra`` covectors are clipped into the
    coordinate intervals and filtered along with the grid.
    """
    cfg = cfg or SuperdiffConfig()
    x = np.asarray(x, dtype=float).reshape(-1)
    f = as_evaluable(f, x.size)
    n = x.size
    V = _probe_directions(n, cfg)
    lower = dini_lower_many(f, x, V, cfg, dom)
    scale = _value_scale(f, x)
    s_plus = lower[:n]
    s_minus = -lower[n : 2 * n]
    width = s_minus - s_plus
    mag = np.maximum(1.0, np.maximum(np.abs(s_plus), np.abs(s_minus)))
    kinked = np.abs(width) > cfg.kink_rel * mag
    if np.any(kinked & (width < 0)):
        return np.empty((0, n))
    try:
        grad = gradient_many(f, x[None, :], cfg.fd_step)[0] if not np.all(kinked) else np.zeros(n)
    except DomainError:
        grad = 0.5 * (s_plus + s_minus)
    axes = []
    for i in range(n):
        if kinked[i]:
            axes.append(np.linspace(s_plus[i], s_minus[i], cfg.grid))
        else:
            axes.append(np.array([grad[i]]))
    count = int(np.prod([a.size for a in axes]))
    if count > cfg.max_candidates:
        raise ValueError(f"candidate product set of size {count} exceeds max_candidates")
    C = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, n)
    if extra is not None and len(extra):
        E = np.atleast_2d(np.asarray(extra, dtype=float))
        E = np.where(kinked, np.clip(E, s_plus, s_minus), grad)
        C = np.concatenate([C, E])
    ok = np.all(C @ V.T >= lower[None, :] - cfg.tol * scale, axis=1)
    return C[ok]


# --------------------------------------------------------------------------
# pair tests


def _pairs(dom: BoxDomain, cfg: SuperdiffConfig, anchors) -> tuple:
    X = sample(dom, cfg.pairs, [cfg.seed, 21], cfg.bound)
    Y = sample(dom, cfg.pairs, [cfg.seed, 22], cfg.bound)
    if anchors is not None and len(anchors):
        A = np.atleast_2d(np.asarray(anchors, dtype=float))
        k = min(cfg.pairs, 200)
        X = np.concatenate([np.repeat(A, k, axis=0), X])
        Y = np.concatenate([np.tile(Y[:k], (A.shape[0], 1)), Y])
    return X, Y


def _candidates_at(f, X: np.ndarray, cfg: SuperdiffConfig, dom, smooth: bool) -> list:
    if smooth:
        G = gradient_many(f, X, cfg.fd_step)
        return [G[i : i + 1] for i in range(X.shape[0])]
    return [candidate_supergradients(f, x, cfg, dom) for x in X]


def _is_smooth(f) -> bool:
    return bool(getattr(f, "is_smooth", False))


def check_d_pseudoconcave(
    f, dom: BoxDomain, cfg: SuperdiffConfig | None = None, anchors: Sequence | None = None
) -> Verdict:
    """Search for ``x, y`` and a supergradient ``x*`` at x with
    ``<x*, y - x> <= 0`` while ``f(y) > f(x)``.

    Smooth expressions use the gradient as the only candidate; otherwise
    candidate sets come from :func:`candidate_supergradients`.
    """
    cfg = cfg or SuperdiffConfig()
    f = as_evaluable(f, dom.dim)
    X, Y = _pairs(dom, cfg, anchors)
    fx = f.evaluate_many(X)
    fy = f.evaluate_many(Y)
    cands = _candidates_at(f, X, cfg, dom, _is_smooth(f))
    for i in range(X.shape[0]):
        C = cands[i]
        if C.shape[0] == 0:
            continue
        scale = max(1.0, abs(fx[i]), abs(fy[i]))
        if fy[i] - fx[i] <= cfg.tol * scale:
            continue
        d = Y[i] - X[i]
        inner = C @ d
        slack = cfg.tol * np.maximum(1.0, np.linalg.norm(C, axis=1) * np.linalg.norm(d))
        hit = np.flatnonzero(inner <= slack)
        if hit.size:
            w = Witness((X[i], Y[i], C[hit[0]]), None, float(fy[i] - fx[i]), i)
            return Verdict(True, i + 1, w, "d-pseudoconcave")
    return Verdict(False, X.shape[0], prop="d-pseudoconcave")


def check_quasiconcave_superdiff(
    f, dom: BoxDomain, cfg: SuperdiffConfig | None = None, lambdas=(0.25, 0.5, 0.75)
) -> Verdict:
    """Superdifferential characterization of quasiconcavity on sampled triples.

    Looks for ``x*`` at x with ``<x*, y - x> < 0`` and a point z of the
    segment [x, y] with ``f(y) > f(z)``.  For quasiconcave f, a descent
    covector toward y forces f(y) to be no larger than f anywhere on the
    segment.
    """
    cfg = cfg or SuperdiffConfig()
    f = as_evaluable(f, dom.dim)
    X, Y = _pairs(dom, cfg, None)
    L = np.asarray(lambdas, dtype=float)
    Z = X[:, None, :] + L[None, :, None] * (Y - X)[:, None, :]
    fz = f.evaluate_many(Z.reshape(-1, dom.dim)).reshape(X.shape[0], L.size)
    fy = f.evaluate_many(Y)
    fx = f.evaluate_many(X)
    fz = np.concatenate([fx[:, None], fz], axis=1)  # z = x belongs to the segment
    cands = _candidates_at(f, X, cfg, dom, _is_smooth(f))
    for i in range(X.shape[0]):
        C = cands[i]
        if C.shape[0] == 0:
            continue
        d = Y[i] - X[i]
        slack = cfg.tol * np.maximum(1.0, np.linalg.norm(C, axis=1) * np.linalg.norm(d))
        if not np.any(C @ d < -slack):
            continue
        scale = max(1.0, abs(fy[i]), float(np.max(np.abs(fz[i]))))
        gap = fy[i] - float(np.min(fz[i]))
        if gap > cfg.tol * scale:
            j = int(np.argmin(fz[i]))
            z = X[i] if j == 0 else Z[i, j - 1]
            return Verdict(True, i + 1, Witness((X[i], Y[i], z), None, float(gap), i), "quasiconcave-superdiff")
    return Verdict(False, X.shape[0], prop="quasiconcave-superdiff")


def check_upper_level_superdiff(
    f, dom: BoxDomain, xbar, cfg: SuperdiffConfig | None = None, smooth: bool | None = None
) -> Verdict:
    """For quasiconcave f: ``<xbar*, x - xbar> >= 0`` whenever ``f(x) > f(xbar)``.

    Every probed supergradient ``xbar*`` at ``xbar`` is tested against
    sampled points of the strict upper-level set.
    """
    cfg = cfg or SuperdiffConfig()
    f = as_evaluable(f, dom.dim)
    xb = np.asarray(xbar, dtype=float).reshape(-1)
    use_grad = _is_smooth(f) if smooth is None else smooth
    C = _candidates_at(f, xb[None, :], cfg, dom, use_grad)[0]
    X = sample(dom, cfg.samples, [cfg.seed, 23], cfg.bound)
    fb = float(f.evaluate_many(xb[None, :])[0])
    fx = f.evaluate_many(X)
    keep = np.flatnonzero(fx > fb + cfg.tol * max(1.0, abs(fb)))
    if C.shape[0] == 0 or keep.size == 0:
        return Verdict(False, 0, prop="upper-level-superdiff", notes=("nothing to check",))
    D = X[keep] - xb
    inner = D @ C.T  # (points, candidates)
    slack = cfg.tol * np.maximum(1.0, np.linalg.norm(D, axis=1)[:, None] * np.linalg.norm(C, axis=1)[None, :])
    bad = np.argwhere(inner < -slack)
    if bad.size == 0:
        return Verdict(False, int(keep.size), prop="upper-level-superdiff")
    i, j = (int(v) for v in bad[0])
    w = Witness((xb, X[keep[i]], C[j]), None, float(-inner[i, j]), int(keep[i]))
    return Verdict(True, i + 1, w, "upper-level-superdiff")
