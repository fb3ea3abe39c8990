"""Sampling falsifiers for concavity-type properties.

A tester draws point pairs from a box and checks the defining inequality of
the property on them.  A :class:`Verdict` is either *falsified*, carrying a
witness that reproduces the violation, or *corroborated* at the stated
sample budget.  Corroboration is evidence, never proof.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from quasisep.domain import BoxDomain, sample
from quasisep.expr import DomainError, as_evaluable, gradient_many

__all__ = [
    "Kind",
    "ConcavityProperty",
    "SamplingConfig",
    "Witness",
    "Verdict",
    "check_property",
    "check_upper_level_necessary",
    "replay",
    "CONCAVE",
    "QUASICONCAVE",
    "SEMISTRICT",
    "LOGCONCAVE",
    "PSEUDOCONCAVE",
    "QC_GRADIENT",
    "r_concave",
]


class Kind(enum.Enum):
    CONCAVE = "concave"
    QUASICONCAVE = "quasiconcave"
    SEMISTRICT = "semistrict"
    LOGCONCAVE = "logconcave"
    RCONCAVE = "rconcave"
    PSEUDOCONCAVE = "pseudoconcave"
    QC_GRADIENT = "qcgradient"


@dataclass(frozen=True)
class ConcavityProperty:
    kind: Kind
    r: float = 0.0

    def normalized(self) -> "ConcavityProperty":
        # 0-concave means concave
        if self.kind is Kind.RCONCAVE and self.r == 0.0:
            return CONCAVE
        return self

    @property
    def uses_gradient(self) -> bool:
        return self.kind in (Kind.PSEUDOCONCAVE, Kind.QC_GRADIENT)

    @classmethod
    def from_name(cls, name: str) -> "ConcavityProperty":
        """Parse ``concave``, ``rconcave:-1``, ``pseudoconcave`` and so on."""
        base, _, arg = name.strip().lower().partition(":")
        kind = Kind(base)
        if kind is Kind.RCONCAVE:
            if not arg:
                raise ValueError("rconcave needs a parameter, e.g. rconcave:-1")
            return cls(kind, float(arg))
        if arg:
            raise ValueError(f"{base} takes no parameter")
        return cls(kind)

    def __str__(self) -> str:
        if self.kind is Kind.RCONCAVE:
            return f"rconcave:{self.r!r}"
        return self.kind.value


CONCAVE = ConcavityProperty(Kind.CONCAVE)
QUASICONCAVE = ConcavityProperty(Kind.QUASICONCAVE)
SEMISTRICT = ConcavityProperty(Kind.SEMISTRICT)
LOGCONCAVE = ConcavityProperty(Kind.LOGCONCAVE)
PSEUDOCONCAVE = ConcavityProperty(Kind.PSEUDOCONCAVE)
QC_GRADIENT = ConcavityProperty(Kind.QC_GRADIENT)


def r_concave(r: float) -> ConcavityProperty:
    return ConcavityProperty(Kind.RCONCAVE, float(r))


@dataclass(frozen=True)
class SamplingConfig:
    pairs: int = 2000
    lambdas: tuple = (0.1, 0.25, 0.5, 0.75, 0.9)
    random_lambdas: int = 5
    tol: float = 1e-9
    seed: int = 0
    bound: float = 10.0
    fd_step: float = 1e-5
    level_band: float = 1e-6  # near-level points counted in the closure of U^s

    def with_(self, **kw) -> "SamplingConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class Witness:
    """Points exhibiting a violation: ``(x, y)`` or ``(x, y, z)`` plus weight."""

    points: tuple
    lam: Optional[float]
    violation: float
    index: int

    def to_dict(self) -> dict:
        return {
            "points": [np.asarray(p).tolist() for p in self.points],
            "lambda": self.lam,
            "violation": self.violation,
            "sample_index": self.index,
        }


@dataclass(frozen=True)
class Verdict:
    falsified: bool
    samples_checked: int
    witness: Optional[Witness] = None
    prop: str = ""
    notes: tuple = field(default=())

    @property
    def corroborated(self) -> bool:
        return not self.falsified

    def to_dict(self) -> dict:
        out = {
            "outcome": "falsified" if self.falsified else "corroborated",
            "property": self.prop,
            "samples_checked": self.samples_checked,
        }
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# --------------------------------------------------------------------------
# transforms


def _transform(values: np.ndarray, prop: ConcavityProperty) -> np.ndarray:
    """Map g-values to the function whose concavity the property asks for."""
    if prop.kind is Kind.LOGCONCAVE:
        if np.any(values <= 0):
            raise DomainError("log-concavity test needs a positive function")
        return np.log(values)
    if prop.kind is Kind.RCONCAVE:
        with np.errstate(over="ignore"):
            v = np.exp(prop.r * values)
        if not np.all(np.isfinite(v)):
            raise DomainError(f"exp({prop.r} * f) overflows on the sample")
        # convexity of e^{rf} for r < 0 is concavity of its negative
        return v if prop.r > 0 else -v
    return values


def _scale(*arrays) -> np.ndarray:
    s = np.ones_like(arrays[0])
    for a in arrays:
        s = np.maximum(s, np.abs(a))
    return s


def _lambda_grid(cfg: SamplingConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    fixed = np.broadcast_to(np.asarray(cfg.lambdas, dtype=float), (count, len(cfg.lambdas)))
    extra = rng.uniform(0.0, 1.0, size=(count, cfg.random_lambdas))
    return np.concatenate([fixed, extra], axis=1)


def _pairs(dom: BoxDomain, cfg: SamplingConfig, anchors) -> tuple:
    pts = sample(dom, 2 * cfg.pairs, cfg.seed, cfg.bound)
    X, Y = pts[: cfg.pairs], pts[cfg.pairs :]
    if anchors is not None and len(anchors):
        A = np.atleast_2d(np.asarray(anchors, dtype=float))
        k = min(cfg.pairs, 200)
        AX = np.repeat(A, k, axis=0)
        AY = np.tile(Y[:k], (A.shape[0], 1))
        X = np.concatenate([AX, X])
        Y = np.concatenate([AY, Y])
    return X, Y


# --------------------------------------------------------------------------
# testers


def _segment_violations(g, X, Y, L, prop, tol):
    """Violation amounts on (pair, weight) triples for value-based properties."""
    P, n = X.shape
    Z = (1.0 - L)[:, :, None] * X[:, None, :] + L[:, :, None] * Y[:, None, :]
    gx = g.evaluate_many(X)
    gy = g.evaluate_many(Y)
    gz = g.evaluate_many(Z.reshape(-1, n)).reshape(P, -1)
    kind = prop.kind
    if kind is Kind.QUASICONCAVE:
        lo = np.minimum(gx, gy)[:, None]
        gap = lo - gz
        scale = _scale(gx[:, None], gy[:, None], gz)
        return gap, scale, Z
    if kind is Kind.SEMISTRICT:
        # g(b) > g(a) forces g(z) > g(a) strictly on the open segment.  Strictness
        # gets a relative margin tol, and only triples whose linear rise
        # lam_a * (g(b) - g(a)) clearly exceeds the margin are judged.
        lo = np.minimum(gx, gy)[:, None]
        hi = np.maximum(gx, gy)[:, None]
        lam_a = np.where((gx <= gy)[:, None], L, 1.0 - L)
        local = np.maximum(np.maximum(np.abs(lo), np.abs(gz)), 1e-300)
        judged = (lam_a * (hi - lo) > 10.0 * tol * _scale(gx[:, None], gy[:, None], gz)) & (L > 0) & (L < 1)
        # gap > tol * local  <=>  g(z) < g(a) + tol * local
        gap = np.where(judged, lo - gz + 2.0 * tol * local, -np.inf)
        return gap, local, Z
    vx, vy, vz = _transform(gx, prop), _transform(gy, prop), _transform(gz, prop)
    chord = (1.0 - L) * vx[:, None] + L * vy[:, None]
    return chord - vz, _scale(vx[:, None], vy[:, None], vz), Z


def _gradient_violations(g, X, Y, prop, cfg):
    gx = g.evaluate_many(X)
    gy = g.evaluate_many(Y)
    G = gradient_many(g, X, cfg.fd_step)
    inner = np.einsum("ij,ij->i", G, Y - X)
    scale = _scale(gx, gy)
    if prop.kind is Kind.PSEUDOCONCAVE:
        gap = np.where(inner <= 0.0, gy - gx, -np.inf)
    else:
        gap = np.where(inner < -cfg.tol * scale, gy - gx, -np.inf)
    return gap, scale


def check_property(
    f,
    dom: BoxDomain,
    prop: ConcavityProperty,
    cfg: SamplingConfig | None = None,
    anchors: Sequence | None = None,
) -> Verdict:
    """Search for a violation of ``prop`` by ``f`` on ``dom``.

    ``anchors`` are extra base points paired with the first sampled partners
    ahead of the random pairs; use them to probe known critical points.
    The first violation in sample order is returned.
    """
    cfg = cfg or SamplingConfig()
    prop = prop.normalized()
    g = as_evaluable(f, dom.dim)
    X, Y = _pairs(dom, cfg, anchors)
    P = X.shape[0]
    if prop.uses_gradient:
        gap, scale = _gradient_violations(g, X, Y, prop, cfg)
        hits = np.flatnonzero(gap > cfg.tol * scale)
        if hits.size == 0:
            return Verdict(False, P, prop=str(prop))
        i = int(hits[0])
        w = Witness((X[i], Y[i]), None, float(gap[i]), i)
        return Verdict(True, i + 1, w, str(prop))
    rng = np.random.default_rng([cfg.seed, 1])
    L = _lambda_grid(cfg, P, rng)
    gap, scale, Z = _segment_violations(g, X, Y, L, prop, cfg.tol)
    hits = np.flatnonzero((gap > cfg.tol * scale).ravel())
    if hits.size == 0:
        return Verdict(False, P * L.shape[1], prop=str(prop))
    k = int(hits[0])
    i, j = divmod(k, L.shape[1])
    w = Witness((X[i], Y[i], Z[i, j]), float(L[i, j]), float(gap[i, j]), k)
    return Verdict(True, k + 1, w, str(prop))


def replay(f, prop: ConcavityProperty, witness: Witness, cfg: SamplingConfig | None = None) -> float:
    """Recompute a witness's violation; positive means it still violates."""
    cfg = cfg or SamplingConfig()
    prop = prop.normalized()
    g = as_evaluable(f, len(witness.points[0]))
    X = np.atleast_2d(witness.points[0])
    Y = np.atleast_2d(witness.points[1])
    if prop.uses_gradient:
        gap, scale = _gradient_violations(g, X, Y, prop, cfg)
        return float(gap[0]) if gap[0] > cfg.tol * scale[0] else 0.0
    L = np.array([[witness.lam]])
    gap, scale, _ = _segment_violations(g, X, Y, L, prop, cfg.tol)
    return float(gap[0, 0]) if gap[0, 0] > cfg.tol * scale[0, 0] else 0.0


def check_upper_level_necessary(f, dom: BoxDomain, xbar, cfg: SamplingConfig | None = None) -> Verdict:
    """Sampled check that ``<grad f(xbar), x - xbar> >= 0`` on the closure of ``U^s(f, f(xbar))``.

    Expects a differentiable quasiconcave ``f``.  Points a little below the
    level (within ``cfg.level_band``) stand in for the closure; their slack
    is widened by a first-order estimate of the distance to the level set.
    """
    cfg = cfg or SamplingConfig()
    g = as_evaluable(f, dom.dim)
    xb = np.asarray(xbar, dtype=float)
    fb = float(g.evaluate_many(xb[None, :])[0])
    grad = gradient_many(g, xb[None, :], cfg.fd_step)[0]
    X = sample(dom, cfg.pairs, cfg.seed, cfg.bound)
    fx = g.evaluate_many(X)
    band = cfg.level_band * max(1.0, abs(fb))
    upper = fx > fb
    near = ~upper & (fx >= fb - band)
    keep = np.flatnonzero(upper | near)
    if keep.size == 0:
        return Verdict(False, 0, prop="upper-level-necessary", notes=("strict upper-level set empty on sample",))
    D = X[keep] - xb
    inner = D @ grad
    gnorm = np.linalg.norm(grad)
    slack = cfg.tol * np.maximum(1.0, gnorm * np.linalg.norm(D, axis=1))
    below = near[keep]
    if below.any():
        Gb = gradient_many(g, X[keep][below], cfg.fd_step)
        dist = (fb - fx[keep][below]) / np.maximum(np.linalg.norm(Gb, axis=1), 1e-300)
        slack[below] += 2.0 * gnorm * dist
    bad = np.flatnonzero(inner < -slack)
    if bad.size == 0:
        return Verdict(False, int(keep.size), prop="upper-level-necessary")
    i = int(bad[0])
    w = Witness((xb, X[keep[i]]), None, float(-inner[i]), int(keep[i]))
    return Verdict(True, i + 1, w, "upper-level-necessary")
