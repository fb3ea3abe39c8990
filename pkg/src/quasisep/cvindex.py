"""Multiplicative concavity index estimation.

For positive ``f`` the index is the threshold exponent: the supremum of
negative ``mu`` keeping ``f**mu`` convex when some negative power fails to
be convex, otherwise the supremum of positive ``mu`` keeping ``f**mu``
concave.  Both exponent sets are intervals (a power above one of a positive
convex function is convex, a power below one of a positive concave function
is concave), so the threshold is located by bisection on sampled
falsification tests.  Reported values are upper bounds: a falsified
exponent is a sound witness, a passing exponent is only corroborated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from quasisep import kernels
from quasisep.domain import BoxDomain, restrict, sample
from quasisep.expr import DomainError, as_evaluable

__all__ = [
    "ExtendedReal",
    "Branch",
    "IndexConfig",
    "IndexEstimate",
    "index_1d",
    "index",
    "reciprocal",
]


@dataclass(frozen=True, order=True)
class ExtendedReal:
    """A real number or +-infinity."""

    value: float

    PLUS_INFINITY = None  # set below
    MINUS_INFINITY = None

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if self.value == math.inf:
            return "+inf"
        if self.value == -math.inf:
            return "-inf"
        return repr(self.value)

    def to_json(self):
        return self.value if self.is_finite else str(self)


ExtendedReal.PLUS_INFINITY = ExtendedReal(math.inf)
ExtendedReal.MINUS_INFINITY = ExtendedReal(-math.inf)


def reciprocal(x: float) -> float:
    """1/x on the extended reals with 1/0 = +inf and 1/(+-inf) = 0."""
    if x == 0.0:
        return math.inf
    if math.isinf(x):
        return 0.0
    return 1.0 / x


class Branch(enum.Enum):
    NEGATIVE = "negative"
    NONNEGATIVE = "nonnegative"


@dataclass(frozen=True)
class IndexConfig:
    lam_min: float = -64.0
    lam_max: float = 64.0
    bisect_tol: float = 1e-3
    pairs: int = 400  # per line
    lambdas: tuple = (0.1, 0.25, 0.5, 0.75, 0.9)
    random_lambdas: int = 5
    tol: float = 1e-9
    seed: int = 0
    bound: float = 10.0
    lines: int = 12
    random_directions: int = 2
    hessian_step: float = 1e-4

    def with_(self, **kw) -> "IndexConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class IndexEstimate:
    index: ExtendedReal
    branch: Branch
    tolerance: float
    lines_probed: int
    low_confidence: bool = False
    log_concave: bool = True
    notes: tuple = field(default=())

    @property
    def value(self) -> float:
        return self.index.value

    def to_dict(self) -> dict:
        out = {
            "index": self.index.to_json(),
            "branch": self.branch.value,
            "tolerance": self.tolerance,
            "lines_probed": self.lines_probed,
            "log_concave": self.log_concave,
            "low_confidence": self.low_confidence,
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# --------------------------------------------------------------------------
# one dimension


def _truncate(a: float, b: float, bound: float) -> tuple:
    if math.isinf(b):
        b = max(bound, a + bound) if math.isfinite(a) else bound
    if math.isinf(a):
        a = min(-bound, b - bound)
    return a, b


class _PowerProbe:
    """Cached ln g on a fixed sample of 1-D triples; answers 'is g**mu (con)vex?'."""

    def __init__(self, g: Callable, a: float, b: float, cfg: IndexConfig, seed):
        rng = np.random.default_rng(seed)
        P = cfg.pairs
        s = rng.uniform(a, b, P)
        t = rng.uniform(a, b, P)
        fixed = np.broadcast_to(np.asarray(cfg.lambdas, dtype=float), (P, len(cfg.lambdas)))
        L = np.concatenate([fixed, rng.uniform(0.0, 1.0, (P, cfg.random_lambdas))], axis=1)
        z = (1.0 - L) * s[:, None] + L * t[:, None]
        vals = np.asarray(g(np.concatenate([s, t, z.ravel()])), dtype=float)
        if np.any(~np.isfinite(vals)):
            raise DomainError("non-finite value on the line sample")
        if np.any(vals <= 0.0):
            raise DomainError("the concavity index needs a positive function")
        logs = np.log(vals)
        self.ls = logs[:P]
        self.lt = logs[P : 2 * P]
        self.lz = logs[2 * P :].reshape(P, -1)
        self.L = L
        self.tol = cfg.tol
        self.skips = {}
        spread = np.max(np.abs(vals - vals[0]))
        self.constant = spread <= cfg.tol * max(1.0, float(np.max(np.abs(vals))))

    def holds(self, mu: float) -> bool:
        """Concavity of g**mu for mu > 0, convexity for mu < 0."""
        idx, _, skipped = kernels.first_power_violation(
            self.ls, self.lt, self.lz, self.L, mu, mu < 0, self.tol
        )
        self.skips[mu] = skipped
        return idx < 0

    def log_concave(self) -> bool:
        chord = (1.0 - self.L) * self.ls[:, None] + self.L * self.lt[:, None]
        gap = chord - self.lz
        scale = np.maximum(1.0, np.maximum(np.abs(self.lz), np.abs(chord)))
        return not np.any(gap > self.tol * scale)


def _bisect(holds, lo: float, hi: float, tol: float) -> tuple:
    # invariant: holds(lo) and not holds(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def _estimate(probe: _PowerProbe, cfg: IndexConfig) -> IndexEstimate:
    eps = cfg.bisect_tol
    notes = []
    ends = ()  # exponents whose verdict decides the reported value
    if not probe.holds(-eps):
        if not probe.holds(cfg.lam_min):
            ends = (cfg.lam_min,)
            est = IndexEstimate(
                ExtendedReal.MINUS_INFINITY, Branch.NEGATIVE, eps, 1, log_concave=False,
                notes=(f"g**{cfg.lam_min} is not convex: index below the search range",),
            )
        else:
            lo, value = _bisect(probe.holds, cfg.lam_min, -eps, eps)
            ends = (lo, value)
            est = IndexEstimate(ExtendedReal(value), Branch.NEGATIVE, eps, 1, log_concave=False)
    elif not probe.holds(eps):
        ends = (-eps, eps)
        lc = probe.log_concave()
        if not lc:
            notes.append("ln g failed the concavity test at the zero boundary")
        est = IndexEstimate(
            ExtendedReal(0.0), Branch.NONNEGATIVE, eps, 1, low_confidence=not lc, notes=tuple(notes)
        )
    elif probe.holds(cfg.lam_max):
        ends = (cfg.lam_max,)
        if probe.constant:
            est = IndexEstimate(ExtendedReal.PLUS_INFINITY, Branch.NONNEGATIVE, eps, 1)
        else:
            est = IndexEstimate(
                ExtendedReal(cfg.lam_max), Branch.NONNEGATIVE, eps, 1, low_confidence=True,
                notes=(f"g**{cfg.lam_max} still concave: index capped",),
            )
    else:
        lo, value = _bisect(probe.holds, eps, cfg.lam_max, eps)
        ends = (lo, value)
        est = IndexEstimate(ExtendedReal(value), Branch.NONNEGATIVE, eps, 1)
    skipped = max(probe.skips.get(mu, 0) for mu in ends)
    if skipped:
        est = replace(
            est,
            low_confidence=True,
            notes=est.notes + (f"{skipped} probe triples dropped for non-finite exponents",),
        )
    return est


def index_1d(g: Callable, interval: tuple, cfg: IndexConfig | None = None, seed=None) -> IndexEstimate:
    """Concavity index of a positive function of one variable.

    ``g`` maps a 1-D array of abscissae to values; ``interval`` is open and
    may be infinite (cut at ``cfg.bound``).
    """
    cfg = cfg or IndexConfig()
    a, b = _truncate(float(interval[0]), float(interval[1]), cfg.bound)
    if not a < b:
        raise ValueError("empty interval")
    probe = _PowerProbe(g, a, b, cfg, cfg.seed if seed is None else seed)
    return _estimate(probe, cfg)


# --------------------------------------------------------------------------
# n dimensions


def _log_hessian_direction(f, x: np.ndarray, h: float) -> np.ndarray | None:
    """Direction H^{-1} grad(ln f) at x, the extremal direction of the local index."""
    n = x.size
    hs = h * np.maximum(1.0, np.abs(x))
    eye = np.eye(n)
    pts = [x]
    for i in range(n):
        pts += [x + hs[i] * eye[i], x - hs[i] * eye[i]]
    for i in range(n):
        for j in range(i + 1, n):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                pts.append(x + si * hs[i] * eye[i] + sj * hs[j] * eye[j])
    try:
        vals = f.evaluate_many(np.array(pts))
    except DomainError:
        return None
    if np.any(vals <= 0):
        return None
    phi = np.log(vals)
    grad = np.empty(n)
    H = np.empty((n, n))
    k = 1
    for i in range(n):
        grad[i] = (phi[k] - phi[k + 1]) / (2 * hs[i])
        H[i, i] = (phi[k] - 2 * phi[0] + phi[k + 1]) / hs[i] ** 2
        k += 2
    for i in range(n):
        for j in range(i + 1, n):
            pp, pm, mp, mm = phi[k : k + 4]
            H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * hs[i] * hs[j])
            k += 4
    d, *_ = np.linalg.lstsq(H, grad, rcond=None)
    norm = np.linalg.norm(d)
    if not np.isfinite(norm) or norm == 0.0:
        return None
    return d / norm


def index(f, dom: BoxDomain, cfg: IndexConfig | None = None) -> IndexEstimate:
    """Infimum of line-restriction indices over probed lines of ``dom``.

    In one dimension the single line is the whole (truncated) interval.  In
    higher dimensions each of ``cfg.lines`` random base points contributes
    the extremal direction of the local index plus random directions.
    """
    cfg = cfg or IndexConfig()
    f = as_evaluable(f, dom.dim)
    lo, hi = dom.truncated(cfg.bound)
    box = BoxDomain(tuple(lo), tuple(hi))
    n = dom.dim
    lines = []
    if n == 1:
        lines.append((np.array([0.5 * (lo[0] + hi[0])]), np.array([1.0])))
    else:
        bases = sample(dom, cfg.lines, cfg.seed, cfg.bound)
        rng = np.random.default_rng([cfg.seed, 7])
        for x in bases:
            d = _log_hessian_direction(f, x, cfg.hessian_step)
            if d is not None:
                lines.append((x, d))
            for _ in range(cfg.random_directions):
                v = rng.normal(size=n)
                lines.append((x, v / np.linalg.norm(v)))
    estimates = []
    for k, (x, d) in enumerate(lines):
        line = restrict(box, x, d)
        g = lambda t, line=line: f.evaluate_many(line.points(t))
        probe = _PowerProbe(g, line.t_min, line.t_max, cfg, [cfg.seed, k])
        estimates.append(_estimate(probe, cfg))
    best = min(estimates, key=lambda e: e.index.value)
    branch = Branch.NEGATIVE if any(e.branch is Branch.NEGATIVE for e in estimates) else Branch.NONNEGATIVE
    return replace(
        best,
        branch=branch,
        lines_probed=len(lines),
        log_concave=all(e.log_concave for e in estimates) and best.index.value >= 0,
    )
