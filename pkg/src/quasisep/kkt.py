"""KKT and modified (supergradient) KKT certificates for separable problems.

Problems are ``max f(x)`` over ``x`` in a box subject to ``h_j(x) >= 0``
with ``f`` a :class:`~quasisep.separable.ProductFunction`.  A certificate is
a point and a multiplier vector; checking one reports *Valid*, *Invalid*
with the first failed condition, or *HypothesisUnmet* when the conditions
hold but a hypothesis of the sufficiency theorem could not be confirmed.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from quasisep.domain import BoxDomain, contains, contains_many, normal_cone_residual, sample
from quasisep.expr import DomainError, Expression, gradient_many, parse
from quasisep.separable import ProductFunction
from quasisep.superdiff import SuperdiffConfig, candidate_supergradients, zero_in_superdiff

__all__ = [
    "Constraint",
    "ConstrainedProblem",
    "KKTConfig",
    "CertificateVerdict",
    "CertificateReport",
    "InfeasiblePointError",
    "check_kkt_diff",
    "check_mkkt",
    "find_slater",
]

TINY = 1e-300


class InfeasiblePointError(ValueError):
    """The candidate point is outside the box or violates a constraint."""


@dataclass(frozen=True)
class Constraint:
    expr: Expression
    quasiconcave: bool = True  # declared by the user

    @property
    def text(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class ConstrainedProblem:
    objective: ProductFunction
    constraints: tuple = ()
    domain: Optional[BoxDomain] = None

    def __post_init__(self):
        cons = []
        for c in self.constraints:
            if isinstance(c, str):
                c = Constraint(parse(c))
            elif isinstance(c, Expression):
                c = Constraint(c)
            if c.expr.arity > self.objective.total_dimension:
                raise ValueError(f"constraint {c.text} uses variables beyond x{self.objective.total_dimension}")
            cons.append(c)
        object.__setattr__(self, "constraints", tuple(cons))
        dom = self.domain or self.objective.domain
        if dom.dim != self.objective.total_dimension:
            raise ValueError("domain dimension does not match the objective")
        object.__setattr__(self, "domain", dom)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def constraint_values(self, points) -> np.ndarray:
        """(m, p) array of ``h_j`` at each row."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.constraints:
            return np.empty((pts.shape[0], 0))
        return np.stack([c.expr.evaluate_many(pts) for c in self.constraints], axis=1)

    def feasible_many(self, points, act_tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = contains_many(self.domain, pts)
        if not self.constraints:
            return inside
        H = np.full((pts.shape[0], len(self.constraints)), -np.inf)
        if inside.any():
            H[inside] = self.constraint_values(pts[inside])
        return inside & np.all(H >= -act_tol, axis=1)


@dataclass(frozen=True)
class KKTConfig:
    tol: float = 1e-6
    act_tol: float = 1e-7
    fd_step: float = 1e-5
    budget: int = 2000  # Slater search samples
    margin: float = 1e-6
    surface: int = 12  # active-surface points for the constraint hypothesis
    min_surface: int = 10
    seed: int = 0
    bound: float = 10.0
    superdiff: SuperdiffConfig = SuperdiffConfig()

    def with_(self, **kw) -> "KKTConfig":
        return replace(self, **kw)


class CertificateVerdict(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    HYPOTHESIS_UNMET = "hypothesis-unmet"


@dataclass(frozen=True)
class CertificateReport:
    verdict: CertificateVerdict
    failed_condition: Optional[str] = None
    hypothesis: Optional[str] = None
    stationarity: float = float("nan")
    scale: float = 1.0
    complementarity: tuple = ()
    sign_violations: tuple = ()
    active_set: tuple = ()
    slater_point: Optional[np.ndarray] = None
    warnings: tuple = field(default=())
    selection: Optional[tuple] = None  # covectors realizing the supergradient residual

    @property
    def valid(self) -> bool:
        return self.verdict is CertificateVerdict.VALID

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "stationarity_residual": self.stationarity,
            "residual_scale": self.scale,
            "complementarity": list(self.complementarity),
            "sign_violations": list(self.sign_violations),
            "active_set": list(self.active_set),
        }
        if self.failed_condition:
            out["failed_condition"] = self.failed_condition
        if self.hypothesis:
            out["hypothesis"] = self.hypothesis
        if self.slater_point is not None:
            out["slater_point"] = np.asarray(self.slater_point).tolist()
        if self.warnings:
            out["warnings"] = list(self.warnings)
        if self.selection is not None:
            out["selection"] = [np.asarray(v).tolist() for v in self.selection]
        return out


# --------------------------------------------------------------------------
# shared pieces


def _prepare(prob: ConstrainedProblem, xbar, lam, cfg: KKTConfig) -> tuple:
    x = np.asarray(xbar, dtype=float).reshape(-1)
    if x.size != prob.dim:
        raise ValueError(f"point has {x.size} coordinates, problem has {prob.dim}")
    lam = np.asarray(lam if lam is not None else [], dtype=float).reshape(-1)
    if lam.size != len(prob.constraints):
        raise ValueError(f"expected {len(prob.constraints)} multipliers, got {lam.size}")
    if not contains(prob.domain, x):
        raise InfeasiblePointError(f"point {x.tolist()} lies outside the domain")
    h = prob.constraint_values(x)[0]
    bad = np.flatnonzero(h < -cfg.act_tol)
    if bad.size:
        j = int(bad[0])
        raise InfeasiblePointError(f"constraint {j + 1} is violated at {x.tolist()}: h = {h[j]!r}")
    return x, lam, h


def _multiplier_checks(lam: np.ndarray, h: np.ndarray, scale: float, cfg: KKTConfig) -> tuple:
    """(failed condition or None, complementarity residuals, sign violations)."""
    signs = tuple(int(j) for j in np.flatnonzero(lam < -cfg.tol * max(1.0, float(np.max(np.abs(lam), initial=0.0)))))
    comp = tuple(float(v) for v in np.abs(lam * h))
    if signs:
        return "multiplier-sign", comp, signs
    for j, (lj, hj) in enumerate(zip(lam, h)):
        if abs(hj) > cfg.act_tol and abs(lj * hj) > cfg.tol * scale:
            return "complementary-slackness", comp, signs
    return None, comp, signs


def _active(h: np.ndarray, cfg: KKTConfig) -> tuple:
    return tuple(int(j) for j in np.flatnonzero(np.abs(h) <= cfg.act_tol))


def _grad(f, x: np.ndarray, cfg: KKTConfig) -> np.ndarray:
    return gradient_many(f, x[None, :], cfg.fd_step)[0]


# --------------------------------------------------------------------------
# differentiable certificate


def check_kkt_diff(prob: ConstrainedProblem, xbar, lam, cfg: KKTConfig | None = None) -> CertificateReport:
    """Classical KKT check with central-difference gradients.

    Conditions are checked in the order sign, complementary slackness,
    stationarity; the first failure is reported.  Residuals are relative to
    ``max(|grad f| + sum |lam_j| |grad h_j|, |f(xbar)|)``, so scaling f and
    the multipliers together leaves the verdict unchanged.
    """
    cfg = cfg or KKTConfig()
    x, lam, h = _prepare(prob, xbar, lam, cfg)
    try:
        gf = _grad(prob.objective, x, cfg)
        gh = [_grad(c.expr, x, cfg) for c in prob.constraints]
    except DomainError as exc:
        raise DomainError(f"gradient evaluation failed at {x.tolist()}: {exc}") from None
    fx = abs(prob.objective(x))
    scale = max(np.linalg.norm(gf) + sum(abs(l) * np.linalg.norm(g) for l, g in zip(lam, gh)), fx, TINY)
    r = gf + sum((l * g for l, g in zip(lam, gh)), np.zeros_like(x))
    res = float(np.linalg.norm(r))
    active = _active(h, cfg)
    failed, comp, signs = _multiplier_checks(lam, h, scale, cfg)
    if failed is None and res > cfg.tol * scale:
        failed = "stationarity"
    warnings = []
    if prob.constraints and not np.any(h > cfg.act_tol):
        warnings.append("no constraint is strictly positive at the point")
    hypothesis = None
    for j, g in enumerate(gh):
        if np.linalg.norm(g) <= cfg.tol * max(1.0, abs(float(h[j]))):
            hypothesis = f"constraint {j + 1} has a zero gradient at the point"
            break
    if failed:
        verdict = CertificateVerdict.INVALID
    elif hypothesis:
        verdict = CertificateVerdict.HYPOTHESIS_UNMET
    else:
        verdict = CertificateVerdict.VALID
    return CertificateReport(
        verdict, failed, hypothesis, res, float(scale), comp, signs, active, None, tuple(warnings), (gf, *gh)
    )


# --------------------------------------------------------------------------
# Slater points and the active-surface hypothesis


def find_slater(prob: ConstrainedProblem, cfg: KKTConfig | None = None) -> Optional[np.ndarray]:
    """First point with every ``h_j >= 0`` and some ``h_j > margin``.

    ``cfg.budget`` domain samples are scanned first.  When none qualifies,
    the first ``SLATER_REPAIRS`` samples are pushed by Newton steps on the
    most violated constraint toward ``h_j >= 2 * margin``, which finds thin
    feasible sets that uniform sampling misses.  Returns None when nothing
    qualifies or when the problem has no constraints.
    """
    cfg = cfg or KKTConfig()
    if not prob.constraints:
        return None
    X = sample(prob.domain, cfg.budget, [cfg.seed, 31], cfg.bound)
    H = _constraint_table(prob, X)
    hits = np.flatnonzero(_slater_ok(H, cfg))
    if hits.size:
        return X[hits[0]].copy()
    for x in X[:SLATER_REPAIRS]:
        y = _push_feasible(prob, x, cfg)
        if y is not None and _slater_ok(_constraint_table(prob, y[None, :]), cfg)[0]:
            return y
    return None


SLATER_REPAIRS = 32


def _constraint_table(prob: ConstrainedProblem, X: np.ndarray) -> np.ndarray:
    try:
        return prob.constraint_values(X)
    except DomainError:
        return np.stack([_safe_values(c.expr, X) for c in prob.constraints], axis=1)


def _slater_ok(H: np.ndarray, cfg: KKTConfig) -> np.ndarray:
    return np.all(H >= 0.0, axis=1) & np.any(H > cfg.margin, axis=1)


def _push_feasible(prob: ConstrainedProblem, x: np.ndarray, cfg: KKTConfig, iters: int = 40) -> Optional[np.ndarray]:
    target = 2.0 * cfg.margin
    y = x.copy()
    for _ in range(iters):
        h = _constraint_table(prob, y[None, :])[0]
        j = int(np.argmin(h))
        if h[j] >= target:
            return y
        if not np.isfinite(h[j]):
            return None
        try:
            g = _grad(prob.constraints[j].expr, y, cfg)
        except DomainError:
            return None
        gg = float(g @ g)
        if gg <= TINY:
            return None
        step = (target - h[j]) * g / gg
        for _ in range(40):
            if contains(prob.domain, y + step):
                break
            step = 0.5 * step
        else:
            return None
        y = y + step
    return None


def _safe_values(f, X: np.ndarray) -> np.ndarray:
    out = np.full(X.shape[0], -np.inf)
    for i, x in enumerate(X):
        try:
            out[i] = f.evaluate_many(x[None, :])[0]
        except DomainError:
            pass
    return out


def surface_points(prob: ConstrainedProblem, j: int, xbar, cfg: KKTConfig, anchor=None) -> np.ndarray:
    """Feasible points with ``|h_j| <= act_tol``; ``xbar`` (assumed on the surface) comes first.

    Sampled points with ``h_j > 0`` (plus ``anchor``, typically a Slater
    point) are paired with points where ``h_j < 0`` and each segment is
    bisected to the zero surface.  Segments stay inside the box, so this
    works for thin feasible sets where projection would leave the domain.
    """
    h = prob.constraints[j].expr
    X = sample(prob.domain, 8 * cfg.surface, [cfg.seed, 41, j], cfg.bound)
    v = _safe_values(h, X)
    pos = X[v > cfg.act_tol]
    if anchor is not None and float(_safe_values(h, np.asarray(anchor, dtype=float)[None, :])[0]) > cfg.act_tol:
        pos = np.concatenate([np.asarray(anchor, dtype=float)[None, :], pos])
    neg = X[np.isfinite(v) & (v < -cfg.act_tol)]
    found = [np.asarray(xbar, dtype=float)]
    if pos.shape[0] == 0:
        return np.array(found)
    for k, b in enumerate(neg):
        if len(found) >= cfg.surface:
            break
        y = _bisect_surface(h, pos[k % pos.shape[0]], b, cfg)
        if y is not None and prob.feasible_many(y[None, :], cfg.act_tol)[0]:
            found.append(y)
    return np.array(found)


def _bisect_surface(h, a: np.ndarray, b: np.ndarray, cfg: KKTConfig) -> Optional[np.ndarray]:
    # h(a) > 0 > h(b); keep that bracket
    for _ in range(200):
        m = 0.5 * (a + b)
        v = float(_safe_values(h, m[None, :])[0])
        if not np.isfinite(v):
            return None
        if abs(v) <= 0.5 * cfg.act_tol:
            return m
        if v > 0:
            a = m
        else:
            b = m
    return None


def _surface_hypothesis(prob, active, xbar, cfg: KKTConfig, anchor=None) -> Optional[str]:
    for j in active:
        pts = surface_points(prob, j, xbar, cfg, anchor)
        if pts.shape[0] < cfg.min_surface:
            return f"insufficient surface samples for constraint {j + 1} ({pts.shape[0]} < {cfg.min_surface})"
        for y in pts:
            try:
                v = zero_in_superdiff(prob.constraints[j].expr, y, cfg.superdiff, prob.domain)
            except DomainError:
                return f"constraint {j + 1} cannot be probed near {y.tolist()}"
            if v.corroborated:
                return f"0 is a supergradient of constraint {j + 1} at {y.tolist()}"
    return None


# --------------------------------------------------------------------------
# supergradient certificate


def _candidate_set(f, x, cfg: KKTConfig, dom: BoxDomain, extra=None) -> np.ndarray:
    if getattr(f, "is_smooth", False):
        return _grad(f, x, cfg)[None, :]
    return candidate_supergradients(f, x, cfg.superdiff, dom, extra)


def supergradient_residual(prob: ConstrainedProblem, x, lam, cfg: KKTConfig) -> tuple:
    """Smallest distance from ``x*_f + sum lam_j x*_j`` to the normal cone.

    Minimizes over the product of candidate sets of the objective and of the
    constraints with nonzero multipliers; ties resolve to the
    lexicographically first candidate tuple.  The objective set also gets
    the covector cancelling the first constraint selection, clipped to the
    Dini bounds, so near-kink points are not lost to grid spacing.  Returns
    ``(residual, scale, selection)``; residual is inf when a candidate set
    is empty.
    """
    used = [j for j in range(len(prob.constraints)) if lam[j] != 0.0]
    cons = [_candidate_set(prob.constraints[j].expr, x, cfg, prob.domain) for j in used]
    # the objective covector that would cancel the first constraint selection
    target = -sum((lam[j] * c[0] for j, c in zip(used, cons) if c.shape[0]), np.zeros_like(x))
    sets = [_candidate_set(prob.objective, x, cfg, prob.domain, extra=[target])] + cons
    if any(s.shape[0] == 0 for s in sets):
        return float("inf"), 1.0, None
    fx = abs(prob.objective(x))
    best = (float("inf"), 1.0, None)
    for combo in itertools.product(*(range(s.shape[0]) for s in sets)):
        vecs = [sets[k][i] for k, i in enumerate(combo)]
        w = vecs[0] + sum((lam[j] * v for j, v in zip(used, vecs[1:])), np.zeros_like(x))
        res = normal_cone_residual(prob.domain, x, w)
        if res < best[0]:
            mag = np.linalg.norm(vecs[0]) + sum(abs(lam[j]) * np.linalg.norm(v) for j, v in zip(used, vecs[1:]))
            best = (res, max(mag, fx, TINY), tuple(vecs))
    return best


def check_mkkt(prob: ConstrainedProblem, xbar, lam, cfg: KKTConfig | None = None) -> CertificateReport:
    """Modified KKT check with supergradient candidate sets and the box normal cone.

    The multiplier conditions are checked first, then the supergradient
    stationarity inclusion (decided by finite minimization, so *Invalid*
    means no certificate was found in the candidate sets), then the
    hypotheses: a Slater point and, on each active constraint's zero
    surface, that 0 is not a supergradient.
    """
    cfg = cfg or KKTConfig()
    x, lam, h = _prepare(prob, xbar, lam, cfg)
    active = _active(h, cfg)
    res, scale, selection = supergradient_residual(prob, x, lam, cfg)
    failed, comp, signs = _multiplier_checks(lam, h, scale, cfg)
    warnings = []
    if failed is None and not res <= cfg.tol * scale:
        failed = "supergradient-stationarity"
        if selection is None:
            warnings.append("an objective or constraint candidate supergradient set is empty")
    slater = None
    hypothesis = None
    if prob.constraints:
        # hypothesis sampling must cover the point itself, however large
        cfg = cfg.with_(bound=max(cfg.bound, 2.0 * float(np.max(np.abs(x)))))
        slater = find_slater(prob, cfg)
        if slater is None:
            hypothesis = f"no Slater point found in {cfg.budget} samples"
        else:
            if not np.all(prob.constraint_values(slater)[0] > cfg.margin):
                warnings.append("Slater point is strictly positive for some but not all constraints")
            hypothesis = _surface_hypothesis(prob, active, x, cfg, slater) if failed is None else None
    else:
        warnings.append("no constraints: Slater condition not applicable")
    if failed:
        verdict = CertificateVerdict.INVALID
    elif hypothesis:
        verdict = CertificateVerdict.HYPOTHESIS_UNMET
    else:
        verdict = CertificateVerdict.VALID
    return CertificateReport(
        verdict, failed, hypothesis, float(res), float(scale), comp, signs, active, slater, tuple(warnings), selection
    )
