"""Desk-scale solvers for separable quasiconcave maximization.

The ascent works on ``ln f`` (products are positive) with a diagonal
scaling taken from central second differences, so a separable log-concave
objective sees close to a Newton step.  Active constraints enter through a
projection of the scaled gradient onto their tangent cone, computed by
nonnegative least squares; steps that cross a constraint are pulled back by
Newton corrections.  Iterates stay inside the box with a small margin on
open faces.

For objectives decided quasiconcave the local result is global: a critical
point (smooth) or a zero supergradient (nonsmooth) certifies the
unconstrained problem, and a valid KKT or modified KKT certificate
certifies the constrained one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from quasisep.domain import BoxDomain, sample
from quasisep.expr import DomainError, gradient_many
from quasisep.gencv import QUASICONCAVE, SamplingConfig, check_property
from quasisep.kkt import (
    CertificateReport,
    ConstrainedProblem,
    KKTConfig,
    check_kkt_diff,
    check_mkkt,
)
from quasisep.separable import (
    Decision,
    ProductFunction,
    SeparableConfig,
    SeparableDecision,
    decide_quasiconcave,
    make_product,
)
from quasisep.superdiff import candidate_supergradients, zero_in_superdiff

__all__ = [
    "Certification",
    "SolveConfig",
    "RunRecord",
    "SolveResult",
    "GridResult",
    "NoFeasibleStartError",
    "solve_cobb_douglas",
    "cobb_douglas_problem",
    "solve_usqp",
    "solve_csqp",
    "grid_oracle",
]


class NoFeasibleStartError(RuntimeError):
    """No feasible starting point could be found."""


class Certification(enum.Enum):
    CRITICAL_POINT = "global-critical-point"
    ZERO_SUPERGRADIENT = "global-zero-supergradient"
    KKT = "global-kkt"
    MODIFIED_KKT = "global-modified-kkt"
    LOCAL_ONLY = "local-only"

    @property
    def is_global(self) -> bool:
        return self is not Certification.LOCAL_ONLY


@dataclass(frozen=True)
class SolveConfig:
    starts: int = 16
    max_iter: int = 500
    xtol: float = 1e-11  # relative step size at which a run stops
    cert_gtol: float = 1e-6  # |grad ln f| * max(1, |x|) for the critical-point certificate
    margin: float = 1e-9  # relative distance kept from open faces
    boundary_steps: int = 5
    fd_step: float = 1e-5
    act_band: float = 1e-9  # constraints at or below this count as active in the ascent
    seed: int = 0
    bound: float = 10.0
    check_constraints: bool = True
    kkt: KKTConfig = KKTConfig()
    separable: SeparableConfig = SeparableConfig()

    def with_(self, **kw) -> "SolveConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class RunRecord:
    start: np.ndarray
    point: np.ndarray
    value: float
    status: str  # converged | boundary | unbounded | max-iter
    iterations: int


@dataclass(frozen=True)
class SolveResult:
    maximizer: np.ndarray
    value: float
    certification: Certification
    starts_used: int
    status: str
    runs: tuple = ()
    multipliers: Optional[np.ndarray] = None
    certificate: Optional[CertificateReport] = None
    decision: Optional[SeparableDecision] = None
    notes: tuple = field(default=())

    @property
    def run_values(self) -> np.ndarray:
        return np.array([r.value for r in self.runs])

    def to_dict(self) -> dict:
        out = {
            "maximizer": np.asarray(self.maximizer).tolist(),
            "value": self.value,
            "certification": self.certification.value,
            "status": self.status,
            "starts_used": self.starts_used,
            "run_values": self.run_values.tolist(),
        }
        if self.multipliers is not None:
            out["multipliers"] = np.asarray(self.multipliers).tolist()
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        if self.decision is not None:
            out["decision"] = self.decision.quasiconcave.value
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# --------------------------------------------------------------------------
# Cobb-Douglas closed form


def solve_cobb_douglas(alpha: Sequence[float], p: Sequence[float], B: float) -> tuple:
    """Maximizer of ``prod x_i**alpha_i`` subject to ``p.x <= B`` and its multiplier."""
    a = np.asarray(alpha, dtype=float).reshape(-1)
    pr = np.asarray(p, dtype=float).reshape(-1)
    if a.size != pr.size or a.size == 0:
        raise ValueError("alpha and p must be non-empty and of equal length")
    if np.any(a <= 0) or np.any(pr <= 0) or not B > 0:
        raise ValueError("alpha, p and B must be positive")
    x = a * B / (a.sum() * pr)
    u = float(np.prod(x**a))
    lam = float(a[0] * u / (pr[0] * x[0]))
    return x, lam


def cobb_douglas_problem(alpha: Sequence[float], p: Sequence[float], B: float) -> ConstrainedProblem:
    """The budget problem as a :class:`ConstrainedProblem` on the open positive orthant."""
    half = BoxDomain.positive_orthant(1)
    factors = [(f"x{i + 1}^{float(a)!r}", half) for i, a in enumerate(alpha)]
    budget = f"{float(B)!r}" + "".join(f"-{float(c)!r}*x{i + 1}" for i, c in enumerate(p))
    return ConstrainedProblem(make_product(factors), (budget,))


# --------------------------------------------------------------------------
# ascent machinery


class _Box:
    """Clipping bounds: open faces are shrunk by the margin, closed faces kept."""

    def __init__(self, dom: BoxDomain, margin: float):
        lo = np.array(dom.lower)
        hi = np.array(dom.upper)
        m_lo = margin * np.maximum(1.0, np.abs(np.where(np.isfinite(lo), lo, 0.0)))
        m_hi = margin * np.maximum(1.0, np.abs(np.where(np.isfinite(hi), hi, 0.0)))
        self.lo = np.where(np.array(dom.closed_lower), lo, lo + m_lo)
        self.hi = np.where(np.array(dom.closed_upper), hi, hi - m_hi)
        self.open_lo = np.isfinite(lo) & ~np.array(dom.closed_lower)
        self.open_hi = np.isfinite(hi) & ~np.array(dom.closed_upper)
        self.band_lo = self.lo + m_lo
        self.band_hi = self.hi - m_hi

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def at_open_face(self, x: np.ndarray) -> bool:
        return bool(np.any(self.open_lo & (x <= self.band_lo)) or np.any(self.open_hi & (x >= self.band_hi)))

    def room(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(x - self.lo, self.hi - x)


class _Ascent:
    def __init__(self, prob: ConstrainedProblem, cfg: SolveConfig):
        self.prob = prob
        self.f = prob.objective
        self.cons = [c.expr for c in prob.constraints]
        self.cfg = cfg
        self.box = _Box(prob.domain, cfg.margin)

    # objective in log space; -inf outside the positive region
    def phi(self, X: np.ndarray) -> np.ndarray:
        try:
            v = self.f.evaluate_many(X)
        except DomainError:
            v = np.array([self._safe(x) for x in X])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), -np.inf)

    def _safe(self, x) -> float:
        try:
            return float(self.f.evaluate_many(x[None, :])[0])
        except DomainError:
            return -np.inf

    def h(self, x: np.ndarray) -> np.ndarray:
        if not self.cons:
            return np.empty(0)
        return np.array([float(c.evaluate_many(x[None, :])[0]) for c in self.cons])

    def hgrad(self, j: int, x: np.ndarray) -> np.ndarray:
        return gradient_many(self.cons[j], x[None, :], self.cfg.fd_step)[0]

    def derivatives(self, x: np.ndarray) -> tuple:
        """Richardson gradient and diagonal second differences of ln f."""
        n = x.size
        room = self.box.room(x)
        h = np.minimum(self.cfg.fd_step * np.maximum(1.0, np.abs(x)), 0.25 * np.maximum(room, 0.0))
        h = np.maximum(h, 1e-300)
        eye = np.eye(n)
        pts = [x[None, :]]
        for s in (1.0, 0.5):
            pts.append(x + s * h[:, None] * eye)
            pts.append(x - s * h[:, None] * eye)
        vals = self.phi(np.concatenate(pts))
        p0 = vals[0]
        fp, fm, hp, hm = (vals[1 + k * n : 1 + (k + 1) * n] for k in range(4))
        with np.errstate(all="ignore"):
            d1 = (fp - fm) / (2 * h)
            d2 = (hp - hm) / h
            g = (4.0 * d2 - d1) / 3.0
            H = (hp - 2 * p0 + hm) / (0.5 * h) ** 2
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            g = np.where(np.isfinite(g), g, 0.0)
            H = np.where(np.isfinite(H), H, 0.0)
        return float(p0), g, H

    def direction(self, x: np.ndarray, g: np.ndarray, H: np.ndarray) -> np.ndarray:
        floor = np.maximum(1e-12, np.abs(g) / np.maximum(1.0, np.abs(x)))
        D = 1.0 / np.maximum(-H, floor)
        hx = self.h(x)
        active = [j for j in range(len(self.cons)) if hx[j] <= self.cfg.act_band]
        if not active:
            return D * g
        A = np.array([self.hgrad(j, x) for j in active])
        sq = np.sqrt(D)
        mu, _ = nnls((sq[:, None] * A.T), -(sq * g))
        return D * (g + A.T @ mu)

    def repair(self, y: np.ndarray) -> Optional[np.ndarray]:
        """Newton corrections onto violated constraints, alternating with box clipping."""
        tol = 0.1 * self.cfg.kkt.act_tol
        for _ in range(50):
            y = self.box.clip(y)
            try:
                hy = self.h(y)
            except DomainError:
                return None
            if np.all(hy >= -tol):
                return y
            for j in np.flatnonzero(hy < -tol):
                try:
                    gj = self.hgrad(int(j), y)
                except DomainError:
                    return None
                gg = float(gj @ gj)
                if gg <= 1e-300:
                    return None
                # aim slightly inside so rounding leaves the point feasible
                y = y - (hy[j] - 1e-3 * tol) * gj / gg
        return None

    def run(self, x0: np.ndarray) -> RunRecord:
        cfg = self.cfg
        x = x0.copy()
        p0, g, H = self.derivatives(x)
        near = 0
        status = "max-iter"
        it = 0
        for it in range(1, cfg.max_iter + 1):
            d = self.direction(x, g, H)
            if np.max(np.abs(d)) <= cfg.xtol * max(1.0, float(np.max(np.abs(x)))):
                status = "converged"
                break
            cap = 0.5 * np.maximum(1.0, np.abs(x))
            s = min(1.0, float(np.min(cap / np.maximum(np.abs(d), 1e-300))))
            accepted = None
            for _ in range(60):
                y = self.repair(x + s * d) if self.cons else self.box.clip(x + s * d)
                if y is not None:
                    py = float(self.phi(y[None, :])[0])
                    gain = float(g @ (y - x))
                    if (gain > 0 and py >= p0 + 1e-4 * gain) or (gain <= 0 and py > p0):
                        accepted = (y, py)
                        break
                s *= 0.5
            if accepted is None:
                status = "converged"
                break
            x_new = accepted[0]
            step = float(np.max(np.abs(x_new - x)))
            x = x_new
            if np.any(np.abs(x) > 1e8):
                status = "unbounded"
                break
            near = near + 1 if self.box.at_open_face(x) else 0
            if near >= cfg.boundary_steps:
                status = "boundary"
                break
            p0, g, H = self.derivatives(x)
            if step <= cfg.xtol * max(1.0, float(np.max(np.abs(x)))):
                status = "converged"
                break
        value = float(self.f.evaluate_many(x[None, :])[0])
        return RunRecord(x0, x, value, status, it)


def _starts(prob: ConstrainedProblem, asc: _Ascent, cfg: SolveConfig) -> np.ndarray:
    """``cfg.starts`` feasible points: samples, repaired onto the feasible set when needed."""
    X = sample(prob.domain, cfg.starts * 8, [cfg.seed, 51], cfg.bound)
    X = np.array([asc.box.clip(x) for x in X])
    good = []
    for x in X:
        if len(good) >= cfg.starts:
            break
        if not prob.constraints:
            good.append(x)
            continue
        y = asc.repair(x)
        if y is not None and np.isfinite(asc.phi(y[None, :])[0]):
            good.append(y)
    if not good:
        raise NoFeasibleStartError(f"no feasible start among {X.shape[0]} samples")
    return np.array(good)


def _multistart(prob: ConstrainedProblem, cfg: SolveConfig) -> tuple:
    asc = _Ascent(prob, cfg)
    starts = _starts(prob, asc, cfg)
    runs = tuple(asc.run(x0) for x0 in starts)
    # best value, ties to the lower start index
    best = max(range(len(runs)), key=lambda k: (runs[k].value, -k))
    return asc, runs, runs[best]


# --------------------------------------------------------------------------
# public solvers


def solve_usqp(obj: ProductFunction, cfg: SolveConfig | None = None) -> SolveResult:
    """Unconstrained maximization over the objective's box with certification."""
    cfg = cfg or SolveConfig()
    prob = ConstrainedProblem(obj, ())
    decision = decide_quasiconcave(obj, cfg.separable)
    asc, runs, best = _multistart(prob, cfg)
    notes = []
    cert = Certification.LOCAL_ONLY
    x = best.point
    if decision.quasiconcave is not Decision.YES:
        notes.append(f"objective not certified quasiconcave ({decision.quasiconcave.value}): {decision.reason}")
    elif best.status in ("boundary", "unbounded"):
        notes.append("supremum approached at the boundary or at infinity; no maximizer certified")
    elif obj.is_smooth:
        g = asc.derivatives(x)[1]
        gnorm = float(np.linalg.norm(g)) * max(1.0, float(np.linalg.norm(x)))
        if gnorm <= cfg.cert_gtol:
            cert = Certification.CRITICAL_POINT
        else:
            notes.append(f"scaled gradient norm {gnorm:.3g} above the certification threshold")
    else:
        v = zero_in_superdiff(obj, x, cfg.kkt.superdiff, obj.domain)
        if v.corroborated:
            cert = Certification.ZERO_SUPERGRADIENT
        else:
            notes.append("0 was not confirmed as a supergradient at the best point")
    return SolveResult(x, best.value, cert, len(runs), best.status, runs, decision=decision, notes=tuple(notes))


def _assemble_multipliers(prob: ConstrainedProblem, x: np.ndarray, cfg: SolveConfig) -> np.ndarray:
    """Nonnegative least squares fit of stationarity over the active constraints."""
    kc = cfg.kkt
    p = len(prob.constraints)
    lam = np.zeros(p)
    h = prob.constraint_values(x)[0]
    active = [j for j in range(p) if abs(h[j]) <= kc.act_tol]
    if not active:
        return lam
    A = np.array([gradient_many(prob.constraints[j].expr, x[None, :], kc.fd_step)[0] for j in active])
    if prob.objective.is_smooth:
        cands = gradient_many(prob.objective, x[None, :], kc.fd_step)
    else:
        cands = candidate_supergradients(prob.objective, x, kc.superdiff, prob.domain)
        if cands.shape[0] == 0:
            return lam
    best = None
    for c in cands:
        mu, res = nnls(A.T, -c)
        if best is None or res < best[1]:
            best = (mu, res)
    lam[active] = best[0]
    return lam


def solve_csqp(prob: ConstrainedProblem, cfg: SolveConfig | None = None) -> SolveResult:
    """Constrained maximization with a KKT (smooth) or modified KKT certificate."""
    cfg = cfg or SolveConfig()
    decision = decide_quasiconcave(prob.objective, cfg.separable)
    notes = []
    qc_ok = True
    if cfg.check_constraints:
        sc = SamplingConfig(seed=cfg.seed, bound=cfg.bound)
        for j, c in enumerate(prob.constraints):
            try:
                v = check_property(c.expr, prob.domain, QUASICONCAVE, sc)
            except DomainError as exc:
                notes.append(f"constraint {j + 1} could not be sampled: {exc}")
                qc_ok = False
                continue
            if v.falsified:
                notes.append(f"constraint {j + 1} ({c.text}) is not quasiconcave on the sample")
                qc_ok = False
    asc, runs, best = _multistart(prob, cfg)
    x = best.point
    lam = _assemble_multipliers(prob, x, cfg)
    smooth = prob.objective.is_smooth and all(c.expr.is_smooth for c in prob.constraints)
    try:
        report = check_kkt_diff(prob, x, lam, cfg.kkt) if smooth else check_mkkt(prob, x, lam, cfg.kkt)
    except (DomainError, ValueError) as exc:
        report = None
        notes.append(f"certificate check failed: {exc}")
    cert = Certification.LOCAL_ONLY
    if decision.quasiconcave is not Decision.YES:
        notes.append(f"objective not certified quasiconcave ({decision.quasiconcave.value}): {decision.reason}")
    elif not qc_ok:
        pass
    elif best.status in ("boundary", "unbounded"):
        notes.append("supremum approached at the boundary or at infinity; no maximizer certified")
    elif report is not None and report.valid:
        cert = Certification.KKT if smooth else Certification.MODIFIED_KKT
    elif report is not None:
        notes.append(f"certificate {report.verdict.value}: {report.failed_condition or report.hypothesis}")
    return SolveResult(
        x, best.value, cert, len(runs), best.status, runs, lam, report, decision, tuple(notes)
    )


# --------------------------------------------------------------------------
# grid oracle

MAX_GRID_POINTS = 50_000_000
CHUNK = 1_000_000


@dataclass(frozen=True)
class GridResult:
    point: Optional[np.ndarray]
    value: float
    cell: np.ndarray  # cell widths
    feasible_count: int

    @property
    def empty(self) -> bool:
        return self.feasible_count == 0

    def to_dict(self) -> dict:
        return {
            "point": None if self.point is None else self.point.tolist(),
            "value": self.value if self.point is not None else None,
            "cell": self.cell.tolist(),
            "feasible_count": self.feasible_count,
            "empty": self.empty,
        }


def grid_oracle(target, resolution: int = 200, bound: float = 10.0, box: tuple | None = None) -> GridResult:
    """Best cell centre of a ``resolution**n`` grid over the (truncated) box.

    ``target`` is a :class:`ProductFunction` or a :class:`ConstrainedProblem`;
    ``box`` optionally overrides the search box as ``(lower, upper)``.
    Only points inside the domain and feasible for every constraint count.
    """
    prob = target if isinstance(target, ConstrainedProblem) else ConstrainedProblem(target, ())
    n = prob.dim
    if n > 4:
        raise ValueError(f"grid oracle supports at most 4 dimensions, got {n}")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if resolution**n > MAX_GRID_POINTS:
        raise ValueError(f"grid of {resolution}**{n} points is too large")
    if box is None:
        lo, hi = prob.domain.truncated(bound)
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    w = (hi - lo) / resolution
    axes = [lo[i] + (np.arange(resolution) + 0.5) * w[i] for i in range(n)]
    total = resolution**n
    best_val, best_pt, count = -math.inf, None, 0
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK))
        sub = np.unravel_index(idx, (resolution,) * n)
        pts = np.stack([axes[i][sub[i]] for i in range(n)], axis=1)
        ok = prob.feasible_many(pts)
        if not ok.any():
            continue
        pts = pts[ok]
        vals = _values(prob.objective, pts)
        count += int(np.count_nonzero(np.isfinite(vals)))
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_pt = float(vals[k]), pts[k].copy()
    return GridResult(best_pt, best_val, w, count)


def _values(f, pts: np.ndarray) -> np.ndarray:
    try:
        return f.evaluate_many(pts)
    except DomainError:
        out = np.full(pts.shape[0], -np.inf)
        for i, x in enumerate(pts):
            try:
                out[i] = f.evaluate_many(x[None, :])[0]
            except DomainError:
                pass
        return out
