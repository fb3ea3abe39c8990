"""Axis-aligned boxes, line restrictions and normal cones."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "BoxDomain",
    "LineRestriction",
    "contains",
    "contains_many",
    "sample",
    "restrict",
    "normal_cone_residual",
    "in_normal_cone",
    "parse_box",
]

DEFAULT_BOUND = 10.0


@dataclass(frozen=True)
class BoxDomain:
    """Box with per-face openness; all faces open by default.

    Infinite faces are always open.
    """

    lower: tuple
    upper: tuple
    closed_lower: tuple = ()
    closed_upper: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must be non-empty and of equal length")
        for a, b in zip(lo, hi):
            if math.isnan(a) or math.isnan(b) or not a < b:
                raise ValueError(f"degenerate interval ({a}, {b})")
        cl = tuple(bool(v) for v in self.closed_lower) or (False,) * len(lo)
        cu = tuple(bool(v) for v in self.closed_upper) or (False,) * len(lo)
        if len(cl) != len(lo) or len(cu) != len(lo):
            raise ValueError("face flags must match the dimension")
        for a, b, ca, cb in zip(lo, hi, cl, cu):
            if (ca and math.isinf(a)) or (cb and math.isinf(b)):
                raise ValueError("an infinite face cannot be closed")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "closed_lower", cl)
        object.__setattr__(self, "closed_upper", cu)

    @classmethod
    def open(cls, lower: Sequence[float], upper: Sequence[float]) -> "BoxDomain":
        return cls(tuple(lower), tuple(upper))

    @classmethod
    def positive_orthant(cls, n: int) -> "BoxDomain":
        return cls((0.0,) * n, (math.inf,) * n)

    @classmethod
    def real_space(cls, n: int) -> "BoxDomain":
        return cls((-math.inf,) * n, (math.inf,) * n)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def is_open(self) -> bool:
        return not (any(self.closed_lower) or any(self.closed_upper))

    def product(self, other: "BoxDomain") -> "BoxDomain":
        return BoxDomain(
            self.lower + other.lower,
            self.upper + other.upper,
            self.closed_lower + other.closed_lower,
            self.closed_upper + other.closed_upper,
        )

    def block(self, start: int, stop: int) -> "BoxDomain":
        return BoxDomain(
            self.lower[start:stop],
            self.upper[start:stop],
            self.closed_lower[start:stop],
            self.closed_upper[start:stop],
        )

    def truncated(self, bound: float = DEFAULT_BOUND) -> tuple:
        """Finite (lo, hi) arrays; infinite faces are cut at +-bound."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        inf_lo = np.isinf(lo)
        inf_hi = np.isinf(hi)
        hi = np.where(inf_hi, np.maximum(bound, np.where(inf_lo, bound, lo + bound)), hi)
        lo = np.where(inf_lo, np.minimum(-bound, hi - bound), lo)
        return lo, hi

    def __contains__(self, point) -> bool:
        return contains(self, point)

    def to_text(self) -> str:
        parts = []
        for a, b, ca, cb in zip(self.lower, self.upper, self.closed_lower, self.closed_upper):
            parts.append(f"{'[' if ca else '('}{_num(a)},{_num(b)}{']' if cb else ')'}")
        return "x".join(parts)


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


@dataclass(frozen=True)
class LineRestriction:
    """The line ``t -> base + t * direction`` over the open interval ``(t_min, t_max)``."""

    base: np.ndarray
    direction: np.ndarray
    t_min: float
    t_max: float

    @property
    def interval(self) -> tuple:
        return (self.t_min, self.t_max)

    def points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.base[None, :] + t.reshape(-1)[:, None] * self.direction[None, :]


def _check_dim(box: BoxDomain, point) -> np.ndarray:
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.shape[0] != box.dim:
        raise ValueError(f"dimension mismatch: box has {box.dim}, point has {x.shape[0]}")
    return x


def contains(box: BoxDomain, point) -> bool:
    x = _check_dim(box, point)
    lo = np.array(box.lower)
    hi = np.array(box.upper)
    cl = np.array(box.closed_lower)
    cu = np.array(box.closed_upper)
    ok_lo = np.where(cl, x >= lo, x > lo)
    ok_hi = np.where(cu, x <= hi, x < hi)
    return bool(np.all(ok_lo & ok_hi))


def contains_many(box: BoxDomain, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = np.array(box.lower)
    hi = np.array(box.upper)
    ok_lo = np.where(box.closed_lower, pts >= lo, pts > lo)
    ok_hi = np.where(box.closed_upper, pts <= hi, pts < hi)
    return np.all(ok_lo & ok_hi, axis=1)


def sample(box: BoxDomain, count: int, seed: int = 0, bound: float = DEFAULT_BOUND) -> np.ndarray:
    """``count`` points uniform over the truncated box, strictly interior."""
    if count < 1:
        raise ValueError("count must be at least 1")
    lo, hi = box.truncated(bound)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(count, box.dim))
    # uniform() is half-open; push any exact lower-face hit inside
    edge = pts <= lo
    if edge.any():
        pts = np.where(edge, np.nextafter(lo, hi), pts)
    return pts


def restrict(box: BoxDomain, base, direction) -> LineRestriction:
    """Maximal open t-interval with ``base + t*direction`` interior to ``box``."""
    x = _check_dim(box, base)
    d = _check_dim(box, direction)
    if not np.any(d != 0.0):
        raise ValueError("direction must be nonzero")
    if not contains(box, x):
        raise ValueError("base point lies outside the box")
    t_min, t_max = -math.inf, math.inf
    for xi, di, lo, hi in zip(x, d, box.lower, box.upper):
        if di == 0.0:
            continue
        a = (lo - xi) / di
        b = (hi - xi) / di
        if a > b:
            a, b = b, a
        t_min = max(t_min, a)
        t_max = min(t_max, b)
    return LineRestriction(x, d, float(t_min), float(t_max))


def normal_cone_residual(box: BoxDomain, point, v) -> float:
    """Euclidean distance from ``v`` to the normal cone of ``box`` at ``point``."""
    x = _check_dim(box, point)
    w = _check_dim(box, v)
    if not contains(box, x):
        raise ValueError("point lies outside the box")
    r = w.copy()
    for i, (xi, lo, hi, cl, cu) in enumerate(
        zip(x, box.lower, box.upper, box.closed_lower, box.closed_upper)
    ):
        if cl and _on_face(xi, lo):
            # outward normal -e_i: cone component is any nonpositive number
            r[i] = max(w[i], 0.0)
        elif cu and _on_face(xi, hi):
            r[i] = min(w[i], 0.0)
    return float(np.linalg.norm(r))


def project_normal_cone(box: BoxDomain, point, v) -> np.ndarray:
    """Nearest element of the normal cone at ``point`` to ``v``."""
    x = _check_dim(box, point)
    w = _check_dim(box, v)
    nu = np.zeros_like(w)
    for i, (xi, lo, hi, cl, cu) in enumerate(
        zip(x, box.lower, box.upper, box.closed_lower, box.closed_upper)
    ):
        if cl and _on_face(xi, lo):
            nu[i] = min(w[i], 0.0)
        elif cu and _on_face(xi, hi):
            nu[i] = max(w[i], 0.0)
    return nu


def _on_face(xi: float, face: float) -> bool:
    return abs(xi - face) <= 1e-12 * max(1.0, abs(face))


def in_normal_cone(box: BoxDomain, point, v, tol: float = 1e-9) -> bool:
    return normal_cone_residual(box, point, v) <= tol


_INTERVAL_RE = re.compile(r"\s*([\(\[])\s*([^,\s]+)\s*,\s*([^\)\]\s]+)\s*([\)\]])\s*")


def _bound(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    try:
        v = float(t)
    except ValueError:
        raise ValueError(f"bad interval endpoint {text!r}") from None
    if math.isnan(v):
        raise ValueError("interval endpoints cannot be nan")
    return v


def parse_box(text: str) -> BoxDomain:
    """Inverse of :meth:`BoxDomain.to_text`: intervals like ``(0,inf)x[0,1]``."""
    lo, hi, cl, cu = [], [], [], []
    pos = 0
    while True:
        m = _INTERVAL_RE.match(text, pos)
        if not m:
            raise ValueError(f"expected an interval at offset {pos} of {text!r}")
        lo.append(_bound(m.group(2)))
        hi.append(_bound(m.group(3)))
        cl.append(m.group(1) == "[")
        cu.append(m.group(4) == "]")
        pos = m.end()
        if pos == len(text):
            break
        if text[pos] != "x":
            raise ValueError(f"expected 'x' between intervals at offset {pos} of {text!r}")
        pos += 1
    return BoxDomain(tuple(lo), tuple(hi), tuple(cl), tuple(cu))
