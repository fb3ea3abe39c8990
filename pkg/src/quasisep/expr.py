"""Scalar expressions over variables ``x1..xN``.

Expressions are parsed into an immutable tree, lowered to a flat stack
program for batch evaluation (see :mod:`quasisep.kernels`), and evaluated
point-wise by structural recursion.  Evaluation never returns NaN or an
infinity: every such case raises :class:`DomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from quasisep import kernels

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "NAry",
    "Expression",
    "ParseError",
    "DomainError",
    "parse",
    "evaluate",
    "gradient",
    "gradient_many",
    "to_text",
]


class ParseError(ValueError):
    """Syntax error with the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.reason = message


class DomainError(ArithmeticError):
    """Evaluation left the domain of an operation or produced a non-finite value."""


# --------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero based


@dataclass(frozen=True)
class Unary:
    op: str  # neg, exp, ln, abs, sqrt
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class NAry:
    op: str  # min, max
    args: tuple


Node = Union[Const, Var, Unary, Binary, NAry]

UNARY_FUNCS = ("exp", "ln", "abs", "sqrt")
NARY_FUNCS = ("min", "max")
NONSMOOTH_OPS = ("abs", "min", "max")


def _max_var(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return -1
    if isinstance(node, Unary):
        return _max_var(node.arg)
    if isinstance(node, Binary):
        return max(_max_var(node.left), _max_var(node.right))
    return max(_max_var(a) for a in node.args)


def _variables(node: Node, acc: set) -> set:
    if isinstance(node, Var):
        acc.add(node.index)
    elif isinstance(node, Unary):
        _variables(node.arg, acc)
    elif isinstance(node, Binary):
        _variables(node.left, acc)
        _variables(node.right, acc)
    elif isinstance(node, NAry):
        for a in node.args:
            _variables(a, acc)
    return acc


def _has_nonsmooth(node: Node) -> bool:
    if isinstance(node, (Const, Var)):
        return False
    if isinstance(node, Unary):
        return node.op in NONSMOOTH_OPS or _has_nonsmooth(node.arg)
    if isinstance(node, Binary):
        return _has_nonsmooth(node.left) or _has_nonsmooth(node.right)
    return True


def _remap(node: Node, mapping: dict) -> Node:
    if isinstance(node, Var):
        return Var(mapping[node.index])
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        return Unary(node.op, _remap(node.arg, mapping))
    if isinstance(node, Binary):
        return Binary(node.op, _remap(node.left, mapping), _remap(node.right, mapping))
    return NAry(node.op, tuple(_remap(a, mapping) for a in node.args))


@dataclass(frozen=True)
class Expression:
    """Parsed expression.

    ``arity`` is one past the largest variable index referenced, so a point
    of length ``arity`` always suffices for evaluation.
    """

    root: Node
    arity: int
    text: str = field(default="", compare=False)
    _program: object = field(default=None, compare=False, repr=False)

    @classmethod
    def from_node(cls, root: Node, text: str = "") -> "Expression":
        return cls(root, _max_var(root) + 1, text or to_text_node(root))

    @property
    def variables(self) -> frozenset:
        return frozenset(_variables(self.root, set()))

    @property
    def is_smooth(self) -> bool:
        """False when abs/min/max appear anywhere in the tree."""
        return not _has_nonsmooth(self.root)

    @property
    def program(self) -> "kernels.Program":
        if self._program is None:
            object.__setattr__(self, "_program", kernels.compile_program(self.root, self.arity))
        return self._program

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[1] < self.arity:
            raise ValueError(
                f"dimension mismatch: expression needs {self.arity} variables, "
                f"points have {pts.shape[1]}"
            )
        return kernels.evaluate(self.program, pts)

    # builders used by the test corpus and the CLI
    def remap(self, mapping: dict) -> "Expression":
        return Expression.from_node(_remap(self.root, mapping))

    def power(self, alpha: float) -> "Expression":
        return Expression.from_node(Binary("^", self.root, Const(float(alpha))))

    def scale(self, c: float) -> "Expression":
        return Expression.from_node(Binary("*", Const(float(c)), self.root))

    def apply(self, func: str) -> "Expression":
        if func not in UNARY_FUNCS and func != "neg":
            raise ValueError(f"unknown function {func!r}")
        return Expression.from_node(Unary(func, self.root))

    def __str__(self) -> str:
        return self.text or to_text(self)


# --------------------------------------------------------------------------
# parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"x([1-9]\d*)\Z")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []  # (kind, value, char offset)
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", self._byte(pos))
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), pos))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def _byte(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, self._byte(tok[2]))

    def expect(self, value: str):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            self.fail(f"expected {value!r}, found {found}")
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Node:
        # unary minus binds looser than '^': -x1^2 == -(x1^2)
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Unary("neg", self.factor())
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = Binary("^", node, self.factor())
        return node

    def base(self) -> Node:
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            v = float(value)
            if not math.isfinite(v):
                self.fail(f"number {value} out of range", tok)
            return Const(v)
        if kind == "ident":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.call(tok)
            m = _VAR_RE.match(value)
            if m is None:
                self.fail(f"unknown variable {value!r}", tok)
            return Var(int(m.group(1)) - 1)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected token {value!r}", tok)

    def call(self, name_tok) -> Node:
        name = name_tok[1]
        if name not in UNARY_FUNCS and name not in NARY_FUNCS:
            self.fail(f"unknown function {name!r}", name_tok)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if name in UNARY_FUNCS:
            if len(args) != 1:
                self.fail(f"{name} takes 1 argument, got {len(args)}", name_tok)
            return Unary(name, args[0])
        if len(args) < 2:
            self.fail(f"{name} takes at least 2 arguments, got {len(args)}", name_tok)
        return NAry(name, tuple(args))


def parse(text: str) -> Expression:
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    root = _Parser(text).parse()
    return Expression(root, _max_var(root) + 1, text)


# --------------------------------------------------------------------------
# printing


def _fmt_const(v: float) -> str:
    s = repr(float(v))
    if s.startswith("-"):
        return f"(-{s[1:]})"
    return s


def to_text_node(node: Node) -> str:
    """Fully parenthesised text that parses back to an equal-valued tree."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text_node(node.arg)})"
        return f"{node.op}({to_text_node(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_text_node(node.left)}{node.op}{to_text_node(node.right)})"
    return f"{node.op}({', '.join(to_text_node(a) for a in node.args)})"


def to_text(e: Expression) -> str:
    return to_text_node(e.root)


# --------------------------------------------------------------------------
# point-wise evaluation


def _pow(base: float, expo: float) -> float:
    if base > 0.0:
        return math.pow(base, expo)
    if expo != math.floor(expo):
        raise DomainError(f"non-integer power {expo!r} of non-positive base {base!r}")
    if base == 0.0 and expo < 0:
        raise DomainError("zero raised to a negative power")
    return math.pow(base, expo)


def _eval(node: Node, x) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Unary):
        a = _eval(node.arg, x)
        op = node.op
        if op == "neg":
            return -a
        if op == "abs":
            return abs(a)
        if op == "exp":
            if a > 709.782712893384:
                raise DomainError("exp overflow")
            return math.exp(a)
        if op == "ln":
            if a <= 0.0:
                raise DomainError(f"ln of non-positive value {a!r}")
            return math.log(a)
        if a < 0.0:
            raise DomainError(f"sqrt of negative value {a!r}")
        return math.sqrt(a)
    if isinstance(node, Binary):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        op = node.op
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if b == 0.0:
                raise DomainError("division by zero")
            r = a / b
        else:
            try:
                r = _pow(a, b)
            except OverflowError:
                raise DomainError("power overflow") from None
        if not math.isfinite(r):
            raise DomainError(f"non-finite result of {op!r}")
        return r
    vals = [_eval(a, x) for a in node.args]
    return min(vals) if node.op == "min" else max(vals)


def evaluate(e: Expression, point: Sequence[float]) -> float:
    """Evaluate ``e`` at ``point`` by structural recursion."""
    if len(point) < e.arity:
        raise ValueError(
            f"dimension mismatch: expression needs {e.arity} variables, got {len(point)}"
        )
    return _eval(e.root, point)


# --------------------------------------------------------------------------
# finite differences


def _stencil(points: np.ndarray, step: float, richardson: bool) -> tuple:
    m, n = points.shape
    eye = np.eye(n)
    hs = (step, step / 2) if richardson else (step,)
    blocks = []
    for h in hs:
        blocks.append(points[:, None, :] + h * eye[None, :, :])
        blocks.append(points[:, None, :] - h * eye[None, :, :])
    stacked = np.concatenate(blocks, axis=1).reshape(-1, n)
    return stacked, hs


def gradient_many(f, points, step: float = 1e-5, richardson: bool = True) -> np.ndarray:
    """Central-difference gradients of ``f`` at each row of ``points``.

    ``f`` is anything with ``evaluate_many``.  With ``richardson`` the
    estimates at ``step`` and ``step/2`` are combined as ``(4 D(h/2) - D(h)) / 3``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = pts.shape
    stacked, hs = _stencil(pts, step, richardson)
    vals = f.evaluate_many(stacked).reshape(m, 2 * len(hs), n)
    d = [(vals[:, 2 * k, :] - vals[:, 2 * k + 1, :]) / (2 * h) for k, h in enumerate(hs)]
    if richardson:
        return (4.0 * d[1] - d[0]) / 3.0
    return d[0]


def gradient(e, point: Sequence[float], step: float = 1e-5, richardson: bool = True) -> np.ndarray:
    """Central-difference gradient at one point.

    With ``richardson=False`` component i is exactly
    ``(f(x + h e_i) - f(x - h e_i)) / (2h)``.
    """
    return gradient_many(e, np.asarray(point, dtype=float)[None, :], step, richardson)[0]


# --------------------------------------------------------------------------
# adapters


class PyFunction:
    """Wrap a Python callable so it looks like an :class:`Expression`.

    ``func`` takes a 1-D point; with ``vectorized=True`` it instead takes an
    (m, n) array and returns m values.
    """

    is_smooth = True

    def __init__(self, func, arity: int, vectorized: bool = False, smooth: bool = True):
        self.func = func
        self.arity = arity
        self.vectorized = vectorized
        self.is_smooth = smooth

    def __call__(self, point) -> float:
        if self.vectorized:
            return float(self.func(np.asarray(point, dtype=float)[None, :])[0])
        return float(self.func(np.asarray(point, dtype=float)))

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.vectorized:
            vals = np.asarray(self.func(pts), dtype=float).reshape(-1)
        else:
            vals = np.array([float(self.func(p)) for p in pts])
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise DomainError(f"non-finite value at point {pts[bad[0]].tolist()}")
        return vals


def as_evaluable(f, arity: int | None = None):
    """Accept an Expression, anything with ``evaluate_many``, a string or a callable."""
    if isinstance(f, str):
        return parse(f)
    if hasattr(f, "evaluate_many"):
        return f
    if callable(f):
        if arity is None:
            raise ValueError("arity is required to wrap a plain callable")
        return PyFunction(f, arity)
    raise TypeError(f"cannot evaluate {type(f).__name__}")
