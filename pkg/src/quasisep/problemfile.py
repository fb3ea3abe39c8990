"""Textual problem files.

A file has up to three sections::

    # Cobb-Douglas budget problem
    [objective]
    factor = "x1^1" over "(0,inf)"
    factor = "x2^2" over "(0,inf)"

    [constraints]
    constraint = "12 - 2*x1 - x2"

    [config]
    seed = 0
    tol = 1e-6

Blank lines and ``#`` comments are ignored.  Factor and constraint
expressions use the variables ``x1..xN`` of the whole problem; a factor may
also use block-local names.  Config values are integers, floats or bare
words.  :func:`dumps` writes the canonical form, which :func:`loads` reads
back to an equal :class:`ProblemFile`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from quasisep.domain import parse_box
from quasisep.expr import ParseError, parse
from quasisep.kkt import ConstrainedProblem
from quasisep.separable import ProductFunction, SeparableConfig, make_product

__all__ = ["ProblemFile", "ProblemFileError", "loads", "dumps", "load"]

SECTIONS = ("objective", "constraints", "config")


class ProblemFileError(ValueError):
    """Malformed problem file; carries 1-based ``line`` and ``column``."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


@dataclass(frozen=True)
class ProblemFile:
    factors: tuple  # (expression text, box text) pairs
    constraints: tuple = ()
    config: tuple = field(default=())  # sorted (key, value) pairs

    @property
    def settings(self) -> dict:
        return dict(self.config)

    def objective(self, cfg: SeparableConfig | None = None) -> ProductFunction:
        return make_product([(e, parse_box(b)) for e, b in self.factors], cfg)

    def problem(self, cfg: SeparableConfig | None = None) -> ConstrainedProblem:
        return ConstrainedProblem(self.objective(cfg), tuple(self.constraints))


_STRING = r'"((?:[^"\\]|\\.)*)"'
_FACTOR_RE = re.compile(r"factor\s*=\s*" + _STRING + r"\s+over\s+" + _STRING + r"\s*\Z")
_CONSTRAINT_RE = re.compile(r"constraint\s*=\s*" + _STRING + r"\s*\Z")
_CONFIG_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)\s*\Z")
_SECTION_RE = re.compile(r"\[\s*([A-Za-z_]+)\s*\]\s*\Z")


def _value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _strip_comment(line: str) -> str:
    # '#' inside a quoted string is kept
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def loads(text: str) -> ProblemFile:
    """Parse problem-file text; expressions and boxes are validated here."""
    section = None
    factors, constraints, config = [], [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        body = line.lstrip()
        col = len(line) - len(body) + 1
        if not body:
            continue
        m = _SECTION_RE.match(body)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ProblemFileError(f"unknown section [{m.group(1)}]", lineno, col)
            continue
        if section is None:
            raise ProblemFileError("content before the first section header", lineno, col)
        if section == "objective":
            m = _FACTOR_RE.match(body)
            if not m:
                raise ProblemFileError('expected: factor = "<expr>" over "<box>"', lineno, col)
            expr, box = m.group(1), m.group(2)
            _check_expr(expr, lineno, col + m.start(1))
            try:
                parse_box(box)
            except ValueError as exc:
                raise ProblemFileError(str(exc), lineno, col + m.start(2)) from None
            factors.append((expr, box))
        elif section == "constraints":
            m = _CONSTRAINT_RE.match(body)
            if not m:
                raise ProblemFileError('expected: constraint = "<expr>"', lineno, col)
            _check_expr(m.group(1), lineno, col + m.start(1))
            constraints.append(m.group(1))
        else:
            m = _CONFIG_RE.match(body)
            if not m:
                raise ProblemFileError("expected: key = value", lineno, col)
            config[m.group(1)] = _value(m.group(2))
    if not factors:
        raise ProblemFileError("the [objective] section needs at least one factor", max(1, len(text.splitlines())))
    return ProblemFile(tuple(factors), tuple(constraints), tuple(sorted(config.items())))


def _check_expr(text: str, line: int, column: int) -> None:
    try:
        parse(text)
    except ParseError as exc:
        raise ProblemFileError(f"bad expression: {exc.reason}", line, column + exc.offset) from None


def dumps(pf: ProblemFile) -> str:
    out = ["[objective]"]
    out += [f'factor = "{e}" over "{b}"' for e, b in pf.factors]
    if pf.constraints:
        out += ["", "[constraints]"]
        out += [f'constraint = "{c}"' for c in pf.constraints]
    if pf.config:
        out += ["", "[config]"]
        out += [f"{k} = {v!r}" if not isinstance(v, str) else f"{k} = {v}" for k, v in pf.config]
    return "\n".join(out) + "\n"


def load(path) -> ProblemFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}", 0, 0) from None
    except UnicodeDecodeError:
        raise ProblemFileError(f"{path} is not UTF-8 text", 0, 0) from None
    return loads(text)
