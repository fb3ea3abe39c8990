"""Hot kernels with a compiled backend and a numpy fallback.

The compiled module ``quasisep._ckernels`` (Cython) is used when it was
built; otherwise, or when ``QUASISEP_PURE_PYTHON=1`` is set, the numpy
implementation in :mod:`quasisep._kernels_py` is used.  Both expose the
same three functions and must agree to rounding.
"""

from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

# opcodes shared by both backends
OP_CONST, OP_VAR = 0, 1
OP_NEG, OP_EXP, OP_LN, OP_ABS, OP_SQRT = 2, 3, 4, 5, 6
OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW = 7, 8, 9, 10, 11
OP_MIN, OP_MAX = 12, 13

# per-point evaluation status
OK, ERR_LN, ERR_SQRT, ERR_DIV, ERR_POW, ERR_NONFINITE = 0, 1, 2, 3, 4, 5
STATUS_MESSAGES = {
    ERR_LN: "ln of non-positive value",
    ERR_SQRT: "sqrt of negative value",
    ERR_DIV: "division by zero",
    ERR_POW: "power outside its domain",
    ERR_NONFINITE: "non-finite intermediate value",
}

_UNARY = {"neg": OP_NEG, "exp": OP_EXP, "ln": OP_LN, "abs": OP_ABS, "sqrt": OP_SQRT}
_BINARY = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_NARY = {"min": OP_MIN, "max": OP_MAX}


class Program(NamedTuple):
    ops: np.ndarray  # int32
    args: np.ndarray  # int32: const slot, variable index or n-ary count
    consts: np.ndarray  # float64
    depth: int  # maximum stack depth
    nvars: int


def compile_program(root, nvars: int) -> Program:
    """Lower an expression tree to postfix code."""
    from quasisep import expr as _e

    ops, args, consts = [], [], []
    depth = [0, 0]  # current, max

    def push(n=1):
        depth[0] += n
        depth[1] = max(depth[1], depth[0])

    def walk(node):
        if isinstance(node, _e.Const):
            ops.append(OP_CONST)
            args.append(len(consts))
            consts.append(node.value)
            push()
        elif isinstance(node, _e.Var):
            ops.append(OP_VAR)
            args.append(node.index)
            push()
        elif isinstance(node, _e.Unary):
            walk(node.arg)
            ops.append(_UNARY[node.op])
            args.append(0)
        elif isinstance(node, _e.Binary):
            walk(node.left)
            walk(node.right)
            ops.append(_BINARY[node.op])
            args.append(0)
            depth[0] -= 1
        else:
            for a in node.args:
                walk(a)
            ops.append(_NARY[node.op])
            args.append(len(node.args))
            depth[0] -= len(node.args) - 1

    walk(root)
    return Program(
        np.asarray(ops, dtype=np.int32),
        np.asarray(args, dtype=np.int32),
        np.asarray(consts, dtype=np.float64),
        max(depth[1], 1),
        nvars,
    )


def _load_backend():
    if os.environ.get("QUASISEP_PURE_PYTHON", "") not in ("", "0"):
        from quasisep import _kernels_py as impl

        return impl, "python"
    try:
        from quasisep import _ckernels as impl
    except ImportError:
        from quasisep import _kernels_py as impl

        return impl, "python"
    return impl, "cython"


_impl, BACKEND = _load_backend()


def backends() -> dict:
    """All importable backends by name (used by the benchmark and tests)."""
    from quasisep import _kernels_py

    found = {"python": _kernels_py}
    try:
        from quasisep import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


def evaluate_status(prog: Program, points: np.ndarray, impl=None):
    """Evaluate ``prog`` on each row; returns (values, status codes)."""
    impl = impl or _impl
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    return impl.eval_program(prog.ops, prog.args, prog.consts, prog.depth, pts)


def evaluate(prog: Program, points: np.ndarray, impl=None) -> np.ndarray:
    """Evaluate ``prog`` on each row, raising ``DomainError`` on the first failing row."""
    vals, status = evaluate_status(prog, points, impl)
    bad = np.flatnonzero(status)
    if bad.size:
        from quasisep.expr import DomainError

        i = int(bad[0])
        raise DomainError(
            f"{STATUS_MESSAGES[int(status[i])]} at point {np.asarray(points)[i].tolist()}"
        )
    return vals


def first_power_violation(
    log_a, log_b, log_z, lam, mu: float, convex: bool, tol: float, impl=None
) -> tuple:
    """Scan pair/weight triples for a violation of concavity (or convexity) of ``g**mu``.

    ``log_a``, ``log_b`` hold ``ln g`` at the pair end points (shape P) and
    ``log_z``, ``lam`` the interior points and weights (shape P x L).
    Each triple is divided by its largest power, so the violation size is
    relative and no exponent overflows; triples with a non-finite
    exponent are skipped.  Returns ``(flat index of the first violation or -1, violation size, skipped)``.
    """
    impl = impl or _impl
    return impl.first_power_violation(
        np.ascontiguousarray(log_a, dtype=np.float64),
        np.ascontiguousarray(log_b, dtype=np.float64),
        np.ascontiguousarray(log_z, dtype=np.float64),
        np.ascontiguousarray(lam, dtype=np.float64),
        float(mu),
        bool(convex),
        float(tol),
    )

