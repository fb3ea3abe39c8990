"""numpy fallback for :mod:`quasisep.kernels`."""

import numpy as np

from quasisep.kernels import (
    ERR_DIV,
    ERR_LN,
    ERR_NONFINITE,
    ERR_POW,
    ERR_SQRT,
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_EXP,
    OP_LN,
    OP_MIN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SQRT,
    OP_SUB,
    OP_VAR,
)


def _flag(status, mask, code):
    # keep the first error seen per row
    np.copyto(status, code, where=mask & (status == 0))


def eval_program(ops, args, consts, depth, points):
    m = points.shape[0]
    status = np.zeros(m, dtype=np.int32)
    stack = []
    with np.errstate(all="ignore"):
        for op, arg in zip(ops.tolist(), args.tolist()):
            if op == OP_CONST:
                stack.append(np.full(m, consts[arg]))
                continue
            if op == OP_VAR:
                stack.append(points[:, arg].copy())
                continue
            if op <= OP_SQRT:
                a = stack.pop()
                if op == OP_NEG:
                    r = -a
                elif op == OP_EXP:
                    r = np.exp(a)
                elif op == OP_LN:
                    _flag(status, a <= 0.0, ERR_LN)
                    r = np.log(a)
                elif op == OP_ABS:
                    r = np.abs(a)
                else:
                    _flag(status, a < 0.0, ERR_SQRT)
                    r = np.sqrt(a)
            elif op <= OP_POW:
                b = stack.pop()
                a = stack.pop()
                if op == OP_ADD:
                    r = a + b
                elif op == OP_SUB:
                    r = a - b
                elif op == OP_MUL:
                    r = a * b
                elif op == OP_DIV:
                    _flag(status, b == 0.0, ERR_DIV)
                    r = a / b
                else:
                    nonpos = a <= 0.0
                    bad = nonpos & ((b != np.floor(b)) | ((a == 0.0) & (b < 0.0)))
                    _flag(status, bad, ERR_POW)
                    r = np.power(a, b)
            else:
                vals = stack[-arg:]
                del stack[-arg:]
                r = vals[0].copy()
                fn = np.minimum if op == OP_MIN else np.maximum
                for v in vals[1:]:
                    r = fn(r, v)
            _flag(status, ~np.isfinite(r), ERR_NONFINITE)
            stack.append(r)
    out = stack.pop()
    out = np.where(status == 0, out, np.nan)
    return out, status


def first_power_violation(log_a, log_b, log_z, lam, mu, convex, tol):
    ea = np.broadcast_to((mu * log_a)[:, None], log_z.shape)
    eb = np.broadcast_to((mu * log_b)[:, None], log_z.shape)
    ez = mu * log_z
    ok = np.isfinite(ea) & np.isfinite(eb) & np.isfinite(ez)
    skipped = int(ok.size - np.count_nonzero(ok))
    with np.errstate(all="ignore"):
        # the inequality is homogeneous: divide each triple by its largest power
        m = np.maximum(np.maximum(ea, eb), ez)
        va, vb, vz = np.exp(ea - m), np.exp(eb - m), np.exp(ez - m)
        chord = (1.0 - lam) * va + lam * vb
        gap = (vz - chord) if convex else (chord - vz)
    viol = ok & (gap > tol)
    hits = np.flatnonzero(viol.ravel())
    if hits.size == 0:
        return -1, 0.0, skipped
    k = int(hits[0])
    return k, float(gap.ravel()[k]), skipped
