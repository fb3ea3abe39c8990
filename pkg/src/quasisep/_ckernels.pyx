# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: postfix expression evaluation and power-concavity scans."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs, pow, floor, isfinite, NAN

cnp.import_array()

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_NEG = 2
    OP_EXP = 3
    OP_LN = 4
    OP_ABS = 5
    OP_SQRT = 6
    OP_ADD = 7
    OP_SUB = 8
    OP_MUL = 9
    OP_DIV = 10
    OP_POW = 11
    OP_MIN = 12
    OP_MAX = 13

cdef enum:
    ERR_LN = 1
    ERR_SQRT = 2
    ERR_DIV = 3
    ERR_POW = 4
    ERR_NONFINITE = 5

cdef inline int _run(const int[::1] ops, const int[::1] args, const double[::1] consts,
                     const double[:, ::1] pts, Py_ssize_t row, double* stack,
                     double* result) nogil:
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t pc, k
    cdef int sp = 0
    cdef int op, arg
    cdef double a, b, r
    for pc in range(n):
        op = ops[pc]
        arg = args[pc]
        if op == OP_CONST:
            stack[sp] = consts[arg]
            sp += 1
            continue
        if op == OP_VAR:
            stack[sp] = pts[row, arg]
            sp += 1
            continue
        if op <= OP_SQRT:
            a = stack[sp - 1]
            if op == OP_NEG:
                r = -a
            elif op == OP_EXP:
                r = exp(a)
            elif op == OP_LN:
                if a <= 0.0:
                    return ERR_LN
                r = log(a)
            elif op == OP_ABS:
                r = fabs(a)
            else:
                if a < 0.0:
                    return ERR_SQRT
                r = sqrt(a)
            if not isfinite(r):
                return ERR_NONFINITE
            stack[sp - 1] = r
            continue
        if op <= OP_POW:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == OP_ADD:
                r = a + b
            elif op == OP_SUB:
                r = a - b
            elif op == OP_MUL:
                r = a * b
            elif op == OP_DIV:
                if b == 0.0:
                    return ERR_DIV
                r = a / b
            else:
                if a <= 0.0 and (b != floor(b) or (a == 0.0 and b < 0.0)):
                    return ERR_POW
                r = pow(a, b)
            if not isfinite(r):
                return ERR_NONFINITE
            stack[sp - 1] = r
            continue
        # n-ary min / max
        r = stack[sp - arg]
        for k in range(sp - arg + 1, sp):
            if op == OP_MIN:
                if stack[k] < r:
                    r = stack[k]
            else:
                if stack[k] > r:
                    r = stack[k]
        sp -= arg - 1
        stack[sp - 1] = r
    result[0] = stack[0]
    return 0


def eval_program(const int[::1] ops, const int[::1] args, const double[::1] consts,
                 int depth, const double[:, ::1] points):
    cdef Py_ssize_t m = points.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    status_arr = np.zeros(m, dtype=np.int32)
    cdef double[::1] out = out_arr
    cdef int[::1] status = status_arr
    stack_arr = np.empty(depth + 1, dtype=np.float64)
    cdef double[::1] stack = stack_arr
    cdef Py_ssize_t i
    cdef int code
    cdef double value
    with nogil:
        for i in range(m):
            code = _run(ops, args, consts, points, i, &stack[0], &value)
            if code == 0:
                out[i] = value
            else:
                out[i] = NAN
                status[i] = code
    return out_arr, status_arr


def first_power_violation(const double[::1] log_a, const double[::1] log_b,
                          const double[:, ::1] log_z, const double[:, ::1] lam,
                          double mu, bint convex, double tol):
    cdef Py_ssize_t P = log_z.shape[0]
    cdef Py_ssize_t L = log_z.shape[1]
    cdef Py_ssize_t p, k
    cdef double ea, eb, ez, m, va, vb, vz, chord, gap, w
    cdef long skipped = 0
    cdef Py_ssize_t hit = -1
    cdef double hit_gap = 0.0
    with nogil:
        for p in range(P):
            ea = mu * log_a[p]
            eb = mu * log_b[p]
            for k in range(L):
                ez = mu * log_z[p, k]
                if not (isfinite(ea) and isfinite(eb) and isfinite(ez)):
                    skipped += 1
                    continue
                if hit >= 0:
                    continue
                # the inequality is homogeneous: divide the triple by its largest power
                m = ea if ea > eb else eb
                if ez > m:
                    m = ez
                va = exp(ea - m)
                vb = exp(eb - m)
                vz = exp(ez - m)
                w = lam[p, k]
                chord = (1.0 - w) * va + w * vb
                if convex:
                    gap = vz - chord
                else:
                    gap = chord - vz
                if gap > tol:
                    hit = p * L + k
                    hit_gap = gap
    return hit, hit_gap, skipped
