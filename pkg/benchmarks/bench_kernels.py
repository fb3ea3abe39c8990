"""Compare the compiled kernels with the numpy fallback.

Two regimes: large batches (one call over many points, where numpy's
vectorization is competitive) and many small calls (a few points per call,
as in Dini quotient schedules and line searches, where per-call overhead
dominates).

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from quasisep import kernels
from quasisep.expr import parse

EXPR = "x1^0.7 * exp(-0.3 * x2) * min(x1, 4 - x1) + ln(1 + x2^2) / (1 + x1)"


def _cases(rng):
    prog = parse(EXPR).program
    big = rng.uniform(0.1, 3.9, (200_000, 2))
    small = rng.uniform(0.1, 3.9, (4, 2))
    P, L = 20_000, 10
    la = rng.normal(size=P)
    lb = rng.normal(size=P)
    lam = rng.uniform(0.05, 0.95, (P, L))
    # z above both end values: no violation, so every scan runs to the end
    lz = np.maximum(la, lb)[:, None] + rng.uniform(0.01, 0.1, (P, L))
    return {
        "evaluate, 200k points x 1 call": (lambda impl: kernels.evaluate(prog, big, impl), 1),
        "evaluate, 4 points x 5000 calls": (lambda impl: kernels.evaluate(prog, small, impl), 5000),
        "power scan, 200k triples x 1 call": (
            lambda impl: kernels.first_power_violation(la, lb, lz, lam, 0.5, False, 1e-9, impl),
            1,
        ),
        "power scan, 10 triples x 5000 calls": (
            lambda impl: kernels.first_power_violation(la[:1], lb[:1], lz[:1], lam[:1], 0.5, False, 1e-9, impl),
            5000,
        ),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats; the minimum is reported")
    args = ap.parse_args(argv)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy fallback only")
    cases = _cases(np.random.default_rng(0))
    names = sorted(backends)
    print(f"{'case':40s}" + "".join(f"{n:>12s}" for n in names) + ("    speedup" if len(names) > 1 else ""))
    for label, (fn, calls) in cases.items():
        times = {}
        for name in names:
            impl = backends[name]
            fn(impl)  # warm-up
            best = min(timeit.repeat(lambda: [fn(impl) for _ in range(calls)], number=1, repeat=args.repeat))
            times[name] = best
        row = f"{label:40s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names)
        if len(names) > 1:
            row += f"{times['python'] / times['cython']:10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
