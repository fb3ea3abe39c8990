import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasisep import kernels
from quasisep.expr import parse

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS


def test_pure_python_switch():
    out = subprocess.run(
        [sys.executable, "-c", "from quasisep import kernels; print(kernels.BACKEND)"],
        env=dict(os.environ, QUASISEP_PURE_PYTHON="1"),
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


EXPRESSIONS = [
    "x1^2 + 3*x2",
    "exp(-(x1-1)^2) * x2^0.5",
    "min(x1, 2 - x1, x2) - max(abs(x1), x2)",
    "ln(x1) / sqrt(x2)",
    "x1^-1.5 * (x2 + 1)^3",
    "-x1 - -x2",
]


@needs_both
@pytest.mark.parametrize("text", EXPRESSIONS)
def test_eval_backends_agree(text):
    prog = parse(text).program
    pts = np.random.default_rng(0).uniform(-1, 3, (400, 2))
    vp, sp = kernels.evaluate_status(prog, pts, BACKENDS["python"])
    vc, sc = kernels.evaluate_status(prog, pts, BACKENDS["cython"])
    assert np.array_equal(sp, sc)
    ok = sp == 0
    np.testing.assert_allclose(vp[ok], vc[ok], rtol=1e-14, atol=0)


@needs_both
def test_error_codes_agree():
    prog = parse("ln(x1) + sqrt(x2) + 1/x1 + x2^0.5").program
    pts = np.array([[1.0, 1.0], [0.0, 1.0], [1.0, -1.0], [-1.0, 4.0]])
    _, sp = kernels.evaluate_status(prog, pts, BACKENDS["python"])
    _, sc = kernels.evaluate_status(prog, pts, BACKENDS["cython"])
    assert sp[0] == 0 and np.all(sp[1:] != 0)
    assert np.array_equal(sp, sc)


@needs_both
@settings(max_examples=80, deadline=None)
@given(
    st.integers(0, 2**31),
    st.floats(-8, 8, allow_nan=False),
    st.booleans(),
    st.integers(1, 60),
)
def test_power_violation_backends_agree(seed, mu, convex, pairs):
    rng = np.random.default_rng(seed)
    la = rng.normal(size=pairs) * 3
    lb = rng.normal(size=pairs) * 3
    lam = rng.uniform(0.05, 0.95, (pairs, 4))
    lz = (1 - lam) * la[:, None] + lam * lb[:, None] + rng.normal(size=(pairs, 4)) * 0.2
    a = kernels.first_power_violation(la, lb, lz, lam, mu, convex, 1e-9, BACKENDS["python"])
    b = kernels.first_power_violation(la, lb, lz, lam, mu, convex, 1e-9, BACKENDS["cython"])
    assert a[0] == b[0] and a[2] == b[2]
    # the gap is a difference of powers; round-off scales with the operands
    top = abs(mu) * max(np.abs(la).max(), np.abs(lb).max(), np.abs(lz).max())
    assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-14 * np.exp(min(top, 700.0)))


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_power_violation_oracle(name):
    # g = x on (0, 4): g^2 is convex so concavity of g^2 fails at the midpoint of (1, 3)
    impl = BACKENDS[name]
    la, lb = np.log([1.0]), np.log([3.0])
    lam = np.array([[0.5]])
    lz = np.log([[2.0]])
    idx, gap, skipped = kernels.first_power_violation(la, lb, lz, lam, 2.0, False, 1e-9, impl)
    # relative to the largest power 3^2: (5 - 4) / 9
    assert idx == 0 and gap == pytest.approx(1.0 / 9.0)
    assert skipped == 0
    idx, _, _ = kernels.first_power_violation(la, lb, lz, lam, 0.5, False, 1e-9, impl)
    assert idx == -1
    # convexity test of g^-1: 1/2 <= (1 + 1/3)/2 holds
    idx, _, _ = kernels.first_power_violation(la, lb, lz, lam, -1.0, True, 1e-9, impl)
    assert idx == -1


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_huge_exponents_are_scaled(name):
    # mu * ln g far beyond the float range: the triple is normalized, not dropped
    la, lb, lz = np.array([800.0]), np.array([1.0]), np.array([[400.0]])
    lam = np.array([[0.5]])
    idx, gap, skipped = kernels.first_power_violation(la, lb, lz, lam, 1.0, False, 1e-9, BACKENDS[name])
    assert idx == 0 and gap == pytest.approx(0.5) and skipped == 0
    idx, _, skipped = kernels.first_power_violation(la, lb, lz, lam, 1.0, True, 1e-9, BACKENDS[name])
    assert idx == -1 and skipped == 0


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_tiny_powers_keep_their_violations(name):
    # g**64 with g ~ 0.5 is about 1e-19; convexity must still be visible
    la, lb, lz = np.log([0.1]), np.log([0.5]), np.log([[0.3]])
    lam = np.array([[0.5]])
    idx, _, _ = kernels.first_power_violation(la, lb, lz, lam, 64.0, False, 1e-9, BACKENDS[name])
    assert idx == 0


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_non_finite_exponents_skipped(name):
    la, lb, lz = np.array([np.inf]), np.array([1.0]), np.array([[0.0, 0.5]])
    lam = np.array([[0.5, 0.5]])
    idx, _, skipped = kernels.first_power_violation(la, lb, lz, lam, 1.0, False, 1e-9, BACKENDS[name])
    assert idx == -1 and skipped == 2
