"""Command-line front end.

``quasisep check FILE --property NAME``, ``quasisep index FILE``,
``quasisep solve FILE`` and ``quasisep verify FILE --point ... --lambda ...``
each print one JSON report.  Exit code 0 means yes/valid/global, 1 means
no/invalid/local and 2 means unknown, unmet hypothesis or an error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from quasisep.cvindex import IndexConfig
from quasisep.gencv import ConcavityProperty, SamplingConfig, check_property
from quasisep.kkt import CertificateVerdict, KKTConfig, check_kkt_diff, check_mkkt
from quasisep.problemfile import ProblemFile, ProblemFileError, load
from quasisep.separable import Decision, SeparableConfig, decide_quasiconcave
from quasisep.solve import NoFeasibleStartError, SolveConfig, solve_csqp, solve_usqp
from quasisep.superdiff import SuperdiffConfig, check_d_pseudoconcave

__all__ = ["main", "build_parser", "run", "execute", "format_report", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
SIGNIFICANT = 12

EXIT_YES, EXIT_NO, EXIT_UNKNOWN = 0, 1, 2

# documented defaults; a [config] entry overrides these, a flag overrides both
DEFAULTS = {"seed": 0, "bound": 10.0}


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# report formatting


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        x = float(f"{x:.{SIGNIFICANT}g}")
        return 0.0 if x == 0.0 else x  # drop negative zero
    return obj


def format_report(report: dict) -> str:
    """Canonical JSON text: sorted keys, 12 significant digits, inf as strings."""
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


# --------------------------------------------------------------------------
# settings


def _settings(pf: Optional[ProblemFile], args) -> dict:
    s = dict(DEFAULTS)
    if pf is not None:
        s.update(pf.settings)
    for key in ("seed", "tol", "budget"):
        val = getattr(args, key, None)
        if val is not None:
            s[key] = val
    return s


def _int(s: dict, key: str, default=None):
    v = s.get(key, default)
    if v is None:
        return None
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int) or isinstance(v, bool):
        raise UsageError(f"config {key} must be an integer, got {v!r}")
    return v


def _float(s: dict, key: str, default=None):
    v = s.get(key, default)
    if v is None:
        return None
    if isinstance(v, str):
        raise UsageError(f"config {key} must be a number, got {v!r}")
    return float(v)


def _separable_cfg(s: dict, pairs: Optional[int] = None) -> SeparableConfig:
    icfg = IndexConfig(seed=_int(s, "seed"), bound=_float(s, "bound"))
    if pairs is not None:
        icfg = icfg.with_(pairs=pairs)
    return SeparableConfig(index=icfg, seed=_int(s, "seed"), bound=_float(s, "bound"))


def _vector(text: str, name: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"--{name} is empty")
    return np.array(vals)


# --------------------------------------------------------------------------
# commands


def cmd_check(pf: ProblemFile, prop: str, s: dict) -> tuple:
    seed, bound = _int(s, "seed"), _float(s, "bound")
    pairs = _int(s, "budget", 2000)
    tol = _float(s, "tol")
    name = prop.strip().lower()
    if name == "quasiconcave":
        scfg = _separable_cfg(s)
        sampling = SamplingConfig(pairs=pairs, seed=seed, bound=bound)
        if tol is not None:
            sampling = sampling.with_(tol=tol)
        p = pf.objective(scfg)
        d = decide_quasiconcave(p, scfg, with_witness=True, sampling=sampling)
        code = {Decision.YES: EXIT_YES, Decision.NO: EXIT_NO}.get(d.quasiconcave, EXIT_UNKNOWN)
        return {"property": name, "decision": d.to_dict()}, code
    p = pf.objective(_separable_cfg(s))
    if name == "d-pseudoconcave":
        cfg = SuperdiffConfig(pairs=pairs, seed=seed, bound=bound)
        if tol is not None:
            cfg = cfg.with_(tol=tol)
        v = check_d_pseudoconcave(p, p.domain, cfg)
    else:
        try:
            cp = ConcavityProperty.from_name(name)
        except ValueError:
            raise UsageError(f"unknown property {prop!r}") from None
        cfg = SamplingConfig(pairs=pairs, seed=seed, bound=bound)
        if tol is not None:
            cfg = cfg.with_(tol=tol)
        v = check_property(p, p.domain, cp, cfg)
    return {"property": name, "verdict": v.to_dict()}, (EXIT_NO if v.falsified else EXIT_YES)


def cmd_index(pf: ProblemFile, s: dict) -> tuple:
    scfg = _separable_cfg(s, pairs=_int(s, "budget"))
    if s.get("tol") is not None:
        scfg = scfg.with_(index=scfg.index.with_(bisect_tol=_float(s, "tol")))
    d = decide_quasiconcave(pf.objective(scfg), scfg)
    report = {
        "factors": [
            dict(e.to_dict(), expression=expr, domain=box) for e, (expr, box) in zip(d.factor_indices, pf.factors)
        ],
        "reciprocal_sum": d.reciprocal_sum,
        "quasiconcave": d.quasiconcave.value,
    }
    report["aggregate_index"] = d.aggregate_index.to_json() if d.aggregate_index is not None else None
    if d.aggregate_index is None:
        report["aggregate_note"] = "the product formula applies only to quasiconcave products: " + d.reason
    low = any(e.low_confidence for e in d.factor_indices)
    return report, (EXIT_UNKNOWN if low else EXIT_YES)


def cmd_solve(pf: ProblemFile, s: dict) -> tuple:
    seed, bound = _int(s, "seed"), _float(s, "bound")
    kcfg = KKTConfig(seed=seed, bound=bound)
    if s.get("tol") is not None:
        kcfg = kcfg.with_(tol=_float(s, "tol"))
    cfg = SolveConfig(
        starts=_int(s, "budget", _int(s, "starts", 16)),
        seed=seed,
        bound=bound,
        kkt=kcfg,
        separable=_separable_cfg(s),
    )
    if pf.constraints:
        res = solve_csqp(pf.problem(cfg.separable), cfg)
    else:
        res = solve_usqp(pf.objective(cfg.separable), cfg)
    report = res.to_dict()
    report["problem"] = "constrained" if pf.constraints else "unconstrained"
    return report, (EXIT_YES if res.certification.is_global else EXIT_NO)


def cmd_verify(pf: ProblemFile, point: str, lam: Optional[str], mode: str, s: dict) -> tuple:
    prob = pf.problem(_separable_cfg(s))
    x = _vector(point, "point")
    if x.size != prob.dim:
        raise UsageError(f"--point has {x.size} coordinates, the problem has {prob.dim}")
    m = len(prob.constraints)
    lams = _vector(lam, "lambda") if lam is not None else np.zeros(0)
    if lams.size != m:
        raise UsageError(f"--lambda has {lams.size} values, the problem has {m} constraint(s)")
    kcfg = KKTConfig(seed=_int(s, "seed"), bound=_float(s, "bound"))
    if s.get("tol") is not None:
        kcfg = kcfg.with_(tol=_float(s, "tol"))
    if s.get("budget") is not None:
        kcfg = kcfg.with_(budget=_int(s, "budget"))
    if mode == "auto":
        mode = "diff" if prob.objective.is_smooth and all(c.expr.is_smooth for c in prob.constraints) else "mkkt"
    check = check_kkt_diff if mode == "diff" else check_mkkt
    rep = check(prob, x, lams, kcfg)
    code = {CertificateVerdict.VALID: EXIT_YES, CertificateVerdict.INVALID: EXIT_NO}.get(rep.verdict, EXIT_UNKNOWN)
    return dict(rep.to_dict(), mode=mode, point=x, multipliers=lams), code


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="problem file")
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--tol", type=float, default=None, help="primary tolerance of the command")
    common.add_argument(
        "--budget",
        type=int,
        default=None,
        help="sampling budget: pairs (check), pairs per line (index), starts (solve), Slater samples (verify)",
    )
    common.add_argument("--report", default=None, help="also write the JSON report to this path")

    parser = argparse.ArgumentParser(prog="quasisep", description="Quasiconcavity checks for separable products.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", parents=[common], help="check a concavity property")
    p.add_argument(
        "--property",
        default="quasiconcave",
        help="quasiconcave, concave, logconcave, semistrict, pseudoconcave, qcgradient, rconcave:R, d-pseudoconcave",
    )
    sub.add_parser("index", parents=[common], help="concavity indices of the factors")
    sub.add_parser("solve", parents=[common], help="maximize the product")
    p = sub.add_parser("verify", parents=[common], help="verify a KKT certificate")
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--lambda", dest="lam", default=None, help="comma-separated multipliers")
    p.add_argument("--mode", choices=("auto", "diff", "mkkt"), default="auto")
    return parser


def run(argv: Sequence[str] | None = None) -> tuple:
    """Parse ``argv`` and execute; returns ``(report, exit_code)``."""
    return execute(build_parser().parse_args(argv))


def execute(args: argparse.Namespace) -> tuple:
    report = {"schema_version": SCHEMA_VERSION, "command": args.command, "file": args.file}
    try:
        pf = load(args.file)
        s = _settings(pf, args)
        report["seed"] = _int(s, "seed")
        if args.command == "check":
            body, code = cmd_check(pf, args.property, s)
        elif args.command == "index":
            body, code = cmd_index(pf, s)
        elif args.command == "solve":
            body, code = cmd_solve(pf, s)
        else:
            body, code = cmd_verify(pf, args.point, args.lam, args.mode, s)
        report["result"] = body
    except ProblemFileError as exc:
        report["error"] = {"kind": "problem-file", "message": exc.reason, "line": exc.line, "column": exc.column}
        code = EXIT_UNKNOWN
    except (NoFeasibleStartError, ValueError) as exc:
        # ValueError covers ProductError, DomainError and bad settings
        report["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        code = EXIT_UNKNOWN
    report["exit_code"] = code
    return report, code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    report, code = execute(args)
    text = format_report(report)
    sys.stdout.write(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
