"""Quasiconcavity of multiplicatively separable functions.

Sampling checks for concavity-type properties, the multiplicative concavity
index, the product quasiconcavity decision, upper-Dini superdifferentials,
KKT certificates and a certified multistart maximizer.
"""

from quasisep import kernels
from quasisep.cvindex import ExtendedReal, IndexConfig, IndexEstimate, index, index_1d
from quasisep.domain import BoxDomain, parse_box
from quasisep.expr import DomainError, Expression, ParseError, parse
from quasisep.gencv import (
    CONCAVE,
    LOGCONCAVE,
    PSEUDOCONCAVE,
    QC_GRADIENT,
    QUASICONCAVE,
    SEMISTRICT,
    ConcavityProperty,
    SamplingConfig,
    Verdict,
    check_property,
    r_concave,
)
from quasisep.kkt import (
    CertificateReport,
    CertificateVerdict,
    ConstrainedProblem,
    KKTConfig,
    check_kkt_diff,
    check_mkkt,
)
from quasisep.separable import (
    Decision,
    ProductError,
    ProductFunction,
    SeparableConfig,
    SeparableDecision,
    decide_quasiconcave,
    make_product,
)
from quasisep.solve import (
    Certification,
    SolveConfig,
    SolveResult,
    cobb_douglas_problem,
    grid_oracle,
    solve_cobb_douglas,
    solve_csqp,
    solve_usqp,
)
from quasisep.superdiff import SuperdiffConfig, dini_lower, dini_upper, superdiff_membership

__version__ = "0.1.0"

__all__ = [
    "kernels",
    "ExtendedReal",
    "IndexConfig",
    "IndexEstimate",
    "index",
    "index_1d",
    "BoxDomain",
    "parse_box",
    "DomainError",
    "Expression",
    "ParseError",
    "parse",
    "CONCAVE",
    "LOGCONCAVE",
    "PSEUDOCONCAVE",
    "QC_GRADIENT",
    "QUASICONCAVE",
    "SEMISTRICT",
    "ConcavityProperty",
    "SamplingConfig",
    "Verdict",
    "check_property",
    "r_concave",
    "CertificateReport",
    "CertificateVerdict",
    "ConstrainedProblem",
    "KKTConfig",
    "check_kkt_diff",
    "check_mkkt",
    "Decision",
    "ProductError",
    "ProductFunction",
    "SeparableConfig",
    "SeparableDecision",
    "decide_quasiconcave",
    "make_product",
    "Certification",
    "SolveConfig",
    "SolveResult",
    "cobb_douglas_problem",
    "grid_oracle",
    "solve_cobb_douglas",
    "solve_csqp",
    "solve_usqp",
    "SuperdiffConfig",
    "dini_lower",
    "dini_upper",
    "superdiff_membership",
]
