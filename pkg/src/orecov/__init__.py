"""Sampling recovery on the torus: discretization, weighted least squares, rate experiments."""

from .classes import (
    ClassMember,
    WorstCaseProblem,
    bernoulli_coeff,
    bernoulli_eval,
    random_w2r_member,
    worst_case_linear,
)
from .discretization import (
    DiscretizationCertificate,
    SampleSet,
    bss_subsample,
    certify,
    condition_e,
    equal_weight_verify,
    gram,
    random_points,
)
from .recovery import l2_error, lawson_minimax, lsw_solve, recovery_matrix, verify_at1
from .trig import (
    FrequencySet,
    GridSpec,
    TrigPolynomial,
    basis_vector,
    evaluate,
    hyperbolic_cross,
    parseval_norm,
    uniform_grid,
)

__version__ = "0.1.0"

__all__ = [
    "l2_error",
    "lawson_minimax",
    "lsw_solve",
    "recovery_matrix",
    "verify_at1",
    "ClassMember",
    "WorstCaseProblem",
    "bernoulli_coeff",
    "bernoulli_eval",
    "random_w2r_member",
    "worst_case_linear",
    "DiscretizationCertificate",
    "SampleSet",
    "bss_subsample",
    "certify",
    "condition_e",
    "equal_weight_verify",
    "gram",
    "random_points",
    "FrequencySet",
    "GridSpec",
    "TrigPolynomial",
    "basis_vector",
    "evaluate",
    "hyperbolic_cross",
    "parseval_norm",
    "uniform_grid",
]
