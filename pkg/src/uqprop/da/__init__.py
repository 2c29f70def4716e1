"""Truncated multivariate Taylor algebra."""

from uqprop.da.domain import UncertaintyDomain, sym_eig
from uqprop.da.multiindex import (
    MultiIndex,
    binomial,
    dimension,
    enumerate_multi_indices,
    factorial,
    is_le,
    order,
    sub_indices,
)
from uqprop.da.taylor import (
    DASpace,
    SingularExpansionError,
    TaylorPoly,
    arith,
    atan2,
    compose,
    const_part,
    constants,
    cos,
    da_space,
    evaluate,
    evaluate_vector,
    exp,
    identity_vars,
    intrinsic,
    log,
    partial,
    power,
    reciprocal,
    sin,
    sqrt,
)

__all__ = [
    "DASpace",
    "MultiIndex",
    "SingularExpansionError",
    "TaylorPoly",
    "UncertaintyDomain",
    "arith",
    "atan2",
    "binomial",
    "compose",
    "const_part",
    "constants",
    "cos",
    "da_space",
    "dimension",
    "enumerate_multi_indices",
    "evaluate",
    "evaluate_vector",
    "exp",
    "factorial",
    "identity_vars",
    "intrinsic",
    "is_le",
    "log",
    "order",
    "partial",
    "power",
    "reciprocal",
    "sin",
    "sqrt",
    "sub_indices",
    "sym_eig",
]
