"""Exact discrete counterfactual oracle.

Builds response-function couplings over discrete structural causal models and
computes factual, interventional and counterfactual joints by enumerating the
error space, for checking symbolic identification results numerically.
"""

from .scm import (
    DiscreteScm,
    ModelError,
    build_context_specific_scm,
    parse_model,
    random_scm,
    serialize_model,
)
from .coupling import ResponseFunctionTable, build_coupling
from .joint import (
    IndependenceReport,
    Term,
    check_independence,
    check_mutual_independence,
    counterfactual_joint,
    factual_joint,
    interventional_joint,
)

__all__ = [
    "DiscreteScm",
    "IndependenceReport",
    "ModelError",
    "ResponseFunctionTable",
    "Term",
    "build_context_specific_scm",
    "build_coupling",
    "check_independence",
    "check_mutual_independence",
    "counterfactual_joint",
    "factual_joint",
    "interventional_joint",
    "parse_model",
    "random_scm",
    "serialize_model",
]
