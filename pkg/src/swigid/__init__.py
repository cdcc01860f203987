"""Causal identification on single world intervention graphs.

Build intervention graphs from acyclic directed mixed graphs, answer
separation queries on them, reduce counterfactual targets to functionals of
the observed law (or refuse with a hedge witness), and verify everything
against an exact discrete counterfactual oracle.
"""

from .estimand import (
    Const,
    EstimandError,
    Estimand,
    FixEval,
    Lit,
    MarginalSum,
    PositivityViolation,
    ProbTerm,
    Product,
    Ratio,
    Substitute,
    Sym,
    evaluate,
    parse_machine,
    render,
    simplify,
)
from .graph import (
    Admg,
    FixingSchedule,
    GraphError,
    VariableDecl,
    VertexRelations,
    latent_projection,
    parse_graph,
    project_mixed_edges,
    serialize_graph,
)
from .identify import (
    ConditionalReduction,
    CounterfactualQuery,
    DistrictTerm,
    HedgeWitness,
    IdentifyError,
    IdentifyResult,
    SplitBlocked,
    SplitState,
    district_split_orders,
    fix_natural,
    g_formula,
    identify,
    identify_conditional,
    identify_marginal,
    initial_split_state,
    make_query,
    marginalize_natural,
    query_symbols,
    query_text,
    split_once,
)
from .pocalc import CfDist, RuleApplication, rule1, rule2, rule3
from .separation import (
    NondependenceClaim,
    SeparationVerdict,
    d_separated,
    m_separated,
    swig_separated,
)
from .swig import (
    ContextRule,
    Swig,
    SwigNode,
    build_swig,
    parse_context,
    relabel_all_splits,
    swig_latent_projection,
    value_symbol,
)
from .tables import JointTable, table_from_fn

__version__ = "0.1.0"
