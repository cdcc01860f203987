"""Factual, interventional and counterfactual joints by exact enumeration.

A counterfactual term names a variable and an intervention world; evaluating
one error configuration assigns every term its value by recursive
substitution (an intervened parent feeds its children the intervened value,
while its own natural value is still computed from its parents).  Identical
worlds across terms are deduplicated and each world is evaluated once per
configuration.

Float64 enumeration goes through the kernels; ``exact=True`` switches to a
pure-python loop over exact Fractions for small error spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from ..config import ERROR_SPACE_GUARD, oracle_backend
from ..tables import JointTable
from .coupling import ResponseFunctionTable
from .kernels import HAVE_NUMBA, joint_numba, joint_numpy
from .scm import DiscreteScm, ModelError

EXACT_SPACE_GUARD = 1_000_000


@dataclass(frozen=True)
class Term:
    """One counterfactual variable: ``var`` under the intervention ``do``
    (sorted (variable id, state index) pairs; empty means factual)."""

    var: int
    do: tuple[tuple[int, int], ...] = ()

    def world(self) -> tuple[tuple[int, int], ...]:
        return self.do


def make_term(scm: DiscreteScm, var: "int | str", do: Mapping | None = None) -> Term:
    """Build a term, resolving names and state labels through the model."""
    names = {d.name: i for i, d in enumerate(scm.decls)}
    v = names[var] if isinstance(var, str) else int(var)
    pairs = []
    for key, state in (do or {}).items():
        t = names[key] if isinstance(key, str) else int(key)
        if isinstance(state, str):
            state = scm.decls[t].states.index(state)
        pairs.append((t, int(state)))
    return Term(v, tuple(sorted(pairs)))


def _validate_terms(scm: DiscreteScm, terms: Sequence[Term]) -> None:
    n = len(scm.decls)
    if len(set(terms)) != len(terms):
        raise ModelError("duplicate counterfactual terms")
    for t in terms:
        if not 0 <= t.var < n:
            raise ModelError(f"term variable id {t.var} out of range")
        seen = set()
        for v, s in t.do:
            if not 0 <= v < n:
                raise ModelError(f"intervened id {v} out of range")
            if v in seen:
                raise ModelError("repeated variable in one intervention")
            seen.add(v)
            if not 0 <= s < scm.decls[v].k:
                raise ModelError(
                    f"state {s} out of range for {scm.decls[v].name}"
                )
        if t.do != tuple(sorted(t.do)):
            raise ModelError("intervention pairs must be sorted by variable id")


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _flat_plan(rft: ResponseFunctionTable, worlds, terms, term_world):
    scm = rft.scm
    n = len(scm.decls)
    n_r = np.array([rft.n_responses(i) for i in range(n)], dtype=np.int64)
    err_stride = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        err_stride[i] = err_stride[i + 1] * n_r[i + 1]

    resp_off = np.zeros(n, dtype=np.int64)
    probs_off = np.zeros(n, dtype=np.int64)
    n_cfg = np.zeros(n, dtype=np.int64)
    resp_parts = []
    probs_parts = []
    off = 0
    for i in range(n):
        arr = rft.responses[i]
        n_cfg[i] = arr.shape[1]
        resp_off[i] = off
        probs_off[i] = sum(len(p) for p in probs_parts)
        off += arr.size
        resp_parts.append(arr.astype(np.int64).ravel())
        probs_parts.append(rft.probs[i])
    resp_flat = np.concatenate(resp_parts) if resp_parts else np.zeros(0, np.int64)
    probs_flat = np.concatenate(probs_parts) if probs_parts else np.zeros(0)

    par_flat_l: list[int] = []
    par_stride_l: list[int] = []
    par_off = np.zeros(n, dtype=np.int64)
    par_cnt = np.zeros(n, dtype=np.int64)
    for i in range(n):
        ps = scm.parents[i]
        par_off[i] = len(par_flat_l)
        par_cnt[i] = len(ps)
        stride = 1
        strides = []
        for p in reversed(ps):
            strides.append(stride)
            stride *= scm.decls[p].k
        strides.reverse()
        par_flat_l.extend(ps)
        par_stride_l.extend(strides)
    par_flat = np.array(par_flat_l, dtype=np.int64)
    par_stride = np.array(par_stride_l, dtype=np.int64)

    topo = np.array(scm.graph().topological_order(), dtype=np.int64)

    n_worlds = len(worlds)
    do_mask = np.zeros((n_worlds, n), dtype=np.int8)
    do_val = np.zeros((n_worlds, n), dtype=np.int64)
    for w, world in enumerate(worlds):
        for v, s in world:
            do_mask[w, v] = 1
            do_val[w, v] = s

    out_sizes = tuple(scm.decls[t.var].k for t in terms)
    out_stride_l = []
    stride = 1
    for k in reversed(out_sizes):
        out_stride_l.append(stride)
        stride *= k
    out_stride_l.reverse()
    return (
        n_r,
        err_stride,
        resp_flat,
        resp_off,
        n_cfg,
        par_flat,
        par_stride,
        par_off,
        par_cnt,
        probs_flat,
        probs_off,
        topo,
        do_mask,
        do_val,
        np.array(term_world, dtype=np.int64),
        np.array([t.var for t in terms], dtype=np.int64),
        np.array(out_stride_l, dtype=np.int64),
    ), out_sizes


def _exact_enumerate(rft, worlds, terms, term_world, out_sizes) -> np.ndarray:
    scm = rft.scm
    n = len(scm.decls)
    topo = scm.graph().topological_order()
    space = rft.error_space()
    if space > EXACT_SPACE_GUARD:
        raise ModelError(
            f"exact enumeration over {space} configurations is too slow; "
            "use the float backends"
        )
    flat = np.empty(int(np.prod(out_sizes)) if out_sizes else 1, dtype=object)
    flat[:] = Fraction(0)
    strides = []
    s = 1
    for k in reversed(out_sizes):
        strides.append(s)
        s *= k
    strides.reverse()

    world_list = [dict(w) for w in worlds]
    n_r = [rft.n_responses(i) for i in range(n)]
    for r in np.ndindex(*n_r):
        pr = Fraction(1)
        for i in range(n):
            pr *= rft.probs_exact[i][r[i]]
            if pr == 0:
                break
        if pr == 0:
            continue
        nats = []
        for do in world_list:
            nat: dict[int, int] = {}
            for i in topo:
                cfg = 0
                for p in scm.parents[i]:
                    pv = do[p] if p in do else nat[p]
                    cfg = cfg * scm.decls[p].k + pv
                nat[i] = int(rft.responses[i][r[i], cfg])
            nats.append(nat)
        oi = 0
        for t, term in enumerate(terms):
            oi += nats[term_world[t]][term.var] * strides[t]
        flat[oi] += pr
    return flat.reshape(out_sizes)


def counterfactual_joint(
    rft: ResponseFunctionTable,
    terms: Iterable[Term],
    exact: bool = False,
    backend: str | None = None,
) -> JointTable:
    """Joint distribution of counterfactual terms under the coupling.

    Axes of the result are the Term objects themselves, in the given order.
    """
    terms = tuple(terms)
    if not terms:
        raise ModelError("need at least one term")
    scm = rft.scm
    _validate_terms(scm, terms)
    space = rft.error_space()
    if space > ERROR_SPACE_GUARD:
        raise ModelError(
            f"error space {space} exceeds the enumeration guard "
            f"{ERROR_SPACE_GUARD}"
        )

    worlds: list[tuple[tuple[int, int], ...]] = []
    term_world = []
    for t in terms:
        w = t.world()
        if w not in worlds:
            worlds.append(w)
        term_world.append(worlds.index(w))

    labels = tuple(scm.decls[t.var].states for t in terms)
    if exact:
        out_sizes = tuple(scm.decls[t.var].k for t in terms)
        vals = _exact_enumerate(rft, worlds, terms, term_world, out_sizes)
        return JointTable(terms, out_sizes, vals, labels)

    plan, out_sizes = _flat_plan(rft, worlds, terms, term_world)
    out = np.zeros(int(np.prod(out_sizes)) if out_sizes else 1, dtype=np.float64)
    backend = backend or oracle_backend()
    if backend == "numba":
        if not HAVE_NUMBA:
            raise ModelError("numba backend requested but numba is not importable")
        joint_numba(plan, out)
    elif backend == "numpy":
        joint_numpy(plan, out)
    else:
        raise ModelError(f"unknown backend {backend!r}")
    return JointTable(terms, out_sizes, out.reshape(out_sizes), labels)


def _as_var_axes(table: JointTable, terms: Sequence[Term]) -> JointTable:
    return JointTable(
        tuple(t.var for t in terms), table.sizes, table.values, table.labels
    )


def factual_joint(
    rft: ResponseFunctionTable, exact: bool = False, backend: str | None = None
) -> JointTable:
    """Observational joint over the observed variables (axes are var ids)."""
    scm = rft.scm
    terms = tuple(Term(v) for v, d in enumerate(scm.decls) if not d.hidden)
    t = counterfactual_joint(rft, terms, exact=exact, backend=backend)
    return _as_var_axes(t, terms)


def interventional_joint(
    rft: ResponseFunctionTable,
    do: Mapping,
    exact: bool = False,
    backend: str | None = None,
) -> JointTable:
    """Joint of V(a) over all observed V (axes are var ids).  Treated
    variables appear as their natural values under the intervention."""
    scm = rft.scm
    names = {d.name: i for i, d in enumerate(scm.decls)}
    pairs = []
    for key, state in do.items():
        v = names[key] if isinstance(key, str) else int(key)
        if isinstance(state, str):
            state = scm.decls[v].states.index(state)
        pairs.append((v, int(state)))
    world = tuple(sorted(pairs))
    terms = tuple(Term(v, world) for v, d in enumerate(scm.decls) if not d.hidden)
    t = counterfactual_joint(rft, terms, exact=exact, backend=backend)
    return _as_var_axes(t, terms)


# ---------------------------------------------------------------------------
# Independence checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndependenceReport:
    holds: bool
    max_dev: float
    context: tuple | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_mutual_independence(
    table: JointTable,
    groups: Sequence[Sequence[Hashable]],
    given: Sequence[Hashable] = (),
    tol: float = 1e-9,
) -> IndependenceReport:
    """Do the axis groups factorize, jointly, within every conditioning
    context of positive probability?"""
    groups = [tuple(g) for g in groups if len(tuple(g))]
    given = tuple(given)
    flat = [a for g in groups for a in g] + list(given)
    if len(set(flat)) != len(flat):
        raise ValueError("independence groups must be disjoint")
    if len(groups) < 2:
        return IndependenceReport(True, 0.0)

    total = table.total()
    joint = table.marginal(tuple(flat))
    pg = table.marginal(given) if given else None
    group_m = [table.marginal(tuple(g) + given) for g in groups]
    sizes = [table.sizes[table.axis(a)] for a in flat]
    n_given = len(given)
    offs = []
    o = 0
    for g in groups:
        offs.append((o, o + len(g)))
        o += len(g)

    worst = 0.0
    worst_ctx = None
    for idx in np.ndindex(*sizes):
        gidx = idx[len(flat) - n_given :] if n_given else ()
        base = pg[gidx] if given else total
        if base == 0:
            continue
        lhs = joint[idx] / base
        rhs = 1
        for (lo, hi), m in zip(offs, group_m):
            rhs = rhs * (m[idx[lo:hi] + gidx] / base)
        dev = abs(float(lhs - rhs))
        if dev > worst:
            worst = dev
            worst_ctx = idx
    return IndependenceReport(worst <= tol, worst, worst_ctx)


def check_independence(
    table: JointTable,
    left: Sequence[Hashable],
    right: Sequence[Hashable],
    given: Sequence[Hashable] = (),
    tol: float = 1e-9,
) -> IndependenceReport:
    """Conditional independence of two axis groups at the given tolerance."""
    return check_mutual_independence(table, [left, right], given, tol)
