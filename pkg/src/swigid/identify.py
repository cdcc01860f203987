"""Identification of marginal and conditional counterfactual distributions.

The engine reduces a target p(Y(a)) over an acyclic directed mixed graph to a
functional of the observed joint law, or reports failure with a hedge
witness.  The reduction works district by district over the ancestral set of
the outcomes: within a district term, vertices outside the district are
eliminated one at a time, either by marginalizing a childless vertex or by an
identified split -- replace a vertex by a fixed copy at a context value and
divide by its propensity given its Markov blanket.  Conditional targets
p(Y(a) | Z(a)=z) first shrink the conditioning set by exchange moves, then
drop treated conditioning coordinates that are irrelevant to the outcomes,
and finally form a ratio of identified marginals.

The split and marginalization steps are exposed (`initial_split_state`,
`split_once`, `fix_natural`, `marginalize_natural`) so single moves can be
driven, replayed in arbitrary orders, or checked against an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

from .estimand import (
    Const,
    Expr,
    FixEval,
    Lit,
    MarginalSum,
    ProbTerm,
    Product,
    Ratio,
    Substitute,
    Sym,
    Value,
    all_syms,
    free_syms,
    fresh_sym,
    render,
    simplify,
    substitute,
)
from .graph import Admg, GraphError, latent_projection
from .separation import swig_separated
from .swig import build_swig, value_symbol


class IdentifyError(ValueError):
    """A malformed query or an unsound requested move."""


class SplitBlocked(IdentifyError):
    """A requested split is not identified; carries the blocking vertices."""

    def __init__(self, msg: str, witnesses: tuple[int, ...]):
        super().__init__(msg)
        self.witnesses = witnesses


# -- queries ---------------------------------------------------------------------


@dataclass(frozen=True)
class CounterfactualQuery:
    """p(outcomes(interventions) | conditioning(interventions)), values
    symbolic (Sym) or bound to states (Lit)."""

    outcomes: tuple[int, ...]
    interventions: tuple[tuple[int, Value], ...] = ()
    conditioning: tuple[tuple[int, Value], ...] = ()

    @property
    def treated(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.interventions)


def _resolve(g: Admg, v) -> int:
    i = g.id_of(v) if isinstance(v, str) else int(v)
    if i not in set(g.vertices) and i not in set(g.hidden):
        raise IdentifyError(f"vertex id {i} not in graph")
    return i


def _query_value(g: Admg, v: int, spec, treated: set[int]) -> Value:
    """Default symbol, or a Lit when a state label is supplied."""
    if isinstance(spec, (Sym, Lit)):
        if isinstance(spec, Sym) and spec.var != v:
            raise IdentifyError(
                f"symbol {spec.name} is declared for a different variable"
            )
        return spec
    if spec is not None:
        label = str(spec)
        if label not in g.decl(v).states:
            raise IdentifyError(f"{label!r} is not a state of {g.name(v)}")
        return Lit(label)
    base = value_symbol(g.name(v))
    if v in treated:
        base += "'"
    return Sym(base, v, g.decl(v).k)


def make_query(g: Admg, outcomes, treatments=(), conditioning=()) -> CounterfactualQuery:
    """Build a query; treatments/conditioning may be iterables (symbolic
    values) or mappings to state labels (None keeps the value symbolic)."""

    def pairs(spec, treated: set[int]) -> tuple[tuple[int, Value], ...]:
        if isinstance(spec, Mapping):
            items = [(_resolve(g, k), s) for k, s in spec.items()]
        else:
            items = [(_resolve(g, k), None) for k in spec]
        if len({v for v, _ in items}) != len(items):
            raise IdentifyError("repeated variable in one query slot")
        return tuple(sorted((v, _query_value(g, v, s, treated)) for v, s in items))

    outs = tuple(sorted(_resolve(g, v) for v in outcomes))
    if not outs or len(set(outs)) != len(outs):
        raise IdentifyError("outcomes must be nonempty and distinct")
    trt = pairs(treatments, set())
    treated = {v for v, _ in trt}
    cond = pairs(conditioning, treated)
    if set(outs) & {v for v, _ in cond}:
        raise IdentifyError("outcomes and conditioning variables overlap")
    for v in list(outs) + [v for v, _ in cond] + list(treated):
        if g.decl(v).hidden:
            raise IdentifyError(
                f"{g.name(v)} is hidden; queries range over observed variables"
            )
    return CounterfactualQuery(outs, trt, cond)


def query_symbols(g: Admg, query: CounterfactualQuery) -> dict[int, Sym]:
    """Natural-value symbol for every observed vertex: the lowercased name,
    primed for treated variables so the intervention symbol stays free."""
    treated = set(query.treated)
    syms = {}
    for v in g.vertices:
        base = value_symbol(g.name(v))
        if v in treated:
            base += "'"
        syms[v] = Sym(base, v, g.decl(v).k)
    owner: dict[str, int] = {}
    values = [val for _, val in query.interventions + query.conditioning]
    for s in list(syms.values()) + [v for v in values if isinstance(v, Sym)]:
        if owner.setdefault(s.name, s.var) != s.var:
            raise IdentifyError(
                f"value symbol {s.name!r} would stand for two different "
                f"variables; rename one of them"
            )
    return syms


def query_text(g: Admg, query: CounterfactualQuery) -> str:
    syms = query_symbols(g, query)

    def vtok(v: int, val: Value) -> str:
        if isinstance(val, Sym):
            return val.name
        return f"{value_symbol(g.name(v))}={val.state}"

    atoks = [vtok(v, val) for v, val in query.interventions]

    def term(v: int) -> str:
        return f"{g.name(v)}({','.join(atoks)})" if atoks else g.name(v)

    outs = [f"{term(v)}={syms[v].name}" for v in query.outcomes]
    conds = [
        f"{term(v)}={val.name if isinstance(val, Sym) else val.state}"
        for v, val in query.conditioning
    ]
    body = ", ".join(outs)
    return f"p({body} | {', '.join(conds)})" if conds else f"p({body})"


# -- single split moves ------------------------------------------------------------


@dataclass(frozen=True)
class SplitState:
    """One point of a stepwise reduction: the remaining random structure, the
    running expression for its law, the natural-value symbol of each vertex,
    and the context values of everything split so far.  Vertices in ``split``
    keep their natural coordinate but have lost their outgoing edges."""

    graph: Admg
    expr: Expr
    syms: tuple[tuple[int, Sym], ...]
    context: tuple[tuple[int, Value], ...] = ()
    split: tuple[int, ...] = ()

    @property
    def sym_map(self) -> dict[int, Sym]:
        return dict(self.syms)

    @property
    def context_map(self) -> dict[int, Value]:
        return dict(self.context)


def initial_split_state(g: Admg, treatments: Iterable = ()) -> SplitState:
    """The factual joint law of ``g``; ``treatments`` only primes the natural
    symbols of variables that will be split at a query value."""
    if g.hidden:
        g = latent_projection(g)
    query = make_query(g, outcomes=g.vertices, treatments=treatments)
    syms = query_symbols(g, query)
    expr = ProbTerm(tuple((v, syms[v]) for v in g.vertices))
    return SplitState(g, expr, tuple(sorted(syms.items())))


def _drop_out_edges(g: Admg, k: int) -> Admg:
    return Admg(
        g.decls,
        [(t, h) for t, h in g.directed if t != k],
        g.bidirected,
        vertices=g.vertices,
    )


def _blanket_joint(state: SplitState, k: int) -> tuple[Expr, tuple[int, ...]]:
    """Running law marginalized to k and its Markov blanket."""
    g = state.graph
    mb = g.markov_blanket(k)
    keep = set(mb) | {k}
    syms = state.sym_map
    others = tuple(syms[v] for v in g.vertices if v not in keep)
    return (MarginalSum(others, state.expr) if others else state.expr), mb


def _as_value(state: SplitState, k: int, value) -> Value:
    if isinstance(value, (Sym, Lit)):
        if isinstance(value, Sym):
            if value.var != k:
                raise IdentifyError(
                    f"symbol {value.name} belongs to a different variable"
                )
            if value == state.sym_map[k]:
                raise IdentifyError(
                    f"{value.name} is the natural coordinate of "
                    f"{state.graph.name(k)}; use fix_natural to condition on it"
                )
        return value
    label = str(value)
    decl = state.graph.decl(k)
    if label in decl.states:
        return Lit(label)
    return Sym(label, k, decl.k)


def split_once(state: SplitState, k, value) -> SplitState:
    """Split one vertex at a context value, keeping its natural coordinate.

    Sound exactly when no other vertex is both a descendant and a district
    mate of k in the current graph; otherwise raises with the witnesses.
    The law picks up the factor p(k = natural | blanket) / p(k = value | blanket).
    """
    g = state.graph
    k = _resolve(g, k)
    if k in set(state.split):
        raise IdentifyError(f"{g.name(k)} is already split")
    ok, wit = g.is_fixable(k)
    if not ok:
        names = ", ".join(g.name(w) for w in wit)
        raise SplitBlocked(
            f"splitting {g.name(k)} here is not identified; descendants in "
            f"its district: {names}",
            wit,
        )
    c = _as_value(state, k, value)
    s_k = state.sym_map[k]
    kmb, _ = _blanket_joint(state, k)
    expr = Product(
        (
            substitute(state.expr, {s_k: c}),
            Ratio(kmb, substitute(kmb, {s_k: c})),
        )
    )
    return SplitState(
        _drop_out_edges(g, k),
        simplify(expr),
        state.syms,
        tuple(sorted(state.context + ((k, c),))),
        tuple(sorted(state.split + (k,))),
    )


def fix_natural(state: SplitState, k) -> SplitState:
    """Split k at its own observed value and marginalize nothing: divide the
    law by p(k = natural | blanket) and drop the vertex, leaving its symbol
    behind as a context value."""
    g = state.graph
    k = _resolve(g, k)
    if k in set(state.split):
        raise IdentifyError(f"{g.name(k)} is already split")
    ok, wit = g.is_fixable(k)
    if not ok:
        names = ", ".join(g.name(w) for w in wit)
        raise SplitBlocked(
            f"splitting {g.name(k)} here is not identified; descendants in "
            f"its district: {names}",
            wit,
        )
    s_k = state.sym_map[k]
    kmb, _ = _blanket_joint(state, k)
    expr = Product((state.expr, Ratio(MarginalSum((s_k,), kmb), kmb)))
    return SplitState(
        g.induced_subgraph([v for v in g.vertices if v != k]),
        simplify(expr),
        tuple(p for p in state.syms if p[0] != k),
        tuple(sorted(state.context + ((k, s_k),))),
        state.split,
    )


def marginalize_natural(state: SplitState, k) -> SplitState:
    """Sum out the natural coordinate of a childless vertex and remove it."""
    g = state.graph
    k = _resolve(g, k)
    if g.children(k):
        names = ", ".join(g.name(c) for c in g.children(k))
        raise IdentifyError(
            f"only childless vertices can be marginalized; "
            f"{g.name(k)} still has children: {names}"
        )
    s_k = state.sym_map[k]
    expr = MarginalSum((s_k,), state.expr)
    return SplitState(
        g.induced_subgraph([v for v in g.vertices if v != k]),
        simplify(expr),
        tuple(p for p in state.syms if p[0] != k),
        state.context,
        tuple(v for v in state.split if v != k),
    )


# -- district terms -----------------------------------------------------------------

Action = tuple[str, int]  # ("marg" | "fix" | "keep", vertex)
Chooser = Callable[[SplitState, tuple[Action, ...]], Action]


class _Stuck(Exception):
    def __init__(self, state: SplitState, pending: set[int]):
        self.state = state
        self.pending = pending


def _valid_actions(
    state: SplitState,
    dset: set[int],
    a_map: dict[int, Value],
    anstar: set[int],
    pending: set[int],
) -> tuple[tuple[Action, ...], tuple[Action, ...]]:
    """Sound moves from this state, (preferred, fallback).  Fallback moves fix
    vertices whose context value cannot matter; they are valid but leave an
    irrelevant free symbol behind."""
    g = state.graph
    rest = [v for v in g.vertices if v not in dset]
    margs = [("marg", v) for v in rest if not g.children(v)]
    fixable = [v for v in rest if g.is_fixable(v)[0]]
    prim = [("fix", v) for v in fixable if v in anstar or v in a_map]
    keeps = [
        ("keep", v)
        for v in sorted(pending)
        if v not in set(state.split) and g.is_fixable(v)[0]
    ]
    fallback = [("fix", v) for v in fixable if v not in anstar and v not in a_map]
    return tuple(margs + prim + keeps), tuple(fallback)


def _apply_action(
    state: SplitState,
    act: Action,
    a_map: dict[int, Value],
    pending: set[int],
) -> SplitState:
    kind, k = act
    if kind == "marg":
        return marginalize_natural(state, k)
    if kind == "keep":
        pending.discard(k)
        return split_once(state, k, a_map[k])
    c = a_map.get(k)
    if c is None:
        return fix_natural(state, k)
    return marginalize_natural(split_once(state, k, c), k)


def _district_term(
    g: Admg,
    a_map: dict[int, Value],
    syms: dict[int, Sym],
    district: tuple[int, ...],
    anstar: set[int],
    chooser: Chooser | None = None,
) -> tuple[Expr, bool]:
    """Reduce the factual joint of g to the term for one district, splitting
    every vertex outside it (and the treated vertices inside it)."""
    dset = set(district)
    state = SplitState(
        g,
        ProbTerm(tuple((v, syms[v]) for v in g.vertices)),
        tuple(sorted(syms.items())),
    )
    pending = dset & set(a_map)
    used_fallback = False
    while set(state.graph.vertices) != dset or pending:
        actions, fallback = _valid_actions(state, dset, a_map, anstar, pending)
        if not actions and not fallback:
            raise _Stuck(state, pending)
        if chooser is not None:
            act = chooser(state, actions + fallback)
        else:
            act = actions[0] if actions else fallback[0]
        if act in fallback:
            used_fallback = True
        state = _apply_action(state, act, a_map, pending)
    return state.expr, used_fallback


def district_split_orders(
    g: Admg, treatments, district, limit: int = 200
) -> list[tuple[Expr, tuple[Action, ...]]]:
    """Every complete order of sound moves for one district term (up to
    ``limit`` sequences), with the resulting expression for each."""
    if g.hidden:
        g = latent_projection(g)
    dset = {_resolve(g, v) for v in district}
    query = make_query(g, outcomes=sorted(dset), treatments=treatments)
    a_map = dict(query.interventions)
    syms = query_symbols(g, query)
    gq = Admg(
        g.decls,
        [(t, h) for t, h in g.directed if t not in a_map],
        g.bidirected,
        vertices=g.vertices,
    )
    anstar = set(gq.ancestors(sorted(dset)))
    start = SplitState(
        g,
        ProbTerm(tuple((v, syms[v]) for v in g.vertices)),
        tuple(sorted(syms.items())),
    )
    out: list[tuple[Expr, tuple[Action, ...]]] = []

    def walk(state: SplitState, pending: set[int], seq: tuple[Action, ...]) -> None:
        if len(out) >= limit:
            return
        if set(state.graph.vertices) == dset and not pending:
            out.append((state.expr, seq))
            return
        actions, fallback = _valid_actions(state, dset, a_map, anstar, pending)
        for act in actions + fallback:
            walk(
                _apply_action(state, act, a_map, set(pending)),
                pending - {act[1]},
                seq + (act,),
            )

    walk(start, dset & set(a_map), ())
    return out


# -- hedges -------------------------------------------------------------------------


@dataclass(frozen=True)
class HedgeWitness:
    """Nested structure certifying non-identifiability: a bidirected-connected
    outer set reaching into the failed district from an inner set it strictly
    contains, staying inside the ancestral set of the outcomes."""

    inner: tuple[int, ...]
    outer: tuple[int, ...]
    district: tuple[int, ...]
    ancestral_set: tuple[int, ...]
    graph: Admg

    def check(self) -> tuple[str, ...]:
        """Structural validity; empty means the witness is sound."""
        out = []
        f, fp = set(self.inner), set(self.outer)
        if not f or not f < fp:
            out.append("inner set must be a nonempty proper subset of the outer set")
        extra = fp - f
        if not extra <= set(self.ancestral_set):
            out.append("outer extension leaves the ancestral set of the outcomes")
        sub = self.graph.induced_subgraph(sorted(fp & set(self.graph.vertices)))
        if fp and sub.district(min(fp)) != tuple(sorted(fp)):
            out.append("outer set is not bidirected-connected")
        if not any(set(self.graph.children(v)) & extra for v in f):
            out.append("outer extension contains no child of the inner set")
        return tuple(out)

    def describe(self) -> str:
        g = self.graph
        names = lambda vs: "{" + ", ".join(g.name(v) for v in vs) + "}"
        return (
            f"hedge: inner {names(self.inner)} inside outer {names(self.outer)} "
            f"for district {names(self.district)} within the ancestral set "
            f"{names(self.ancestral_set)}"
        )


def _bidirected_connected(g: Admg, vs: tuple[int, ...]) -> bool:
    sub = g.induced_subgraph(vs)
    return sub.district(vs[0]) == tuple(sorted(vs))


def _build_hedge(
    g: Admg,
    state: SplitState,
    district: tuple[int, ...],
    a_map: dict[int, Value],
    ystar: tuple[int, ...],
    pending: set[int],
) -> HedgeWitness:
    cur = state.graph
    dset = set(district)
    rest = sorted(set(cur.vertices) - dset)
    order = (
        [v for v in rest if v in a_map]
        + sorted(pending)
        + [v for v in rest if v not in a_map]
    )
    for ai in order:
        targets = set(cur.children(ai)) & dset
        if not targets:
            continue
        # shortest bidirected path from ai to one of its children, staying
        # inside the district
        prev: dict[int, int | None] = {ai: None}
        queue = [ai]
        goal = None
        while queue and goal is None:
            u = queue.pop(0)
            for s in sorted(cur.siblings(u)):
                if s in prev or s not in dset:
                    continue
                prev[s] = u
                if s in targets:
                    goal = s
                    break
                queue.append(s)
        if goal is not None:
            path = []
            v: int | None = goal
            while v is not None:
                path.append(v)
                v = prev[v]
            return HedgeWitness(
                (ai,), tuple(sorted(path)), district, ystar, g
            )
    # rare shapes: search outward over district subsets
    if len(district) <= 16:
        for r in range(1, len(district) + 1):
            for ai in order:
                targets = set(cur.children(ai)) & dset
                if not targets:
                    continue
                for sub in combinations(district, r):
                    if not set(sub) & targets:
                        continue
                    cand = tuple(sorted(set(sub) | {ai}))
                    if _bidirected_connected(cur, cand):
                        return HedgeWitness((ai,), cand, district, ystar, g)
    stuck = order[0] if order else min(district)
    return HedgeWitness(
        (stuck,), tuple(sorted(dset | {stuck})), district, ystar, g
    )


# -- marginal identification -----------------------------------------------------------


@dataclass(frozen=True)
class DistrictTerm:
    """One factor of an identified marginal: the district, its strict parents
    (context variables beyond the treatments), and the reduced expression."""

    district: tuple[int, ...]
    strict_parents: tuple[int, ...]
    target: str
    estimand: Expr
    fallback_used: bool = False


@dataclass(frozen=True)
class ConditionalReduction:
    """How a conditional query was rewritten: ``moved`` became interventions,
    ``dropped`` treated coordinates were discarded as irrelevant, ``kept``
    remain as the restriction after the ratio."""

    moved: tuple[int, ...]
    kept: tuple[int, ...]
    dropped: tuple[int, ...]


@dataclass(frozen=True)
class IdentifyResult:
    identified: bool
    query: CounterfactualQuery
    graph: Admg
    estimand: Expr | None
    districts: tuple[DistrictTerm, ...] = ()
    ancestral_set: tuple[int, ...] = ()
    witness: HedgeWitness | None = None
    conditional: ConditionalReduction | None = None
    notes: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.identified

    def render_estimand(self, fmt: str = "text") -> str:
        if self.estimand is None:
            raise IdentifyError("no estimand: the query is not identified")
        return render(self.estimand, [d.name for d in self.graph.decls], fmt)

    def describe(self) -> str:
        head = query_text(self.graph, self.query)
        if not self.identified:
            assert self.witness is not None
            return f"{head}: NOT IDENTIFIED; {self.witness.describe()}"
        return f"{head} = {self.render_estimand()}"


def _value_token(g: Admg, v: int, val: Value) -> str:
    if isinstance(val, Sym):
        return val.name
    return f"{value_symbol(g.name(v))}={val.state}"


def _prepare(g: Admg, query: CounterfactualQuery):
    if g.hidden:
        g = latent_projection(g)
    vset = set(g.vertices)
    for v in (
        list(query.outcomes)
        + [x for x, _ in query.interventions]
        + [x for x, _ in query.conditioning]
    ):
        if v not in vset:
            raise IdentifyError(f"vertex id {v} not in graph")
    return g


def identify_marginal(
    g: Admg, query: CounterfactualQuery, chooser: Chooser | None = None
) -> IdentifyResult:
    """Identify p(outcomes(interventions)) or produce a hedge witness."""
    g = _prepare(g, query)
    if query.conditioning:
        raise IdentifyError("conditional queries go through identify_conditional")
    a_map = dict(query.interventions)
    syms = query_symbols(g, query)
    gq = Admg(
        g.decls,
        [(t, h) for t, h in g.directed if t not in a_map],
        g.bidirected,
        vertices=g.vertices,
    )
    ystar = gq.ancestors(query.outcomes)
    sub = g.induced_subgraph(ystar)
    terms: list[DistrictTerm] = []
    notes: list[str] = []
    for district in sub.districts():
        anstar = set(gq.ancestors(district))
        try:
            expr, used_fallback = _district_term(
                g, a_map, syms, district, anstar, chooser
            )
        except _Stuck as s:
            witness = _build_hedge(g, s.state, district, a_map, ystar, s.pending)
            return IdentifyResult(
                False, query, g, None, (), ystar, witness=witness
            )
        pas = tuple(
            sorted(
                set().union(*(sub.parents(d) for d in district))
                - set(district)
                - set(a_map)
            )
        )
        toks = [_value_token(g, v, a_map[v]) for v in sorted(a_map)]
        toks += [syms[v].name for v in pas]
        names = ", ".join(g.name(d) for d in district)
        target = f"p({names}({', '.join(toks)}))" if toks else f"p({names})"
        if used_fallback:
            notes.append(
                f"district {{{names}}} needed a split at a vertex whose "
                f"context value cannot matter"
            )
        terms.append(DistrictTerm(district, pas, target, expr, used_fallback))
    total: Expr = (
        Product(tuple(t.estimand for t in terms)) if len(terms) > 1 else terms[0].estimand
    )
    latent_coords = tuple(
        syms[v] for v in ystar if v not in set(query.outcomes)
    )
    if latent_coords:
        total = MarginalSum(latent_coords, total)
    total = simplify(total)
    expected = {syms[v] for v in query.outcomes}
    expected |= {v for _, v in query.interventions if isinstance(v, Sym)}
    leftovers = sorted(free_syms(total) - expected, key=lambda s: (s.var, s.name))
    if leftovers:
        pins = tuple((s, Lit(g.decl(s.var).states[0])) for s in leftovers)
        total = simplify(FixEval(pins, total))
        for s in leftovers:
            notes.append(
                f"context value {s.name} for {g.name(s.var)} is irrelevant; "
                f"pinned to state {g.decl(s.var).states[0]!r}"
            )
    return IdentifyResult(
        True, query, g, total, tuple(terms), ystar, notes=tuple(notes)
    )


# -- conditional identification ---------------------------------------------------------


def _movable(
    g: Admg,
    a_map: dict[int, Value],
    moved: set[int],
    z: int,
    zset: set[int],
    outcomes: tuple[int, ...],
) -> bool:
    """Exchange move: conditioning on z is the same as intervening on z when
    z is separated from the outcomes given the rest of the conditioning, in
    the graph where z is also treated."""
    treated = sorted(set(a_map) | moved | {z})
    sw = build_swig(g, treated)
    given = [sw.random_node(w) for w in sorted(zset - moved - {z})]
    return bool(
        swig_separated(
            sw,
            [sw.random_node(z)],
            [sw.random_node(y) for y in outcomes],
            given,
        )
    )


def _fixed_point_moves(
    g: Admg,
    a_map: dict[int, Value],
    zset: set[int],
    outcomes: tuple[int, ...],
    order: int,
) -> set[int]:
    moved: set[int] = set()
    changed = True
    while changed:
        changed = False
        for z in sorted(zset - moved - set(a_map), reverse=order < 0):
            if _movable(g, a_map, moved, z, zset, outcomes):
                moved.add(z)
                changed = True
    return moved


def _droppable(
    g: Admg,
    treated: tuple[int, ...],
    drop: set[int],
    zset: set[int],
    moved: set[int],
    outcomes: tuple[int, ...],
) -> bool:
    sw = build_swig(g, treated)
    given = [sw.random_node(w) for w in sorted(zset - moved - drop)]
    return bool(
        swig_separated(
            sw,
            [sw.random_node(a) for a in sorted(drop)],
            [sw.random_node(y) for y in outcomes],
            given,
        )
    )


def identify_conditional(
    g: Admg, query: CounterfactualQuery, chooser: Chooser | None = None
) -> IdentifyResult:
    """Identify p(outcomes(a) | conditioning(a)) as a restricted ratio of
    identified marginals."""
    g = _prepare(g, query)
    if not query.conditioning:
        raise IdentifyError("no conditioning variables; use identify_marginal")
    a_map = dict(query.interventions)
    z_map = dict(query.conditioning)
    zset = set(z_map)
    notes: list[str] = []

    moved = _fixed_point_moves(g, a_map, zset, query.outcomes, +1)
    if moved != _fixed_point_moves(g, a_map, zset, query.outcomes, -1):
        raise IdentifyError(
            "the conditioning reduction is order-dependent on this graph; "
            "refusing to pick an order silently"
        )

    treated = tuple(sorted(set(a_map) | moved))
    candidates = sorted(zset & set(a_map))

    def greedy_drop(order: int) -> set[int]:
        drop: set[int] = set()
        changed = True
        while changed:
            changed = False
            for c in sorted(set(candidates) - drop, reverse=order < 0):
                if _droppable(g, treated, drop | {c}, zset, moved, query.outcomes):
                    drop.add(c)
                    changed = True
        return drop

    dropped = greedy_drop(+1)
    alt = greedy_drop(-1)
    ambiguous = dropped != alt

    def marginal_for(drop: set[int]) -> tuple[IdentifyResult, CounterfactualQuery]:
        outs = tuple(sorted(set(query.outcomes) | (zset - moved - drop)))
        ivs = dict(a_map)
        ivs.update({z: z_map[z] for z in moved})
        nq = CounterfactualQuery(outs, tuple(sorted(ivs.items())))
        return identify_marginal(g, nq, chooser), nq

    res, nq = marginal_for(dropped)
    if ambiguous:
        notes.append(
            "two maximal sets of droppable treated conditioning variables "
            "exist; reductions differ"
        )
        if not res.identified:
            res2, nq2 = marginal_for(alt)
            if res2.identified:
                dropped, res, nq = alt, res2, nq2
                notes.append("using the alternative reduction, which identifies")

    reduction = ConditionalReduction(
        tuple(sorted(moved)),
        tuple(sorted(zset - moved - dropped)),
        tuple(sorted(dropped)),
    )
    if not res.identified:
        return replace(
            res, query=query, conditional=reduction, notes=tuple(notes)
        )

    syms = query_symbols(g, nq)
    num = res.estimand
    assert num is not None
    taken = set(all_syms(num)) | {
        v for v in list(a_map.values()) + list(z_map.values()) if isinstance(v, Sym)
    }
    bar: list[tuple[Sym, Value]] = []
    ren: dict[Sym, Sym] = {}
    for w in reduction.kept:
        s_new = fresh_sym(syms[w], taken)
        taken.add(s_new)
        ren[syms[w]] = s_new
        bar.append((s_new, z_map[w]))
    num_r = substitute(num, ren) if ren else num
    den = MarginalSum(tuple(syms[y] for y in query.outcomes), num_r)
    expr: Expr = Ratio(num_r, den)
    if bar:
        # left unsimplified so the restriction stays visible
        expr = Substitute(tuple(bar), expr)
    else:
        expr = simplify(expr)
    return IdentifyResult(
        True,
        query,
        g,
        expr,
        res.districts,
        res.ancestral_set,
        conditional=reduction,
        notes=tuple(notes) + res.notes,
    )


def identify(
    g: Admg, query: CounterfactualQuery, chooser: Chooser | None = None
) -> IdentifyResult:
    if query.conditioning:
        return identify_conditional(g, query, chooser)
    return identify_marginal(g, query, chooser)


# -- closed form for hidden-free graphs ----------------------------------------------


def g_formula(g: Admg, treatments) -> Expr:
    """Factorization of p(V(a) = v) when nothing is hidden: one conditional
    per vertex, treated parents evaluated at their intervention values."""
    if g.hidden or g.bidirected:
        raise IdentifyError(
            "the plain factorization needs a graph with no hidden structure"
        )
    query = make_query(g, outcomes=g.vertices, treatments=treatments)
    a_map = dict(query.interventions)
    syms = query_symbols(g, query)
    factors = []
    for v in g.vertices:
        given = tuple(
            (p, a_map[p] if p in a_map else syms[p]) for p in g.parents(v)
        )
        factors.append(ProbTerm(((v, syms[v]),), given))
    return factors[0] if len(factors) == 1 else Product(tuple(factors))
