"""Single-world intervention graphs (SWIGs).

Splitting a graph at a treatment set A produces, for each a in A, a random
half (keeping a's incoming directed and bidirected edges) and a fixed half
(keeping a's outgoing directed edges).  Fixed halves have no incoming edges.
Hidden vertices are never split.  Each random vertex carries a minimal label:
the set of fixed halves that are its ancestors, rendered like ``Y(a,m)``.

Context-specific edge deletions are applied *before* labels are computed, so
an edge absent in the context ``a=0`` shrinks labels in G(a=0, ...).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import Admg, GraphError, project_mixed_edges


@dataclass(frozen=True, order=True)
class SwigNode:
    """One half of a (possibly split) vertex: ``fixed`` marks the half that
    carries the intervened value."""

    vertex: int
    fixed: bool = False


@dataclass(frozen=True)
class ContextRule:
    """Delete a directed edge when the intervention hits given states.

    ``edge`` is a (tail, head) pair of vertex ids in the base graph; ``when``
    lists (treated vertex id, state label) conditions that must all match the
    assignment for the deletion to fire.
    """

    edge: tuple[int, int]
    when: tuple[tuple[int, str], ...]


def value_symbol(name: str) -> str:
    """Lowercase value symbol for a variable name (A -> a, Y1 -> y1)."""
    return name.lower()


@dataclass(frozen=True)
class Swig:
    """A single-world intervention graph over SwigNode vertices."""

    base: Admg
    treated: tuple[int, ...]
    assignment: tuple[tuple[int, str], ...]  # sorted (vertex, state) pairs
    nodes: tuple[SwigNode, ...]
    directed: frozenset[tuple[SwigNode, SwigNode]]
    bidirected: frozenset[tuple[SwigNode, SwigNode]]
    labels: dict[SwigNode, tuple[int, ...]] = field(compare=False)
    context_deleted: tuple[tuple[int, int], ...] = ()

    # -- node lookup -------------------------------------------------------

    def random_node(self, v: int) -> SwigNode:
        n = SwigNode(v, False)
        if n not in set(self.nodes):
            raise GraphError(f"{self.base.name(v)} has no random node here")
        return n

    def fixed_node(self, v: int) -> SwigNode:
        if v not in self.treated:
            raise GraphError(f"{self.base.name(v)} is not intervened on")
        return SwigNode(v, True)

    def assignment_map(self) -> dict[int, str]:
        return dict(self.assignment)

    def is_hidden(self, n: SwigNode) -> bool:
        return self.base.decl(n.vertex).hidden

    # -- structure -----------------------------------------------------------

    def parents(self, n: SwigNode) -> tuple[SwigNode, ...]:
        return tuple(sorted(t for t, h in self.directed if h == n))

    def children(self, n: SwigNode) -> tuple[SwigNode, ...]:
        return tuple(sorted(h for t, h in self.directed if t == n))

    def ancestors(self, ns: Iterable[SwigNode]) -> tuple[SwigNode, ...]:
        seen = set(ns)
        stack = list(seen)
        pa: dict[SwigNode, list[SwigNode]] = {}
        for t, h in self.directed:
            pa.setdefault(h, []).append(t)
        while stack:
            n = stack.pop()
            for p in pa.get(n, []):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return tuple(sorted(seen))

    # -- rendering -------------------------------------------------------------

    def value_token(self, v: int, bound: bool = False) -> str:
        sym = value_symbol(self.base.name(v))
        if bound:
            amap = self.assignment_map()
            if v in amap:
                return f"{sym}={amap[v]}"
        return sym

    def node_token(self, n: SwigNode) -> str:
        if n.fixed:
            return self.value_token(n.vertex)
        name = self.base.name(n.vertex)
        lab = self.labels.get(n, ())
        if not lab:
            return name
        return f"{name}({','.join(self.value_token(t, bound=True) for t in lab)})"

    def describe(self) -> str:
        toks = [self.value_token(t, bound=True) for t in self.treated]
        return f"G({', '.join(toks)})" if toks else "G()"

    def render(self) -> str:
        """Multi-line text form: header, nodes (split pairs joined by |), edges."""
        lines = [self.describe()]
        split = set(self.treated)
        nodeset = set(self.nodes)
        for v in self.base.vertices:
            rn = SwigNode(v, False)
            if rn not in nodeset:
                continue
            tok = self.node_token(rn)
            if v in split:
                tok = f"{tok} | {self.value_token(v, bound=True)}"
            if self.base.decl(v).hidden:
                tok += "  [hidden]"
            lines.append("  " + tok)
        for t, h in sorted(self.directed):
            lines.append(f"  {self.node_token(t)} -> {self.node_token(h)}")
        for a, b in sorted(self.bidirected):
            lines.append(f"  {self.node_token(a)} <-> {self.node_token(b)}")
        return "\n".join(lines)


def _compute_labels(
    nodes: Sequence[SwigNode],
    directed: Iterable[tuple[SwigNode, SwigNode]],
) -> dict[SwigNode, tuple[int, ...]]:
    ch: dict[SwigNode, list[SwigNode]] = {}
    for t, h in directed:
        ch.setdefault(t, []).append(h)
    found: dict[SwigNode, set[int]] = {n: set() for n in nodes}
    for start in nodes:
        if not start.fixed:
            continue
        stack = list(ch.get(start, []))
        seen = set()
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            found[n].add(start.vertex)
            stack.extend(ch.get(n, []))
    return {n: tuple(sorted(s)) for n, s in found.items() if not n.fixed}


def build_swig(
    g: Admg,
    treated: Iterable[int],
    assignment: dict[int, str] | None = None,
    context: Sequence[ContextRule] = (),
) -> Swig:
    """Split ``g`` at ``treated``, optionally under a concrete assignment.

    Context rules whose conditions match the assignment delete their directed
    edge from the base graph before splitting and labelling.
    """
    treated = tuple(sorted(set(treated)))
    tset = set(treated)
    amap = dict(assignment or {})
    for v in treated:
        if v not in set(g.vertices):
            raise GraphError(f"treated vertex id {v} not in graph")
        if g.decl(v).hidden:
            raise GraphError(f"cannot intervene on hidden variable {g.name(v)}")
    for v, s in amap.items():
        if v not in tset:
            raise GraphError(f"assignment for {g.name(v)} which is not treated")
        if s not in g.decl(v).states:
            raise GraphError(f"{s!r} is not a state of {g.name(v)}")

    dir_edges = set(g.directed)
    deleted = []
    for rule in context:
        if rule.edge not in g.directed:
            raise GraphError("context rule names an edge absent from the graph")
        if not rule.when:
            raise GraphError("context rule must cite at least one bound value")
        for v, s in rule.when:
            if s not in g.decl(v).states:
                raise GraphError(f"{s!r} is not a state of {g.name(v)}")
        # a deletion is licensed only when every cited intervention is bound
        # to the matching concrete state
        if all(amap.get(v) == s for v, s in rule.when):
            if rule.edge in dir_edges:
                dir_edges.discard(rule.edge)
                deleted.append(rule.edge)

    nodes: list[SwigNode] = []
    for v in g.vertices:
        nodes.append(SwigNode(v, False))
        if v in tset:
            nodes.append(SwigNode(v, True))

    # outgoing edges leave the fixed half of a split vertex; incoming edges
    # (directed and bidirected) stay with the random half
    def out_half(v: int) -> SwigNode:
        return SwigNode(v, v in tset)

    sdir = {(out_half(t), SwigNode(h, False)) for t, h in dir_edges}
    sbi = set()
    for a, b in g.bidirected:
        x, y = sorted((SwigNode(a, False), SwigNode(b, False)))
        sbi.add((x, y))

    labels = _compute_labels(nodes, sdir)
    return Swig(
        base=g,
        treated=treated,
        assignment=tuple(sorted(amap.items())),
        nodes=tuple(sorted(nodes)),
        directed=frozenset(sdir),
        bidirected=frozenset(sbi),
        labels=labels,
        context_deleted=tuple(sorted(deleted)),
    )


def relabel_all_splits(sw: Swig) -> Swig:
    """Stamp every random node with the full intervention label.

    Minimal labels list only the fixed ancestors; the full labelling writes
    V_i(a) for the whole treatment set a — e.g. C(a) for a root C, and A(a)
    for the natural value of a treated A, which equals A by consistency.
    """
    full = tuple(sw.treated)
    labels = {n: full for n in sw.nodes if not n.fixed}
    return Swig(
        base=sw.base,
        treated=sw.treated,
        assignment=sw.assignment,
        nodes=sw.nodes,
        directed=sw.directed,
        bidirected=sw.bidirected,
        labels=labels,
        context_deleted=sw.context_deleted,
    )


def swig_latent_projection(sw: Swig, keep: Iterable[int] | None = None) -> Swig:
    """Project random vertices out of a SWIG, by default all hidden ones.

    ``keep`` names the random vertices to retain (hidden ones may not be
    kept); fixed halves are always retained, and they never acquire
    bidirected edges because nothing points into them.
    """
    if keep is None:
        keepset = {n for n in sw.nodes if n.fixed or not sw.is_hidden(n)}
    else:
        ids = set(keep)
        for v in ids:
            if sw.base.decl(v).hidden:
                raise GraphError(f"cannot keep hidden variable {sw.base.name(v)}")
        keepset = {n for n in sw.nodes if n.fixed or n.vertex in ids}
    keep_nodes = tuple(n for n in sw.nodes if n in keepset)
    drop = tuple(n for n in sw.nodes if n not in keepset)
    d, b = project_mixed_edges(keep_nodes, drop, sw.directed, sw.bidirected)
    bi = {tuple(sorted(e)) for e in b}
    labels = _compute_labels(keep_nodes, d)
    return Swig(
        base=sw.base,
        treated=sw.treated,
        assignment=sw.assignment,
        nodes=keep_nodes,
        directed=frozenset(d),
        bidirected=frozenset(bi),  # type: ignore[arg-type]
        labels=labels,
        context_deleted=sw.context_deleted,
    )


def parse_context(text: str, g: Admg) -> tuple[ContextRule, ...]:
    """Read context rules, one per line: ``TAIL -> HEAD when VAR=STATE[, ...]``."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(
            r"^(\w+)\s*->\s*(\w+)\s+when\s+(.+)$", line
        )
        if not m:
            raise GraphError(f"context line {lineno}: cannot parse {raw.strip()!r}")
        tail, head, conds = m.group(1), m.group(2), m.group(3)
        when = []
        for part in conds.split(","):
            var, eq, state = part.strip().partition("=")
            if not eq:
                raise GraphError(
                    f"context line {lineno}: condition {part.strip()!r} needs VAR=STATE"
                )
            when.append((g.id_of(var.strip()), state.strip()))
        rules.append(ContextRule((g.id_of(tail), g.id_of(head)), tuple(when)))
    return tuple(rules)
