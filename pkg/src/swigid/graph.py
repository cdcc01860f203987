"""Acyclic directed mixed graphs (ADMGs) with hidden-variable support.

Vertices carry stable integer ids assigned in declaration order.  Every
set-valued result is returned sorted by id.  Ancestors, descendants and
districts are reflexive (contain the vertex itself); the Markov blanket of v
is ``(dis(v) | pa(dis(v))) - {v}``, which reduces to the parent set on a DAG.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .config import SUBSET_ENUM_GUARD


@dataclass(frozen=True)
class VariableDecl:
    """A declared variable: name, ordered state labels, hidden flag."""

    name: str
    states: tuple[str, ...]
    hidden: bool = False

    @property
    def k(self) -> int:
        return len(self.states)


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _binary_states() -> tuple[str, ...]:
    return ("0", "1")


class GraphError(ValueError):
    """Raised for malformed graph structures or graph-file text."""


class Admg:
    """An acyclic directed mixed graph over a fixed declaration registry.

    ``decls`` is the full declaration list (ids are positions in it);
    ``vertices`` is the active subset, so induced subgraphs and fixing keep
    the original ids.  Directed edges are (tail, head) pairs, bidirected
    edges are stored as (min_id, max_id).
    """

    __slots__ = ("decls", "vertices", "directed", "bidirected", "_vset",
                 "_pa", "_ch", "_sib", "_topo")

    def __init__(
        self,
        decls: Sequence[VariableDecl],
        directed: Iterable[tuple[int, int]],
        bidirected: Iterable[tuple[int, int]] = (),
        vertices: Sequence[int] | None = None,
    ):
        self.decls = tuple(decls)
        if vertices is None:
            vertices = range(len(self.decls))
        self.vertices = tuple(sorted(vertices))
        self._vset = frozenset(self.vertices)
        for v in self.vertices:
            if not 0 <= v < len(self.decls):
                raise GraphError(f"vertex id {v} out of range")
        dir_edges = set()
        for t, h in directed:
            if t == h:
                raise GraphError(f"self-loop on {self.name(t)}")
            if t not in self._vset or h not in self._vset:
                raise GraphError("directed edge endpoint not in vertex set")
            dir_edges.add((t, h))
        bi_edges = set()
        for a, b in bidirected:
            if a == b:
                raise GraphError(f"bidirected self-loop on {self.name(a)}")
            if a not in self._vset or b not in self._vset:
                raise GraphError("bidirected edge endpoint not in vertex set")
            bi_edges.add((min(a, b), max(a, b)))
        self.directed = frozenset(dir_edges)
        self.bidirected = frozenset(bi_edges)

        self._pa: dict[int, tuple[int, ...]] = {v: () for v in self.vertices}
        self._ch: dict[int, tuple[int, ...]] = {v: () for v in self.vertices}
        self._sib: dict[int, tuple[int, ...]] = {v: () for v in self.vertices}
        pa: dict[int, list[int]] = {v: [] for v in self.vertices}
        ch: dict[int, list[int]] = {v: [] for v in self.vertices}
        sib: dict[int, list[int]] = {v: [] for v in self.vertices}
        for t, h in self.directed:
            pa[h].append(t)
            ch[t].append(h)
        for a, b in self.bidirected:
            sib[a].append(b)
            sib[b].append(a)
        for v in self.vertices:
            self._pa[v] = tuple(sorted(pa[v]))
            self._ch[v] = tuple(sorted(ch[v]))
            self._sib[v] = tuple(sorted(sib[v]))
        self._topo = self._toposort()

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_elements(
        cls,
        names: Sequence[str],
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
        hidden: Iterable[str] = (),
        states: dict[str, int] | None = None,
    ) -> "Admg":
        """Build a graph from variable names; handy in tests and fixtures."""
        hidden_set = set(hidden)
        states = states or {}
        decls = []
        for n in names:
            k = states.get(n, 2)
            labels = tuple(str(i) for i in range(k))
            decls.append(VariableDecl(n, labels, hidden=n in hidden_set))
        idx = {n: i for i, n in enumerate(names)}
        try:
            d = [(idx[t], idx[h]) for t, h in directed]
            b = [(idx[a], idx[x]) for a, x in bidirected]
        except KeyError as e:
            raise GraphError(f"edge references undeclared variable {e.args[0]!r}")
        return cls(decls, d, b)

    # -- basic queries ---------------------------------------------------------

    def name(self, v: int) -> str:
        return self.decls[v].name

    def decl(self, v: int) -> VariableDecl:
        return self.decls[v]

    def id_of(self, name: str) -> int:
        for v in self.vertices:
            if self.decls[v].name == name:
                return v
        raise GraphError(f"no variable named {name!r}")

    def ids_of(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.id_of(n) for n in names)

    @property
    def observed(self) -> tuple[int, ...]:
        return tuple(v for v in self.vertices if not self.decls[v].hidden)

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(v for v in self.vertices if self.decls[v].hidden)

    def parents(self, v: int) -> tuple[int, ...]:
        return self._pa[v]

    def children(self, v: int) -> tuple[int, ...]:
        return self._ch[v]

    def siblings(self, v: int) -> tuple[int, ...]:
        """Bidirected neighbors."""
        return self._sib[v]

    def _toposort(self) -> tuple[int, ...]:
        indeg = {v: len(self._pa[v]) for v in self.vertices}
        ready = sorted(v for v in self.vertices if indeg[v] == 0)
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            changed = False
            for c in self._ch[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    changed = True
            if changed:
                ready.sort()
        if len(order) != len(self.vertices):
            raise GraphError("directed part of the graph has a cycle")
        return tuple(order)

    def topological_order(self) -> tuple[int, ...]:
        """Deterministic topological order (lowest id first among ready)."""
        return self._topo

    # -- vertex relations ------------------------------------------------------

    def ancestors(self, vs: int | Iterable[int]) -> tuple[int, ...]:
        """Reflexive ancestor set, sorted."""
        seed = [vs] if isinstance(vs, int) else list(vs)
        seen = set(seed)
        stack = list(seed)
        while stack:
            v = stack.pop()
            for p in self._pa[v]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return tuple(sorted(seen))

    def descendants(self, vs: int | Iterable[int]) -> tuple[int, ...]:
        """Reflexive descendant set, sorted."""
        seed = [vs] if isinstance(vs, int) else list(vs)
        seen = set(seed)
        stack = list(seed)
        while stack:
            v = stack.pop()
            for c in self._ch[v]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return tuple(sorted(seen))

    def district(self, v: int) -> tuple[int, ...]:
        """Bidirected-connected component of v (reflexive), sorted."""
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for s in self._sib[u]:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return tuple(sorted(seen))

    def districts(self) -> tuple[tuple[int, ...], ...]:
        """Partition into districts, ordered by smallest member id."""
        seen: set[int] = set()
        out = []
        for v in self.vertices:
            if v not in seen:
                d = self.district(v)
                seen.update(d)
                out.append(d)
        return tuple(out)

    def markov_blanket(self, v: int) -> tuple[int, ...]:
        """District mates plus parents of district members, excluding v.

        This is deliberately non-minimal; on a DAG it equals the parent set.
        """
        dis = self.district(v)
        mb = set(dis)
        for u in dis:
            mb.update(self._pa[u])
        mb.discard(v)
        return tuple(sorted(mb))

    # -- subgraphs -------------------------------------------------------------

    def induced_subgraph(self, keep: Iterable[int]) -> "Admg":
        ks = frozenset(keep)
        if not ks <= self._vset:
            raise GraphError("induced_subgraph: vertices outside the graph")
        return Admg(
            self.decls,
            [(t, h) for t, h in self.directed if t in ks and h in ks],
            [(a, b) for a, b in self.bidirected if a in ks and b in ks],
            vertices=sorted(ks),
        )

    def ancestral_closure(self, vs: Iterable[int]) -> tuple[int, ...]:
        """Least ancestral superset of vs (= the reflexive ancestor set)."""
        return self.ancestors(vs)

    # -- fixing / reachability --------------------------------------------------

    def is_fixable(self, v: int) -> tuple[bool, tuple[int, ...]]:
        """A vertex is fixable when no *other* vertex is both a descendant
        and a district mate.  Returns (fixable, witnesses)."""
        bad = tuple(sorted((set(self.descendants(v)) & set(self.district(v))) - {v}))
        return (not bad, bad)

    def fix(self, v: int) -> "Admg":
        """Remove v and all edges incident to it."""
        ok, wit = self.is_fixable(v)
        if not ok:
            names = ", ".join(self.name(w) for w in wit)
            raise GraphError(f"{self.name(v)} is not fixable (witness: {names})")
        return self.induced_subgraph(self._vset - {v})

    def reachable_sets(self, guard: int = SUBSET_ENUM_GUARD) -> tuple["FixingSchedule", ...]:
        """All reachable vertex sets with one (lexicographic-first) schedule each.

        Fixing is confluent, so any valid schedule to a given set works; we
        record the first found by lowest-id-first search.
        """
        if len(self.vertices) > guard:
            raise GraphError(
                f"reachable_sets on {len(self.vertices)} vertices exceeds guard {guard}"
            )
        found: dict[frozenset[int], tuple[int, ...]] = {self._vset: ()}
        frontier = [(self, ())]
        while frontier:
            g, sched = frontier.pop(0)
            for v in g.vertices:
                ok, _ = g.is_fixable(v)
                if not ok:
                    continue
                child = g.induced_subgraph(g._vset - {v})
                key = child._vset
                if key not in found:
                    found[key] = sched + (v,)
                    frontier.append((child, sched + (v,)))
        out = []
        for k, order in found.items():
            graphs = []
            g = self
            for v in order:
                g = g.induced_subgraph(g._vset - {v})
                graphs.append(g)
            out.append(
                FixingSchedule(
                    vertices=tuple(sorted(k)), fixed=order, graphs=tuple(graphs)
                )
            )
        out.sort(key=lambda s: (len(s.vertices), s.vertices))
        return tuple(out)

    def intrinsic_sets(self, guard: int = SUBSET_ENUM_GUARD) -> tuple[tuple[int, ...], ...]:
        """Reachable sets that are bidirected-connected in their induced subgraph."""
        out = []
        for sched in self.reachable_sets(guard=guard):
            vs = sched.vertices
            if not vs:
                continue
            sub = self.induced_subgraph(vs)
            if sub.district(vs[0]) == vs:
                out.append(vs)
        return tuple(sorted(out, key=lambda s: (len(s), s)))

    # -- misc --------------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Admg)
            and self.decls == other.decls
            and self.vertices == other.vertices
            and self.directed == other.directed
            and self.bidirected == other.bidirected
        )

    def __hash__(self) -> int:
        return hash((self.decls, self.vertices, self.directed, self.bidirected))

    def __repr__(self) -> str:
        es = [f"{self.name(t)}->{self.name(h)}" for t, h in sorted(self.directed)]
        es += [f"{self.name(a)}<->{self.name(b)}" for a, b in sorted(self.bidirected)]
        return f"Admg({', '.join(self.name(v) for v in self.vertices)}; {', '.join(es)})"


@dataclass(frozen=True)
class FixingSchedule:
    """A reachable vertex set, one valid fixing sequence reaching it, and the
    intermediate graph after each step (``graphs[i]`` follows ``fixed[i]``)."""

    vertices: tuple[int, ...]
    fixed: tuple[int, ...]
    graphs: tuple[Admg, ...] = ()


@dataclass(frozen=True)
class VertexRelations:
    """All per-vertex relation maps for a graph, computed in one pass."""

    parents: dict[int, tuple[int, ...]]
    children: dict[int, tuple[int, ...]]
    ancestors: dict[int, tuple[int, ...]]
    descendants: dict[int, tuple[int, ...]]
    district: dict[int, tuple[int, ...]]
    markov_blanket: dict[int, tuple[int, ...]]
    districts: tuple[tuple[int, ...], ...]


def relations(g: Admg) -> VertexRelations:
    return VertexRelations(
        parents={v: g.parents(v) for v in g.vertices},
        children={v: g.children(v) for v in g.vertices},
        ancestors={v: g.ancestors(v) for v in g.vertices},
        descendants={v: g.descendants(v) for v in g.vertices},
        district={v: g.district(v) for v in g.vertices},
        markov_blanket={v: g.markov_blanket(v) for v in g.vertices},
        districts=g.districts(),
    )


# ---------------------------------------------------------------------------
# Latent projection
# ---------------------------------------------------------------------------

ARROW = 1
TAIL = 0


def project_mixed_edges(
    keep: Sequence,
    drop: Sequence,
    dir_edges: Iterable[tuple],
    bi_edges: Iterable[tuple],
) -> tuple[set[tuple], set[tuple]]:
    """Project directed/bidirected edges onto ``keep``, marginalizing ``drop``.

    Works over arbitrary hashable node objects so SWIGs reuse it.  Projected
    edges: x -> y iff a directed path x -> ... -> y with all intermediates in
    ``drop``; x <-> y iff a path with arrowheads at both endpoints whose
    intermediates are all in ``drop`` and none is a collider.
    """
    dropset = set(drop)
    keepset = set(keep)
    ch: dict = {}
    pa: dict = {}
    sib: dict = {}
    for t, h in dir_edges:
        ch.setdefault(t, []).append(h)
        pa.setdefault(h, []).append(t)
    for a, b in bi_edges:
        sib.setdefault(a, []).append(b)
        sib.setdefault(b, []).append(a)

    out_dir: set[tuple] = set()
    out_bi: set[tuple] = set()

    for x in keep:
        # directed: forward search through dropped vertices only
        seen = set()
        stack = list(ch.get(x, []))
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            if u in keepset:
                out_dir.add((x, u))
            elif u in dropset:
                stack.extend(ch.get(u, []))

        # bidirected: walk with the incoming mark at each vertex; a dropped
        # intermediate may be left only through a tail (no colliders allowed).
        # States are (vertex, arrived_by_arrowhead).
        start = [(p, False) for p in pa.get(x, [])] + [(s, True) for s in sib.get(x, [])]
        seenb = set()
        stackb = list(start)
        while stackb:
            u, head_in = stackb.pop()
            if (u, head_in) in seenb:
                continue
            seenb.add((u, head_in))
            if u in keepset:
                # need the final edge to point into u
                if head_in and u != x:
                    out_bi.add((x, u))
                continue
            if u not in dropset:
                continue
            # leave u: tail-marked exits are u's in-edges traversed backwards
            # (towards parents) -- those have an arrowhead at the next vertex?
            # no: traversing u <- p lands on p via p's tail.  Exits:
            #   u -> c : tail at u (always fine), arrives at c with arrowhead
            #   u <- p : arrowhead at u, so only if we arrived by tail; arrives
            #            at p via p's tail mark
            #   u <-> s: arrowhead at u, only if arrived by tail; arrowhead at s
            for c in ch.get(u, []):
                stackb.append((c, True))
            if not head_in:
                for p in pa.get(u, []):
                    stackb.append((p, False))
                for s in sib.get(u, []):
                    stackb.append((s, True))
    return out_dir, out_bi


def latent_projection(g: Admg, keep: Iterable[int] | None = None) -> Admg:
    """Project onto the observed vertices (or an explicit subset)."""
    if keep is None:
        keep = g.observed
    keep = tuple(sorted(keep))
    drop = tuple(v for v in g.vertices if v not in set(keep))
    d, b = project_mixed_edges(keep, drop, g.directed, g.bidirected)
    return Admg(g.decls, d, {(min(a, x), max(a, x)) for a, x in b}, vertices=keep)


# ---------------------------------------------------------------------------
# Graph file grammar
# ---------------------------------------------------------------------------
#
#   # comment
#   var A M Y      (binary by default; several names per line)
#   var R:3
#   hidden H U
#   A -> M
#   A <-> Y        (only when no hidden declarations)


def parse_graph(text: str) -> Admg:
    decls: list[VariableDecl] = []
    names: dict[str, int] = {}
    directed: list[tuple[int, int]] = []
    bidirected: list[tuple[int, int]] = []
    bi_lines: list[int] = []
    any_hidden = False

    def declare(tok: str, hidden: bool, lineno: int) -> None:
        nonlocal any_hidden
        name, _, kpart = tok.partition(":")
        if not _NAME_RE.match(name):
            raise GraphError(f"line {lineno}: bad variable name {name!r}")
        if name in names:
            raise GraphError(f"line {lineno}: duplicate declaration of {name!r}")
        if kpart:
            try:
                k = int(kpart)
            except ValueError:
                raise GraphError(f"line {lineno}: bad state count {kpart!r}")
            if k < 2:
                raise GraphError(f"line {lineno}: state count must be >= 2")
            states = tuple(str(i) for i in range(k))
        else:
            states = _binary_states()
        names[name] = len(decls)
        decls.append(VariableDecl(name, states, hidden=hidden))
        any_hidden = any_hidden or hidden

    def vid(tok: str, lineno: int) -> int:
        if tok not in names:
            raise GraphError(f"line {lineno}: undeclared variable {tok!r}")
        return names[tok]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] in ("var", "hidden") and len(parts) >= 2:
            for tok in parts[1:]:
                declare(tok, hidden=parts[0] == "hidden", lineno=lineno)
        elif len(parts) == 3 and parts[1] == "->":
            directed.append((vid(parts[0], lineno), vid(parts[2], lineno)))
        elif len(parts) == 3 and parts[1] == "<->":
            a, b = vid(parts[0], lineno), vid(parts[2], lineno)
            bidirected.append((min(a, b), max(a, b)))
            bi_lines.append(lineno)
        else:
            raise GraphError(f"line {lineno}: cannot parse {raw.strip()!r}")

    if any_hidden and bidirected:
        raise GraphError(
            f"line {bi_lines[0]}: bidirected edges are not allowed together "
            "with hidden variables; model the confounder explicitly"
        )
    return Admg(decls, directed, bidirected)


def serialize_graph(g: Admg) -> str:
    """Canonical text form; parse_graph(serialize_graph(g)) reproduces g."""
    lines = []
    for v in g.vertices:
        d = g.decls[v]
        kw = "hidden" if d.hidden else "var"
        suffix = "" if d.k == 2 else f":{d.k}"
        lines.append(f"{kw} {d.name}{suffix}")
    for t, h in sorted(g.directed):
        lines.append(f"{g.name(t)} -> {g.name(h)}")
    for a, b in sorted(g.bidirected):
        lines.append(f"{g.name(a)} <-> {g.name(b)}")
    return "\n".join(lines) + "\n"
