"""d/m-separation on DAGs, ADMGs and SWIGs, with witness paths.

One mark-based engine drives everything.  A path vertex is a collider exactly
when both incident edge marks at it are arrowheads (a bidirected edge carries
arrowheads at both ends).  Colliders are open when the vertex is an ancestor
of the conditioning set; non-colliders are open when outside it.

Witnessing paths are canonical: shortest, breaking ties lexicographically by
the node sequence, found by Dijkstra over (vertex, incoming-mark) states.

SWIG queries follow the single-world reading: the left side must be random
vertices, the conditioning set must be random (conditioning on a fixed value
is meaningless -- it is already held fixed), the right side may mention fixed
halves, and no path may pass *through* a fixed half.  A separated query whose
right side contains fixed halves licenses a nondependence claim: the left
conditional law does not vary in those intervened values.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

from .graph import Admg, GraphError
from .swig import Swig, SwigNode

TAIL = 0
ARROW = 1

Node = Hashable


@dataclass(frozen=True)
class NondependenceClaim:
    """Reading of a separated SWIG query with fixed halves on the right:
    the conditional law of ``left`` given ``given`` is the same function of
    its arguments for every value of ``varied`` (the fixed halves)."""

    left: tuple[str, ...]
    given: tuple[str, ...]
    varied: tuple[str, ...]
    text: str


@dataclass(frozen=True)
class SeparationVerdict:
    """Outcome of one separation query.

    ``witness_path`` is an open path (node tuple) when connected, else None.
    A separated SWIG query with fixed halves on the right also carries the
    nondependence claim it licenses.
    """

    separated: bool
    witness_path: tuple | None = None
    nondependence: NondependenceClaim | None = None

    def __bool__(self) -> bool:
        return self.separated


class _MixedView:
    """Adjacency with end-marks over arbitrary hashable nodes."""

    def __init__(
        self,
        nodes: Iterable[Node],
        directed: Iterable[tuple[Node, Node]],
        bidirected: Iterable[tuple[Node, Node]],
        sort_key: Callable[[Node], object],
    ):
        self.nodes = list(nodes)
        self.sort_key = sort_key
        self.adj: dict[Node, list[tuple[Node, int, int]]] = {n: [] for n in self.nodes}
        self.pa: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        for t, h in directed:
            # (neighbor, mark at this end, mark at neighbor's end)
            self.adj[t].append((h, TAIL, ARROW))
            self.adj[h].append((t, ARROW, TAIL))
            self.pa[h].append(t)
        for a, b in bidirected:
            self.adj[a].append((b, ARROW, ARROW))
            self.adj[b].append((a, ARROW, ARROW))

    def ancestors(self, zs: Iterable[Node]) -> set[Node]:
        seen = set(zs)
        stack = list(seen)
        while stack:
            n = stack.pop()
            for p in self.pa[n]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen


def _connecting_path(
    view: _MixedView,
    xs: Sequence[Node],
    ys: Sequence[Node],
    zs: Sequence[Node],
    no_through: frozenset = frozenset(),
) -> tuple | None:
    """Shortest (then lexicographically first) open path from xs to ys given
    zs, or None.  Nodes in ``no_through`` may appear only as endpoints."""
    zset = set(zs)
    yset = set(ys)
    an_z = view.ancestors(zset)

    # state: (node, incoming mark at node); cost: (edges, node-key tuple)
    heap = []
    for x in sorted(xs, key=view.sort_key):
        key = (view.sort_key(x),)
        heapq.heappush(heap, (1, key, x, None, (x,)))
    best: set[tuple[Node, object]] = set()
    while heap:
        n_edges, _key, node, mark_in, path = heapq.heappop(heap)
        if (node, mark_in) in best:
            continue
        best.add((node, mark_in))
        if node in yset and mark_in is not None:
            return path
        if node in no_through and mark_in is not None:
            continue  # reached a barrier node that is not a target endpoint
        for nbr, mark_here, mark_there in view.adj[node]:
            if mark_in is not None:
                collider = mark_in == ARROW and mark_here == ARROW
                if collider:
                    if node not in an_z:
                        continue
                else:
                    if node in zset:
                        continue
            elif node in zset:
                # a conditioned start vertex can still head out through a
                # collider at itself?  no: endpoints have one incident mark,
                # so the start is never a collider -- but a conditioned
                # non-collider is blocked
                continue
            if nbr in path:
                continue  # keep it a path, not a walk
            npath = path + (nbr,)
            nkey = tuple(view.sort_key(p) for p in npath)
            heapq.heappush(heap, (n_edges + 1, nkey, nbr, mark_there, npath))
    return None


def _check_disjoint(*groups: Sequence) -> None:
    seen: set = set()
    for g in groups:
        for n in g:
            if n in seen:
                raise GraphError("separation query sides must be disjoint")
            seen.add(n)


# ---------------------------------------------------------------------------
# DAG / ADMG entry points (vertex-id based)
# ---------------------------------------------------------------------------


def _admg_view(g: Admg) -> _MixedView:
    return _MixedView(g.vertices, g.directed, g.bidirected, sort_key=lambda v: v)


def m_separated(
    g: Admg,
    xs: Iterable[int],
    ys: Iterable[int],
    zs: Iterable[int] = (),
) -> SeparationVerdict:
    """m-separation on an ADMG.  Empty sides are vacuously separated."""
    xs, ys, zs = tuple(xs), tuple(ys), tuple(zs)
    vset = set(g.vertices)
    for v in (*xs, *ys, *zs):
        if v not in vset:
            raise GraphError(f"vertex id {v} not in graph")
    _check_disjoint(xs, ys, zs)
    if not xs or not ys:
        return SeparationVerdict(True)
    path = _connecting_path(_admg_view(g), xs, ys, zs)
    return SeparationVerdict(path is None, path)


def d_separated(
    g: Admg,
    xs: Iterable[int],
    ys: Iterable[int],
    zs: Iterable[int] = (),
) -> SeparationVerdict:
    """d-separation; the graph must be a DAG (no bidirected part)."""
    if g.bidirected:
        raise GraphError("d-separation is for DAGs; use m_separated")
    return m_separated(g, xs, ys, zs)


def path_open(
    g: Admg, path: Sequence[int], zs: Iterable[int] = ()
) -> bool:
    """Is this concrete vertex path open given zs?  (Adjacent pairs must be
    joined by an edge; a bidirected edge is preferred for the collider test
    only when no directed edge joins the pair.)"""
    zset = set(zs)
    view = _admg_view(g)
    an_z = view.ancestors(zset)

    def marks(a: int, b: int) -> tuple[int, int]:
        if (a, b) in g.directed:
            return TAIL, ARROW
        if (b, a) in g.directed:
            return ARROW, TAIL
        if (min(a, b), max(a, b)) in g.bidirected:
            return ARROW, ARROW
        raise GraphError(f"{g.name(a)} and {g.name(b)} are not adjacent")

    for i in range(len(path) - 1):
        marks(path[i], path[i + 1])
    for i in range(1, len(path) - 1):
        _, into = marks(path[i - 1], path[i])
        outof, _ = marks(path[i], path[i + 1])
        if into == ARROW and outof == ARROW:
            if path[i] not in an_z:
                return False
        elif path[i] in zset:
            return False
    return True


# ---------------------------------------------------------------------------
# SWIG entry point
# ---------------------------------------------------------------------------


def swig_separated(
    sw: Swig,
    left: Iterable[SwigNode],
    right: Iterable[SwigNode],
    given: Iterable[SwigNode] = (),
) -> SeparationVerdict:
    """Separation over Markov-relevant SWIG paths.

    left: random halves only; given: random halves only (a fixed half cannot
    be conditioned on); right: any halves.  Paths never pass through a fixed
    half, so fixed halves appear only as path endpoints.
    """
    left, right, given = tuple(left), tuple(right), tuple(given)
    nodeset = set(sw.nodes)
    for n in (*left, *right, *given):
        if n not in nodeset:
            raise GraphError(f"node {n} not in this SWIG")
    for n in left:
        if n.fixed:
            raise GraphError("left side of a SWIG query must be random halves")
    for n in given:
        if n.fixed:
            raise GraphError("cannot condition on a fixed half; it is constant")
    _check_disjoint(left, right, given)
    if not left or not right:
        return SeparationVerdict(True)
    view = _MixedView(
        sw.nodes, sw.directed, sw.bidirected, sort_key=lambda n: (n.vertex, n.fixed)
    )
    barrier = frozenset(n for n in sw.nodes if n.fixed)
    path = _connecting_path(view, left, right, given, no_through=barrier)
    claim = None
    if path is None:
        varied = tuple(n for n in right if n.fixed)
        if varied:
            claim = _nondependence(sw, left, varied, given)
    return SeparationVerdict(path is None, path, claim)


def _nondependence(
    sw: Swig,
    left: Sequence[SwigNode],
    varied: Sequence[SwigNode],
    given: Sequence[SwigNode],
) -> NondependenceClaim:
    """The claim licensed by ``left _||_ varied | given``: the conditional law
    of left given ``given`` is one function of its arguments and the remaining
    intervened values, constant in the ``varied`` fixed halves."""
    lt = tuple(sw.node_token(n) for n in sorted(left))
    gt = tuple(sw.node_token(n) for n in sorted(given))
    vt = tuple(sw.node_token(n) for n in sorted(varied))
    lhs = f"p({', '.join(lt)}" + (f" | {', '.join(gt)})" if gt else ")")
    vset = set(varied)
    kept = [sw.value_token(t) for t in sw.treated if SwigNode(t, True) not in vset]
    fargs = [sw.value_token(n.vertex) for n in sorted(left)]
    fargs += [sw.value_token(n.vertex) for n in sorted(given)]
    fargs += kept
    text = f"{lhs} = f({', '.join(fargs)}), free of {', '.join(vt)}"
    return NondependenceClaim(left=lt, given=gt, varied=vt, text=text)
