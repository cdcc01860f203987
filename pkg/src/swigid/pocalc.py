"""Calculus of interventions on potential outcomes.

Three graphical rules rewrite counterfactual conditional distributions; each
premise is a separation query on the relevant intervention graph, so every
application carries its verdict (and a witness path when refused).

* Rule 1 (drop an observation): Y(x) _||_ Z(x) | W(x) in G(x) licenses
  p(Y(x) | Z(x), W(x)) = p(Y(x) | W(x)).
* Rule 2 (exchange intervening and conditioning): Y(x,z) _||_ Z(x,z) | W(x,z)
  in G(x,z) licenses p(Y(x,z) | W(x,z)) = p(Y(x) | W(x), Z(x)=z).
* Rule 3 (drop an intervention): Y(x,z) _||_ z in G(x,z) -- no fixed z node
  is an ancestor of an outcome -- licenses p(Y(x,z)) = p(Y(x)).

Y, Z, W must be pairwise disjoint; X may overlap Z when the bound values
agree.  Conclusions are structured pairs of counterfactual distribution
descriptors plus a rendered equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .graph import Admg, GraphError
from .separation import SeparationVerdict, swig_separated
from .swig import ContextRule, Swig, build_swig, value_symbol


@dataclass(frozen=True)
class CfDist:
    """p(outcomes(treated) | given(treated), pinned(treated)=value): one side
    of a rule conclusion.  ``pinned`` names conditioning variables whose value
    symbol is the intervention symbol from the other side."""

    outcomes: tuple[int, ...]
    treated: tuple[int, ...]
    given: tuple[int, ...] = ()
    pinned: tuple[int, ...] = ()

    def render(self, g: Admg, assignment: Mapping[int, str] | None = None) -> str:
        amap = assignment or {}

        def tok(v: int) -> str:
            sym = value_symbol(g.name(v))
            return f"{sym}={amap[v]}" if v in amap else sym

        def term(v: int) -> str:
            if not self.treated:
                return g.name(v)
            return f"{g.name(v)}({','.join(tok(t) for t in self.treated)})"

        parts = [term(v) for v in self.outcomes]
        conds = [term(v) for v in self.given]
        # a pinned variable is conditioned at the other side's intervention
        # value: the bound state when given, its value symbol otherwise
        conds += [
            f"{term(v)}={amap.get(v, value_symbol(g.name(v)))}"
            for v in self.pinned
        ]
        body = ", ".join(parts)
        if conds:
            return f"p({body} | {', '.join(conds)})"
        return f"p({body})"


@dataclass(frozen=True)
class RuleApplication:
    """One rule application: the premise verdict and, when it applies, the
    licensed equality."""

    rule: int
    applies: bool
    verdict: SeparationVerdict
    premise: str
    lhs: CfDist
    rhs: CfDist
    swig: Swig

    def conclusion(self, g: Admg) -> str:
        amap = dict(self.swig.assignment)
        return f"{self.lhs.render(g, amap)} = {self.rhs.render(g, amap)}"


def _ids(g: Admg, vs: Iterable) -> tuple[int, ...]:
    out = []
    for v in vs:
        v = g.id_of(v) if isinstance(v, str) else int(v)
        if v not in set(g.vertices):
            raise GraphError(f"vertex id {v} not in graph")
        if g.decl(v).hidden:
            raise GraphError(f"{g.name(v)} is hidden; rules range over observed sets")
        out.append(v)
    if len(set(out)) != len(out):
        raise GraphError("repeated vertex in one rule set")
    return tuple(sorted(out))


def _split_args(g: Admg, spec) -> tuple[tuple[int, ...], dict[int, str]]:
    """A treatment argument is either vertex ids/names or a mapping to bound
    states; returns (sorted ids, bound assignment)."""
    if isinstance(spec, Mapping):
        ids = _ids(g, spec.keys())
        amap = {}
        for k, s in spec.items():
            if s is None:  # mentioned but left symbolic
                continue
            v = g.id_of(k) if isinstance(k, str) else int(k)
            if str(s) not in g.decl(v).states:
                raise GraphError(f"{s!r} is not a state of {g.name(v)}")
            amap[v] = str(s)
        return ids, amap
    return _ids(g, spec), {}


def _check_disjoint(sets: Sequence[tuple[int, ...]], names: Sequence[str]) -> None:
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            both = set(sets[i]) & set(sets[j])
            if both:
                raise GraphError(f"{names[i]} and {names[j]} overlap: {sorted(both)}")


def _merge_x_z(
    g: Admg, x: tuple[int, ...], xa: dict[int, str], z: tuple[int, ...], za: dict[int, str]
) -> dict[int, str]:
    for v in set(x) & set(z):
        if v in xa and v in za and xa[v] != za[v]:
            raise GraphError(
                f"inconsistent values for {g.name(v)}: {xa[v]} vs {za[v]}"
            )
    merged = dict(xa)
    merged.update(za)
    return merged


def rule1(g: Admg, x, y, z, w=(), context: Sequence[ContextRule] = ()) -> RuleApplication:
    """Insertion/deletion of observations."""
    xs, xa = _split_args(g, x)
    ys, zs, ws = _ids(g, y), _ids(g, z), _ids(g, w)
    _check_disjoint([ys, zs, ws], ["y", "z", "w"])
    if not ys or not zs:
        raise GraphError("rule 1 needs nonempty y and z")
    sw = build_swig(g, xs, assignment=xa, context=context)
    verdict = swig_separated(
        sw,
        [sw.random_node(v) for v in ys],
        [sw.random_node(v) for v in zs],
        [sw.random_node(v) for v in ws],
    )
    lhs = CfDist(ys, xs, tuple(sorted(zs + ws)))
    rhs = CfDist(ys, xs, ws)
    premise = (
        f"{', '.join(sw.node_token(sw.random_node(v)) for v in ys)} _||_ "
        f"{', '.join(sw.node_token(sw.random_node(v)) for v in zs)}"
        + (
            f" | {', '.join(sw.node_token(sw.random_node(v)) for v in ws)}"
            if ws
            else ""
        )
        + f" in {sw.describe()}"
    )
    return RuleApplication(1, verdict.separated, verdict, premise, lhs, rhs, sw)


def rule2(g: Admg, x, y, z, w=(), context: Sequence[ContextRule] = ()) -> RuleApplication:
    """Exchange of intervening and conditioning."""
    xs, xa = _split_args(g, x)
    zs, za = _split_args(g, z)
    ys, ws = _ids(g, y), _ids(g, w)
    _check_disjoint([ys, zs, ws], ["y", "z", "w"])
    if not ys or not zs:
        raise GraphError("rule 2 needs nonempty y and z")
    amap = _merge_x_z(g, xs, xa, zs, za)
    both = tuple(sorted(set(xs) | set(zs)))
    sw = build_swig(g, both, assignment=amap, context=context)
    verdict = swig_separated(
        sw,
        [sw.random_node(v) for v in ys],
        [sw.random_node(v) for v in zs],
        [sw.random_node(v) for v in ws],
    )
    lhs = CfDist(ys, both, ws)
    rhs = CfDist(ys, xs, ws, pinned=zs)
    premise = (
        f"{', '.join(sw.node_token(sw.random_node(v)) for v in ys)} _||_ "
        f"{', '.join(sw.node_token(sw.random_node(v)) for v in zs)}"
        + (
            f" | {', '.join(sw.node_token(sw.random_node(v)) for v in ws)}"
            if ws
            else ""
        )
        + f" in {sw.describe()}"
    )
    return RuleApplication(2, verdict.separated, verdict, premise, lhs, rhs, sw)


def rule3(g: Admg, x, y, z, context: Sequence[ContextRule] = ()) -> RuleApplication:
    """Insertion/deletion of interventions."""
    xs, xa = _split_args(g, x)
    zs, za = _split_args(g, z)
    ys = _ids(g, y)
    _check_disjoint([ys, zs], ["y", "z"])
    if not ys or not zs:
        raise GraphError("rule 3 needs nonempty y and z")
    amap = _merge_x_z(g, xs, xa, zs, za)
    both = tuple(sorted(set(xs) | set(zs)))
    sw = build_swig(g, both, assignment=amap, context=context)
    verdict = swig_separated(
        sw,
        [sw.random_node(v) for v in ys],
        [sw.fixed_node(v) for v in zs],
    )
    lhs = CfDist(ys, both)
    rhs = CfDist(ys, xs)
    premise = (
        f"{', '.join(sw.node_token(sw.random_node(v)) for v in ys)} _||_ "
        f"{', '.join(sw.value_token(v, bound=True) for v in zs)} in {sw.describe()}"
    )
    return RuleApplication(3, verdict.separated, verdict, premise, lhs, rhs, sw)
