import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swigid.graph import (
    Admg,
    GraphError,
    latent_projection,
    parse_graph,
    serialize_graph,
)

from conftest import load_graph
from strategies import admgs, hidden_dags


# -- parsing and round-trips ---------------------------------------------------


def test_parse_basic_admg(frontdoor_admg):
    g = frontdoor_admg
    assert [g.name(v) for v in g.vertices] == ["A", "M", "Y"]
    a, m, y = g.ids_of(["A", "M", "Y"])
    assert set(g.directed) == {(a, m), (m, y)}
    assert set(g.bidirected) == {(a, y)}


def test_parse_state_counts():
    g = parse_graph("var A:3 B\nA -> B\n")
    assert g.decl(g.id_of("A")).k == 3
    assert g.decl(g.id_of("B")).states == ("0", "1")


def test_parse_rejects_mixed_hidden_and_bidirected():
    with pytest.raises(GraphError):
        parse_graph("var A B\nhidden U\nA <-> B\nU -> A\n")


def test_parse_rejects_cycle():
    with pytest.raises(GraphError):
        parse_graph("var A B\nA -> B\nB -> A\n")


def test_parse_rejects_duplicate_declaration():
    with pytest.raises(GraphError):
        parse_graph("var A A\n")


def test_serialize_round_trip_whole_corpus(graphs):
    for name, g in graphs.items():
        assert parse_graph(serialize_graph(g)) == g, name


def test_serialize_is_stable(frontdoor):
    s = serialize_graph(frontdoor)
    assert serialize_graph(parse_graph(s)) == s


# -- relations -------------------------------------------------------------------


def test_topological_order_parents_first(backdoor):
    order = backdoor.topological_order()
    pos = {v: i for i, v in enumerate(order)}
    for t, h in backdoor.directed:
        assert pos[t] < pos[h]


def test_ancestors_and_descendants(backdoor):
    c, a, m, y = backdoor.ids_of(["C", "A", "M", "Y"])
    assert backdoor.ancestors([y]) == (c, a, m, y)
    assert backdoor.descendants([a]) == (a, m, y)
    assert backdoor.ancestors([c]) == (c,)


def test_districts_frontdoor(frontdoor_admg):
    g = frontdoor_admg
    a, m, y = g.ids_of(["A", "M", "Y"])
    assert g.district(y) == (a, y)
    assert g.district(m) == (m,)
    assert g.districts() == ((a, y), (m,))


def test_markov_blanket_with_bidirected_mates(twoeffects):
    g = twoeffects
    a, y1, y2 = g.ids_of(["A", "Y1", "Y2"])
    # district of Y1 is {A, Y1, Y2}; blanket adds parents of district members
    assert g.markov_blanket(y1) == (a, y2)


def test_markov_blanket_on_dag_is_parent_set(backdoor):
    g = backdoor
    for v in g.vertices:
        assert g.markov_blanket(v) == g.parents(v)


def test_ancestral_closure_frontdoor(frontdoor_admg):
    g = frontdoor_admg
    assert g.ancestral_closure([g.id_of("Y")]) == g.ids_of(["A", "M", "Y"])


# -- fixing ------------------------------------------------------------------------


def test_fixable_refused_with_witness(twoeffects):
    g = twoeffects
    ok, wit = g.is_fixable(g.id_of("A"))
    assert not ok
    assert wit == (g.id_of("Y1"),)
    with pytest.raises(GraphError, match="Y1"):
        g.fix(g.id_of("A"))


def test_fixable_frontdoor_M(frontdoor_admg):
    ok, wit = frontdoor_admg.is_fixable(frontdoor_admg.id_of("M"))
    assert ok and wit == ()


def test_fix_removes_vertex_and_edges(frontdoor_admg):
    g = frontdoor_admg.fix(frontdoor_admg.id_of("Y"))
    assert g.ids_of(["A", "M"]) == g.vertices
    assert g.bidirected == frozenset()


def test_intrinsic_sets_two_effects(twoeffects):
    g = twoeffects
    a, y1, y2 = g.ids_of(["A", "Y1", "Y2"])
    assert (a, y1, y2) in g.intrinsic_sets()


def test_intrinsic_sets_frontdoor(frontdoor_admg):
    g = frontdoor_admg
    m = g.id_of("M")
    assert (m,) in g.intrinsic_sets()
    # {M} is reached by fixing Y then A
    scheds = {s.vertices: s.fixed for s in g.reachable_sets()}
    assert scheds[(m,)] == (g.id_of("Y"), g.id_of("A"))


@settings(max_examples=60, deadline=None)
@given(admgs(max_n=4))
def test_fixing_is_confluent(g):
    """Every schedule reaching the same vertex set gives the same CADMG."""

    def reach(g0):
        out = {}
        stack = [g0]
        while stack:
            h = stack.pop()
            for v in h.vertices:
                ok, _ = h.is_fixable(v)
                if not ok:
                    continue
                child = h.induced_subgraph(set(h.vertices) - {v})
                key = child.vertices
                if key in out:
                    assert out[key] == child
                else:
                    out[key] = child
                    stack.append(child)
        return out

    reach(g)


# -- latent projection ---------------------------------------------------------


def test_projection_frontdoor(frontdoor, frontdoor_admg):
    # serialize normalizes away the no-longer-present hidden declarations
    assert parse_graph(serialize_graph(latent_projection(frontdoor))) == frontdoor_admg


def test_projection_torpedo(torpedo, torpedo_admg):
    assert parse_graph(serialize_graph(latent_projection(torpedo))) == torpedo_admg


def test_projection_keeps_vertex_ids(napkin):
    gp = latent_projection(napkin)
    assert gp.vertices == napkin.observed
    for v in gp.vertices:
        assert gp.name(v) == napkin.name(v)


def test_projection_triangle():
    g = load_graph("triangle")
    gp = latent_projection(g)
    a, y, c = g.ids_of(["A", "Y", "C"])
    assert set(gp.directed) == {(c, a), (a, y), (c, y)}
    assert set(gp.bidirected) == {(a, y)}


@settings(max_examples=60, deadline=None)
@given(hidden_dags())
def test_projection_in_stages_matches_one_shot(g):
    """Projecting out hidden vertices one at a time equals projecting at once."""
    gp = latent_projection(g)
    step = g
    for h in g.hidden:
        step = latent_projection(step, [v for v in step.vertices if v != h])
    assert step == gp


@settings(max_examples=60, deadline=None)
@given(admgs(max_n=5), st.data())
def test_ancestral_projection_is_induced_subgraph(g, data):
    """Projection onto an ancestrally closed set adds no edges."""
    pick = data.draw(
        st.sets(st.sampled_from(list(g.vertices)), min_size=1), label="seed set"
    )
    anc = g.ancestral_closure(pick)
    assert latent_projection(g, anc) == g.induced_subgraph(anc)


def test_projection_onto_non_ancestral_set_can_add_edges(backdoor):
    g = backdoor
    c, a, y = g.ids_of(["C", "A", "Y"])
    gp = latent_projection(g, [c, a, y])  # M projected out
    assert (a, y) in set(gp.directed)  # via A -> M -> Y
