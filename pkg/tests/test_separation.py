import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swigid.graph import Admg, GraphError, latent_projection, parse_graph
from swigid.separation import d_separated, m_separated, path_open, swig_separated
from swigid.swig import build_swig, swig_latent_projection

from conftest import load_graph
from ref_paths import all_msep_statements, msep_by_paths
from strategies import admgs


# -- d-separation on DAGs ---------------------------------------------------------


def test_chain_blocked_by_middle():
    g = parse_graph("var V1 V2 V3\nV1 -> V2\nV2 -> V3\n")
    v1, v2, v3 = g.ids_of(["V1", "V2", "V3"])
    assert d_separated(g, [v1], [v3], [v2])
    assert not d_separated(g, [v1], [v3])


def test_adjacent_never_separated(backdoor):
    a, m, c = backdoor.ids_of(["A", "M", "C"])
    v = d_separated(backdoor, [a], [m], [c])
    assert not v
    assert v.witness_path == (a, m)


def test_collider_conditioning_opens():
    g = load_graph("mbias")
    gp = latent_projection(g)
    a, w, y = g.ids_of(["A", "W", "Y"])
    assert not m_separated(gp, [a], [y])  # direct edge A -> Y
    # removing the direct effect leaves only the collider path
    g2 = Admg.from_elements(
        ["A", "W", "Y"], [], [("A", "W"), ("W", "Y")]
    )
    a2, w2, y2 = g2.ids_of(["A", "W", "Y"])
    assert m_separated(g2, [a2], [y2])
    assert not m_separated(g2, [a2], [y2], [w2])


def test_descendant_of_collider_opens():
    g = parse_graph("var A B C D\nA -> C\nB -> C\nC -> D\n")
    a, b, c, d = g.ids_of(["A", "B", "C", "D"])
    assert d_separated(g, [a], [b])
    assert not d_separated(g, [a], [b], [d])


def test_d_separation_rejects_admg(frontdoor_admg):
    with pytest.raises(GraphError):
        d_separated(frontdoor_admg, [0], [2])


def test_disjointness_enforced(backdoor):
    with pytest.raises(GraphError):
        d_separated(backdoor, [0], [0])


# -- m-separation on ADMGs ---------------------------------------------------------


def test_frontdoor_admg_claims(frontdoor_admg):
    g = frontdoor_admg
    a, m, y = g.ids_of(["A", "M", "Y"])
    assert not m_separated(g, [a], [y], [m])  # A <-> Y
    assert m_separated(g, [a], [y], [m]).separated is False


def test_collider_at_y1(twoeffects):
    g = twoeffects
    a, y1, y2 = g.ids_of(["A", "Y1", "Y2"])
    assert not m_separated(g, [a], [y2])  # A <-> Y2
    # conditioning on Y1 opens A -> Y1 <-> Y2 as well
    assert not m_separated(g, [a], [y2], [y1])


def test_empty_side_vacuous(twoeffects):
    assert m_separated(twoeffects, [], [0])
    assert m_separated(twoeffects, [0], [])


def test_path_open_explicit(twoeffects):
    g = twoeffects
    a, y1, y2 = g.ids_of(["A", "Y1", "Y2"])
    assert not path_open(g, [a, y1, y2])  # collider at Y1 unconditioned
    assert path_open(g, [a, y1, y2], [y1])
    chain = parse_graph("var V1 V2 V3\nV1 -> V2\nV2 -> V3\n")
    with pytest.raises(GraphError):
        path_open(chain, chain.ids_of(["V1", "V3"]), [])  # not adjacent


def test_witness_path_is_open(backdoor):
    c, a, y = backdoor.ids_of(["C", "A", "Y"])
    v = d_separated(backdoor, [a], [c], [])
    assert not v
    assert path_open(backdoor, v.witness_path, [])


# -- agreement with the path-enumeration reference ----------------------------------


@settings(max_examples=80, deadline=None)
@given(admgs(max_n=5))
def test_matches_path_enumeration(g):
    for x, y, giv in all_msep_statements(g, max_given=3):
        mine = bool(m_separated(g, [x], [y], giv))
        ref = msep_by_paths(g, [x], [y], giv)
        assert mine == ref, (g, x, y, giv)


def test_matches_path_enumeration_corpus(graphs):
    for name, g in graphs.items():
        gp = latent_projection(g)
        for x, y, giv in all_msep_statements(gp):
            assert bool(m_separated(gp, [x], [y], giv)) == msep_by_paths(
                gp, [x], [y], giv
            ), (name, x, y, giv)


# -- SWIG separation -----------------------------------------------------------------


def test_swig_backdoor_blocked(backdoor):
    """Y(a) independent of A given C once A is split."""
    g = backdoor
    sw = build_swig(g, [g.id_of("A")])
    y, a, c = (sw.random_node(g.id_of(n)) for n in ["Y", "A", "C"])
    assert swig_separated(sw, [y], [a], [c])
    assert not swig_separated(sw, [y], [a])


def test_swig_fixed_half_reached_through_children(frontdoor_admg):
    g = frontdoor_admg
    sw = build_swig(g, [g.id_of("A")])
    y = sw.random_node(g.id_of("Y"))
    fa = sw.fixed_node(g.id_of("A"))
    v = swig_separated(sw, [y], [fa])
    assert not v  # a -> M(a) -> Y(a)
    assert v.witness_path is not None


def test_swig_nondependence_claim(frontdoor_admg):
    """Separation from the fixed half licenses a does-not-depend claim."""
    g = frontdoor_admg
    sw = build_swig(g, [g.id_of("A")])
    y = sw.random_node(g.id_of("Y"))
    m = sw.random_node(g.id_of("M"))
    fa = sw.fixed_node(g.id_of("A"))
    v = swig_separated(sw, [y], [fa], [m])
    assert v.separated
    assert v.nondependence is not None
    assert "free of a" in v.nondependence.text


def test_swig_no_conditioning_on_fixed(frontdoor_admg):
    g = frontdoor_admg
    sw = build_swig(g, [g.id_of("A")])
    y = sw.random_node(g.id_of("Y"))
    m = sw.random_node(g.id_of("M"))
    fa = sw.fixed_node(g.id_of("A"))
    with pytest.raises(GraphError):
        swig_separated(sw, [y], [m], [fa])
    with pytest.raises(GraphError):
        swig_separated(sw, [fa], [y])


def test_swig_paths_never_pass_through_fixed(torpedo_admg):
    """In G(a, m) of the projected graph, Y(a,m) _||_ M(a): the only links
    run through fixed halves (m) or the bidirected edge, blocked vs open."""
    g = torpedo_admg
    a, m, y = g.ids_of(["A", "M", "Y"])
    sw = build_swig(g, [a, m])
    # M <-> Y keeps them connected even with both treatments split
    v = swig_separated(sw, [sw.random_node(y)], [sw.random_node(m)])
    assert not v
    path = v.witness_path
    assert all(not n.fixed for n in path)


def test_context_rules_unlock_extra_independences(torpedo):
    """With the context rules, Y(a,m) _||_ {M(a), A} in both worlds."""
    from swigid.swig import parse_context

    g = torpedo
    a, m, y = g.ids_of(["A", "M", "Y"])
    rules = parse_context("U -> M when A=1\nU -> R when A=0", g)
    for astate in ("0", "1"):
        sw = build_swig(g, [a, m], assignment={a: astate}, context=rules)
        v = swig_separated(
            sw,
            [sw.random_node(y)],
            [sw.random_node(m), sw.random_node(a)],
        )
        assert v.separated, astate
    # without the context knowledge the path through U stays open
    sw = build_swig(g, [a, m], assignment={a: "1"})
    assert not swig_separated(
        sw, [sw.random_node(y)], [sw.random_node(m), sw.random_node(a)]
    )


def test_swig_projection_preserves_separation(frontdoor):
    """Verdicts agree between the hidden-DAG SWIG and its latent projection."""
    g = frontdoor
    a, m, y = g.ids_of(["A", "M", "Y"])
    sw = build_swig(g, [a])
    swp = swig_latent_projection(sw)
    for right in ([sw.random_node(a)], [sw.fixed_node(a)]):
        for giv in ([], [sw.random_node(m)]):
            full = swig_separated(sw, [sw.random_node(y)], right, giv)
            proj = swig_separated(swp, [swp.random_node(y)], right, giv)
            assert full.separated == proj.separated
