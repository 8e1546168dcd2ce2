import itertools
import math

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dimergrowth import kasteleyn as ka
from dimergrowth.lattice import Edge, LatticeKind, black, white
from oracles import biadjacency, permanent

SQ, HEX = LatticeKind.SQUARE, LatticeKind.HONEYCOMB


def test_small_counts_against_permanent():
    # oracle values: Ryser permanent of the biadjacency matrix
    for g, expected in ((ka.build_aztec(1), 2), (ka.build_aztec(2), 8), (ka.build_hexagon(1), 2)):
        assert permanent(biadjacency(g)) == expected
        assert len(ka.brute_force(g)) == expected
        assert ka.partition_function(ka.orient(g)) == pytest.approx(expected, abs=1e-9)


def test_aztec_vertex_sets():
    g = ka.build_aztec(1)
    assert len(g.whites) == 2 and len(g.blacks) == 2
    g = ka.build_aztec(3)
    assert set(g.whites) == {white(x, y) for x in range(3) for y in range(4)}
    assert set(g.blacks) == {black(x, y) for x in range(4) for y in range(3)}


def test_hexagon_counts():
    # H_2 matches boxed plane partitions in a 2x2x2 box (20), checked by the permanent
    g = ka.build_hexagon(2)
    assert permanent(biadjacency(g)) == 20
    assert ka.partition_function(ka.orient(g)) == pytest.approx(20)
    assert len(ka.build_hexagon(3).faces()) >= 3 * 3 ** 2 - 8  # interior hexagons of H_3


def test_single_edge():
    g = ka.single_edge_graph(2.5)
    ks = ka.orient(g)
    assert ka.partition_function(ks) == pytest.approx(2.5)
    e = Edge(black(0, 0), 0)
    assert ka.edge_probabilities(ks, [e]) == pytest.approx(1.0)


def test_orientation_face_condition():
    for g in (ka.build_aztec(4), ka.build_aztec(3, standard_signs=False), ka.build_hexagon(3)):
        ks = ka.orient(g)
        for f in g.faces():
            n = len(f) // 2
            assert ka.face_phase(ks.signs, f) == pytest.approx((-1) ** (n + 1))


def test_hexagon_all_positive_signs_valid():
    g = ka.build_hexagon(3)
    assert ka.face_defects(g, [1.0] * len(g.edges)) == []


def test_broken_orientation_reported():
    g = ka.build_aztec(3)
    signs = list(g.preset_signs)
    signs[0] = -signs[0]
    assert ka.face_defects(g, signs)
    with pytest.raises(ka.KasteleynError):
        ka.orient(g, signs)


def test_dimension_mismatch_is_distinct_from_zero():
    g = ka.lattice_graph(SQ, [white(0, 0), white(0, 1)], [black(0, 0)])
    with pytest.raises(ka.DimensionMismatch):
        ka.partition_function(ka.orient(g))
    # equal sizes but no perfect matching gives Z = 0
    g0 = ka.lattice_graph(SQ, [white(5, 5)], [black(0, 0)])
    assert ka.partition_function(ka.orient(g0)) == 0.0


# ---------------------------------------------------------------- random subgraphs

def _subgraph(base, keep_w, keep_b, weights=None):
    ws = [v for v, k in zip(base.whites, keep_w) if k]
    bs = [v for v, k in zip(base.blacks, keep_b) if k]
    wt = None
    if weights is not None:
        table = {}
        wt = lambda e: table.setdefault(e, weights[len(table) % len(weights)])
    return ka.lattice_graph(base.kind, ws, bs, weight=wt)


@st.composite
def lattice_subgraphs(draw):
    base = draw(st.sampled_from([ka.build_aztec(3), ka.build_hexagon(2), ka.build_aztec(2)]))
    n = len(base.whites)
    drop = draw(st.integers(0, 3))
    idx_w = draw(st.lists(st.integers(0, n - 1), min_size=drop, max_size=drop, unique=True))
    idx_b = draw(st.lists(st.integers(0, len(base.blacks) - 1), min_size=drop, max_size=drop,
                          unique=True))
    keep_w = [i not in idx_w for i in range(n)]
    keep_b = [i not in idx_b for i in range(len(base.blacks))]
    weighted = draw(st.booleans())
    weights = draw(st.lists(st.integers(1, 4), min_size=1, max_size=5)) if weighted else None
    return _subgraph(base, keep_w, keep_b, weights)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(lattice_subgraphs())
def test_det_equals_matching_count(g):
    assert max(len(g.whites), len(g.blacks)) <= 24
    ks = ka.orient(g)
    perm = permanent(biadjacency(g))
    assert ka.partition_function(ks) == pytest.approx(perm, rel=1e-12, abs=1e-9)
    assert ka.weighted_count(g, ka.brute_force(g)) == pytest.approx(perm, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(lattice_subgraphs())
def test_determinant_terms_share_one_phase(g):
    ms = ka.brute_force(g)
    if len(ms) < 2:
        return
    ks = ka.orient(g)
    phases = {complex(round(z.real, 9), round(z.imag, 9)) for z in
              (ka.matching_phase(ks, m) for m in ms)}
    assert len(phases) == 1


# ---------------------------------------------------------------- probabilities

def _frequency(g, matchings, edges):
    ids = {g.lattice_edge_id(e) for e in edges}
    return sum(ids <= set(m) for m in matchings) / len(matchings)


def test_edge_probabilities_against_enumeration():
    g = ka.build_aztec(2)
    ks = ka.orient(g)
    ms = ka.brute_force(g)
    assert len(ms) == 8
    from dimergrowth.lattice import edge_between
    all_edges = [edge_between(SQ, g.blacks[b], g.whites[w]) for b, w, _ in g.edges]
    for e in all_edges:
        p = ka.edge_probabilities(ks, [e])
        assert 0 <= p <= 1
        assert p == pytest.approx(_frequency(g, ms, [e]), abs=1e-12)
    for e, f in itertools.combinations(all_edges, 2):
        if {e.black, e.white} & {f.black, f.white}:
            continue
        assert ka.edge_probabilities(ks, [e, f]) == pytest.approx(_frequency(g, ms, [e, f]), abs=1e-12)


def test_remove_matches_brute_force():
    g = ka.build_aztec(2)
    e = Edge(g.blacks[0], 0)
    if e.white not in g.whites:
        e = Edge(g.blacks[0], 1)
    sub = ka.remove(g, ka.RemovalSpec(removed_edges=(e,)))
    assert ka.partition_function(ka.orient(sub)) == pytest.approx(len(ka.brute_force(sub)))
    assert ka.remove(g, ka.RemovalSpec()) is g
    # Z[E1]/Z is the probability of E1
    assert ka.z_ratio(g, edges=[e]) == pytest.approx(ka.edge_probabilities(ka.orient(g), [e]))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=24, max_size=24),
       st.lists(st.floats(0.2, 5.0), min_size=24, max_size=24))
def test_gauge_invariance(fb, fw):
    g = ka.build_aztec(3)
    ks = ka.orient(g)
    gk = ka.gauge(ks, fb[:len(g.blacks)], fw[:len(g.whites)])
    from dimergrowth.lattice import edge_between
    edges = [edge_between(SQ, g.blacks[b], g.whites[w]) for b, w, _ in g.edges[:6]]
    for e in edges:
        assert ka.edge_probabilities(gk, [e]) == pytest.approx(ka.edge_probabilities(ks, [e]), abs=1e-12)


def test_dump_load_round_trip():
    for g in (ka.build_aztec(2), ka.build_hexagon(2)):
        h = ka.load_graph(ka.dump_graph(g))
        assert h.whites == g.whites and h.blacks == g.blacks and h.edges == g.edges
        assert h.preset_signs == g.preset_signs


# ---------------------------------------------------------------- identities

@pytest.mark.parametrize("L,l", [(4, 2), (4, 3), (5, 2), (5, 3), (5, 4)])
def test_ladder_identity(L, l):
    rep = ka.verify_ladder_identity(ka.centered_aztec(L), l)
    assert rep.gap <= 1e-9
    assert rep.ok


def test_ladder_remainder_monotone_and_bounded():
    g = ka.centered_aztec(5)
    rems = [ka.verify_ladder_identity(g, l).details for l in range(2, 5)]
    r = [d["remainder"] for d in rems]
    assert all(a >= b - 1e-12 for a, b in zip(r, r[1:]))
    assert all(-1e-12 <= d["remainder"] <= d["remainder_bound"] + 1e-12 for d in rems)


@pytest.mark.parametrize("L", [3, 4])
def test_monomer_ratio(L):
    g = ka.centered_aztec(L)
    m = ka.monomer_ratio(g)
    assert m["formula"] == pytest.approx(m["flipped"], abs=1e-9)
    assert m["flipped"] == pytest.approx(m["reoriented"], abs=1e-9)
    if L == 4:
        lad = ka.verify_ladder_identity(g, 2)
        assert lad.lhs == pytest.approx(m["formula"], abs=1e-9)


def test_corollary():
    rep = ka.verify_corollary(ka.centered_aztec(6), 4)
    assert rep.ok and rep.gap <= 1e-9


def test_ladder_requires_room():
    with pytest.raises(ValueError):
        ka.verify_ladder_identity(ka.centered_aztec(2), 4)


def test_hex_identity_on_h6_both_cases():
    h = ka.build_hexagon(6)
    from dimergrowth.kernel import horizontal_edge
    sep = ka.verify_hex_identity(h, horizontal_edge(-2, 1), horizontal_edge(1, 1), 2, 2)
    same = ka.verify_hex_identity(h, horizontal_edge(0, 3), horizontal_edge(0, 0), 0, 2)
    assert sep.details["case"] == "separated" and same.details["case"] == "same_column"
    for rep in (sep, same):
        assert rep.gap <= 1e-9
        assert rep.details["bound_ok"]
        assert -1e-12 <= rep.details["remainder"] <= rep.details["remainder_bound"] + 1e-12


def test_hex_identity_rejects_adjacent_columns():
    from dimergrowth.kernel import horizontal_edge
    with pytest.raises(ValueError):
        ka.verify_hex_identity(ka.build_hexagon(4), horizontal_edge(0, 0), horizontal_edge(1, 0), 1, 1)


def test_brute_force_cap():
    with pytest.raises(ValueError):
        ka.brute_force(ka.build_aztec(6))
    assert math.isfinite(ka.partition_function(ka.orient(ka.build_aztec(6))))
