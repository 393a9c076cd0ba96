import itertools
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellhyp.catalog import get_entry
from ellhyp.fubini import (
    FubiniGraph,
    PathOverflow,
    UnsupportedFactor,
    check_admissibility,
    closed_bound,
    enumerate_path_products,
    graph_from_spec,
    list_cases,
    load_case,
    open_bound,
    prefactor_arguments,
)
from ellhyp.ispec import spec_from_json
from ellhyp.symalg import Monomial, Relation, RelationSet

M = Monomial.parse


def brute_force(g: FubiniGraph):
    """Every walk written out as a sequence of half-edge/edge choices."""
    adj = {v: [] for v in range(g.n)}
    for i, j, lab, _ in g.edges:
        adj[i].append((j, lab))
        adj[j].append((i, lab))
    halves = {v: [lab for i, lab, _ in g.half_edges if i == v] for v in range(g.n)}
    opens, closed = Counter(), Counter()

    def walk(v, prod, steps, limit, visit):
        visit(v, prod, steps)
        if steps < limit:
            for u, lab in adj[v]:
                walk(u, prod * lab, steps + 1, limit, visit)

    for v in range(g.n):
        for h in halves[v]:
            def emit(u, prod, steps):
                for h2 in halves[u]:
                    opens[prod * h2] += 1
            walk(v, h, 0, open_bound(g.n) - 2, emit)
    if g.n >= 2:
        for v0 in range(g.n):
            def ret(u, prod, steps, v0=v0):
                if steps and u == v0:
                    closed[prod] += 1
            walk(v0, Monomial.one(), 0, closed_bound(g.n), ret)
    return opens, closed


def multisets(g):
    rows = enumerate_path_products(g)
    o = Counter({r.product: r.multiplicity for r in rows if r.kind == "open"})
    c = Counter({r.product: r.multiplicity for r in rows if r.kind == "closed"})
    return o, c


def counterexample():
    return load_case("counterexample")


def test_bounds():
    assert [open_bound(n) for n in (1, 2, 3)] == [2, 6, 18]
    assert [closed_bound(n) for n in (2, 3, 4)] == [4, 12, 36]


def test_counterexample_graph_shape():
    g, _, _ = counterexample()
    assert g.n == 2
    assert len(g.edges) == 1 and str(g.edges[0][2]) == "t"
    at = Counter(g.vertices[i] for i, _, _ in g.half_edges)
    assert at == {"z1": 4, "y1": 2}


def test_counterexample_inadmissible_with_witness():
    g, rels, _ = counterexample()
    v = check_admissibility(g, rels)
    assert not v.admissible
    w = v.offending[0]
    assert w.product.is_one() and w.kind == "open" and w.length == 4
    # unreduced, the witness multiplies v1 * t * t * v2
    raw = graph_from_spec(spec_from_json(load_case("counterexample")[2]["spec"]), RelationSet())
    prods = {r.product for r in enumerate_path_products(raw)}
    assert M("t^2 * v1 * v2") in prods


def test_beta_graph():
    g, rels, _ = load_case("elliptic_beta")
    assert g.n == 1 and not g.edges and len(g.half_edges) == 6
    assert check_admissibility(g, rels).admissible


def test_kernel_pair_edge():
    g, _, _ = load_case("kernel_pair")
    assert g.n == 2 and [str(e[2]) for e in g.edges] == ["t"] and not g.half_edges


def test_two_half_edges():
    g, _, _ = load_case("pair_vertex")
    o, c = multisets(g)
    assert o == Counter({M("a^2"): 1, M("a * b"): 2, M("b^2"): 1})
    assert not c
    args = prefactor_arguments(g)
    assert args["open"] == o and not args["closed"]


def test_single_edge_path():
    g = FubiniGraph(("x", "y"), ((0, 1, M("t"), ""),), ((0, M("a"), ""), (1, M("b"), "")))
    o, c = multisets(g)
    assert M("a * t * b") in o
    assert (o, c) == brute_force(g)


def test_edgeless_is_all_ordered_pairs():
    ts = [M(f"t{r}") for r in range(1, 7)]
    g = FubiniGraph(("z",), (), tuple((0, t, "") for t in ts))
    o, _ = multisets(g)
    assert o == Counter(a * b for a, b in itertools.product(ts, repeat=2))


def test_counterexample_against_brute_force():
    g, rels, _ = counterexample()
    raw = graph_from_spec(spec_from_json(load_case("counterexample")[2]["spec"]), RelationSet())
    o, c = multisets(raw)
    bo, bc = brute_force(raw)
    assert o == bo and c == bc
    assert set(c) == {M("t^2"), M("t^4")}
    assert c[M("t^2")] == 2 and c[M("t^4")] == 2


def test_closed_prefactor_arguments():
    raw = graph_from_spec(spec_from_json(load_case("counterexample")[2]["spec"]), RelationSet())
    closed = prefactor_arguments(raw)["closed"]
    for shift in ("t^2", "p * t^2", "q * t^2", "p * q * t^2"):
        assert closed[M(shift)] == 4


def test_squared_factor_expansion():
    spec = spec_from_json({"groups": [{"name": "z", "dim": 1, "kernel": {"family": "I"}}],
                           "factors": [{"coef": "c", "slots": [{"group": "z", "orbit": 2}]}]})
    g = graph_from_spec(spec)
    labels = sorted(str(l) for _, l, _ in g.half_edges)
    want = []
    for m in ("c", "p * c", "q * c", "p * q * c"):
        r = M(m).root(2)
        want += [str(r), str(r * Monomial.root_of_unity(Fraction(1, 2)))]
    assert labels == sorted(want)


def test_squared_cross_factor_rejected():
    spec = spec_from_json({"groups": [{"name": "y", "dim": 1, "kernel": {"family": "I"}},
                                      {"name": "z", "dim": 1, "kernel": {"family": "I"}}],
                           "factors": [{"coef": "c", "slots": [{"group": "y", "orbit": 2}, {"group": "z"}]}]})
    with pytest.raises(UnsupportedFactor):
        graph_from_spec(spec)


def test_reciprocal_factor_label():
    spec = spec_from_json({"groups": [{"name": "z", "dim": 1, "kernel": {"family": "I"}}],
                           "factors": [{"coef": "c", "power": -1, "slots": [{"group": "z"}]}]})
    assert [str(l) for _, l, _ in graph_from_spec(spec).half_edges] == ["p * q * c^-1"]


def test_cap():
    g, _, _ = load_case("triple_step")
    with pytest.raises(PathOverflow):
        enumerate_path_products(g, cap=100)


def test_corpus_expectations():
    assert {"counterexample", "elliptic_beta", "triple_step"} <= set(list_cases())
    for name in list_cases():
        g, rels, doc = load_case(name)
        assert check_admissibility(g, rels).admissible == (doc["expect"] == "admissible"), name


def test_catalog_entry_graph():
    e = get_entry("induction_enabler")
    g = graph_from_spec(e.lhs(2), e.relations(2))
    assert g.n == 2 and len(g.edges) == 1


LABELS = ["t", "a", "b", "p^-1", "t^-1", "a * b^-1", "p * t^-2"]


@st.composite
def graphs(draw, max_n=3):
    n = draw(st.integers(1, max_n))
    edges = []
    if n > 1:
        for _ in range(draw(st.integers(0, 3))):
            i, j = draw(st.sampled_from(list(itertools.combinations(range(n), 2))))
            edges.append((i, j, M(draw(st.sampled_from(LABELS))), ""))
    halves = [(draw(st.integers(0, n - 1)), M(draw(st.sampled_from(LABELS))), "")
              for _ in range(draw(st.integers(0, 3)))]
    return FubiniGraph(tuple(f"v{k}" for k in range(n)), tuple(edges), tuple(halves))


@settings(max_examples=60, deadline=None)
@given(graphs(max_n=2))
def test_dp_matches_brute_force(g):
    assert multisets(g) == brute_force(g)


@settings(max_examples=60, deadline=None)
@given(graphs(), st.permutations(range(3)))
def test_relabel_invariance(g, perm):
    perm = [k for k in perm if k < g.n]
    assert check_admissibility(g).admissible == check_admissibility(g.relabel(perm)).admissible


@settings(max_examples=60, deadline=None)
@given(graphs(), st.data())
def test_fresh_generator_monotone(g, data):
    k = data.draw(st.integers(0, len(g.half_edges) + len(g.edges)))
    fresh = M("w")
    halves = [(i, l * fresh if idx == k else l, o) for idx, (i, l, o) in enumerate(g.half_edges)]
    h = FubiniGraph(g.vertices, g.edges, tuple(halves))
    if check_admissibility(g).admissible:
        assert check_admissibility(h).admissible
