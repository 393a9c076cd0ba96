"""Graphs of iterated integrals and the path-product test for swapping integration order.

Vertices are scalar integration variables.  A factor Gamma(c z_i^{+-1}) gives
a half-edge labelled c at vertex i, a factor Gamma(c z_i^{+-1} z_j^{+-1}) one
edge labelled c between i and j.  Products of labels along open walks
(half-edge to half-edge) and closed walks, up to the length bounds
2*3^(n-1) and 4*3^(n-2), form the arguments of the prefactor that makes the
integral holomorphic.  Integration order may be swapped when no product lies
in p^{Z<=0} q^{Z<=0}.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .efun import GammaVariant
from .ispec import IntegralSpec, fill_template, spec_from_json
from .symalg import Monomial, Relation, RelationSet, lattice_exponents, relations_reduce

__all__ = [
    "FubiniGraph",
    "PathProduct",
    "Verdict",
    "UnsupportedFactor",
    "PathOverflow",
    "graph_from_spec",
    "enumerate_path_products",
    "prefactor_arguments",
    "check_admissibility",
    "open_bound",
    "closed_bound",
    "load_case",
    "list_cases",
]

SCALE = 8  # exponent denominators divide 8


class UnsupportedFactor(ValueError):
    pass


class PathOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class FubiniGraph:
    vertices: tuple
    edges: tuple = ()        # (i, j, label, origin)
    half_edges: tuple = ()   # (i, label, origin)
    lattice_root: int = 1    # 2 when the finest base in play is (p^1/2, q^1/2)

    def __post_init__(self):
        n = len(self.vertices)
        for i, j, _, _ in self.edges:
            if i == j:
                raise ValueError("edges join distinct vertices")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError("edge endpoint out of range")
        for i, _, _ in self.half_edges:
            if not 0 <= i < n:
                raise ValueError("half-edge vertex out of range")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def summary(self) -> dict:
        return {"vertices": list(self.vertices), "edges": len(self.edges), "half_edges": len(self.half_edges),
                "edge_labels": sorted({str(l) for _, _, l, _ in self.edges}),
                "half_edge_labels": sorted({str(l) for _, l, _ in self.half_edges})}

    def relabel(self, perm: Sequence[int]) -> "FubiniGraph":
        """Vertex i becomes perm[i]."""
        verts = [None] * self.n
        for i, v in enumerate(self.vertices):
            verts[perm[i]] = v
        return FubiniGraph(tuple(verts), tuple((perm[i], perm[j], l, o) for i, j, l, o in self.edges),
                           tuple((perm[i], l, o) for i, l, o in self.half_edges), self.lattice_root)

    def map_labels(self, fn) -> "FubiniGraph":
        return FubiniGraph(self.vertices, tuple((i, j, fn(l), o) for i, j, l, o in self.edges),
                           tuple((i, fn(l), o) for i, l, o in self.half_edges), self.lattice_root)


@dataclass(frozen=True)
class PathProduct:
    product: Monomial
    witness: tuple
    kind: str
    multiplicity: int = 1
    length: int = 0

    def describe(self) -> str:
        return f"{self.kind} {' -> '.join(self.witness)} = {self.product}"


@dataclass
class Verdict:
    admissible: bool
    offending: list = field(default_factory=list)
    checked: int = 0

    def to_json(self) -> dict:
        return {"admissible": self.admissible, "checked_products": self.checked,
                "offending": [{"product": str(o.product), "kind": o.kind, "witness": list(o.witness),
                               "multiplicity": o.multiplicity, "length": o.length} for o in self.offending]}


# ------------------------------------------------------------ construction

_VARIANT_BASE = {
    GammaVariant.PQ: (Monomial.parse("p"), Monomial.parse("q")),
    GammaVariant.PQ2: (Monomial.parse("p"), Monomial.parse("q^2")),
    GammaVariant.HALF: (Monomial.parse("p^1/2"), Monomial.parse("q^1/2")),
}
_MINUS = Monomial.root_of_unity(Fraction(1, 2))


def _square_root_labels(c: Monomial, variant: GammaVariant) -> list:
    """Gamma(c z^{+-2}) = prod Gamma(+-sqrt(c M) z^{+-1}) over M in {1, P, Q, PQ} of the variant base."""
    P, Q = _VARIANT_BASE[GammaVariant(variant)]
    out = []
    for M in (Monomial.one(), P, Q, P * Q):
        r = (c * M).root(2)
        out.extend([r, r * _MINUS])
    return out


def graph_from_spec(spec: IntegralSpec, relations: RelationSet | None = None) -> FubiniGraph:
    """Graph of a spec with labels reduced modulo ``relations`` (default: its balancing relations)."""
    relations = spec.balancing if relations is None else relations
    red = (lambda m: relations_reduce(m, relations)) if len(relations) else (lambda m: m)
    dims = {g.name: g.dim for g in spec.groups}
    verts, index = [], {}
    for g in spec.groups:
        for k in range(g.dim):
            index[(g.name, k)] = len(verts)
            verts.append(f"{g.name}{k + 1}")
    root = 1
    edges, halves = [], []
    for g in spec.groups:
        if g.kernel.family == "II" and g.dim >= 2:
            t = red(g.kernel.t)
            for a, b in itertools.combinations(range(g.dim), 2):
                edges.append((index[(g.name, a)], index[(g.name, b)], t, f"kernel of {g.name}"))
        if g.dim and g.kernel.variant == GammaVariant.HALF:
            root = 2
    for f in spec.factors:
        if not f.slots or any(dims[s.group] == 0 for s in f.slots):
            continue
        if f.variant == GammaVariant.HALF:
            root = 2
        c = red(f.coefficient)
        if f.power < 0:
            # 1/Gamma(x) = (x;p,q)/(pq/x;p,q): the denominator carries pq/x
            P, Q = _VARIANT_BASE[f.variant]
            c = P * Q / c
        desc = f.describe()
        if len(f.slots) == 1:
            s, = f.slots
            ks = range(dims[s.group]) if s.index is None else [s.index]
            labels = [c] if s.orbit == 1 else _square_root_labels(c, f.variant)
            for k in ks:
                for lab in labels:
                    halves.append((index[(s.group, k)], lab, desc))
            continue
        s1, s2 = f.slots
        if s1.orbit != 1 or s2.orbit != 1:
            raise UnsupportedFactor(f"cross factor with a squared variable is not covered: {desc}")
        A = range(dims[s1.group]) if s1.index is None else [s1.index]
        B = range(dims[s2.group]) if s2.index is None else [s2.index]
        if s1.group == s2.group and s1.index is None:
            pairs = itertools.combinations(A, 2)
        else:
            pairs = ((a, b) for a in A for b in B if (s1.group, a) != (s2.group, b))
        for a, b in pairs:
            edges.append((index[(s1.group, a)], index[(s2.group, b)], c, desc))
    return FubiniGraph(tuple(verts), tuple(edges), tuple(halves), root)


# ------------------------------------------------------------- enumeration


def open_bound(n: int) -> int:
    return 2 * 3 ** (n - 1)


def closed_bound(n: int) -> int:
    return (4 * 3 ** n) // 9


class _Codec:
    def __init__(self, labels):
        gens = sorted({g for m in labels for g in m.generators})
        self.gens = gens
        self.pos = {g: i for i, g in enumerate(gens)}

    def enc(self, m: Monomial) -> tuple:
        v = [0] * (len(self.gens) + 1)
        v[0] = int(m.phase * SCALE) % SCALE
        for g, e in m.exps:
            v[self.pos[g] + 1] = int(e * SCALE)
        return tuple(v)

    def dec(self, v: tuple) -> Monomial:
        return Monomial(Fraction(v[0], SCALE), tuple((g, Fraction(e, SCALE)) for g, e in zip(self.gens, v[1:]) if e))


def _add(a: tuple, b: tuple) -> tuple:
    s = tuple(x + y for x, y in zip(a, b))
    return (s[0] % SCALE,) + s[1:]


def _unwind(w) -> tuple:
    out = []
    while w is not None:
        w, step = w
        out.append(step)
    return tuple(reversed(out))


def enumerate_path_products(g: FubiniGraph, cap: int = 10 ** 6) -> list:
    """Deduplicated open and closed walk products with multiplicities and one witness each.

    Multiplicity counts directed walks: a walk and its reversal are both
    counted unless they coincide, and closed walks are counted once per
    starting vertex and direction.
    """
    if g.n < 1:
        raise ValueError("graph needs at least one vertex")
    codec = _Codec([l for *_, l, _ in g.edges] + [l for _, l, _ in g.half_edges])
    E = [(i, j, codec.enc(l), str(l)) for i, j, l, _ in g.edges]
    H = [(i, codec.enc(l), str(l)) for i, l, _ in g.half_edges]
    inc = {v: [] for v in range(g.n)}
    for i, j, l, s in E:
        inc[i].append((j, l, s))
        inc[j].append((i, l, s))
    half_at = {v: [(l, s) for i, l, s in H if i == v] for v in range(g.n)}
    name = g.vertices
    results = []

    # open walks
    max_edges = open_bound(g.n) - 2
    states: dict = {}
    for i, l, s in H:
        key = (i, l)
        if key in states:
            states[key][0] += 1
        else:
            states[key] = [1, (None, f"[{s}]@{name[i]}")]
    found: dict = {}
    for k in range(max_edges + 1):
        for (v, prod), (cnt, wit) in states.items():
            for l, s in half_at[v]:
                p = _add(prod, l)
                if p in found:
                    found[p][0] += cnt
                else:
                    found[p] = [cnt, (wit, f"[{s}]"), k + 2]
                    if len(found) > cap:
                        raise PathOverflow(f"more than {cap} distinct open products")
        if k == max_edges:
            break
        nxt: dict = {}
        for (v, prod), (cnt, wit) in states.items():
            for u, l, s in inc[v]:
                key = (u, _add(prod, l))
                if key in nxt:
                    nxt[key][0] += cnt
                else:
                    nxt[key] = [cnt, (wit, f"{s}->{name[u]}")]
        if len(nxt) > cap:
            raise PathOverflow(f"more than {cap} walk states")
        states = nxt
        if not states:
            break
    for p, (cnt, wit, length) in found.items():
        results.append(PathProduct(codec.dec(p), _unwind(wit), "open", cnt, length))

    # closed walks
    if g.n >= 2 and E:
        zero = tuple([0] * (len(codec.gens) + 1))
        closed: dict = {}
        for v0 in range(g.n):
            states = {(v0, zero): [1, (None, name[v0])]}
            for k in range(1, closed_bound(g.n) + 1):
                nxt = {}
                for (v, prod), (cnt, wit) in states.items():
                    for u, l, s in inc[v]:
                        key = (u, _add(prod, l))
                        if key in nxt:
                            nxt[key][0] += cnt
                        else:
                            nxt[key] = [cnt, (wit, f"{s}->{name[u]}")]
                if len(nxt) > cap:
                    raise PathOverflow(f"more than {cap} closed-walk states")
                states = nxt
                for (v, prod), (cnt, wit) in states.items():
                    if v != v0:
                        continue
                    if prod in closed:
                        closed[prod][0] += cnt
                    else:
                        closed[prod] = [cnt, wit, k]
        for p, (cnt, wit, length) in closed.items():
            results.append(PathProduct(codec.dec(p), _unwind(wit), "closed", cnt, length))
    results.sort(key=lambda r: (r.kind != "open", r.length, str(r.product)))
    return results


def prefactor_arguments(g: FubiniGraph, products: list | None = None) -> dict:
    """Multisets (Counters) of the prefactor's Pochhammer arguments.

    Open walks contribute w once each; closed walks contribute w, pw, qw
    and pqw, squared.
    """
    products = enumerate_path_products(g) if products is None else products
    P, Q = Monomial.parse("p"), Monomial.parse("q")
    opens, closed = Counter(), Counter()
    for r in products:
        if r.kind == "open":
            opens[r.product] += r.multiplicity
        else:
            for shift in (Monomial.one(), P, Q, P * Q):
                closed[r.product * shift] += 2 * r.multiplicity
    return {"open": opens, "closed": closed}


def _inside(m: Monomial, root: int) -> bool:
    if root != 1:
        m = Monomial(m.phase, tuple((g, e * root if g in ("p", "q") else e) for g, e in m.exps))
    return lattice_exponents(m) is not None


def check_admissibility(g: FubiniGraph, relations: RelationSet | None = None, cap: int = 10 ** 6) -> Verdict:
    """Admissible iff no walk product lies in p^{Z<=0} q^{Z<=0} (of the finest base in the graph)."""
    if relations is not None and len(relations):
        g = g.map_labels(lambda m: relations_reduce(m, relations))
    if g.n == 0:
        return Verdict(True, [], 0)  # nothing is integrated
    products = enumerate_path_products(g, cap)
    bad = [r for r in products if _inside(r.product, g.lattice_root)]
    return Verdict(not bad, bad, len(products))


# ------------------------------------------------------------------ corpus


def _corpus_dir():
    from importlib import resources

    return resources.files("ellhyp") / "corpus" / "fubini"


def list_cases() -> list:
    return sorted(r.name[:-5] for r in _corpus_dir().iterdir() if r.name.endswith(".json"))


def case_from_json(doc: Mapping) -> tuple:
    """(graph, relations, document) for a corpus case or a user spec file."""
    env = {k: int(v) for k, v in doc.get("env", {}).items()}
    rels = RelationSet(tuple(Relation.parse(fill_template(r["relation"], env), r["eliminate"], int(r.get("sign", 1)))
                             for r in doc.get("relations", ())))
    if "spec" in doc:
        spec = spec_from_json(doc["spec"], env, rels, doc.get("name", ""))
        return graph_from_spec(spec, rels), rels, doc
    verts = tuple(doc["vertices"])
    edges = tuple((verts.index(e["ends"][0]), verts.index(e["ends"][1]), Monomial.parse(e["label"]), "")
                  for e in doc.get("edges", ()))
    halves = tuple((verts.index(h["vertex"]), Monomial.parse(h["label"]), "") for h in doc.get("half_edges", ()))
    g = FubiniGraph(verts, edges, halves, int(doc.get("lattice_root", 1)))
    if len(rels):
        g = g.map_labels(lambda m: relations_reduce(m, rels))
    return g, rels, doc


def load_case(name_or_path: str) -> tuple:
    import os

    if os.path.exists(name_or_path):
        with open(name_or_path) as fh:
            return case_from_json(json.load(fh))
    res = _corpus_dir() / f"{name_or_path}.json"
    if not res.is_file():
        raise KeyError(f"unknown Fubini case {name_or_path!r}; known: {list_cases()}")
    return case_from_json(json.loads(res.read_text()))
