"""Registry of integral identities stored as JSON data files.

Each entry declares its integration groups and gamma factors as templates
in ``n`` (and ``m``), the balancing relations with the generator each one
eliminates, the sampling window, and the tolerance its residual must meet.
Three kinds exist:

``transform``
    left integral equals prefactor times right integral (or a bare
    prefactor) for each listed right side;
``vanishing``
    a 1-D integral that is zero; needs the deformed contour;
``fubini_pair``
    a double integral whose two iterated orders disagree.
"""

from __future__ import annotations

import functools
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from ..efun import Base, egamma
from ..ispec import (
    IntegralSpec,
    PrefactorSpec,
    SpecError,
    build_density,
    contour_ok,
    eval_integral,
    eval_prefactor,
    expand_loops,
    fill_template,
    prefactor_from_json,
    spec_from_json,
    validate_balancing,
)
from ..quad import (
    DeformationError,
    PoleRegistry,
    QuadPolicy,
    QuadResult,
    integrate_converged,
    integrate_deformed_1d,
)
from ..sampler import SampleWindow, WindowInfeasible, sample_params
from ..symalg import Monomial, Relation, RelationSet, mono_eval

__all__ = [
    "CatalogEntry",
    "Side",
    "Instance",
    "VerificationReport",
    "AdmissibilityError",
    "list_identities",
    "get_entry",
    "instantiate",
    "verify",
]


class AdmissibilityError(ValueError):
    """The requested parameters cannot be evaluated on unit-circle contours."""


@dataclass(frozen=True)
class Side:
    label: str
    rhs: IntegralSpec | None
    prefactor: PrefactorSpec


def _relation_from_json(doc: Mapping, env: Mapping, sign: int) -> Relation:
    rel = Relation.parse(fill_template(doc["relation"], env), fill_template(doc["eliminate"], env), sign)
    prod = doc.get("lhs_prod")
    if prod:
        extra = Monomial.one()
        for e in expand_loops(prod.get("for", ()), env):
            extra = extra * Monomial.parse(fill_template(prod["coef"], e))
        rel = Relation(rel.lhs * extra, rel.rhs, rel.eliminate, sign)
    return rel


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    doc: dict = field(repr=False, compare=False, hash=False)

    @property
    def title(self) -> str:
        return self.doc.get("title", self.name)

    @property
    def anchor(self) -> str:
        return self.doc.get("anchor", "")

    @property
    def kind(self) -> str:
        return self.doc.get("kind", "transform")

    @property
    def supported(self) -> list:
        """List of (n, m) pairs; m is None for one-index entries."""
        if "nm" in self.doc:
            return [tuple(x) for x in self.doc["nm"]]
        return [(n, None) for n in self.doc.get("n", [1])]

    @property
    def real_base(self) -> bool:
        return bool(self.doc.get("real_base", False))

    @property
    def signed(self) -> tuple:
        return tuple(r["eliminate"] for r in self.doc.get("relations", ()) if r.get("signed"))

    def default_base(self) -> Base:
        b = self.doc.get("base", {"p": 0.2, "q": 0.2})
        return Base(complex(b["p"]), complex(b["q"]))

    def meta(self) -> dict:
        return {"name": self.name, "title": self.title, "anchor": self.anchor, "kind": self.kind,
                "supported": [list(s) if s[1] is not None else [s[0]] for s in self.supported],
                "signed": list(self.signed), "real_base": self.real_base}

    def _env(self, n: int, m: int | None) -> dict:
        if (n, m) not in self.supported:
            raise ValueError(f"{self.name} supports {self.supported}, not (n={n}, m={m})")
        return {"n": n, "m": 0 if m is None else m}

    def relations(self, n: int, m: int | None = None, signs: Mapping[str, int] | None = None) -> RelationSet:
        env = self._env(n, m)
        signs = signs or {}
        rels = []
        for r in self.doc.get("relations", ()):
            sign = int(signs.get(r["eliminate"], 1)) if r.get("signed") else 1
            rels.append(_relation_from_json(r, env, sign))
        return RelationSet(tuple(rels))

    def free(self, n: int, m: int | None = None) -> list:
        return [pw.name for pw in self.window(n, m).params]

    def window(self, n: int, m: int | None = None) -> SampleWindow:
        return SampleWindow.from_json(self.doc.get("window", {}), self._env(n, m))

    def tolerance(self, n: int, m: int | None = None) -> float:
        tol = self.doc.get("tolerance", {})
        key = str(n) if m is None else f"{n},{m}"
        return float(tol.get(key, tol.get("default", 1e-8)))

    def lhs(self, n: int, m: int | None = None, signs=None) -> IntegralSpec:
        env = self._env(n, m)
        return spec_from_json(self.doc["lhs"], env, self.relations(n, m, signs), f"{self.name}:lhs")

    def sides(self, n: int, m: int | None = None, signs=None) -> list:
        env = self._env(n, m)
        rels = self.relations(n, m, signs)
        out = []
        for i, s in enumerate(self.doc.get("sides", ())):
            label = s.get("label", f"side{i + 1}")
            rhs = spec_from_json(s["rhs"], env, rels, f"{self.name}:{label}") if s.get("rhs") else None
            out.append(Side(label, rhs, prefactor_from_json(s.get("prefactor"), env)))
        return out

    def specs(self, n: int, m: int | None = None, signs=None) -> list:
        return [self.lhs(n, m, signs)] + [s.rhs for s in self.sides(n, m, signs) if s.rhs is not None]

    def deformed_ok(self, params: Mapping[str, complex], base: Base, margin: float) -> bool:
        """Every single-variable coefficient stays at least ``margin`` away from the unit circle."""
        a = dict(params, p=complex(base.p), q=complex(base.q))
        for spec in self.specs(1):
            for f in spec.factors:
                if f.slots and abs(abs(mono_eval(f.coefficient, a)) - 1.0) <= margin:
                    return False
        return True


@functools.lru_cache(maxsize=None)
def _load() -> tuple:
    entries = []
    for res in sorted(resources.files(__name__).iterdir(), key=lambda r: r.name):
        if res.name.endswith(".json"):
            doc = json.loads(res.read_text())
            entries.append(CatalogEntry(doc["name"], doc))
    entries.sort(key=lambda e: (e.doc.get("order", 1000), e.name))
    return tuple(entries)


def list_identities() -> list:
    return [e.meta() for e in _load()]


def get_entry(name: str) -> CatalogEntry:
    for e in _load():
        if e.name == name:
            return e
    raise KeyError(f"unknown identity {name!r}; known: {[e.name for e in _load()]}")


# ---------------------------------------------------------------- instances


@dataclass
class Instance:
    entry: CatalogEntry
    n: int
    m: int | None
    base: Base
    params: dict
    signs: dict
    seed: int | None
    relations: RelationSet
    lhs: IntegralSpec
    sides: list
    contour: dict = field(default_factory=dict)

    def param_table(self) -> dict:
        """name -> (monomial string, value); dependent names show their solved form."""
        out = {}
        for k in sorted(self.params):
            text = str(self.relations.solution(k)) if k in self.relations.eliminated else k
            v = complex(self.params[k])
            out[k] = {"monomial": text, "value": [v.real, v.imag]}
        return out


def _check_base(entry: CatalogEntry, base: Base) -> None:
    if entry.real_base and not base.is_real_positive:
        raise ValueError(f"{entry.name} needs real p, q in (0, 1) to fix square-root branches")
    if not (0 < abs(base.p) < 1 and 0 < abs(base.q) < 1):
        raise ValueError("need 0 < |p|, |q| < 1")


def instantiate(name: str, n: int = 1, m: int | None = None, base: Base | None = None,
                params: Mapping[str, complex] | None = None, seed: int | None = None,
                signs: Mapping[str, int] | None = None) -> Instance:
    """Resolve an entry at (n, m) from explicit free parameters or a seed."""
    entry = get_entry(name) if isinstance(name, str) else name
    base = base or entry.default_base()
    _check_base(entry, base)
    signs = {k: int(v) for k, v in (signs or {}).items()}
    for k, v in signs.items():
        if k not in entry.signed or v not in (1, -1):
            raise ValueError(f"{entry.name}: no sign flag {k!r}={v}")
    if m is None and entry.supported and entry.supported[0][1] is not None:
        raise ValueError(f"{entry.name} needs m")
    rels = entry.relations(n, m, signs)
    if params is None:
        params = sample_params(entry, n, base, 0 if seed is None else seed, m=m, signs=signs)
        seed = 0 if seed is None else seed
    else:
        params = _resolve(entry, n, m, base, params, rels)
        seed = None
    lhs, sides = entry.lhs(n, m, signs), entry.sides(n, m, signs)
    inst = Instance(entry, n, m, base, dict(params), signs, seed, rels, lhs, sides)
    _check_instance(inst)
    return inst


def _resolve(entry, n, m, base, given, rels) -> dict:
    free = entry.free(n, m)
    missing = [g for g in free if g not in given]
    if missing:
        raise ValueError(f"{entry.name}: missing free parameters {missing}")
    a = {"p": complex(base.p), "q": complex(base.q)}
    a.update({g: complex(given[g]) for g in free})
    for r in rels:
        a[r.eliminate] = complex(mono_eval(rels.solution(r.eliminate), a))
        if r.eliminate in given and abs(complex(given[r.eliminate]) - a[r.eliminate]) > 1e-12 * abs(a[r.eliminate]):
            raise ValueError(f"{r.eliminate} given as {given[r.eliminate]} but balancing forces {a[r.eliminate]}")
    extra = sorted(set(given) - set(a))
    if extra:
        raise ValueError(f"{entry.name}: unknown parameters {extra}")
    return {k: v for k, v in a.items() if k not in ("p", "q")}


def _check_instance(inst: Instance) -> None:
    specs = [inst.lhs] + [s.rhs for s in inst.sides if s.rhs is not None]
    for s in specs:
        rep = validate_balancing(s, inst.params, inst.base, tol=1e-12)
        if not rep.ok:
            raise AdmissibilityError(f"balancing fails on {s.name}: {rep.violations}")
    if inst.entry.kind != "transform":
        return
    for s in specs:
        rep = contour_ok(s, inst.params, inst.base)
        inst.contour[s.name] = rep.min_margin
        if not rep.ok:
            raise AdmissibilityError(
                f"unit-circle contours not admissible for {s.name}; violations (factor, |coef|): {rep.violations}")


# ---------------------------------------------------------------- reports


@dataclass
class VerificationReport:
    identity: str
    n: int
    m: int | None
    base: Base
    seed: int | None
    signs: dict
    params: dict
    lhs: complex
    rhs: complex
    prefactor: complex
    abs_err: float
    rel_err: float
    tolerance: float
    grids: dict
    deltas: dict
    converged: bool
    seconds: float | None
    verdict: str
    sides: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def c(z):
            z = complex(z)
            return [z.real, z.imag]

        out = {
            "identity": self.identity, "n": self.n, "m": self.m,
            "base": {"p": c(self.base.p), "q": c(self.base.q)},
            "seed": self.seed, "signs": dict(sorted(self.signs.items())), "params": self.params,
            "lhs": c(self.lhs), "rhs": c(self.rhs), "prefactor": c(self.prefactor),
            "rhs_times_prefactor": c(self.rhs * self.prefactor),
            "abs_err": self.abs_err, "rel_err": self.rel_err, "tolerance": self.tolerance,
            "grids": self.grids, "deltas": self.deltas, "converged": self.converged,
            "seconds": self.seconds, "verdict": self.verdict,
        }
        if self.sides:
            out["sides"] = self.sides
        if self.extra:
            out["extra"] = self.extra
        return out


def _verdict(converged: bool, err: float, tol: float) -> str:
    if not converged:
        return "no-converge"
    return "pass" if err <= tol else "fail"


def _grid_info(r: QuadResult) -> tuple:
    return [list(g) for g in r.grids_used], list(r.deltas)


def verify(inst: Instance, policy: QuadPolicy | None = None, timing: bool = True) -> VerificationReport:
    """Evaluate both sides of an instance and compare."""
    t0 = time.perf_counter()
    kind = inst.entry.kind
    if kind == "vanishing":
        rep = _verify_vanishing(inst, policy)
    elif kind == "fubini_pair":
        from .pairs import verify_pair

        rep = verify_pair(inst, policy)
    else:
        rep = _verify_transform(inst, policy)
    if inst.entry.doc.get("delegate"):
        from .pairs import delegate_check

        rep.extra["delegate"] = delegate_check(inst, policy)
    rep.seconds = round(time.perf_counter() - t0, 3) if timing else None
    return rep


def _base_report(inst: Instance, **kw) -> VerificationReport:
    return VerificationReport(identity=inst.entry.name, n=inst.n, m=inst.m, base=inst.base, seed=inst.seed,
                              signs=dict(inst.signs), params=inst.param_table(), seconds=None, **kw)


def _verify_transform(inst: Instance, policy: QuadPolicy | None) -> VerificationReport:
    L = eval_integral(inst.lhs, inst.params, inst.base, policy)
    grids, deltas = {}, {}
    grids["lhs"], deltas["lhs"] = _grid_info(L)
    converged = L.converged
    tol = inst.entry.tolerance(inst.n, inst.m)
    sides, worst = [], None
    for s in inst.sides:
        P = eval_prefactor(s.prefactor, inst.params, inst.base, inst.n, inst.m or 0)
        if s.rhs is not None:
            R = eval_integral(s.rhs, inst.params, inst.base, policy)
            grids[s.label], deltas[s.label] = _grid_info(R)
            converged = converged and R.converged
            rv, conv = R.value, R.converged
        else:
            rv, conv = 1.0 + 0j, True
        rhs_full = P * rv
        abs_err = abs(L.value - rhs_full)
        rel_err = abs_err / max(abs(L.value), abs(rhs_full))
        row = {"label": s.label, "rhs": [rv.real, rv.imag], "prefactor": [P.real, P.imag],
               "abs_err": abs_err, "rel_err": rel_err, "converged": conv and L.converged}
        sides.append(row)
        if worst is None or rel_err > worst[0]["rel_err"]:
            worst = (row, rv, P)
    row, rv, P = worst
    return _base_report(inst, lhs=L.value, rhs=rv, prefactor=P, abs_err=row["abs_err"], rel_err=row["rel_err"],
                        tolerance=tol, grids=grids, deltas=deltas, converged=converged,
                        verdict=_verdict(converged, row["rel_err"], tol),
                        sides=sides if len(sides) > 1 else [])


def _verify_vanishing(inst: Instance, policy: QuadPolicy | None) -> VerificationReport:
    density = build_density(inst.lhs, inst.params, inst.base)
    reg = density.enclosed_points()
    R = integrate_deformed_1d(density, reg, policy)
    terms = [abs(R.values[-1])] + [abs(2 * r["value"]) for r in R.residues]
    scale = max(terms)
    tol = inst.entry.tolerance(inst.n, inst.m)
    err = abs(R.value) / scale if scale > 0 else 0.0
    grids, deltas = _grid_info(R)
    rep = _base_report(inst, lhs=R.value, rhs=0j, prefactor=1 + 0j, abs_err=abs(R.value), rel_err=err,
                       tolerance=tol, grids={"lhs": grids}, deltas={"lhs": deltas}, converged=R.converged,
                       verdict=_verdict(R.converged, err, tol))
    rep.extra["scale"] = scale
    rep.extra["unit_circle_value"] = [R.values[-1].real, R.values[-1].imag]
    rep.extra["residues"] = QuadResult(R.value, 0.0, [], residues=R.residues).to_json()["residues"]
    return rep
