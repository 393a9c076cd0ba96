"""Machine-readable integral descriptions and their numeric evaluation.

An :class:`IntegralSpec` lists variable groups (each with a kernel) and
gamma factors whose arguments are a monomial coefficient times powers of the
integration variables.  Slot orbits follow the usual abbreviation: a slot
``{group: z, orbit: 1}`` on a group of size m stands for the product over all
m variables and both signs of the exponent.

JSON documents (schema 1) may contain templates: ``{expr}`` placeholders in
strings and ``for`` loops on factors.  Expressions are rational arithmetic in
``n``, ``m`` and loop variables.  A document without templates is a concrete
spec and round-trips through :func:`spec_to_json` / :func:`spec_from_json`.
"""

from __future__ import annotations

import ast
import itertools
import math
import operator
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .efun import Base, EllipticGammaPole, GammaVariant, egamma, rgamma, variant_base
from .kernels import GammaRecord, KernelSpec, eval_records, kernel_constant, kernel_records
from .quad import PoleRegistry, QuadPolicy, QuadResult, integrate_converged, pairwise_sum
from .symalg import Monomial, Relation, RelationSet, mono_eval

__all__ = [
    "SCHEMA_VERSION",
    "Slot",
    "FactorSpec",
    "FactorFamily",
    "VarGroup",
    "IntegralSpec",
    "PrefactorSpec",
    "Density",
    "BalancingReport",
    "ContourReport",
    "SpecError",
    "eval_expr",
    "fill_template",
    "expand_loops",
    "spec_from_json",
    "spec_to_json",
    "prefactor_from_json",
    "prefactor_to_json",
    "validate_balancing",
    "contour_ok",
    "build_density",
    "eval_integral",
    "eval_iterated",
    "eval_prefactor",
    "full_assignment",
]

SCHEMA_VERSION = 1


class SpecError(ValueError):
    pass


# ---------------------------------------------------------------- templates

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def eval_expr(text, env: Mapping[str, int | Fraction]) -> Fraction:
    """Evaluate a rational expression such as ``n-1`` or ``2*i+1/2``."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return Fraction(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise SpecError(f"unknown name {node.id!r} in expression {text!r}")
            return Fraction(env[node.id])
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            base, exp = ev(node.left), ev(node.right)
            if exp.denominator != 1:
                raise SpecError(f"non-integer power in {text!r}")
            return base ** int(exp)
        raise SpecError(f"unsupported syntax in expression {text!r}")

    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise SpecError(f"cannot parse expression {text!r}") from exc
    return ev(tree)


def _fmt(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def fill_template(text: str, env: Mapping) -> str:
    """Replace every ``{expr}`` by its rational value."""
    out, i = [], 0
    while i < len(text):
        j = text.find("{", i)
        if j < 0:
            out.append(text[i:])
            break
        k = text.find("}", j)
        if k < 0:
            raise SpecError(f"unbalanced brace in {text!r}")
        out.append(text[i:j])
        out.append(_fmt(eval_expr(text[j + 1:k], env)))
        i = k + 1
    return "".join(out)


def _int_expr(text, env) -> int:
    v = eval_expr(text, env)
    if v.denominator != 1:
        raise SpecError(f"expression {text!r} is not an integer ({v})")
    return int(v)


def expand_loops(loops: Sequence[Mapping], env: Mapping) -> list:
    """All environments produced by nested loops (outermost first)."""
    envs = [dict(env)]
    for loop in loops or ():
        nxt = []
        for e in envs:
            if "pairs" in loop:
                a, b = loop["pairs"]
                lo, hi = _int_expr(loop["from"], e), _int_expr(loop["to"], e)
                for r, s in itertools.combinations(range(lo, hi + 1), 2):
                    nxt.append({**e, a: r, b: s})
            elif "values" in loop:
                for v in loop["values"]:
                    nxt.append({**e, loop["var"]: eval_expr(v, e)})
            else:
                lo, hi = _int_expr(loop["from"], e), _int_expr(loop["to"], e)
                for v in range(lo, hi + 1):
                    nxt.append({**e, loop["var"]: v})
        envs = nxt
    return envs


# ------------------------------------------------------------------ model


@dataclass(frozen=True)
class Slot:
    group: str
    orbit: int = 1
    index: int | None = None

    def __post_init__(self):
        if self.orbit not in (1, 2):
            raise SpecError("slot orbit must be 1 (z^{+-1}) or 2 (z^{+-2})")


@dataclass(frozen=True)
class FactorSpec:
    coefficient: Monomial
    variant: GammaVariant = GammaVariant.PQ
    slots: tuple = ()
    power: int = 1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", GammaVariant(self.variant))
        object.__setattr__(self, "slots", tuple(self.slots))
        if len(self.slots) > 2:
            raise SpecError("a factor couples at most two variables")
        if self.power not in (1, -1):
            raise SpecError("factor power must be +1 or -1")

    def describe(self) -> str:
        if self.label:
            return self.label
        head = {"pq": "G", "pq2": "G~", "half": "G^"}[self.variant.value]
        vars_ = " ".join(f"{s.group}{'' if s.index is None else s.index}^(+-{s.orbit})" for s in self.slots)
        inner = f"{self.coefficient}" + (f" {vars_}" if vars_ else "")
        return f"{head}({inner})" + ("^-1" if self.power == -1 else "")


@dataclass(frozen=True)
class FactorFamily:
    """prod_{i=0}^{count-1} Gamma(base * step^i); ``count`` is an expression in n, m."""

    base: Monomial
    step: Monomial
    count: str
    variant: GammaVariant = GammaVariant.PQ
    power: int = 1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", GammaVariant(self.variant))

    def expand(self, n: int, m: int = 0) -> list:
        k = _int_expr(self.count, {"n": n, "m": m})
        return [FactorSpec(self.base * self.step ** i, self.variant, (), self.power, self.label) for i in range(max(k, 0))]


@dataclass(frozen=True)
class VarGroup:
    name: str
    dim: int
    kernel: KernelSpec

    def __post_init__(self):
        if self.dim < 0:
            raise SpecError("group dimension must be >= 0")
        if self.kernel.n != self.dim:
            raise SpecError(f"group {self.name}: kernel dimension {self.kernel.n} != {self.dim}")


@dataclass(frozen=True)
class IntegralSpec:
    groups: tuple
    factors: tuple
    balancing: RelationSet = field(default_factory=RelationSet)
    free: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise SpecError("group names must be unique")
        dims = {g.name: g.dim for g in self.groups}
        for f in self.factors:
            for s in f.slots:
                if s.group not in dims:
                    raise SpecError(f"factor {f.describe()} refers to unknown group {s.group!r}")
                if s.index is not None and not (0 <= s.index < max(dims[s.group], 1)):
                    raise SpecError(f"factor {f.describe()}: index {s.index} out of range for {s.group}")
            if len(f.slots) == 2 and f.slots[0].group == f.slots[1].group:
                a, b = f.slots
                if (a.index is None) != (b.index is None) or (a.index is not None and a.index == b.index):
                    raise SpecError("a factor coupling a group to itself needs two distinct indices or none")

    @property
    def dim(self) -> int:
        return sum(g.dim for g in self.groups)

    def axes(self) -> dict:
        """group name -> list of axis numbers (0-dimensional groups get none)."""
        out, k = {}, 0
        for g in self.groups:
            out[g.name] = list(range(k, k + g.dim))
            k += g.dim
        return out

    def generators(self) -> set:
        gens = set()
        for f in self.factors:
            gens.update(f.coefficient.generators)
        for g in self.groups:
            if g.kernel.t is not None:
                gens.update(g.kernel.t.generators)
        return gens


@dataclass(frozen=True)
class PrefactorSpec:
    factors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def expand(self, n: int, m: int = 0) -> list:
        out = []
        for f in self.factors:
            if isinstance(f, FactorFamily):
                out.extend(f.expand(n, m))
            else:
                if f.slots:
                    raise SpecError("prefactor factors take no variables")
                out.append(f)
        return out


# ------------------------------------------------------------------ JSON


def _kernel_from_json(doc, env) -> KernelSpec:
    t = doc.get("t")
    return KernelSpec(doc.get("family", "I"), 0, Monomial.parse(fill_template(t, env)) if t else None,
                      doc.get("variant", "pq"))


def spec_from_json(doc: Mapping, env: Mapping | None = None, balancing: RelationSet | None = None,
                   name: str = "") -> IntegralSpec:
    """Build an IntegralSpec from a (possibly templated) JSON document."""
    env = dict(env or {})
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SpecError(f"unsupported schema version {doc.get('schema')}")
    groups = []
    for g in doc["groups"]:
        dim = _int_expr(g.get("dim", 1), env)
        k = _kernel_from_json(g.get("kernel", {}), env)
        groups.append(VarGroup(g["name"], dim, KernelSpec(k.family, dim, k.t, k.variant)))
    factors = []
    for f in doc.get("factors", ()):
        for e in expand_loops(f.get("for", ()), env):
            coef = Monomial.parse(fill_template(f["coef"], e))
            slots = tuple(Slot(s["group"], int(s.get("orbit", 1)),
                               None if s.get("index") is None else _int_expr(s["index"], e))
                          for s in f.get("slots", ()))
            label = fill_template(f["label"], e) if "label" in f else ""
            factors.append(FactorSpec(coef, f.get("variant", "pq"), slots, int(f.get("power", 1)), label))
    if balancing is None:
        balancing = RelationSet(tuple(Relation.parse(fill_template(r["relation"], env), r["eliminate"])
                                      for r in doc.get("balancing", ())))
    return IntegralSpec(tuple(groups), tuple(factors), balancing, tuple(doc.get("free", ())),
                        name or doc.get("name", ""))


def spec_to_json(spec: IntegralSpec) -> dict:
    groups = []
    for g in spec.groups:
        k = {"family": g.kernel.family, "variant": g.kernel.variant.value}
        if g.kernel.t is not None:
            k["t"] = str(g.kernel.t)
        groups.append({"name": g.name, "dim": g.dim, "kernel": k})
    factors = []
    for f in spec.factors:
        d = {"coef": str(f.coefficient), "variant": f.variant.value,
             "slots": [{"group": s.group, "orbit": s.orbit, **({} if s.index is None else {"index": s.index})}
                       for s in f.slots]}
        if f.power != 1:
            d["power"] = f.power
        if f.label:
            d["label"] = f.label
        factors.append(d)
    bal = [{"relation": f"{r.lhs} = {r.rhs}", "eliminate": r.eliminate} for r in spec.balancing]
    return {"schema": SCHEMA_VERSION, "name": spec.name, "groups": groups, "factors": factors,
            "balancing": bal, "free": list(spec.free)}


def prefactor_from_json(doc: Mapping | None, env: Mapping | None = None) -> PrefactorSpec:
    env = dict(env or {})
    items = []
    for f in (doc or {}).get("factors", ()):
        for e in expand_loops(f.get("for", ()), env):
            coef = Monomial.parse(fill_template(f["coef"], e))
            variant, power = f.get("variant", "pq"), int(f.get("power", 1))
            label = fill_template(f["label"], e) if "label" in f else ""
            fam = f.get("family")
            if fam:
                items.append(FactorFamily(coef, Monomial.parse(fill_template(fam["step"], e)),
                                          str(fam["count"]), variant, power, label))
            else:
                items.append(FactorSpec(coef, variant, (), power, label))
    return PrefactorSpec(tuple(items))


def prefactor_to_json(pre: PrefactorSpec) -> dict:
    out = []
    for f in pre.factors:
        if isinstance(f, FactorFamily):
            d = {"coef": str(f.base), "family": {"step": str(f.step), "count": f.count}}
        else:
            d = {"coef": str(f.coefficient)}
        d["variant"] = f.variant.value
        if f.power != 1:
            d["power"] = f.power
        out.append(d)
    return {"factors": out}


# ------------------------------------------------------------ assignments


def full_assignment(params: Mapping[str, complex], base: Base) -> dict:
    a = {k: complex(v) for k, v in params.items()}
    a.setdefault("p", complex(base.p))
    a.setdefault("q", complex(base.q))
    return a


@dataclass
class BalancingReport:
    ok: bool
    violations: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def validate_balancing(spec: IntegralSpec, params: Mapping[str, complex], base: Base,
                       tol: float = 1e-13) -> BalancingReport:
    """Check every balancing relation numerically (relative residual <= tol)."""
    a = full_assignment(params, base)
    viol, res = [], {}
    for r in spec.balancing:
        missing = [g for g in (r.lhs * r.rhs).generators if g not in a]
        missing += [g for g in (r.lhs / r.rhs).generators if g not in a and g not in missing]
        if missing:
            raise SpecError(f"relation {r} needs unassigned generators {sorted(set(missing))}")
        rr = r.residual(a)
        res[str(r)] = rr
        if not rr <= tol:
            viol.append((str(r), rr))
    return BalancingReport(not viol, viol, res)


@dataclass
class ContourReport:
    ok: bool
    violations: list = field(default_factory=list)
    margins: list = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        return min((m for _, m in self.margins), default=math.inf)

    def __bool__(self):
        return self.ok


def contour_ok(spec: IntegralSpec, params: Mapping[str, complex], base: Base, margin: float = 0.0) -> ContourReport:
    """Can every contour be the unit circle?  Needs |coef| < 1 - margin for every coupled factor.

    A margin entry is ``(description, 1 - |coef|)``.  Factors on
    0-dimensional groups and reciprocal factors impose nothing; family II
    kernels of dimension >= 2 need |t| < 1.
    """
    a = full_assignment(params, base)
    dims = {g.name: g.dim for g in spec.groups}
    margins, viol = [], []
    for f in spec.factors:
        if f.power < 0 or not f.slots or any(dims[s.group] == 0 for s in f.slots):
            continue
        if len(f.slots) == 2 and f.slots[0].group == f.slots[1].group and dims[f.slots[0].group] < 2:
            continue
        c = abs(mono_eval(f.coefficient, a))
        margins.append((f.describe(), 1.0 - c))
    for g in spec.groups:
        if g.kernel.family == "II" and g.dim >= 2:
            margins.append((f"kernel t of group {g.name} ({g.kernel.t})", 1.0 - abs(mono_eval(g.kernel.t, a))))
    for desc, mg in margins:
        if not mg > margin:
            viol.append((desc, 1.0 - mg))
    return ContourReport(not viol, viol, margins)


# ---------------------------------------------------------------- density


def _roots(w: complex, k: int) -> list:
    r = complex(w) ** (1.0 / k) if k > 1 else complex(w)
    return [r * np.exp(2j * np.pi * j / k) for j in range(k)]


class Density:
    """Product of gamma records times a constant, on ``dim`` torus coordinates."""

    def __init__(self, dim: int, records: Sequence[GammaRecord], constant: complex = 1.0,
                 axis_names: Sequence[str] | None = None):
        self.dim = dim
        self.records = list(records)
        self.constant = complex(constant)
        self.axis_names = list(axis_names) if axis_names is not None else [f"x{i}" for i in range(dim)]
        self._tables: dict = {}
        self._lock = threading.Lock()

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.ndim == 1:
            z = z.reshape(-1, self.dim) if self.dim else z.reshape(-1, 0)
        return self.constant * eval_records(self.records, z)

    # grid evaluation through per-coefficient tables on Z_N
    def _table(self, key, N):
        p, q, coef, recip = key
        w = np.exp(2j * np.pi * np.arange(N) / N)
        args = coef * w
        return rgamma(args, p, q) if recip else egamma(args, p, q)

    def tables(self, N: int, workers: int = 1) -> dict:
        keys = sorted({r.table_key() for r in self.records}, key=repr)
        with self._lock:
            missing = [k for k in keys if (k, N) not in self._tables]
        if missing:
            if workers > 1 and len(missing) > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    vals = list(pool.map(lambda k: self._table(k, N), missing))
            else:
                vals = [self._table(k, N) for k in missing]
            with self._lock:
                for k, v in zip(missing, vals):
                    self._tables[(k, N)] = v
        return {k: self._tables[(k, N)] for k in keys}

    def grid_values(self, sizes: Sequence[int], workers: int = 1) -> np.ndarray:
        sizes = tuple(sizes)
        if len(sizes) != self.dim:
            raise ValueError("grid dimension mismatch")
        if self.dim == 0:
            return np.array([self.constant])
        N = sizes[0]
        if any(s != N for s in sizes):
            raise ValueError("table evaluation needs the same point count in every dimension")
        tabs = self.tables(N, workers)
        k = np.arange(N)
        pieces: dict = {}
        for r in self.records:
            axes = tuple(a for a, _ in r.axes)
            T = tabs[r.table_key()]
            if len(axes) == 1:
                idx = (r.axes[0][1] * k) % N
            else:
                (a1, e1), (a2, e2) = r.axes
                idx = (e1 * k[:, None] + e2 * k[None, :]) % N
                if a1 > a2:
                    idx = idx.T
                    axes = (a2, a1)
            vals = T[idx]
            if axes in pieces:
                pieces[axes] = pieces[axes] * vals
            else:
                pieces[axes] = vals
        out = np.full((N,) * self.dim, self.constant, dtype=complex)
        for axes, vals in sorted(pieces.items()):
            shape = [1] * self.dim
            for a in axes:
                shape[a] = N
            out = out * vals.reshape(shape)
        return out

    # restriction and pole bookkeeping
    def section(self, axis: int, value: complex) -> "Density":
        """Fix coordinate ``axis`` to ``value``; returns a density on the other coordinates."""
        value = complex(value)
        const = self.constant
        recs = []
        for r in self.records:
            coef, axes = r.coef, []
            for a, e in r.axes:
                if a == axis:
                    coef = coef * value ** e
                else:
                    axes.append((a - 1 if a > axis else a, e))
            if axes:
                recs.append(GammaRecord(r.p, r.q, coef, tuple(axes), r.reciprocal))
            else:
                const *= complex(r.evaluate(coef))
        names = [n for i, n in enumerate(self.axis_names) if i != axis]
        return Density(self.dim - 1, recs, const, names)

    def enclosed_points(self, only_records: Sequence[GammaRecord] | None = None) -> PoleRegistry:
        """Points c p^a q^b (or roots for z^{-2}) outside the unit circle, for a 1-D density."""
        if self.dim != 1:
            raise ValueError("pole registries are built for 1-D densities only")
        reg = PoleRegistry()
        seen = []
        for r in (self.records if only_records is None else only_records):
            (ax, e), = r.axes
            if r.reciprocal or e > 0:
                continue
            ap, aq = abs(r.p), abs(r.q)
            a = 0
            while abs(r.coef) * ap ** a > 1.0:
                b = 0
                while abs(r.coef) * ap ** a * aq ** b > 1.0:
                    w = r.coef * r.p ** a * r.q ** b
                    for z in _roots(w, -e):
                        if abs(z) > 1.0 and not any(abs(z - s) <= 1e-12 * abs(z) for s in seen):
                            seen.append(z)
                            reg.add(z, f"Gamma({r.coef:.6g} z^{e}) at p^{a} q^{b}")
                    b += 1
                a += 1
        reg.avoid = self.singularities(max((abs(e.location) for e in reg.poles), default=1.0) * 2 + 1)
        return reg

    def singularities(self, rmax: float) -> list:
        """Poles of individual 1-D records in the annulus 1/rmax <= |z| <= rmax."""
        out = []
        for r in self.records:
            (_, e), = r.axes
            k = abs(e)
            lo, hi = abs(r.coef) * rmax ** -k, abs(r.coef) * rmax ** k
            ap, aq = abs(r.p), abs(r.q)
            xs = []
            if r.reciprocal:
                # zeros of Gamma: X = p^(a+1) q^(b+1), shrinking in a and b
                a = 0
                while ap ** (a + 1) * aq >= lo:
                    b = 0
                    while ap ** (a + 1) * aq ** (b + 1) >= lo:
                        xs.append(r.p ** (a + 1) * r.q ** (b + 1))
                        b += 1
                    a += 1
            else:
                # poles of Gamma: X = p^-a q^-b, growing in a and b
                a = 0
                while ap ** -a <= hi:
                    b = 0
                    while ap ** -a * aq ** -b <= hi:
                        xs.append(r.p ** -a * r.q ** -b)
                        b += 1
                    a += 1
            for X in xs:
                if not lo <= abs(X) <= hi:
                    continue
                w = X / r.coef if e > 0 else r.coef / X
                out.extend(_roots(w, k))
        return out


def _slot_axes(spec_axes: Mapping[str, list], slot: Slot) -> list:
    ax = spec_axes[slot.group]
    return list(ax) if slot.index is None else [ax[slot.index]]


def _factor_records(f: FactorSpec, coef: complex, b: Base, spec_axes: Mapping[str, list]) -> list:
    recip = f.power < 0
    if len(f.slots) == 1:
        s, = f.slots
        return [GammaRecord(b.p, b.q, coef, ((a, sg * s.orbit),), recip)
                for a in _slot_axes(spec_axes, s) for sg in (1, -1)]
    s1, s2 = f.slots
    A, B = _slot_axes(spec_axes, s1), _slot_axes(spec_axes, s2)
    if s1.group == s2.group and s1.index is None:
        pairs = list(itertools.combinations(A, 2))
    else:
        pairs = [(x, y) for x in A for y in B if x != y]
    return [GammaRecord(b.p, b.q, coef, ((x, sg * s1.orbit), (y, tg * s2.orbit)), recip)
            for x, y in pairs for sg in (1, -1) for tg in (1, -1)]


def build_density(spec: IntegralSpec, params: Mapping[str, complex], base: Base) -> Density:
    """Assemble kernels and expanded gamma factors into one :class:`Density`.

    Each factor is evaluated in its own variant base.  Factors touching a
    0-dimensional group are empty products and contribute 1.
    """
    a = full_assignment(params, base)
    spec_axes = spec.axes()
    const = 1.0 + 0j
    recs: list = []
    for g in spec.groups:
        if g.dim == 0:
            continue
        const *= kernel_constant(g.kernel, a, base)
        recs.extend(kernel_records(g.kernel, spec_axes[g.name], a, base))
    dims = {g.name: g.dim for g in spec.groups}
    for f in spec.factors:
        b = variant_base(base, f.variant)
        coef = complex(mono_eval(f.coefficient, a))
        if not f.slots:
            v = egamma(coef, b.p, b.q)
            const *= v if f.power > 0 else 1.0 / v
            continue
        if any(dims[s.group] == 0 for s in f.slots):
            continue
        recs.extend(_factor_records(f, coef, b, spec_axes))
    names = [f"{g.name}{i + 1}" for g in spec.groups for i in range(g.dim)]
    return Density(spec.dim, recs, const, names)


def eval_integral(spec: IntegralSpec, params: Mapping[str, complex], base: Base,
                  policy: QuadPolicy | None = None, check_contour: bool = True) -> QuadResult:
    """Torus quadrature of the whole spec with grid doubling.

    Unit-circle quadrature only gives the integral when every contour may be
    the unit circle, so by default a failing :func:`contour_ok` is an error.
    """
    if check_contour:
        rep = contour_ok(spec, params, base)
        if not rep.ok:
            raise SpecError(f"unit-circle contours are not admissible: {rep.violations}")
    density = build_density(spec, params, base)
    return integrate_converged(density, spec.dim, policy)


def _pairwise_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    while arr.shape[axis] > 1:
        h = arr.shape[axis] // 2
        arr = np.take(arr, range(h), axis=axis) + np.take(arr, range(h, 2 * h), axis=axis)
    return arr


def eval_iterated(spec: IntegralSpec, params: Mapping[str, complex], base: Base, N: int,
                  order: Sequence[str] | None = None) -> complex:
    """Nested averages on an N-point grid, groups listed outermost first."""
    order = list(order) if order is not None else [g.name for g in spec.groups]
    if sorted(order) != sorted(g.name for g in spec.groups):
        raise SpecError("order must list every group exactly once")
    density = build_density(spec, params, base)
    if spec.dim == 0:
        return density.constant
    vals = density.grid_values((N,) * spec.dim)
    spec_axes = spec.axes()
    for name in reversed(order):
        for ax in spec_axes[name]:
            vals = _pairwise_axis(vals, ax) / N
    return complex(vals.ravel()[0])


def eval_prefactor(pre: PrefactorSpec, params: Mapping[str, complex], base: Base, n: int = 1, m: int = 0) -> complex:
    """Product of the prefactor's gammas, with families expanded at (n, m)."""
    a = full_assignment(params, base)
    value = 1.0 + 0j
    for f in pre.expand(n, m):
        b = variant_base(base, f.variant)
        x = complex(mono_eval(f.coefficient, a))
        try:
            g = egamma(x, b.p, b.q)
        except EllipticGammaPole as exc:
            raise EllipticGammaPole(exc.x, exc.pole) from None
        value *= g if f.power > 0 else 1.0 / g
    return value
