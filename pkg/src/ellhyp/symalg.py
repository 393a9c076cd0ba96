"""Exact multiplicative algebra of parameter monomials.

A :class:`Monomial` is ``zeta8^k * prod g^e`` with rational exponents whose
denominators divide 8 and a phase in the group of 8th roots of unity.  The
string grammar is ``token * token * ...`` where a token is

* a phase: ``-1``, ``i``, ``-i`` or ``zeta8^k``,
* ``1`` (ignored),
* a generator ``g`` or ``g^e`` with ``e`` an integer or ``a/b`` (optionally
  negative, optionally parenthesised),
* a generator prefixed by ``-`` (shorthand for ``-1 * g``).

``str(m)`` gives the canonical form and ``Monomial.parse(str(m)) == m``.
"""

from __future__ import annotations

import cmath
import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "DENOM",
    "DenominatorOverflow",
    "Monomial",
    "Relation",
    "RelationSet",
    "Lattice",
    "mono_mul",
    "mono_root",
    "mono_eval",
    "relations_reduce",
    "lattice_membership",
    "lattice_exponents",
]

DENOM = 8


class DenominatorOverflow(ValueError):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _check_denominator(value: Fraction, what: str) -> Fraction:
    if DENOM % value.denominator:
        raise DenominatorOverflow(f"{what} {value} has a denominator that does not divide {DENOM}")
    return value


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_SPLIT_NUM = re.compile(r"([A-Za-z_]+)(\d*)$")


def _gen_key(name: str):
    order = {"p": 0, "q": 1, "t": 2}
    m = _SPLIT_NUM.match(name)
    stem, digits = (m.group(1), m.group(2)) if m else (name, "")
    return (order.get(name, 3), stem, int(digits) if digits else -1, name)


@dataclass(frozen=True)
class Monomial:
    phase: Fraction = Fraction(0)
    exps: tuple = field(default=())

    def __post_init__(self):
        phase = _check_denominator(_frac(self.phase), "phase") % 1
        object.__setattr__(self, "phase", phase)
        clean = {}
        for name, e in (self.exps.items() if isinstance(self.exps, Mapping) else self.exps):
            if not _NAME_RE.match(name) or name == "zeta8":
                raise ValueError(f"bad generator name {name!r}")
            e = _check_denominator(_frac(e), f"exponent of {name}")
            clean[name] = clean.get(name, Fraction(0)) + e
        items = tuple(sorted(((k, v) for k, v in clean.items() if v != 0), key=lambda kv: _gen_key(kv[0])))
        object.__setattr__(self, "exps", items)

    # construction helpers
    @classmethod
    def one(cls) -> "Monomial":
        return cls()

    @classmethod
    def gen(cls, name: str, exponent=1) -> "Monomial":
        return cls(Fraction(0), ((name, _frac(exponent)),))

    @classmethod
    def root_of_unity(cls, turns) -> "Monomial":
        return cls(_frac(turns))

    @classmethod
    def parse(cls, text: str) -> "Monomial":
        return _parse(text)

    # queries
    @property
    def exponents(self) -> dict:
        return dict(self.exps)

    def exponent(self, name: str) -> Fraction:
        return dict(self.exps).get(name, Fraction(0))

    @property
    def generators(self) -> tuple:
        return tuple(k for k, _ in self.exps)

    def is_one(self) -> bool:
        return self.phase == 0 and not self.exps

    # algebra
    def __mul__(self, other: "Monomial") -> "Monomial":
        if not isinstance(other, Monomial):
            return NotImplemented
        e = dict(self.exps)
        for k, v in other.exps:
            e[k] = e.get(k, Fraction(0)) + v
        return Monomial(self.phase + other.phase, e)

    def __truediv__(self, other: "Monomial") -> "Monomial":
        if not isinstance(other, Monomial):
            return NotImplemented
        return self * other.inverse()

    def inverse(self) -> "Monomial":
        return Monomial(-self.phase, {k: -v for k, v in self.exps})

    def __pow__(self, k) -> "Monomial":
        k = _frac(k)
        if k.denominator != 1:
            raise ValueError("use root() for fractional powers")
        return Monomial(self.phase * k, {g: v * k for g, v in self.exps})

    def root(self, k: int) -> "Monomial":
        """Principal k-th root: exponents / k, phase / k taken in [0, 1/k)."""
        if k <= 0:
            raise ValueError("root order must be positive")
        phase = self.phase / k
        exps = {g: v / k for g, v in self.exps}
        if DENOM % phase.denominator:
            raise DenominatorOverflow(f"{k}-th root of phase {self.phase} leaves the 8th roots of unity")
        for g, v in exps.items():
            if DENOM % v.denominator:
                raise DenominatorOverflow(f"{k}-th root of {self}: exponent of {g} becomes {v}")
        return Monomial(phase, exps)

    def substitute(self, name: str, value: "Monomial") -> "Monomial":
        e = self.exponent(name)
        if e == 0:
            return self
        rest = Monomial(self.phase, {g: v for g, v in self.exps if g != name})
        if e.denominator == 1:
            return rest * value ** e
        return rest * (value ** e.numerator).root(e.denominator)

    def evaluate(self, assignment: Mapping[str, complex]) -> complex:
        return mono_eval(self, assignment)

    # formatting
    def __str__(self) -> str:
        parts = []
        if self.phase:
            parts.append(_PHASE_NAMES.get(self.phase, f"zeta8^{int(self.phase * DENOM)}"))
        for g, v in self.exps:
            if v == 1:
                parts.append(g)
            elif v.denominator == 1:
                parts.append(f"{g}^{v.numerator}")
            else:
                parts.append(f"{g}^{v.numerator}/{v.denominator}")
        return " * ".join(parts) if parts else "1"

    def __repr__(self) -> str:
        return f"Monomial({str(self)!r})"


_EXACT_PHASES = {Fraction(0): 1 + 0j, Fraction(1, 2): -1 + 0j, Fraction(1, 4): 1j, Fraction(3, 4): -1j}
_PHASE_NAMES = {Fraction(1, 2): "-1", Fraction(1, 4): "i", Fraction(3, 4): "-i"}
_PHASE_TOKENS = {"-1": Fraction(1, 2), "-": Fraction(1, 2), "i": Fraction(1, 4), "-i": Fraction(3, 4)}
_TOKEN_RE = re.compile(r"^(-?)([A-Za-z_][A-Za-z0-9_]*)(?:\^\(?(-?\d+(?:/\d+)?)\)?)?$")


def _parse(text: str) -> Monomial:
    phase = Fraction(0)
    exps: dict = {}
    for raw in text.split("*"):
        tok = raw.strip().replace(" ", "")
        if not tok:
            raise ValueError(f"empty factor in monomial {text!r}")
        if tok == "1":
            continue
        if tok in _PHASE_TOKENS:
            phase += _PHASE_TOKENS[tok]
            continue
        m = _TOKEN_RE.match(tok)
        if not m:
            raise ValueError(f"cannot parse monomial factor {tok!r} in {text!r}")
        neg, name, exp = m.groups()
        e = Fraction(exp) if exp is not None else Fraction(1)
        if name == "zeta8":
            if e.denominator != 1:
                raise ValueError("zeta8 takes an integer exponent")
            phase += Fraction(e.numerator, DENOM) + (Fraction(1, 2) if neg else 0)
            continue
        if neg:
            phase += Fraction(1, 2)
        exps[name] = exps.get(name, Fraction(0)) + e
    return Monomial(phase, exps)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return a * b


def mono_root(m: Monomial, k: int) -> Monomial:
    return m.root(k)


def mono_eval(m: Monomial, assignment: Mapping[str, complex]) -> complex:
    """phase * prod x_g^e with x^e = exp(e Log x) (principal branch).

    Fixing the branch this way makes evaluation a group homomorphism for a
    fixed assignment.
    """
    value = _EXACT_PHASES.get(m.phase)
    if value is None:
        value = cmath.exp(2j * math.pi * float(m.phase))
    for g, e in m.exps:
        if g not in assignment:
            raise KeyError(f"generator {g!r} is not assigned")
        x = complex(assignment[g])
        if x == 0:
            raise ZeroDivisionError(f"generator {g!r} assigned zero")
        if e.denominator == 1:
            value *= x ** int(e)
        else:
            value *= cmath.exp(float(e) * cmath.log(x))
    return value


@dataclass(frozen=True)
class Relation:
    """``lhs = rhs`` solved for the generator ``eliminate``."""

    lhs: Monomial
    rhs: Monomial
    eliminate: str
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("relation sign must be +1 or -1")

    @classmethod
    def parse(cls, text: str, eliminate: str, sign: int = 1) -> "Relation":
        left, right = text.split("=")
        return cls(Monomial.parse(left), Monomial.parse(right), eliminate, sign)

    def solved(self) -> Monomial:
        """The expression the eliminated generator is replaced by.

        Roots are principal; ``sign = -1`` selects the negated root.
        """
        ratio = self.rhs / self.lhs
        e = -ratio.exponent(self.eliminate)  # ratio = g^(-e) * rest, relation is g^e = rest
        if e == 0:
            raise ValueError(f"relation {self} does not involve {self.eliminate!r}")
        rest = ratio * Monomial.gen(self.eliminate, e)
        if e.denominator != 1:
            raise DenominatorOverflow(f"cannot solve {self} for {self.eliminate!r}: fractional exponent {e}")
        k = int(e)
        if k < 0:
            rest, k = rest.inverse(), -k
        try:
            sol = rest.root(k) if k != 1 else rest
        except DenominatorOverflow as exc:
            raise DenominatorOverflow(f"cannot solve {self} for {self.eliminate!r}: {exc}") from None
        return sol * Monomial.root_of_unity(Fraction(1, 2)) if self.sign < 0 else sol

    def residual(self, assignment: Mapping[str, complex]) -> float:
        lhs, rhs = mono_eval(self.lhs, assignment), mono_eval(self.rhs, assignment)
        return abs(lhs - rhs) / max(abs(rhs), abs(lhs))

    def __str__(self) -> str:
        tag = f"solve for {self.eliminate}" + (", negative root" if self.sign < 0 else "")
        return f"{self.lhs} = {self.rhs}  [{tag}]"


@dataclass(frozen=True)
class RelationSet:
    relations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        names = [r.eliminate for r in self.relations]
        if len(set(names)) != len(names):
            raise ValueError("each relation must eliminate a distinct generator")
        object.__setattr__(self, "_solved", {r.eliminate: r.solved() for r in self.relations})

    def __iter__(self):
        return iter(self.relations)

    def __len__(self):
        return len(self.relations)

    @property
    def eliminated(self) -> tuple:
        return tuple(r.eliminate for r in self.relations)

    def solution(self, name: str) -> Monomial:
        return self._solved[name]


def relations_reduce(m: Monomial, rel: RelationSet | Iterable[Relation]) -> Monomial:
    """Substitute every eliminated generator by its solved expression (to a fixed point)."""
    if not isinstance(rel, RelationSet):
        rel = RelationSet(tuple(rel))
    for _ in range(len(rel) + 1):
        changed = False
        for r in rel:
            if m.exponent(r.eliminate) != 0:
                m = m.substitute(r.eliminate, rel.solution(r.eliminate))
                changed = True
        if not changed:
            return m
    raise ValueError("relations are cyclic: an eliminated generator reappears after substitution")


class Lattice(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"


def lattice_exponents(m: Monomial):
    """(a, b) with m = p^-a q^-b when m lies in p^{Z<=0} q^{Z<=0}, else None."""
    if m.phase != 0:
        return None
    a = b = 0
    for g, e in m.exps:
        if g not in ("p", "q") or e.denominator != 1 or e > 0:
            return None
        if g == "p":
            a = -int(e)
        else:
            b = -int(e)
    return a, b


def lattice_membership(m: Monomial) -> Lattice:
    return Lattice.INSIDE if lattice_exponents(m) is not None else Lattice.OUTSIDE
