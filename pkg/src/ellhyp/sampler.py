"""Reproducible random parameters satisfying balancing and contour windows.

Free parameters get a log-uniform modulus around a center (a monomial in
p, q, n and earlier parameters) and a uniform phase.  Dependent parameters
are solved from the balancing relations.  The RNG is Philox keyed by a hash
of (entry, n, m, seed), so a sample depends on nothing else.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .efun import Base
from .ispec import contour_ok, eval_expr, expand_loops, fill_template, validate_balancing
from .symalg import mono_eval

__all__ = [
    "ParamWindow",
    "SampleWindow",
    "WindowInfeasible",
    "rng_for",
    "sample_params",
    "acceptance_rate",
]


class WindowInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class ParamWindow:
    """Modulus = |center| * exp(U(-spread, spread)); phase uniform in [-phase, phase]."""

    name: str
    center: str
    spread: float = 0.1
    phase: float = math.pi


@dataclass(frozen=True)
class SampleWindow:
    params: tuple
    margin: float = 0.05
    base_max: float = 0.35
    bounded: tuple = ()
    deformed: bool = False

    def __post_init__(self):
        if self.margin < 0.05:
            raise ValueError("sampling margin must be at least 0.05")
        object.__setattr__(self, "params", tuple(self.params))

    @classmethod
    def from_json(cls, doc: Mapping, env: Mapping) -> "SampleWindow":
        params = []
        for item in doc.get("params", ()):
            for e in expand_loops(item.get("for", ()), env):
                params.append(ParamWindow(fill_template(item["name"], e), fill_template(item["center"], e),
                                          float(item.get("spread", 0.1)), float(item.get("phase", math.pi))))
        bounded = []
        for item in doc.get("bounded", ()):
            if isinstance(item, str):
                bounded.append(fill_template(item, env))
            else:
                bounded.extend(fill_template(item["name"], e) for e in expand_loops(item.get("for", ()), env))
        return cls(tuple(params), float(doc.get("margin", 0.05)), float(doc.get("base_max", 0.35)),
                   tuple(bounded), bool(doc.get("deformed", False)))


def center_modulus(text: str, assignment: Mapping[str, complex]) -> float:
    """|x| for a product like ``p^1/6 * t^-1/4 * 0.8``; any rational exponent is allowed."""
    log = 0.0
    for tok in text.split("*"):
        tok = tok.strip()
        name, _, exp = tok.partition("^")
        name = name.strip()
        e = float(eval_expr(exp.strip() or "1", {}))
        if name in assignment:
            log += e * math.log(abs(assignment[name]))
        else:
            log += e * math.log(abs(float(eval_expr(name, {})) if "." not in name else float(name)))
    return math.exp(log)


def rng_for(entry: str, n: int, m: int | None, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{entry}|{n}|{m}|{seed}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def _draw(window: SampleWindow, assignment: dict, rng: np.random.Generator) -> dict:
    a = dict(assignment)
    for pw in window.params:
        c = center_modulus(pw.center, a)
        mod = c * math.exp(rng.uniform(-pw.spread, pw.spread))
        ph = rng.uniform(-pw.phase, pw.phase) if pw.phase > 0 else 0.0
        a[pw.name] = complex(mod * np.exp(1j * ph)) if ph else complex(mod)
    return a


def _log_modulus_range(window: SampleWindow, relations, base: Base) -> dict:
    """Range of log|g| of every eliminated generator when free moduli sweep their windows."""
    logs = {"p": (math.log(abs(base.p)),) * 2, "q": (math.log(abs(base.q)),) * 2}
    for pw in window.params:
        lc = math.log(center_modulus(pw.center, {k: math.exp(0.5 * (v[0] + v[1])) for k, v in logs.items()}))
        logs[pw.name] = (lc - pw.spread, lc + pw.spread)
    out = {}
    for r in relations:
        sol = relations.solution(r.eliminate)
        lo = hi = 0.0
        for g, e in sol.exps:
            if g not in logs:
                lo = -math.inf
                hi = math.inf
                break
            a, b = logs[g]
            lo += min(e * a, e * b)
            hi += max(e * a, e * b)
        logs[r.eliminate] = (lo, hi)
        out[r.eliminate] = (lo, hi)
    return out


def check_feasible(window: SampleWindow, relations, base: Base) -> None:
    """Raise if a bounded dependent parameter can never land in the unit-circle window."""
    if window.deformed:
        return
    if abs(base.p) > window.base_max or abs(base.q) > window.base_max:
        raise WindowInfeasible(f"|p|, |q| must be at most {window.base_max}")
    ranges = _log_modulus_range(window, relations, base)
    hi_ok = math.log(1.0 - window.margin)
    for g in window.bounded:
        if g in ranges:
            lo, _ = ranges[g]
            if lo >= hi_ok:
                raise WindowInfeasible(
                    f"{g} has modulus >= {math.exp(lo):.3g} across the window; unit-circle contours need "
                    f"|{g}| < {1 - window.margin:.2f}. Use the deformed-contour path.")


def sample_params(entry, n: int, base: Base, seed: int, window: SampleWindow | None = None,
                  m: int | None = None, signs: Mapping[str, int] | None = None,
                  max_tries: int = 400, return_tries: bool = False):
    """Draw an assignment for ``entry`` that passes balancing and contour checks.

    ``entry`` is a catalog entry (anything with ``window(n, m)``,
    ``relations(n, m, signs)`` and ``specs(n, m)``).
    """
    window = window or entry.window(n, m)
    relations = entry.relations(n, m, signs)
    check_feasible(window, relations, base)
    specs = entry.specs(n, m, signs)
    rng = rng_for(entry.name, n, m, seed)
    for tries in range(1, max_tries + 1):
        a = _draw(window, {"p": complex(base.p), "q": complex(base.q)}, rng)
        for r in relations:
            a[r.eliminate] = complex(mono_eval(relations.solution(r.eliminate), a))
        params = {k: v for k, v in a.items() if k not in ("p", "q")}
        if not all(validate_balancing(s, params, base, tol=1e-14).ok for s in specs):
            continue
        if not _accept(entry, window, specs, params, base):
            continue
        return (params, tries) if return_tries else params
    raise WindowInfeasible(f"no admissible sample for {entry.name} (n={n}) in {max_tries} draws")


def _accept(entry, window: SampleWindow, specs, params, base) -> bool:
    if window.deformed:
        return entry.deformed_ok(params, base, window.margin)
    return all(contour_ok(s, params, base, margin=window.margin).ok for s in specs)


def acceptance_rate(entry, n: int, base: Base, trials: int = 200, m: int | None = None, seed: int = 0) -> float:
    """Fraction of raw draws that pass every check."""
    window = entry.window(n, m)
    relations = entry.relations(n, m, None)
    specs = entry.specs(n, m, None)
    rng = rng_for(entry.name + "#rate", n, m, seed)
    ok = 0
    for _ in range(trials):
        a = _draw(window, {"p": complex(base.p), "q": complex(base.q)}, rng)
        for r in relations:
            a[r.eliminate] = complex(mono_eval(relations.solution(r.eliminate), a))
        params = {k: v for k, v in a.items() if k not in ("p", "q")}
        if all(validate_balancing(s, params, base, tol=1e-14).ok for s in specs) and \
                _accept(entry, window, specs, params, base):
            ok += 1
    return ok / trials
