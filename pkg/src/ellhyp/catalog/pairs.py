"""Code shims for entries that are not a plain left = prefactor * right check.

``verify_pair`` evaluates a two-variable integrand in both iterated orders,
each inner and outer integral on a 1-D contour deformed around the poles
that have left the unit disc.  ``delegate_check`` re-derives an entry from
another one by a parameter substitution and compares.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from ..ispec import Density, build_density
from ..quad import PoleRegistry, QuadPolicy, integrate_deformed_1d
from . import AdmissibilityError, Instance, _base_report, _grid_info, _verdict, instantiate, verify

__all__ = ["nested_value", "verify_pair", "delegate_check"]


def _only(records, axis):
    return [r for r in records if all(a == axis for a, _ in r.axes)]


def _renumber(records, axis):
    out = []
    for r in records:
        out.append(type(r)(r.p, r.q, r.coef, tuple((0, e) for a, e in r.axes if a == axis), r.reciprocal))
    return out


def _induced_singularities(density: Density, outer: int, inner: int, rmax: float, depth: int = 4) -> list:
    """Points where a cross pole can pinch an inner-variable pole, as a function of the outer variable."""
    cross = [r for r in density.records if len(r.axes) == 2 and not r.reciprocal]
    single = [r for r in _only(density.records, inner) if not r.reciprocal]
    pts = []
    for k in cross:
        for c in single:
            for a in range(depth):
                for b in range(depth):
                    for sgn in (1, -1):
                        w = (k.coef * c.coef * k.p ** a * k.q ** b) ** sgn
                        for z in (w, 1 / w):
                            if 1 / rmax <= abs(z) <= rmax:
                                pts.append(complex(z))
    return pts


def nested_value(density: Density, outer: int, policy: QuadPolicy | None = None) -> dict:
    """Integrate axis ``1 - outer`` first, then ``outer``; both on deformed 1-D contours."""
    inner = 1 - outer
    if density.dim != 2:
        raise ValueError("nested evaluation is for two-variable densities")
    terms = {"max": 0.0}

    def inner_value(x):
        sec = density.section(outer, x)
        res = integrate_deformed_1d(sec, sec.enclosed_points(), policy)
        scale = max([abs(res.values[-1])] + [abs(2 * r["value"]) for r in res.residues])
        terms["max"] = max(terms["max"], scale)
        return res.value

    def g(points):
        pts = np.asarray(points, dtype=complex).reshape(-1)
        return np.array([inner_value(x) for x in pts], dtype=complex)

    outer_only = Density(1, _renumber(_only(density.records, outer), outer), 1.0)
    reg = outer_only.enclosed_points()
    rmax = 2 * max((abs(e.location) for e in reg.poles), default=1.0) + 1
    reg = PoleRegistry(reg.poles, list(reg.avoid) + _induced_singularities(density, outer, inner, rmax))
    res = integrate_deformed_1d(g, reg, policy)
    return {"value": res.value, "result": res, "scale": terms["max"],
            "poles": [complex(e.location) for e in reg.poles]}


def verify_pair(inst: Instance, policy: QuadPolicy | None = None):
    density = build_density(inst.lhs, inst.params, inst.base)
    axes = inst.lhs.axes()
    ay, az = axes["y"][0], axes["z"][0]
    y_first = nested_value(density, outer=az, policy=policy)
    z_first = nested_value(density, outer=ay, policy=policy)
    from ..ispec import eval_prefactor

    side = inst.sides[0]
    closed = eval_prefactor(side.prefactor, inst.params, inst.base, inst.n)
    zf = z_first["value"]
    abs_err = abs(zf - closed)
    rel_err = abs_err / abs(closed)
    y_ratio = abs(y_first["value"]) / y_first["scale"] if y_first["scale"] else 0.0
    tol = inst.entry.tolerance(inst.n)
    conv = y_first["result"].converged and z_first["result"].converged
    g_y, d_y = _grid_info(y_first["result"])
    g_z, d_z = _grid_info(z_first["result"])
    verdict = _verdict(conv, max(rel_err, y_ratio), tol)
    rep = _base_report(inst, lhs=zf, rhs=1 + 0j, prefactor=closed, abs_err=abs_err, rel_err=rel_err,
                       tolerance=tol, grids={"y_first": g_y, "z_first": g_z},
                       deltas={"y_first": d_y, "z_first": d_z}, converged=conv, verdict=verdict)
    yv = y_first["value"]
    rep.extra.update({
        "y_first": [yv.real, yv.imag],
        "y_first_scale": y_first["scale"],
        "y_first_relative": y_ratio,
        "z_first": [zf.real, zf.imag],
        "orders_differ": abs(zf - yv) > 1e3 * tol * max(abs(zf), 1e-300),
        "outer_poles": {"y_first": [[p.real, p.imag] for p in y_first["poles"]],
                        "z_first": [[p.real, p.imag] for p in z_first["poles"]]},
    })
    return rep


def _corollary_to_quad_half(inst: Instance) -> dict:
    a = inst.params
    p, q = complex(inst.base.p), complex(inst.base.q)
    t = a["t"]
    out = {"t": t, "v": 1j * a["t4"] * cmath.exp(0.25 * cmath.log(t / (p * q)))}
    for r in (1, 2, 3):
        out[f"t{r}"] = a[f"t{r}"] ** 2
    out["t4"] = t * a["t4"] ** 2
    return out


_DELEGATES = {("corollary_q1", "quad_half"): _corollary_to_quad_half}


def delegate_check(inst: Instance, policy: QuadPolicy | None = None) -> dict:
    """Evaluate the delegate entry at substituted parameters.

    The delegate's left integrand coincides pointwise with this entry's, so
    the two left values must agree to quadrature noise, and the delegate's
    own residual is reported next to this entry's.
    """
    target = inst.entry.doc["delegate"]
    mapping = _DELEGATES[(inst.entry.name, target)]
    params = mapping(inst)
    try:
        other = instantiate(target, inst.n, base=inst.base, params=params)
    except AdmissibilityError as exc:
        return {"identity": target, "status": "skipped", "reason": str(exc)}
    rep = verify(other, policy, timing=False)
    mine = build_density(inst.lhs, inst.params, inst.base)
    theirs = build_density(other.lhs, other.params, other.base)
    rng = np.random.default_rng(0)
    z = np.exp(2j * math.pi * rng.random((8, inst.lhs.dim)))
    pointwise = float(np.max(np.abs(mine(z) - theirs(z)) / np.abs(mine(z))))
    return {"identity": target, "status": "ok", "params": other.param_table(),
            "rel_err": rep.rel_err, "verdict": rep.verdict, "integrand_agreement": pointwise,
            "lhs": [rep.lhs.real, rep.lhs.imag]}
