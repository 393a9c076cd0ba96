import math

import pytest

from ellhyp.catalog import AdmissibilityError, _load, get_entry, instantiate, list_identities, verify
from ellhyp.efun import Base
from ellhyp.ispec import eval_integral, eval_prefactor


def test_registry_contents():
    names = [m["name"] for m in list_identities()]
    assert "elliptic_beta" in names and "quad_half" in names
    assert len(names) >= 13
    assert names == [m["name"] for m in list_identities()]


def test_unknown_identity():
    with pytest.raises(KeyError):
        get_entry("nope")


def test_unsupported_n():
    with pytest.raises(ValueError):
        instantiate("elliptic_beta", 2)


def test_real_base_required():
    with pytest.raises(ValueError, match="real"):
        instantiate("quad_half", 1, base=Base(0.05j, 0.05))


def test_missing_free_parameter():
    with pytest.raises(ValueError, match="missing"):
        instantiate("elliptic_beta", 1, params={"t1": 0.5})


def test_contour_failure_is_reported():
    params = {f"t{r}": 0.55 for r in range(1, 5)}
    params["t5"] = 0.02
    with pytest.raises(AdmissibilityError, match="unit-circle"):
        instantiate("elliptic_beta", 1, base=Base(0.2, 0.2), params=params)


def test_corollary_delegation_parameters():
    inst = instantiate("corollary_q1", 1, seed=0)
    rep = verify(inst, timing=False)
    d = rep.extra["delegate"]
    assert d["identity"] == "quad_half" and d["status"] == "ok"
    a, p, q = inst.params, inst.base.p, inst.base.q
    got = {k: complex(v["value"][0], v["value"][1]) for k, v in d["params"].items()}
    assert got["t1"] == pytest.approx(a["t1"] ** 2, rel=1e-14)
    assert got["t4"] == pytest.approx(a["t"] * a["t4"] ** 2, rel=1e-14)
    assert got["v"] == pytest.approx(1j * a["t4"] * (a["t"] / (p * q)) ** 0.25, rel=1e-14)
    assert d["integrand_agreement"] <= 1e-12
    assert abs(d["rel_err"]) <= 1e-8


def test_selberg_block_symmetry():
    inst = instantiate("selberg_e7", 1, seed=2)
    free = {k: inst.params[k] for k in get_entry("selberg_e7").free(1)}
    swapped = dict(free, t1=free["t2"], t2=free["t1"], t5=free["t6"], t6=free["t5"])
    other = instantiate("selberg_e7", 1, params=swapped)
    for s0, s1 in zip([inst.lhs] + [s.rhs for s in inst.sides], [other.lhs] + [s.rhs for s in other.sides]):
        a = eval_integral(s0, inst.params, inst.base).value
        b = eval_integral(s1, other.params, other.base).value
        assert abs(a - b) <= 1e-11 * abs(a)
    pa = eval_prefactor(inst.sides[0].prefactor, inst.params, inst.base, 1)
    pb = eval_prefactor(other.sides[0].prefactor, other.params, other.base, 1)
    assert abs(pa - pb) <= 1e-12 * abs(pa)


def test_report_fields():
    rep = verify(instantiate("elliptic_beta", 1, seed=1), timing=False).to_json()
    for k in ("identity", "n", "base", "seed", "params", "lhs", "rhs", "prefactor", "abs_err", "rel_err",
              "grids", "deltas", "seconds", "verdict"):
        assert k in rep
    assert rep["seconds"] is None
    assert rep["params"]["t6"]["monomial"] == "p * q * t1^-1 * t2^-1 * t3^-1 * t4^-1 * t5^-1"


SEEDED = [(e.name, n, m, signs) for e in _load() if not e.doc.get("slow") and e.kind != "fubini_pair"
          for n, m in e.supported for signs in ([{}] + [{k: -1} for k in e.signed])]


@pytest.mark.parametrize("name,n,m,signs", SEEDED)
def test_residual_over_five_seeds(name, n, m, signs):
    e = get_entry(name)
    for seed in range(5):
        rep = verify(instantiate(name, n, m, seed=seed, signs=signs), timing=False)
        assert rep.verdict == "pass", (seed, rep.rel_err, rep.converged)
        assert rep.rel_err <= e.tolerance(n, m)
        assert math.isfinite(rep.rel_err)
