import pytest

from ellhyp.catalog import _load, get_entry, instantiate
from ellhyp.efun import Base
from ellhyp.ispec import contour_ok, validate_balancing
from ellhyp.sampler import (
    ParamWindow,
    SampleWindow,
    WindowInfeasible,
    acceptance_rate,
    center_modulus,
    sample_params,
)
from ellhyp.symalg import Monomial, mono_eval


def test_beta_seed_42():
    e = get_entry("elliptic_beta")
    b = Base(0.2, 0.2)
    a = sample_params(e, 1, b, 42)
    assert sorted(a) == [f"t{r}" for r in range(1, 7)]
    prod = 1
    for v in a.values():
        prod *= v
    assert abs(prod - 0.04) <= 1e-14 * 0.04


def test_same_seed_same_bytes():
    e = get_entry("selberg_e7")
    b = e.default_base()
    a1 = sample_params(e, 2, b, 9)
    a2 = sample_params(e, 2, b, 9)
    assert repr(sorted(a1.items())) == repr(sorted(a2.items()))
    assert sample_params(e, 2, b, 10) != a1


def test_unit_circle_window_for_vanishing_is_infeasible():
    e = get_entry("vanishing_4param")
    w = SampleWindow(tuple(ParamWindow(f"t{r}", "0.8", 0.05) for r in (1, 2, 3)), bounded=("t4",))
    with pytest.raises(WindowInfeasible, match="deformed"):
        sample_params(e, 1, e.default_base(), 0, window=w)


def test_window_rules():
    with pytest.raises(ValueError):
        SampleWindow((), margin=0.01)
    e = get_entry("elliptic_beta")
    with pytest.raises(WindowInfeasible):
        sample_params(e, 1, Base(0.5, 0.5), 0)


def test_center_modulus_rational_exponents():
    assert center_modulus("p^1/6 * q^1/6", {"p": 0.2, "q": 0.2}) == pytest.approx(0.04 ** (1 / 6))
    assert center_modulus("0.5 * t^-1/4", {"t": 0.0625}) == pytest.approx(1.0)
    assert center_modulus("2/5", {}) == pytest.approx(0.4)


ROWS = [(e.name, n, m) for e in _load() for n, m in e.supported if not e.doc.get("slow")]


@pytest.mark.parametrize("name,n,m", ROWS)
def test_accepted_samples_pass_checks(name, n, m):
    e = get_entry(name)
    b = e.default_base()
    w = e.window(n, m)
    for seed in range(3):
        a = sample_params(e, n, b, seed, m=m)
        for s in e.specs(n, m):
            assert validate_balancing(s, a, b, tol=1e-14).ok
            if not w.deformed:
                assert contour_ok(s, a, b, margin=0.05).ok


@pytest.mark.parametrize("name,n,m", ROWS)
def test_acceptance_rate(name, n, m):
    e = get_entry(name)
    assert acceptance_rate(e, n, e.default_base(), trials=60, m=m) >= 0.5


def test_instantiate_explicit_beta():
    inst = instantiate("elliptic_beta", 1, base=Base(0.2, 0.2), params={f"t{r}": 0.55 for r in range(1, 6)})
    assert inst.params["t6"] == pytest.approx(0.04 / 0.55 ** 5, rel=1e-15)
    assert abs(inst.params["t6"]) < 1


def test_quad_q2_hint_family():
    e = get_entry("quad_q2")
    b = e.default_base()
    a = sample_params(e, 1, b, 3)
    hint = mono_eval(Monomial.parse("p^1/4 * q^1/2 * t^-1/4"), {"p": b.p, "q": b.q, "t": a["t"]})
    for r in (1, 2, 3):
        assert 0.8 < abs(a[f"t{r}"] / hint) < 1.25
