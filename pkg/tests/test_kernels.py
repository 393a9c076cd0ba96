import itertools
import math

import numpy as np
import pytest

from ellhyp.efun import Base, egamma, qpoch1
from ellhyp.kernels import KernelSpec, delta_density, n_zero_kernel
from ellhyp.symalg import Monomial

B = Base(0.2, 0.3)
T = Monomial.parse("t")


def direct(family, z, p, q, t=None):
    """Kernel density written out factor by factor."""
    n = len(z)
    c = (qpoch1(p, p) * qpoch1(q, q)) ** n / (2 ** n * math.factorial(n))
    v = c
    for zj in z:
        v /= egamma(zj ** 2, p, q) * egamma(zj ** -2, p, q)
    for a, b in itertools.combinations(z, 2):
        for s1, s2 in itertools.product((1, -1), repeat=2):
            w = a ** s1 * b ** s2
            v /= egamma(w, p, q)
            if family == "II":
                v *= egamma(t * w, p, q)
    if family == "II":
        v *= egamma(t, p, q) ** n
    return v


def pts(n, seed):
    return np.exp(2j * np.pi * np.random.default_rng(seed).random(n))


@pytest.mark.parametrize("family,n", [("I", 1), ("I", 2), ("I", 3), ("II", 2), ("II", 3)])
def test_matches_direct_formula(family, n):
    spec = KernelSpec(family, n, T if family == "II" else None)
    z = pts(n, n)
    got = delta_density(spec, z, {"t": 0.4 + 0.1j}, B)
    want = direct(family, z, 0.2, 0.3, 0.4 + 0.1j)
    assert abs(got - want) <= 1e-12 * abs(want)


def test_vanishes_at_one():
    assert delta_density(KernelSpec("I", 1), [1.0], None, B) == 0


def test_family_two_single_variable():
    z = pts(1, 5)
    a = delta_density(KernelSpec("II", 1, T), z, {"t": 0.4}, B)
    b = delta_density(KernelSpec("I", 1), z, None, B)
    assert a == pytest.approx(egamma(0.4, 0.2, 0.3) * b, rel=1e-13)


def test_empty_kernels():
    assert delta_density(KernelSpec("I", 0), [], None, B) == 1
    assert delta_density(KernelSpec("II", 0, T), [], {"t": 0.7}, B) == 1
    assert n_zero_kernel() == 1


@pytest.mark.parametrize("family", ["I", "II"])
def test_hyperoctahedral_symmetry(family):
    spec = KernelSpec(family, 3, T if family == "II" else None)
    z = pts(3, 11)
    ref = delta_density(spec, z, {"t": 0.5j}, B)
    for perm in itertools.permutations(range(3)):
        for flips in itertools.product((1, -1), repeat=3):
            w = [z[perm[i]] ** flips[i] for i in range(3)]
            assert abs(delta_density(spec, w, {"t": 0.5j}, B) - ref) <= 1e-12 * abs(ref)


def test_base_consistency_pq2():
    z = pts(2, 4)
    a = delta_density(KernelSpec("II", 2, T, "pq2"), z, {"t": 0.3}, B)
    b = delta_density(KernelSpec("II", 2, T, "pq"), z, {"t": 0.3}, Base(0.2, 0.09))
    assert a == pytest.approx(b, rel=1e-13)


def test_wrong_arity():
    with pytest.raises(ValueError):
        delta_density(KernelSpec("I", 2), [1j], None, B)
    with pytest.raises(ValueError):
        KernelSpec("I", 1, T)
