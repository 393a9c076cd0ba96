"""Parameter-independent densities Delta_I and Delta_II on the torus.

Densities are taken against prod_j dtheta_j / 2pi, so integrating over the
torus is a plain average.  The constant (p;p)^n (q;q)^n / (2^n n!) (times
Gamma(t)^n for family II) is part of the density.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .efun import Base, GammaVariant, egamma, qpoch1, rgamma, variant_base
from .symalg import Monomial, mono_eval

__all__ = [
    "KernelSpec",
    "GammaRecord",
    "eval_records",
    "kernel_constant",
    "kernel_records",
    "delta_density",
    "n_zero_kernel",
]


@dataclass(frozen=True)
class KernelSpec:
    family: str
    n: int
    t: Monomial | None = None
    variant: GammaVariant = GammaVariant.PQ

    def __post_init__(self):
        if self.family not in ("I", "II"):
            raise ValueError(f"kernel family must be 'I' or 'II', got {self.family!r}")
        if self.n < 0:
            raise ValueError("kernel dimension must be >= 0")
        if self.family == "I" and self.t is not None:
            raise ValueError("family I kernels take no t")
        if self.family == "II" and self.t is None:
            raise ValueError("family II kernels need t")
        object.__setattr__(self, "variant", GammaVariant(self.variant))


@dataclass(frozen=True)
class GammaRecord:
    """Gamma_{p,q}(coef * prod_a z_a^e_a), or its reciprocal.

    ``axes`` is a tuple of (axis, exponent) with exponent in {-2,-1,1,2}.
    """

    p: complex
    q: complex
    coef: complex
    axes: tuple
    reciprocal: bool = False

    def table_key(self):
        return (self.p, self.q, self.coef, self.reciprocal)

    def evaluate(self, args):
        if self.reciprocal:
            return rgamma(args, self.p, self.q)
        return egamma(args, self.p, self.q)


def eval_records(records: Sequence[GammaRecord], z: np.ndarray) -> np.ndarray:
    """Pointwise product of records; ``z`` has shape (M, dim)."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    out = np.ones(z.shape[0], dtype=complex)
    for rec in records:
        arg = np.full(z.shape[0], rec.coef, dtype=complex)
        for axis, e in rec.axes:
            arg = arg * z[:, axis] ** e
        out = out * rec.evaluate(arg)
    return out


def kernel_constant(spec: KernelSpec, params: Mapping[str, complex], base: Base) -> complex:
    if spec.n == 0:
        return 1.0 + 0j
    b = variant_base(base, spec.variant)
    c = (qpoch1(b.p, b.p) * qpoch1(b.q, b.q)) ** spec.n / (2 ** spec.n * math.factorial(spec.n))
    if spec.family == "II":
        c *= egamma(mono_eval(spec.t, params), b.p, b.q) ** spec.n
    return complex(c)


def kernel_records(spec: KernelSpec, axes: Sequence[int], params: Mapping[str, complex], base: Base):
    """Records for the variable part of the kernel on the given axes."""
    if len(axes) != spec.n:
        raise ValueError(f"kernel of dimension {spec.n} placed on {len(axes)} axes")
    b = variant_base(base, spec.variant)
    recs = []
    for a in axes:
        recs.append(GammaRecord(b.p, b.q, 1.0 + 0j, ((a, 2),), True))
        recs.append(GammaRecord(b.p, b.q, 1.0 + 0j, ((a, -2),), True))
    tval = complex(mono_eval(spec.t, params)) if spec.family == "II" else None
    for a, c in itertools.combinations(axes, 2):
        for s1, s2 in itertools.product((1, -1), repeat=2):
            recs.append(GammaRecord(b.p, b.q, 1.0 + 0j, ((a, s1), (c, s2)), True))
            if tval is not None:
                recs.append(GammaRecord(b.p, b.q, tval, ((a, s1), (c, s2)), False))
    return recs


def delta_density(spec: KernelSpec, z, params: Mapping[str, complex] | None, base: Base) -> complex:
    """Delta^{(n)} at the point z (length-n sequence of unit-modulus complex numbers)."""
    params = params or {}
    z = np.asarray(z, dtype=complex).reshape(1, -1) if spec.n else np.zeros((1, 0), dtype=complex)
    if z.shape[1] != spec.n:
        raise ValueError(f"expected {spec.n} coordinates, got {z.shape[1]}")
    const = kernel_constant(spec, params, base)
    if spec.n == 0:
        return const
    return complex(const * eval_records(kernel_records(spec, range(spec.n), params, base), z)[0])


def n_zero_kernel() -> float:
    """The density of a 0-dimensional group: the empty integral is 1."""
    return 1.0
