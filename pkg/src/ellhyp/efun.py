"""Elliptic Pochhammer symbols and elliptic gamma functions.

All evaluators accept scalars or array-likes and are vectorized with numpy.
Products are truncated once ``|p^r q^s x|`` drops below a relative cutoff.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Base",
    "GammaVariant",
    "TruncationPolicy",
    "EllipticGammaPole",
    "BaseError",
    "qpoch1",
    "poch2",
    "egamma",
    "rgamma",
    "egamma_variant",
    "variant_base",
]

_CHUNK = 4096


class EllipticGammaPole(ArithmeticError):
    """Raised when an argument sits (numerically) on a pole of the gamma function."""

    def __init__(self, x, pole):
        self.x = x
        self.pole = pole
        super().__init__(f"elliptic gamma evaluated at pole: x={x!r} is within 1e-12 of {pole!r}")


class BaseError(ValueError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    eps: float = 1e-17
    max_terms: int = 200_000

    def __post_init__(self):
        if not (0.0 < self.eps < 1e-10):
            raise ValueError("truncation cutoff must lie in (0, 1e-10)")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")


DEFAULT_POLICY = TruncationPolicy()


class GammaVariant(str, enum.Enum):
    PQ = "pq"
    PQ2 = "pq2"
    HALF = "half"


@dataclass(frozen=True)
class Base:
    """The nome pair (p, q) with 0 < |p|, |q| < 1."""

    p: complex
    q: complex

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (0.0 < abs(v) < 1.0):
                raise BaseError(f"|{name}| must lie in (0, 1), got {v!r}")

    @property
    def is_real_positive(self) -> bool:
        return all(complex(v).imag == 0.0 and complex(v).real > 0.0 for v in (self.p, self.q))

    @property
    def pq(self) -> complex:
        return self.p * self.q


def variant_base(base: Base, variant: GammaVariant | str, allow_complex_sqrt: bool = False) -> Base:
    """Return the nome pair a gamma variant lives in: (p,q), (p,q^2) or (sqrt p, sqrt q)."""
    variant = GammaVariant(variant)
    if variant is GammaVariant.PQ:
        return base
    if variant is GammaVariant.PQ2:
        return Base(base.p, base.q * base.q)
    if not base.is_real_positive and not allow_complex_sqrt:
        raise BaseError("HALF variant needs real p, q in (0,1); pass allow_complex_sqrt=True to use principal roots")
    if base.is_real_positive:
        return Base(math.sqrt(complex(base.p).real), math.sqrt(complex(base.q).real))
    return Base(complex(np.sqrt(complex(base.p))), complex(np.sqrt(complex(base.q))))


def _as_array(x):
    arr = np.asarray(x, dtype=complex)
    return arr, arr.ndim == 0


def qpoch1(x, b, policy: TruncationPolicy = DEFAULT_POLICY):
    """(x; b)_inf = prod_{k>=0} (1 - b^k x)."""
    if abs(b) >= 1:
        raise BaseError(f"|b| must be < 1, got {b!r}")
    arr, scalar = _as_array(x)
    flat = arr.ravel()
    out = np.ones_like(flat)
    xmax = float(np.max(np.abs(flat))) if flat.size else 0.0
    if xmax > 0.0:
        ab = abs(b)
        if ab == 0.0:
            kmax = 0
        else:
            kmax = max(0, int(math.ceil(math.log(policy.eps / xmax) / math.log(ab))))
        kmax = min(kmax, policy.max_terms)
        bk = complex(1.0)
        for _ in range(kmax + 1):
            out = out * (1.0 - bk * flat)
            bk *= b
    out = out.reshape(arr.shape)
    return complex(out) if scalar else out


def _exponent_pairs(p: complex, q: complex, xmax: float, eps: float, max_terms: int):
    """(r, s) with |p^r q^s| xmax >= eps, ordered by r+s then r."""
    if xmax == 0.0:
        return np.zeros((0,), dtype=complex)
    lp, lq = math.log(abs(p)), math.log(abs(q))
    budget = math.log(eps / xmax)
    pairs = [(0, 0, 0)]
    if budget < 0:
        pairs = []
        for r in range(int(math.floor(budget / lp)) + 1):
            smax = int(math.floor((budget - r * lp) / lq))
            pairs.extend((r + s, r, s) for s in range(smax + 1))
    if len(pairs) > max_terms:
        raise ArithmeticError(f"double product needs {len(pairs)} terms, over the cap {max_terms}")
    pairs.sort()
    coeffs = np.array([complex(p) ** r * complex(q) ** s for _, r, s in pairs], dtype=complex)
    return coeffs


def poch2(x, p, q, policy: TruncationPolicy = DEFAULT_POLICY):
    """(x; p, q) = prod_{r,s>=0} (1 - p^r q^s x), multiplied in diagonal-major order."""
    if not (0 < abs(p) < 1 and 0 < abs(q) < 1):
        raise BaseError("poch2 needs 0 < |p|, |q| < 1")
    arr, scalar = _as_array(x)
    flat = arr.ravel()
    out = np.ones_like(flat)
    for start in range(0, flat.size, _CHUNK):
        chunk = flat[start:start + _CHUNK]
        xmax = float(np.max(np.abs(chunk)))
        coeffs = _exponent_pairs(p, q, xmax, policy.eps, policy.max_terms)
        if coeffs.size == 0:
            continue
        out[start:start + _CHUNK] = np.prod(1.0 - coeffs[:, None] * chunk[None, :], axis=0)
    out = out.reshape(arr.shape)
    return complex(out) if scalar else out


def _check_poles(flat: np.ndarray, p: complex, q: complex, radius: float = 1e-12):
    """Raise if any x is within relative distance ``radius`` of p^-a q^-b."""
    if flat.size == 0:
        return
    if np.any(flat == 0):
        raise EllipticGammaPole(0j, 0j)
    xmax = float(np.max(np.abs(flat)))
    ap, aq = abs(p), abs(q)
    a = 0
    while ap ** (-a) <= 2.0 * xmax + 1.0:
        b = 0
        while ap ** (-a) * aq ** (-b) <= 2.0 * xmax + 1.0:
            pole = complex(p) ** (-a) * complex(q) ** (-b)
            hit = np.abs(flat - pole) <= radius * abs(pole)
            if np.any(hit):
                raise EllipticGammaPole(complex(flat[np.argmax(hit)]), pole)
            b += 1
        a += 1


def egamma(x, p, q, policy: TruncationPolicy = DEFAULT_POLICY, check_poles: bool = True):
    """Gamma_{p,q}(x) = (pq/x; p,q) / (x; p,q)."""
    arr, scalar = _as_array(x)
    flat = arr.ravel()
    if check_poles:
        _check_poles(flat, p, q)
    pq = p * q
    out = poch2(pq / flat, p, q, policy) / poch2(flat, p, q, policy)
    out = np.asarray(out).reshape(arr.shape)
    return complex(out) if scalar else out


def rgamma(x, p, q, policy: TruncationPolicy = DEFAULT_POLICY):
    """1 / Gamma_{p,q}(x); zero (not an error) at the poles of Gamma."""
    arr, scalar = _as_array(x)
    flat = arr.ravel()
    out = poch2(flat, p, q, policy) / poch2(p * q / flat, p, q, policy)
    out = np.asarray(out).reshape(arr.shape)
    return complex(out) if scalar else out


def egamma_variant(x, base: Base, variant: GammaVariant | str = GammaVariant.PQ,
                   policy: TruncationPolicy = DEFAULT_POLICY, allow_complex_sqrt: bool = False):
    """Gamma in the base selected by ``variant``: PQ -> (p,q), PQ2 -> (p,q^2), HALF -> (sqrt p, sqrt q)."""
    b = variant_base(base, variant, allow_complex_sqrt)
    return egamma(x, b.p, b.q, policy)
