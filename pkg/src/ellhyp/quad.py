"""Trapezoidal quadrature on products of unit circles.

Integrals are averages of a density over the torus (the density is taken
against prod dtheta/2pi).  Sums use a fixed pairwise tree, and points are
evaluated in fixed-size chunks, so the result does not depend on how many
threads did the evaluation.

The 1-D contour deformation adds residues at registered poles outside the
unit circle.  For integrands invariant under z -> 1/z, the residue of
f(z)/z at 1/P is minus the one at P, so moving the contour to enclose P and
exclude 1/P changes the integral by 2 Res_{z=P} f(z)/z.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "QuadPolicy",
    "QuadResult",
    "PoleEntry",
    "PoleRegistry",
    "DeformationError",
    "pairwise_sum",
    "torus_points",
    "integrate_torus",
    "integrate_converged",
    "residue_numeric",
    "integrate_deformed_1d",
    "default_rtol",
    "default_nmax",
]

CHUNK = 1 << 14


class DeformationError(ValueError):
    pass


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid:
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        for s in sizes:
            if s < 8 or not _is_pow2(s):
                raise ValueError(f"grid sizes must be powers of two >= 8, got {s}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, dim: int, n: int) -> "Grid":
        return cls((n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def npoints(self) -> int:
        return math.prod(self.sizes)


def default_rtol(dim: int) -> float:
    return 1e-9 if dim <= 2 else 1e-5


def default_nmax(dim: int) -> int:
    # 3-D is capped at 64: the next power of two (128^3) is beyond desk budget.
    return {0: 32, 1: 512, 2: 256}.get(dim, 64)


@dataclass(frozen=True)
class QuadPolicy:
    n0: int = 32
    n_max: int | None = None
    rtol: float | None = None
    workers: int = 1

    def resolve(self, dim: int) -> tuple:
        n_max = self.n_max if self.n_max is not None else default_nmax(dim)
        rtol = self.rtol if self.rtol is not None else default_rtol(dim)
        if not _is_pow2(self.n0) or self.n0 < 8:
            raise ValueError("n0 must be a power of two >= 8")
        return max(n_max, self.n0), rtol


@dataclass
class QuadResult:
    value: complex
    last_refinement_delta: float
    grids_used: list
    deltas: list = field(default_factory=list)
    values: list = field(default_factory=list)
    converged: bool = True
    residues: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "value": [self.value.real, self.value.imag],
            "last_refinement_delta": self.last_refinement_delta,
            "grids": [list(g) for g in self.grids_used],
            "deltas": list(self.deltas),
            "converged": self.converged,
        }
        if self.residues:
            out["residues"] = [
                {"pole": [r["pole"].real, r["pole"].imag], "radius": r["radius"],
                 "value": [r["value"].real, r["value"].imag], "origin": r["origin"]}
                for r in self.residues
            ]
        return out


def pairwise_sum(values) -> complex:
    """Sum by repeatedly adding the two halves (zero-padded to a power of two)."""
    v = np.asarray(values, dtype=complex).ravel()
    if v.size == 0:
        return 0j
    size = 1 << (v.size - 1).bit_length()
    if size != v.size:
        v = np.concatenate([v, np.zeros(size - v.size, dtype=complex)])
    while v.size > 1:
        h = v.size // 2
        v = v[:h] + v[h:]
    return complex(v[0])


def torus_points(grid: Grid) -> np.ndarray:
    """All nodes, shape (npoints, dim), last coordinate varying fastest."""
    axes = [np.exp(2j * np.pi * np.arange(n) / n) for n in grid.sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _evaluate_chunked(density: Callable, points: np.ndarray, workers: int) -> np.ndarray:
    chunks = [points[i:i + CHUNK] for i in range(0, points.shape[0], CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(density, chunks))
    else:
        parts = [density(c) for c in chunks]
    return np.concatenate([np.asarray(p, dtype=complex).ravel() for p in parts])


def integrate_torus(density, n: int, grid: Grid, workers: int = 1) -> complex:
    """Average of ``density`` over the tensor grid.

    ``density`` is either an object with ``grid_values(sizes, workers)``
    returning the full array of node values, or a vectorized callable mapping
    an (M, n) array of points to M values.
    """
    if n == 0:
        return complex(np.asarray(density(np.zeros((1, 0), dtype=complex))).ravel()[0])
    if grid.dim != n:
        raise ValueError(f"grid has dimension {grid.dim}, density has {n}")
    if hasattr(density, "grid_values"):
        vals = np.asarray(density.grid_values(grid.sizes, workers=workers), dtype=complex)
    else:
        vals = _evaluate_chunked(density, torus_points(grid), workers)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("density is not finite on every grid node")
    return pairwise_sum(vals) / vals.size


def integrate_converged(density, n: int, policy: QuadPolicy | None = None) -> QuadResult:
    """Double the grid from ``n0`` until the relative change is below ``rtol``.

    The returned value is the one on the finest grid.  If ``n_max`` is hit
    first, ``converged`` is False.
    """
    policy = policy or QuadPolicy()
    if n == 0:
        v = integrate_torus(density, 0, None)
        return QuadResult(v, 0.0, [()], [], [v], True)
    n_max, rtol = policy.resolve(n)
    size = policy.n0
    grids, values, deltas = [], [], []
    converged = False
    while True:
        grid = Grid.uniform(n, size)
        v = integrate_torus(density, n, grid, policy.workers)
        grids.append(grid.sizes)
        values.append(v)
        if len(values) > 1:
            delta = abs(v - values[-2]) / max(1.0, abs(v))
            deltas.append(delta)
            if delta <= rtol:
                converged = True
                break
        if size * 2 > n_max:
            break
        size *= 2
    last = deltas[-1] if deltas else math.inf
    return QuadResult(values[-1], last, grids, deltas, values, converged)


def residue_numeric(f: Callable, center: complex, radius: float, N: int = 64,
                    others: Sequence[complex] = ()) -> complex:
    """(1/2 pi i) times the integral of f around the circle |z - center| = radius."""
    if not radius > 0:
        raise DeformationError("residue radius must be positive")
    for o in others:
        d = abs(complex(o) - center)
        if d > 0 and radius >= 0.5 * d:
            raise DeformationError(
                f"radius {radius:g} is not below half the distance {d:g} to the singularity at {complex(o)}")
    w = np.exp(2j * np.pi * np.arange(N) / N)
    pts = center + radius * w
    vals = np.asarray(f(pts), dtype=complex)
    return pairwise_sum(vals * radius * w) / N


@dataclass(frozen=True)
class PoleEntry:
    location: complex
    origin: str = ""


@dataclass
class PoleRegistry:
    """Poles outside the unit circle that the contour must enclose.

    ``avoid`` lists other singularities of the integrand; they only
    constrain the size of the residue circles.
    """

    poles: list = field(default_factory=list)
    avoid: list = field(default_factory=list)

    def add(self, location: complex, origin: str = "") -> None:
        self.poles.append(PoleEntry(complex(location), origin))

    def __len__(self) -> int:
        return len(self.poles)

    def validate(self, sep: float = 1e-8) -> None:
        locs = [e.location for e in self.poles]
        for e in self.poles:
            m = abs(e.location)
            if abs(m - 1.0) <= 1e-10:
                raise DeformationError(f"pole {e.location} ({e.origin}) lies on the unit circle")
            if m < 1.0:
                raise DeformationError(f"pole {e.location} ({e.origin}) is inside the unit circle")
        for i, a in enumerate(locs):
            for b in locs[i + 1:]:
                if abs(a - b) <= sep * max(1.0, abs(a)):
                    raise DeformationError(f"registered poles {a} and {b} are not separated")

    def radius_for(self, pole: complex) -> float:
        others = [e.location for e in self.poles if e.location != pole]
        others += [complex(a) for a in self.avoid]
        others += [1.0 / pole, 0j]
        dists = [abs(o - pole) for o in others if abs(o - pole) > 1e-9 * abs(pole)]
        return 0.25 * min(dists)


def _check_inversion_symmetry(density: Callable) -> None:
    z0 = np.array([0.93 * np.exp(0.7j), 1.07 * np.exp(-2.1j)])
    a = np.asarray(density(z0.reshape(-1, 1)), dtype=complex).ravel()
    b = np.asarray(density((1.0 / z0).reshape(-1, 1)), dtype=complex).ravel()
    scale = np.maximum(np.abs(a), np.abs(b))
    if np.any(np.abs(a - b) > 1e-8 * np.maximum(scale, 1e-300)):
        raise DeformationError("integrand is not invariant under z -> 1/z; residue doubling does not apply")


def integrate_deformed_1d(density: Callable, registry: PoleRegistry, policy: QuadPolicy | None = None,
                          residue_points: int = 64) -> QuadResult:
    """Integral over a contour enclosing the registered poles and excluding their reciprocals.

    ``density`` maps an (M, 1) array of points to M values and must satisfy
    f(z) = f(1/z).  The result is a :class:`QuadResult`; the residue terms
    are listed in ``residues``.
    """
    registry.validate()
    plain = integrate_converged(density, 1, policy)
    if not registry.poles:
        return plain
    _check_inversion_symmetry(density)

    def g(z):
        z = np.asarray(z, dtype=complex)
        return np.asarray(density(z.reshape(-1, 1)), dtype=complex).ravel() / z

    total = plain.value
    residues = []
    for e in registry.poles:
        r = registry.radius_for(e.location)
        res = residue_numeric(g, e.location, r, residue_points)
        residues.append({"pole": e.location, "radius": r, "value": res, "origin": e.origin})
        total += 2.0 * res
    return QuadResult(total, plain.last_refinement_delta, plain.grids_used, plain.deltas,
                      plain.values, plain.converged, residues)
