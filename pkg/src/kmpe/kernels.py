"""Gaussian RBF Gram matrices, median-heuristic bandwidth grids, and the
empirical RKHS distance between two sample sets.

Sample sets are plain ``(N, d)`` float arrays; 1-D arrays are treated as N
points in one dimension.  Mixture samples always come first in the
concatenated ordering, followed by component samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

__all__ = [
    "DegenerateDataError",
    "KernelSpec",
    "GramMatrix",
    "rbf_kernel",
    "gram",
    "bandwidth_grid",
    "empirical_mmd",
    "select_kernel",
]

# Points used for the median-pairwise-distance heuristic are capped; larger
# inputs are subsampled with a fixed-seed generator so results stay
# reproducible.
_MEDIAN_MAX_POINTS = 10_000


class DegenerateDataError(ValueError):
    """Raised when the data cannot support a bandwidth choice (e.g. all
    pairwise distances are zero)."""


@dataclass(frozen=True)
class KernelSpec:
    """A Gaussian RBF kernel width, in input-space Euclidean units."""

    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class GramMatrix:
    """Kernel matrix over the concatenation [mixture; component].

    Rows/columns 0..n-1 are the n mixture samples, rows/columns n..n+m-1 the
    m component samples.  Entries are exactly symmetric, have unit diagonal,
    and lie in (0, 1].
    """

    entries: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need at least one mixture and one component sample")
        k = self.entries
        size = self.n + self.m
        if k.shape != (size, size):
            raise ValueError(f"expected a {size}x{size} matrix, got {k.shape}")
        if not np.array_equal(k, k.T):
            raise ValueError("Gram matrix must be exactly symmetric")
        if not (np.diag(k) == 1.0).all():
            raise ValueError("Gram matrix diagonal must be exactly 1")
        if k.min() <= 0.0 or k.max() > 1.0:
            raise ValueError("Gram matrix entries must lie in (0, 1]")

    @property
    def size(self) -> int:
        return self.n + self.m


def _as_points(x, name: str = "points") -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError(f"{name} must be a (N, d) array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError(f"{name} must contain at least one sample")
    if not np.isfinite(pts).all():
        raise ValueError(f"{name} contains non-finite values")
    return pts


def rbf_kernel(a, b, spec: KernelSpec) -> float:
    """Evaluate exp(-||a - b||^2 / (2 sigma^2)) for two points.

    Symmetric in (a, b), equal to 1 exactly when a == b, and always in (0, 1].
    """
    av = np.asarray(a, dtype=float).ravel()
    bv = np.asarray(b, dtype=float).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"point dimensions differ: {av.shape[0]} vs {bv.shape[0]}")
    d2 = float(np.sum((av - bv) ** 2))
    return float(np.exp(-d2 / (2.0 * spec.sigma**2)))


def gram(mixture, component, spec: KernelSpec) -> GramMatrix:
    """Build the Gram matrix over [mixture; component] with the given kernel."""
    mix = _as_points(mixture, "mixture")
    comp = _as_points(component, "component")
    if mix.shape[1] != comp.shape[1]:
        raise ValueError(
            f"dimension mismatch: mixture is {mix.shape[1]}-d, component is {comp.shape[1]}-d"
        )
    z = np.vstack([mix, comp])
    d2 = squareform(pdist(z, "sqeuclidean"))
    k = np.exp(-d2 / (2.0 * spec.sigma**2))
    # exp underflows to 0.0 for extreme distance/bandwidth ratios; pin at the
    # smallest positive normal so entries stay in (0, 1].
    np.maximum(k, np.finfo(float).tiny, out=k)
    return GramMatrix(entries=k, n=mix.shape[0], m=comp.shape[0])


def _median_pairwise_distance(pts: np.ndarray, max_points: int = _MEDIAN_MAX_POINTS) -> float:
    if pts.shape[0] > max_points:
        idx = np.random.default_rng(0).choice(pts.shape[0], max_points, replace=False)
        pts = pts[idx]
    return float(np.median(pdist(pts)))


def bandwidth_grid(all_points, count: int = 5) -> list[KernelSpec]:
    """Candidate bandwidths, log-uniform on [0.1 * median, 10 * median].

    `median` is the median Euclidean distance over all distinct pairs of the
    input points.  Both endpoints are included; `count=1` returns the
    geometric midpoint, i.e. the median distance itself.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pts = _as_points(all_points)
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points to compute pairwise distances")
    med = _median_pairwise_distance(pts)
    if med <= 0.0:
        raise DegenerateDataError(
            "median pairwise distance is zero (all points identical?)"
        )
    if count == 1:
        return [KernelSpec(med)]
    return [KernelSpec(float(s)) for s in np.geomspace(0.1 * med, 10.0 * med, count)]


def empirical_mmd(K: GramMatrix) -> float:
    """RKHS distance between the two empirical distributions encoded in K.

    Computed as sqrt(mean(K_FF) - 2 mean(K_FH) + mean(K_HH)) with the radicand
    clamped at zero; this equals the norm of the difference of the two
    empirical kernel mean embeddings.
    """
    k, n = K.entries, K.n
    mff = k[:n, :n].mean()
    mfh = k[:n, n:].mean()
    mhh = k[n:, n:].mean()
    return float(np.sqrt(max(mff - 2.0 * mfh + mhh, 0.0)))


def select_kernel(mixture, component, grid: list[KernelSpec]) -> tuple[KernelSpec, GramMatrix]:
    """Pick the grid bandwidth maximizing empirical_mmd; ties take the
    smallest sigma.  Returns the winning spec with its Gram matrix."""
    if not grid:
        raise ValueError("bandwidth grid is empty")
    best: tuple[KernelSpec, GramMatrix] | None = None
    best_score = -np.inf
    for spec in sorted(grid, key=lambda s: s.sigma):
        g = gram(mixture, component, spec)
        score = empirical_mmd(g)
        if score > best_score:
            best = (spec, g)
            best_score = score
    assert best is not None
    return best
