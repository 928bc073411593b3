"""Weighted Lloyd k-means with deterministic k-means++ seeding.

Reproducibility contract: all randomness comes from a splitmix64 stream over
the caller's 64-bit seed (constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9,
0x94D049BB133111EB; floats are the top 53 bits scaled to [0, 1)).  Identical
input and seed therefore give bit-identical centroids and assignments on any
platform.

Algorithm details that tests rely on:

* assignment ties go to the lowest centroid index;
* a cluster that loses all its points is reseeded to the point farthest from
  its nearest centroid, which strictly decreases inertia;
* iteration stops when the assignment stops changing, which is the exact
  Lloyd fixpoint: centroids equal their clusters' weighted means, every
  point sits with its nearest centroid, and the centroid shift (0) is below
  any ``tol``; ``max_iters`` caps the loop for inputs that never settle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClusterError

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny deterministic PRNG; good enough to drive k-means++ sampling."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_uint64() >> 11) * (2.0 ** -53)


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    seed: int
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ClusterError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ClusterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ClusterError(f"tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray          # (k, d)
    assignment: np.ndarray         # (n,) centroid index per point
    inertia: float                 # weighted sum of squared distances
    inertia_history: list[float] = field(repr=False)
    k_requested: int = 0
    iterations: int = 0
    converged: bool = True

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def k_reduced(self) -> bool:
        return self.k < self.k_requested


def _weighted_choice(cumulative: np.ndarray, u: float) -> int:
    """Index i with cumulative[i-1] <= u * total < cumulative[i]."""
    total = cumulative[-1]
    return int(np.searchsorted(cumulative, u * total, side="right").clip(0, len(cumulative) - 1))


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) squared euclidean distances."""
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _seed_plus_plus(points: np.ndarray, weights: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    first = _weighted_choice(np.cumsum(weights), rng.next_float())
    centers = [points[first]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        scores = weights * d2
        total = scores.sum()
        if total > 0:
            idx = _weighted_choice(np.cumsum(scores), rng.next_float())
        else:
            # remaining mass sits on the chosen centers; any weighted draw works
            idx = _weighted_choice(np.cumsum(weights), rng.next_float())
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers, dtype=np.float64)


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties to the lowest index) plus squared distances."""
    d2 = _squared_distances(points, centers)
    return np.argmin(d2, axis=1), d2


def kmeans(points, weights=None, cfg: KMeansConfig | None = None) -> KMeansResult:
    """Cluster weighted points; see the module docstring for guarantees.

    ``points`` is an (n, d) array or sequence of d-tuples; 1-D input is
    treated as n points on the line.  When fewer distinct points than ``k``
    exist, k is reduced to the point count and reported on the result.
    """
    if cfg is None:
        raise ClusterError("kmeans requires a KMeansConfig")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ClusterError("kmeans needs at least one point")
    if not np.all(np.isfinite(pts)):
        raise ClusterError("kmeans input contains non-finite coordinates")
    n = pts.shape[0]
    if weights is None:
        w = np.ones(n, dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,):
            raise ClusterError(f"weights shape {w.shape} does not match {n} points")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ClusterError("weights must be finite and positive")

    k = min(cfg.k, n)
    rng = SplitMix64(cfg.seed)
    centers = _seed_plus_plus(pts, w, k, rng)

    assignment, d2 = _assign(pts, centers)
    history = [float(np.sum(w * d2[np.arange(n), assignment]))]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        new_centers = centers.copy()
        for j in range(k):
            sel = assignment == j
            mass = w[sel].sum()
            if mass > 0:
                new_centers[j] = np.average(pts[sel], axis=0, weights=w[sel])
        # reseed empty clusters at the point farthest from its nearest center
        empty = [j for j in range(k) if not np.any(assignment == j)]
        if empty:
            d2_now = _squared_distances(pts, new_centers)
            nearest = d2_now.min(axis=1)
            for j in empty:
                if nearest.max() <= 0:
                    break  # every point already coincides with a center
                far = int(np.argmax(nearest))
                new_centers[j] = pts[far]
                nearest = np.minimum(nearest, np.sum((pts - pts[far]) ** 2, axis=1))

        centers = new_centers
        new_assignment, d2 = _assign(pts, centers)
        history.append(float(np.sum(w * d2[np.arange(n), new_assignment])))
        stable = bool(np.array_equal(new_assignment, assignment))
        assignment = new_assignment
        if stable:
            # assignment repeated, so the means just computed reproduce the
            # centroids exactly: max shift is 0 < tol and this is a fixpoint
            converged = True
            break

    return KMeansResult(
        centroids=centers,
        assignment=assignment,
        inertia=history[-1],
        inertia_history=history,
        k_requested=cfg.k,
        iterations=iterations,
        converged=converged,
    )
