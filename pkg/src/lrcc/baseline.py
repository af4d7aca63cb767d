"""Low-rank Lloyd's algorithm: the nonconvex comparison baseline.

Classic Lloyd iteration with one change: after averaging each cluster, the
centroid is replaced by its best rank-r approximation. Initialization is
either a random assignment or a simple spectral heuristic (SVD scores of the
vectorized samples followed by a small k-means); the latter stands in for the
cited tensor-based initialization and is labeled as such in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ObservationSet
from .rng import make_rng

INIT_MODES = ("random", "spectral")


@dataclass(frozen=True)
class LloydOptions:
    k: int
    rank: int
    max_iter: int = 100
    init: str = "random"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")


@dataclass
class LloydResult:
    labels: np.ndarray  # (n,)
    centroids: np.ndarray  # (k, d1, d2)
    iterations: int
    objectives: list = field(default_factory=list)  # after each update step
    reseeds: list = field(default_factory=list)  # iterations where an empty cluster was refilled


def _truncate_rank(mats: np.ndarray, r: int) -> np.ndarray:
    """Best rank-r approximation of each matrix in the stack."""
    u, s, vt = np.linalg.svd(mats, full_matrices=False)
    s = s.copy()
    s[:, r:] = 0.0
    return np.matmul(u * s[:, None, :], vt)


def _assign(flat: np.ndarray, cent_flat: np.ndarray) -> np.ndarray:
    # argmin breaks distance ties toward the lowest cluster index
    d2 = (np.sum(flat**2, axis=1)[:, None]
          - 2.0 * flat @ cent_flat.T
          + np.sum(cent_flat**2, axis=1)[None, :])
    return np.argmin(d2, axis=1)


def spectral_init(obs: ObservationSet, k: int, r: int, seed: int = 0) -> np.ndarray:
    """Initial labels from an SVD of the vectorized samples.

    Projects samples onto their top right singular directions and runs a
    short seeded k-means on the scores. Deterministic given the seed; always
    returns k nonempty classes.
    """
    n = obs.n
    if k > n:
        raise ValueError("cannot form more clusters than samples")
    if n == k:
        return np.arange(n, dtype=np.int64)
    rng = make_rng(seed)
    flat = obs.data.reshape(n, -1)
    ncomp = min(max(k, r), min(flat.shape))
    u, s, _ = np.linalg.svd(flat - flat.mean(axis=0), full_matrices=False)
    scores = u[:, :ncomp] * s[:ncomp]
    centers = scores[rng.permutation(n)[:k]]
    labels = _assign(scores, centers)
    for _ in range(25):
        labels = _fix_empty(scores, labels, centers, k)
        new_centers = np.stack([scores[labels == c].mean(axis=0) for c in range(k)])
        new_labels = _assign(scores, new_centers)
        centers = new_centers
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return _fix_empty(scores, labels, centers, k)


def _fix_empty(flat: np.ndarray, labels: np.ndarray, cent_flat: np.ndarray,
               k: int) -> np.ndarray:
    """Hand each empty cluster the sample farthest from its centroid."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        resid = np.linalg.norm(flat - cent_flat[labels], axis=1)
        # Protect donors that are their cluster's only member.
        counts = np.bincount(labels, minlength=k)
        resid[counts[labels] <= 1] = -1.0
        labels[int(np.argmax(resid))] = c
    return labels


def lr_lloyd(obs: ObservationSet, options: LloydOptions) -> LloydResult:
    """Alternate nearest-centroid assignment and rank-r centroid updates.

    Stops when the assignment no longer changes or the iteration cap is hit.
    Empty clusters are re-seeded from the farthest sample (recorded in
    `reseeds`; the objective trace is nonincreasing between reseeds).
    """
    n = obs.n
    k, r = options.k, options.rank
    if k > n:
        raise ValueError("cannot form more clusters than samples")
    if r > obs.d2:
        raise ValueError("rank cannot exceed d2")
    if options.init == "spectral":
        labels = spectral_init(obs, k, r, options.seed)
    else:
        rng = make_rng(options.seed)
        perm = rng.permutation(n)
        labels = np.empty(n, dtype=np.int64)
        # Guarantee nonempty classes, fill the rest uniformly.
        labels[perm[:k]] = np.arange(k)
        labels[perm[k:]] = (rng.random(n - k) * k).astype(np.int64)

    flat = obs.data.reshape(n, -1)
    result = LloydResult(labels, np.zeros((k, obs.d1, obs.d2)), 0)
    for it in range(options.max_iter):
        centroids = np.zeros((k, obs.d1, obs.d2))
        np.add.at(centroids, labels, obs.data)
        counts = np.bincount(labels, minlength=k).astype(float)
        centroids /= np.maximum(counts, 1.0)[:, None, None]
        centroids = _truncate_rank(centroids, r)
        cent_flat = centroids.reshape(k, -1)
        result.objectives.append(
            float(np.sum((flat - cent_flat[labels]) ** 2)))
        new_labels = _assign(flat, cent_flat)
        fixed = _fix_empty(flat, new_labels, cent_flat, k)
        if not np.array_equal(fixed, new_labels):
            result.reseeds.append(it)
        new_labels = fixed
        result.iterations = it + 1
        result.centroids = centroids
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    result.labels = labels
    return result
