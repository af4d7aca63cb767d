"""Partition-agreement metrics and PCA plot-data export."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ObservationSet


@dataclass(frozen=True)
class ContingencyTable:
    """Joint class counts of two labelings over the same samples."""

    counts: np.ndarray  # (Ka, Kb)
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    n: int

    @classmethod
    def from_labels(cls, labels_a, labels_b) -> "ContingencyTable":
        a = np.asarray(labels_a)
        b = np.asarray(labels_b)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("label vectors must be 1-d and of equal length")
        _, ai = np.unique(a, return_inverse=True)
        _, bi = np.unique(b, return_inverse=True)
        ka, kb = ai.max() + 1, bi.max() + 1
        counts = np.zeros((ka, kb), dtype=np.int64)
        np.add.at(counts, (ai, bi), 1)
        return cls(counts, counts.sum(axis=1), counts.sum(axis=0), a.size)


def _comb2_sum(counts) -> int:
    return sum(int(c) * (int(c) - 1) // 2 for c in counts)


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index: (Index - Expected) / (Max - Expected) over pair
    counts. Permutation-invariant; 1 for identical partitions.

    The pair counts are integers, so the ratio is formed in exact integer
    arithmetic; pinned rational values (e.g. the crossed case at -0.5) come
    out exact.
    """
    table = ContingencyTable.from_labels(labels_a, labels_b)
    index = _comb2_sum(table.counts.reshape(-1))
    sum_a = _comb2_sum(table.row_marginals)
    sum_b = _comb2_sum(table.col_marginals)
    total = table.n * (table.n - 1) // 2
    if total == 0:
        return 1.0
    # Multiply through by 2*total to stay in integers.
    numer = 2 * total * index - 2 * sum_a * sum_b
    denom = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if denom == 0:
        # Both partitions are trivial (all-singletons or a single class).
        return 1.0
    return numer / denom


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Entropies are in nats. Degenerate convention: if either partition has a
    single class (zero entropy), the score is 0, including for identical
    single-class labelings.
    """
    table = ContingencyTable.from_labels(labels_a, labels_b)
    n = float(table.n)
    pa = table.row_marginals / n
    pb = table.col_marginals / n
    ha = -np.sum(pa * np.log(pa, where=pa > 0, out=np.zeros_like(pa)))
    hb = -np.sum(pb * np.log(pb, where=pb > 0, out=np.zeros_like(pb)))
    if ha == 0.0 or hb == 0.0:
        return 0.0
    if (np.count_nonzero(table.counts, axis=0).max() == 1
            and np.count_nonzero(table.counts, axis=1).max() == 1):
        # One nonzero cell per row and column: the partitions agree up to
        # relabeling, so the score is exactly 1.
        return 1.0
    pj = table.counts / n
    outer = pa[:, None] * pb[None, :]
    mask = pj > 0
    mi = float(np.sum(pj[mask] * np.log(pj[mask] / outer[mask])))
    return float(min(mi / (0.5 * (ha + hb)), 1.0))


def pca_embed(obs: ObservationSet, dims: int = 2) -> np.ndarray:
    """Project vectorized, mean-centered samples onto the top principal
    directions. Sign convention: the largest-magnitude loading of each
    direction is positive, so the output is deterministic."""
    if not 1 <= dims <= obs.d:
        raise ValueError(f"dims must lie in [1, {obs.d}]")
    flat = obs.data.reshape(obs.n, -1)
    centered = flat - flat.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    take = min(dims, s.size)
    scores = np.zeros((obs.n, dims))
    scores[:, :take] = u[:, :take] * s[:take]
    for c in range(take):
        lead = np.argmax(np.abs(vt[c]))
        if vt[c, lead] < 0:
            scores[:, c] = -scores[:, c]
    return scores
