"""Neighborhood graphs, edge weights, and the incidence operator.

The graph on n observation nodes carries an edge list with stable indices
l(i,j) (position in the list, i < j) and positive weights. The incidence
matrix B is n x |E| with +1 at (i, l) and -1 at (j, l); the block operator
that maps stacked centroids to stacked edge differences is B' kron I_d and is
applied matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .dataset import ObservationSet

DENSE_EIG_LIMIT = 2048


@dataclass(frozen=True)
class WeightedGraph:
    """Edge list (i < j, no duplicates) with positive weights on n nodes."""

    n: int
    heads: np.ndarray  # (m,) first endpoints i
    tails: np.ndarray  # (m,) second endpoints j, i < j
    weights: np.ndarray  # (m,) positive

    def __post_init__(self):
        heads = np.asarray(self.heads, dtype=np.int64)
        tails = np.asarray(self.tails, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (heads.shape == tails.shape == weights.shape) or heads.ndim != 1:
            raise ValueError("heads, tails, weights must be equal-length vectors")
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if heads.size:
            if heads.min() < 0 or tails.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(heads >= tails):
                raise ValueError("edges must satisfy i < j")
            keys = heads * self.n + tails
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate edges are not allowed")
            if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise ValueError("edge weights must be positive and finite")
        for arr in (heads, tails, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return self.heads.shape[0]

    def edges(self):
        return list(zip(self.heads.tolist(), self.tails.tolist()))

    @cached_property
    def incidence(self) -> scipy.sparse.csr_matrix:
        """Unweighted incidence matrix B, shape (n, m)."""
        m = self.m
        rows = np.concatenate([self.heads, self.tails])
        cols = np.concatenate([np.arange(m), np.arange(m)])
        vals = np.concatenate([np.ones(m), -np.ones(m)])
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, m))

    def with_weights(self, weights) -> "WeightedGraph":
        return WeightedGraph(self.n, self.heads.copy(), self.tails.copy(),
                             np.asarray(weights, dtype=np.float64))


@dataclass(frozen=True)
class ComponentLabels:
    """Connected-component id per node, ids contiguous from 0."""

    labels: np.ndarray
    count: int


def pairwise_frobenius_sq(obs: ObservationSet) -> np.ndarray:
    """Squared Frobenius distances between all sample pairs, shape (n, n)."""
    flat = obs.data.reshape(obs.n, -1)
    sq = np.sum(flat * flat, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (flat @ flat.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def knn_graph(obs: ObservationSet, k: int, mode: str = "union") -> WeightedGraph:
    """k-nearest-neighbor graph by Frobenius distance, unit weights.

    With mode "union" the edge {i, j} is present iff i is among j's k nearest
    or vice versa; "intersection" requires both. Distance ties break toward
    the smaller index.
    """
    n = obs.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, n-1], got k={k} with n={n}")
    if mode not in ("union", "intersection"):
        raise ValueError("mode must be 'union' or 'intersection'")
    d2 = pairwise_frobenius_sq(obs)
    np.fill_diagonal(d2, np.inf)
    # Stable sort keeps the smaller index first among equal distances.
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    neighbor = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    neighbor[rows, order.reshape(-1)] = True
    adj = (neighbor | neighbor.T) if mode == "union" else (neighbor & neighbor.T)
    heads, tails = np.nonzero(np.triu(adj, k=1))
    return WeightedGraph(n, heads, tails, np.ones(heads.size))


def gaussian_weights(obs: ObservationSet, graph: WeightedGraph, phi: float = 0.5) -> WeightedGraph:
    """Reweight edges with the Gaussian kernel w = exp(-phi * ||Ai - Aj||_F^2)."""
    if phi <= 0:
        raise ValueError("kernel scale phi must be positive")
    diff = obs.data[graph.heads] - obs.data[graph.tails]
    sq = np.einsum("eij,eij->e", diff, diff)
    return graph.with_weights(np.exp(-phi * sq))


def apply_D(graph: WeightedGraph, x: np.ndarray, d: int) -> np.ndarray:
    """Edge-difference operator: block l(i,j) of the output is x_i - x_j."""
    x = np.asarray(x)
    if x.shape != (graph.n * d,):
        raise ValueError(f"expected vector of length {graph.n * d}, got {x.shape}")
    blocks = x.reshape(graph.n, d)
    return (blocks[graph.heads] - blocks[graph.tails]).reshape(-1)


def apply_Dt(graph: WeightedGraph, y: np.ndarray, d: int) -> np.ndarray:
    """Adjoint of apply_D: node i accumulates +y_l as head, -y_l as tail."""
    y = np.asarray(y)
    if y.shape != (graph.m * d,):
        raise ValueError(f"expected vector of length {graph.m * d}, got {y.shape}")
    blocks = y.reshape(graph.m, d)
    return (graph.incidence @ blocks).reshape(-1)


def connected_components(n: int, edges) -> ComponentLabels:
    """Union-find partition of n nodes under the given (i, j) edges."""
    parent = np.arange(n)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for i, j in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    # Relabel so component ids appear in node order.
    first = {}
    remap = np.empty(labels.max() + 1, dtype=np.int64)
    next_id = 0
    for lab in labels:
        if lab not in first:
            first[lab] = next_id
            next_id += 1
    for lab, new in first.items():
        remap[lab] = new
    return ComponentLabels(remap[labels], next_id)


def laplacian(graph: WeightedGraph) -> scipy.sparse.csr_matrix:
    """Unweighted graph Laplacian B @ B'."""
    b = graph.incidence
    return (b @ b.T).tocsr()


def sigma_min_B(graph: WeightedGraph, zero_tol: float = 1e-9) -> float:
    """Smallest nonzero singular value of the unweighted incidence matrix.

    Computed as the square root of the smallest nonzero eigenvalue of the
    Laplacian B B'; eigenvalues below zero_tol times the largest one count as
    zero. Dense solve up to n = 2048 nodes, shifted sparse iteration above.
    """
    if graph.m < 1:
        raise ValueError("sigma_min_B needs at least one edge")
    lap = laplacian(graph)
    if graph.n <= DENSE_EIG_LIMIT:
        evals = scipy.linalg.eigh(lap.toarray(), eigvals_only=True)
    else:
        kappa = connected_components(graph.n, zip(graph.heads, graph.tails)).count
        largest = scipy.sparse.linalg.eigsh(
            lap.astype(np.float64), k=1, which="LA", return_eigenvectors=False
        )[0]
        shift = -1e-3 * max(largest, 1.0)
        k = min(kappa + 1, graph.n - 1)
        evals = scipy.sparse.linalg.eigsh(
            lap.astype(np.float64), k=k, sigma=shift, which="LM",
            return_eigenvectors=False,
        )
        evals = np.concatenate([np.sort(evals), [largest]])
    top = evals[-1]
    nonzero = evals[evals > zero_tol * top]
    if nonzero.size == 0:
        raise ValueError("Laplacian has no nonzero eigenvalue")
    return float(np.sqrt(nonzero[0]))


def knn_sigma_lower_bound(n: int, k: int) -> float:
    """Lower bound (2/n) * sqrt((k+1)/3) on sigma_min(B) for k-NN graphs, k >= 2."""
    if k < 2:
        raise ValueError("the k-NN incidence bound requires k >= 2")
    if n < 2:
        raise ValueError("n must be at least 2")
    return (2.0 / n) * np.sqrt((k + 1) / 3.0)


def save_edges(graph: WeightedGraph, path) -> None:
    """One '<i> <j> <w>' triple per line, 0-based node indices."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, w in zip(graph.heads, graph.tails, graph.weights):
            fh.write(f"{int(i)} {int(j)} {float(w)!r}\n")


def load_edges(path, n: int) -> WeightedGraph:
    heads, tails, weights = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path!r} line {lineno}: expected 'i j w'")
            heads.append(int(parts[0]))
            tails.append(int(parts[1]))
            weights.append(float(parts[2]))
    return WeightedGraph(n, np.asarray(heads), np.asarray(tails), np.asarray(weights))
