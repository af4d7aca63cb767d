"""Matrix-valued observation sets: data model, file I/O, synthetic generators.

An observation set holds n real matrices of common shape d1 x d2. The package
convention is d1 >= d2 everywhere; inputs violating it are transposed at the
boundary (clustering is transpose-invariant for this model) and the flag is
kept so callers can undo it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng, normal, uniform

MTS_MAGIC = b"MTS1"

# Centroid singular values for the eight-cluster unbalanced Gaussian data:
# row 1 and row 2 hold the first and second singular value per cluster.
UNBALANCED_SINGULAR_VALUES = np.array(
    [
        [0.02, 0.09, 0.16, 0.70, 0.70, 0.80, 0.90, 0.90],
        [0.48, 0.55, 0.48, 0.36, 0.60, 0.48, 0.36, 0.60],
    ]
)

UNBALANCED_FULL_SIZES = (2000, 2000, 2000, 100, 100, 100, 100, 100)


class BadMagicError(ValueError):
    """File does not start with the MTS1 magic bytes."""


class TruncatedPayloadError(ValueError):
    """File ends before the header-declared payload is complete."""


class NonFiniteDataError(ValueError):
    """Payload contains NaN or infinite entries."""


@dataclass(frozen=True)
class ObservationSet:
    """n matrices of shape d1 x d2, stored contiguously with d1 >= d2."""

    data: np.ndarray  # (n, d1, d2), float64, read-only
    transposed: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected (n, d1, d2) array, got shape {arr.shape}")
        n, d1, d2 = arr.shape
        if n < 1:
            raise ValueError("observation set must contain at least one sample")
        if d1 < 1 or d2 < 1:
            raise ValueError("matrix dimensions must be positive")
        if d1 < d2:
            arr = np.ascontiguousarray(arr.transpose(0, 2, 1))
            object.__setattr__(self, "transposed", not self.transposed)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteDataError("observations contain non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d1(self) -> int:
        return self.data.shape[1]

    @property
    def d2(self) -> int:
        return self.data.shape[2]

    @property
    def d(self) -> int:
        return self.d1 * self.d2

    def stacked(self) -> np.ndarray:
        """The samples flattened into one vector of length n*d1*d2."""
        return self.data.reshape(-1).copy()


def unstack(x: np.ndarray, n: int, d1: int, d2: int) -> np.ndarray:
    """View a stacked vector as (n, d1, d2) sample blocks."""
    return np.asarray(x).reshape(n, d1, d2)


@dataclass(frozen=True)
class LabelVector:
    """Per-sample integer labels 0..k-1 with every class nonempty."""

    labels: np.ndarray
    k: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("labels must be a nonempty 1-d sequence")
        if not np.issubdtype(arr.dtype, np.integer):
            ints = arr.astype(np.int64)
            if not np.array_equal(ints, arr):
                raise ValueError("labels must be integers")
            arr = ints
        arr = arr.astype(np.int64)
        if arr.min() < 0:
            raise ValueError("labels must be nonnegative")
        k = int(arr.max()) + 1
        counts = np.bincount(arr, minlength=k)
        if np.any(counts == 0):
            raise ValueError("every label class in 0..k-1 must be nonempty")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class MixtureSpec:
    """Low-rank mixture: K mean matrices, weights, isotropic noise scale."""

    means: np.ndarray  # (K, d1, d2)
    weights: np.ndarray  # (K,), sums to 1
    noise: float
    ranks: np.ndarray  # (K,) target rank per mean

    def __post_init__(self):
        means = np.ascontiguousarray(self.means, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        ranks = np.asarray(self.ranks, dtype=np.int64)
        if means.ndim != 3:
            raise ValueError("means must have shape (K, d1, d2)")
        k = means.shape[0]
        if weights.shape != (k,) or ranks.shape != (k,):
            raise ValueError("weights and ranks must have one entry per mean")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1 within 1e-12")
        if np.any(weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        if self.noise < 0:
            raise ValueError("noise scale must be nonnegative")
        svals = np.linalg.svd(means, compute_uv=False)
        for alpha in range(k):
            r = int(ranks[alpha])
            if not 1 <= r <= min(means.shape[1], means.shape[2]):
                raise ValueError("target ranks must lie in [1, min(d1, d2)]")
            tail = svals[alpha, r:]
            if tail.size and tail.max() > 1e-10 * max(1.0, svals[alpha, 0]):
                raise ValueError(f"mean {alpha} exceeds its target rank {r}")
        for arr in (means, weights, ranks):
            arr.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "ranks", ranks)

    @property
    def k(self) -> int:
        return self.means.shape[0]


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_mts(obs: ObservationSet, path) -> None:
    """Write the MTS1 binary format.

    Layout: 4-byte magic "MTS1"; u32le n, d1, d2; n*d1*d2 float64le values,
    matrix-major then row-major. Round-trips bit-exactly with load_mts.
    """
    header = MTS_MAGIC + struct.pack("<III", obs.n, obs.d1, obs.d2)
    payload = obs.data.astype("<f8", copy=False).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write MTS1 file {path!r}: {exc}") from exc


def load_mts(path) -> ObservationSet:
    """Read an MTS1 file; transposes to d1 >= d2 and records the flag."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read MTS1 file {path!r}: {exc}") from exc
    if len(blob) < 16 or blob[:4] != MTS_MAGIC:
        raise BadMagicError(f"{path!r}: bad magic, not an MTS1 file")
    n, d1, d2 = struct.unpack("<III", blob[4:16])
    if n < 1 or d1 < 1 or d2 < 1:
        raise ValueError(f"{path!r}: header declares empty set n={n}, d1={d1}, d2={d2}")
    expected = 16 + 8 * n * d1 * d2
    if len(blob) < expected:
        raise TruncatedPayloadError(
            f"{path!r}: truncated payload, expected {expected} bytes, got {len(blob)}"
        )
    values = np.frombuffer(blob[16:expected], dtype="<f8").reshape(n, d1, d2)
    if not np.all(np.isfinite(values)):
        raise NonFiniteDataError(f"{path!r}: payload contains non-finite entries")
    return ObservationSet(values)


def load_csv(path, d1: int, d2: int) -> ObservationSet:
    """Read one row-major flattened d1 x d2 matrix per comma-separated line."""
    rows = []
    want = d1 * d2
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read CSV file {path!r}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != want:
            raise ValueError(
                f"{path!r} line {lineno}: expected {want} fields, got {len(fields)}"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ValueError(f"{path!r} line {lineno}: unparsable number: {exc}") from exc
    if not rows:
        raise ValueError(f"{path!r}: no samples found")
    return ObservationSet(np.asarray(rows, dtype=np.float64).reshape(-1, d1, d2))


def save_labels(labels: LabelVector, path) -> None:
    """One base-10 label per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(int(v)) for v in labels.labels))
        fh.write("\n")


def load_labels(path) -> LabelVector:
    with open(path, "r", encoding="utf-8") as fh:
        values = [int(line) for line in fh.read().split()]
    return LabelVector(np.asarray(values, dtype=np.int64))


# ---------------------------------------------------------------------------
# Synthetic generators (pure functions of arguments and seed)
# ---------------------------------------------------------------------------

def top_singular_factors(rng, d1: int, d2: int, r: int):
    """Top-r left/right singular vectors of a seeded Gaussian d1 x d2 matrix."""
    u, _, vt = np.linalg.svd(normal(rng, (d1, d2)), full_matrices=False)
    return u[:, :r], vt[:r, :].T


def gen_quarter_spheres(
    n_per_cluster: int,
    d1: int = 20,
    d2: int = 10,
    noise: float = 0.1,
    seed: int = 0,
    share_factors: bool = False,
):
    """Two interleaved quarter-sphere clusters of rank-3 matrices.

    Cluster 1 places singular-value vectors s = (sin v cos t, sin v sin t, cos v)
    on a quarter of the unit sphere (t uniform on [0, pi], v uniform on
    [0, pi/2]) plus `noise` times a standard Gaussian 3-vector, and maps them
    through fixed factors as A = U diag(s) V'. Cluster 2 reflects and
    translates the sphere, s = (1 + sin v cos t, 0.5 - sin v sin t,
    0.5 - cos v), using its own independently drawn factors unless
    `share_factors` is set.

    Returns (ObservationSet, LabelVector) with labels 0 then 1 in blocks of
    n_per_cluster.
    """
    if d1 < 3 or d2 < 3:
        raise ValueError("quarter-sphere data needs d1 >= 3 and d2 >= 3")
    if n_per_cluster < 1:
        raise ValueError("n_per_cluster must be at least 1")
    rng = make_rng(seed)
    u1f, v1f = top_singular_factors(rng, d1, d2, 3)
    if share_factors:
        u2f, v2f = u1f, v1f
    else:
        u2f, v2f = top_singular_factors(rng, d1, d2, 3)

    theta = uniform(rng, 0.0, np.pi, n_per_cluster)
    phi = uniform(rng, 0.0, np.pi / 2.0, n_per_cluster)
    s1 = np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
        axis=1,
    )
    s1 = s1 + noise * normal(rng, (n_per_cluster, 3))

    theta = uniform(rng, 0.0, np.pi, n_per_cluster)
    phi = uniform(rng, 0.0, np.pi / 2.0, n_per_cluster)
    s2 = np.stack(
        [
            1.0 + np.sin(phi) * np.cos(theta),
            0.5 - np.sin(phi) * np.sin(theta),
            0.5 - np.cos(phi),
        ],
        axis=1,
    )
    s2 = s2 + noise * normal(rng, (n_per_cluster, 3))

    a1 = np.einsum("ik,nk,jk->nij", u1f, s1, v1f)
    a2 = np.einsum("ik,nk,jk->nij", u2f, s2, v2f)
    data = np.concatenate([a1, a2], axis=0)
    labels = np.repeat(np.arange(2), n_per_cluster)
    return ObservationSet(data), LabelVector(labels)


def unbalanced_gaussian_means(d1: int, d2: int, rng) -> np.ndarray:
    """The eight rank-2 centroids M_i = U_i diag(C1i, C2i) V_i'."""
    means = np.empty((8, d1, d2))
    for i in range(8):
        ui, vi = top_singular_factors(rng, d1, d2, 2)
        means[i] = ui @ np.diag(UNBALANCED_SINGULAR_VALUES[:, i]) @ vi.T
    return means


def gen_unbalanced_gaussian(
    sizes,
    d1: int = 20,
    d2: int = 10,
    noise: float = 0.1,
    seed: int = 0,
):
    """Eight rank-2 Gaussian clusters with the fixed singular-value table.

    `sizes` gives the eight cluster sizes; samples are A = M_label + noise*E
    with standard Gaussian E. Labels come out in blocks.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 8:
        raise ValueError("sizes must contain exactly 8 cluster counts")
    if any(s < 1 for s in sizes):
        raise ValueError("all cluster sizes must be positive")
    if d1 < 2 or d2 < 2:
        raise ValueError("unbalanced Gaussian data needs d1 >= 2 and d2 >= 2")
    rng = make_rng(seed)
    means = unbalanced_gaussian_means(d1, d2, rng)
    labels = np.repeat(np.arange(8), sizes)
    data = means[labels]
    if noise > 0:
        data = data + noise * normal(rng, data.shape)
    return ObservationSet(data), LabelVector(labels)


def gen_low_rank_mixture(spec: MixtureSpec, n: int, seed: int = 0):
    """Draw n samples from the low-rank mixture: labels i.i.d. from the
    weights, noise entries i.i.d. Gaussian with standard deviation
    spec.noise.

    If some mixture component is never drawn (possible when a weight is 0 or
    n is small), label ids are compacted to the drawn components in component
    order so every class is nonempty.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed)
    cum = np.cumsum(spec.weights)
    draws = np.searchsorted(cum, rng.random(n), side="right")
    draws = np.minimum(draws, spec.k - 1)
    data = spec.means[draws]
    if spec.noise > 0:
        data = data + spec.noise * normal(rng, data.shape)
    _, labels = np.unique(draws, return_inverse=True)
    return ObservationSet(data), LabelVector(labels)


def gen_mixture_with_counts(spec: MixtureSpec, counts, seed: int = 0):
    """Mixture samples with exact per-component counts instead of i.i.d. draws."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != spec.k:
        raise ValueError("counts must have one entry per mixture component")
    if any(c < 1 for c in counts):
        raise ValueError("all counts must be positive")
    rng = make_rng(seed)
    labels = np.repeat(np.arange(spec.k), counts)
    data = spec.means[labels]
    if spec.noise > 0:
        data = data + spec.noise * normal(rng, data.shape)
    return ObservationSet(data), LabelVector(labels)


def random_low_rank_means(
    k: int, d1: int, d2: int, rank: int, seed: int = 0, scale: float = 1.0
) -> np.ndarray:
    """K random rank-`rank` means M = U diag(c) V' with c ~ N(0, scale^2)."""
    rng = make_rng(seed)
    means = np.empty((k, d1, d2))
    for i in range(k):
        ui, vi = top_singular_factors(rng, d1, d2, rank)
        c = scale * normal(rng, rank)
        means[i] = (ui * c) @ vi.T
    return means
