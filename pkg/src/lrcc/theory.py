"""Diagnostics for the cluster-recovery and prediction-error guarantees.

Three calculators, one per guarantee: finite-sample exact recovery (cluster
cliques, the eta interference terms, the gamma1 lower bound and the
gamma1*w_max + gamma2*sqrt(d2) < Delta ceiling), asymptotic recovery for the
low-rank Gaussian mixture (tube memberships, the chi CDF, and the (a1)/(b1)/
(c1) conditions), and the finite-sample prediction bound with its gamma1
threshold. Reports carry every intermediate quantity so experiments can plot
the (gamma1, gamma2) region diagram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.special

from .dataset import LabelVector, ObservationSet
from .graph import WeightedGraph, connected_components, sigma_min_B

REGIONS = ("perfect", "merge-only", "distinguish-only", "neither")


def cluster_means(obs: ObservationSet, labels: LabelVector) -> np.ndarray:
    """Per-cluster Frobenius means, shape (K, d1, d2)."""
    if labels.n != obs.n:
        raise ValueError("labels and observations disagree on sample count")
    k = labels.k
    sums = np.zeros((k, obs.d1, obs.d2))
    np.add.at(sums, labels.labels, obs.data)
    counts = np.bincount(labels.labels, minlength=k)
    return sums / counts[:, None, None]


def _weight_matrix(graph: WeightedGraph) -> scipy.sparse.csr_matrix:
    i, j, w = graph.heads, graph.tails, graph.weights
    mat = scipy.sparse.csr_matrix(
        (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(graph.n, graph.n))
    return mat


@dataclass
class RecoveryReport:
    """Everything the finite-sample recovery theorem measures on one instance."""

    cluster_sizes: np.ndarray  # (K,)
    means: np.ndarray  # (K, d1, d2)
    delta: float | None  # min pairwise mean distance; None for K < 2
    clique: np.ndarray  # (K,) bool
    eta_max: np.ndarray  # (K,) max interference term per cluster
    eta_pairs: list  # per cluster: list of (i, j, eta)
    gamma1_min: float
    w_max: float
    d2: int
    gamma1: float
    gamma2: float
    condition_a: bool
    condition_b: bool
    condition_c: bool | None
    region: str

    def boundary_lines(self) -> dict:
        """The two lines of the (gamma1, gamma2) region diagram."""
        return {
            "gamma1_min": self.gamma1_min,
            "ceiling": {"w_max": self.w_max, "sqrt_d2": float(np.sqrt(self.d2)),
                        "delta": self.delta},
        }

    def as_dict(self) -> dict:
        return {
            "cluster_sizes": self.cluster_sizes.tolist(),
            "delta": self.delta,
            "clique": [bool(c) for c in self.clique],
            "eta_max": self.eta_max.tolist(),
            "gamma1_min": self.gamma1_min,
            "w_max": self.w_max,
            "d2": self.d2,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "condition_a": self.condition_a,
            "condition_b": self.condition_b,
            "condition_c": self.condition_c,
            "region": self.region,
            "boundary_lines": self.boundary_lines(),
        }


def _classify(gamma1: float, gamma2: float, gamma1_min: float, w_max: float,
              delta: float | None, d2: int):
    cond_b = bool(gamma1 >= gamma1_min)
    if delta is None:
        return cond_b, None, "merge-only" if cond_b else "neither"
    cond_c = bool(delta > 0 and gamma1 * w_max + gamma2 * np.sqrt(d2) < delta)
    if cond_b and cond_c:
        region = "perfect"
    elif cond_b:
        region = "merge-only"
    elif cond_c:
        region = "distinguish-only"
    else:
        region = "neither"
    return cond_b, cond_c, region


def recovery_check(obs: ObservationSet, labels: LabelVector, graph: WeightedGraph,
                   gamma1: float, gamma2: float,
                   keep_pairs: bool = True) -> RecoveryReport:
    """Evaluate the exact-recovery conditions at (gamma1, gamma2).

    Non-edges count as weight zero, so a missing intra-cluster edge drives
    the gamma1 lower bound to infinity (and fails the clique check). With a
    single cluster the distinguishing condition is undefined and Delta is
    reported as None.
    """
    if labels.n != obs.n or graph.n != obs.n:
        raise ValueError("labels, graph and observations disagree on sample count")
    n, k = obs.n, labels.k
    lab = labels.labels
    means = cluster_means(obs, labels)
    sizes = np.bincount(lab, minlength=k)

    if k >= 2:
        mdiff = means[:, None] - means[None, :]
        dists = np.sqrt(np.einsum("abij,abij->ab", mdiff, mdiff))
        delta = float(dists[np.triu_indices(k, 1)].min())
    else:
        delta = None

    wmat = _weight_matrix(graph)
    # S[i, beta] = sum of weights from i into cluster beta.
    onehot = scipy.sparse.csr_matrix(
        (np.ones(n), (np.arange(n), lab)), shape=(n, k))
    cluster_w = np.asarray((wmat @ onehot).todense())

    edge_lookup = {}
    intra_edges = np.zeros(k, dtype=np.int64)
    for i, j, w in zip(graph.heads, graph.tails, graph.weights):
        edge_lookup[(int(i), int(j))] = float(w)
        if lab[i] == lab[j]:
            intra_edges[lab[i]] += 1

    clique = np.array([intra_edges[a] == sizes[a] * (sizes[a] - 1) // 2
                       for a in range(k)])
    eta_max = np.zeros(k)
    eta_pairs = [[] for _ in range(k)]
    gamma1_min = 0.0
    flat = obs.data.reshape(n, -1)
    for alpha in range(k):
        members = np.nonzero(lab == alpha)[0]
        na = sizes[alpha]
        other = [b for b in range(k) if b != alpha]
        for ai in range(len(members)):
            for aj in range(ai + 1, len(members)):
                i, j = int(members[ai]), int(members[aj])
                w_ij = edge_lookup.get((i, j), 0.0)
                if w_ij == 0.0:
                    eta = np.inf
                    bound = np.inf
                else:
                    eta = float(
                        np.abs(cluster_w[i, other] - cluster_w[j, other]).sum()) / w_ij
                    if eta < na:
                        bound = float(np.linalg.norm(flat[i] - flat[j])) / (w_ij * (na - eta))
                    else:
                        bound = np.inf
                eta_max[alpha] = max(eta_max[alpha], eta)
                gamma1_min = max(gamma1_min, bound)
                if keep_pairs:
                    eta_pairs[alpha].append((i, j, eta))

    cross = np.array([cluster_w[lab == a][:, [b for b in range(k) if b != a]].sum()
                      if k > 1 else 0.0 for a in range(k)])
    w_max = float(np.max(2.0 * cross / sizes)) if k > 1 else 0.0

    condition_a = bool(np.all(clique) and np.all(eta_max < sizes))
    cond_b, cond_c, region = _classify(gamma1, gamma2, gamma1_min, w_max,
                                       delta, obs.d2)
    return RecoveryReport(
        cluster_sizes=sizes, means=means, delta=delta, clique=clique,
        eta_max=eta_max, eta_pairs=eta_pairs, gamma1_min=gamma1_min,
        w_max=w_max, d2=obs.d2, gamma1=gamma1, gamma2=gamma2,
        condition_a=condition_a, condition_b=cond_b, condition_c=cond_c,
        region=region)


def region_classify(report: RecoveryReport, gamma1: float, gamma2: float) -> str:
    """Re-classify a recovery report at a new (gamma1, gamma2) query point."""
    _, _, region = _classify(gamma1, gamma2, report.gamma1_min, report.w_max,
                             report.delta, report.d2)
    return region


def chi_cdf(t: float, d: int) -> float:
    """CDF of the chi distribution with d degrees of freedom.

    Equals the regularized lower incomplete gamma P(d/2, t^2/2).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if d < 1:
        raise ValueError("d must be at least 1")
    return float(scipy.special.gammainc(d / 2.0, t * t / 2.0))


@dataclass
class AsymptoticReport:
    """Quantities of the asymptotic-recovery guarantee for one instance."""

    t: float
    sigma: float
    epsilon: float
    chi_cdf_value: float
    pi_hat: np.ndarray  # (K,) nearest-mean frequencies
    memberships: list  # per component: sorted sample indices within t*sigma
    clique: np.ndarray  # (K,) bool
    eta_max: np.ndarray  # (K,)
    condition_a1: bool
    gamma1_bound: float  # the (b1) right-hand side, max over components
    condition_b1: bool
    condition_c1: bool
    w_tilde_max: float
    prob_merge: np.ndarray  # (K,) lower bounds 1 - exp(-2 eps^2 n)
    prob_distinguish: np.ndarray  # (K, K) pairwise lower bounds
    notes: str

    def as_dict(self) -> dict:
        return {
            "t": self.t, "sigma": self.sigma, "epsilon": self.epsilon,
            "chi_cdf": self.chi_cdf_value,
            "pi_hat": self.pi_hat.tolist(),
            "membership_sizes": [len(m) for m in self.memberships],
            "clique": [bool(c) for c in self.clique],
            "eta_max": self.eta_max.tolist(),
            "condition_a1": self.condition_a1,
            "gamma1_bound": self.gamma1_bound,
            "condition_b1": self.condition_b1,
            "condition_c1": self.condition_c1,
            "w_tilde_max": self.w_tilde_max,
            "prob_merge": self.prob_merge.tolist(),
            "prob_distinguish": self.prob_distinguish.tolist(),
            "notes": self.notes,
        }


def asymptotic_check(obs: ObservationSet, means: np.ndarray, sigma: float,
                     graph: WeightedGraph, t: float, epsilon: float,
                     gamma1: float, gamma2: float) -> AsymptoticReport:
    """Evaluate the asymptotic-recovery conditions with known true means.

    Means are inputs, not estimates: the guarantee is stated for the true
    mixture centers. Empirical frequencies pi_hat come from nearest-mean
    assignment; epsilon must lie in (0, F(t;d) * min pi_hat).
    """
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 3 or means.shape[1:] != (obs.d1, obs.d2):
        raise ValueError("means must have shape (K, d1, d2) matching the data")
    if graph.n != obs.n:
        raise ValueError("graph and observations disagree on sample count")
    n, k = obs.n, means.shape[0]
    f_val = chi_cdf(t, obs.d)

    flat = obs.data.reshape(n, -1)
    mflat = means.reshape(k, -1)
    dists = np.linalg.norm(flat[:, None, :] - mflat[None, :, :], axis=2)
    pi_hat = np.bincount(np.argmin(dists, axis=1), minlength=k) / n
    if not 0 < epsilon < f_val * pi_hat.min():
        raise ValueError(
            f"epsilon must lie in (0, F(t;d)*min pi_hat) = (0, {f_val * pi_hat.min():.3g})")

    memberships = [np.nonzero(dists[:, alpha] <= t * sigma)[0] for alpha in range(k)]
    wmat = _weight_matrix(graph)
    edge_lookup = {(int(i), int(j)): float(w)
                   for i, j, w in zip(graph.heads, graph.tails, graph.weights)}

    clique = np.zeros(k, dtype=bool)
    eta_max = np.zeros(k)
    gamma1_bound = 0.0
    for alpha in range(k):
        members = memberships[alpha]
        inside = np.zeros(n, dtype=bool)
        inside[members] = True
        rows = np.asarray(wmat[members].todense()) if members.size else np.zeros((0, n))
        outside_cols = ~inside
        target = (f_val * pi_hat[alpha] - epsilon) * n
        is_clique = True
        for ai in range(members.size):
            for aj in range(ai + 1, members.size):
                i, j = int(members[ai]), int(members[aj])
                w_ij = edge_lookup.get((i, j), 0.0)
                if w_ij == 0.0:
                    is_clique = False
                    eta = np.inf
                    bound = np.inf
                else:
                    eta = float(np.abs(rows[ai, outside_cols]
                                       - rows[aj, outside_cols]).sum()) / w_ij
                    denom = w_ij * (target - eta)
                    bound = (2.0 * t * sigma) / denom if denom > 0 else np.inf
                eta_max[alpha] = max(eta_max[alpha], eta)
                gamma1_bound = max(gamma1_bound, bound)
        clique[alpha] = is_clique
    condition_a1 = bool(np.all(clique) and
                        np.all([eta_max[a] < (f_val * pi_hat[a] - epsilon) * n
                                for a in range(k)]))
    condition_b1 = gamma1 >= gamma1_bound

    w_tilde_max = float(graph.weights.max()) if graph.m else 0.0
    mean_dists = np.linalg.norm(mflat[:, None, :] - mflat[None, :, :], axis=2)
    lhs = gamma1 * (n - 1) * w_tilde_max + gamma2 * np.sqrt(obs.d2)
    pair_ok = lhs < 0.5 * mean_dists
    condition_c1 = bool(np.all(pair_ok[np.triu_indices(k, 1)])) if k > 1 else True

    prob_merge = 1.0 - np.exp(-2.0 * epsilon**2 * n)
    tail = np.power(2.0, -(f_val * pi_hat - epsilon) * n)
    single = np.maximum(1.0 - np.exp(-2.0 * epsilon**2 * n) - tail, 0.0)
    prob_distinguish = np.outer(single, single)
    return AsymptoticReport(
        t=t, sigma=sigma, epsilon=epsilon, chi_cdf_value=f_val, pi_hat=pi_hat,
        memberships=memberships, clique=clique, eta_max=eta_max,
        condition_a1=condition_a1, gamma1_bound=gamma1_bound,
        condition_b1=condition_b1, condition_c1=condition_c1,
        w_tilde_max=w_tilde_max,
        prob_merge=np.full(k, prob_merge), prob_distinguish=prob_distinguish,
        notes=("distinguishing probability uses the theorem-statement exponent "
               "2^(-(F*pi-eps)n); the proof writes the algebraically identical "
               "2^(-F*pi*n+eps*n)"))


@dataclass
class PredictionBoundReport:
    """The prediction-error bound split into its three terms."""

    gamma1_threshold: float
    variance_term: float
    group_term: float
    nuclear_term: float
    rhs_total: float
    lhs: float | None
    consistency_value: float
    weight_assumption_ok: bool
    kappa0: int
    sigma_min_b: float
    gamma1: float
    gamma2: float

    def as_dict(self) -> dict:
        return {
            "gamma1_threshold": self.gamma1_threshold,
            "variance_term": self.variance_term,
            "group_term": self.group_term,
            "nuclear_term": self.nuclear_term,
            "rhs_total": self.rhs_total,
            "lhs": self.lhs,
            "consistency_value": self.consistency_value,
            "weight_assumption_ok": self.weight_assumption_ok,
            "kappa0": self.kappa0,
            "sigma_min_b": self.sigma_min_b,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
        }


def prediction_bound(x0: np.ndarray, graph: WeightedGraph, sigma: float,
                     gamma1: float, gamma2: float, n: int, d1: int, d2: int,
                     xhat: np.ndarray | None = None) -> PredictionBoundReport:
    """Evaluate the finite-sample prediction bound at true centroids x0.

    The right-hand side is the sum of a variance term (with the component
    count kappa0), a fusion term over edges of x0 differences, and a nuclear
    term; the threshold is the gamma1 value the guarantee requires. When an
    estimate xhat is supplied, the measured left side (1/(2dn)) ||xhat-x0||^2
    is filled in.
    """
    d = d1 * d2
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (n * d,):
        raise ValueError(f"x0 must be a stacked vector of length {n * d}")
    m = graph.m
    kappa0 = connected_components(graph.n, zip(graph.heads, graph.tails)).count
    smin = sigma_min_B(graph)
    threshold = 4.0 * sigma * np.sqrt(d * np.log(d * m)) / smin if m else np.inf

    variance = sigma**2 * (kappa0 / n + np.sqrt(kappa0 * np.log(d * n) / (d * n**2)))
    if m:
        diffs = x0.reshape(n, d)[graph.heads] - x0.reshape(n, d)[graph.tails]
        norms = np.linalg.norm(diffs, axis=1)
        group = gamma1 / (2.0 * d * n) * float(((1.0 + 2.0 * graph.weights) * norms).sum())
    else:
        group = 0.0
    nuclear_sum = float(np.linalg.svd(x0.reshape(n, d1, d2), compute_uv=False).sum())
    nuclear = gamma2 * (sigma / n**0.25 + nuclear_sum / (d * n))
    rhs = variance + group + nuclear

    lhs = None
    if xhat is not None:
        xhat = np.asarray(xhat, dtype=np.float64)
        if xhat.shape != x0.shape:
            raise ValueError("xhat must match x0 in shape")
        lhs = float(np.sum((xhat - x0) ** 2)) / (2.0 * d * n)

    consistency = (np.sqrt(m**2 * np.log(d * m) / (d * n**2)) / smin) if m else 0.0
    weights_ok = bool(graph.m and graph.weights.min() >= 0.5)
    return PredictionBoundReport(
        gamma1_threshold=float(threshold), variance_term=float(variance),
        group_term=float(group), nuclear_term=float(nuclear),
        rhs_total=float(rhs), lhs=lhs, consistency_value=float(consistency),
        weight_assumption_ok=weights_ok, kappa0=kappa0, sigma_min_b=float(smin),
        gamma1=gamma1, gamma2=gamma2)
