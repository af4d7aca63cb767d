"""Proximal maps and generalized Jacobians for the two regularizers.

The fusion penalty acts per edge block as the prox of eta*||.||_2 (block soft
thresholding); the low-rank penalty acts per sample block as the prox of
gamma*||.||_* (singular value thresholding, SVT). Both proximal maps are
strongly semismooth and admit explicit generalized Jacobian elements, which
the Newton solver applies matrix-free.

Ties are resolved once and for all here: at ||u|| = eta the zero operator is
chosen (t = 0), and a singular value equal to the threshold lands in the
index set alpha2 whose Jacobian rows beyond the documented ones are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import WeightedGraph

BOUNDARY_RTOL = 1e-12
DENOM_FLOOR = 1e-300  # guards denormal blowup; formulas are well-posed without it


def _boundary_tol(eta: float) -> float:
    return BOUNDARY_RTOL * max(1.0, eta)


def block_soft_threshold(u: np.ndarray, eta: float) -> np.ndarray:
    """Prox of eta*||.||_2: scales u by max(0, 1 - eta/||u||)."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    u = np.asarray(u, dtype=np.float64)
    r = np.linalg.norm(u)
    if r == 0.0:
        return np.zeros_like(u)
    return u * max(0.0, 1.0 - eta / r)


@dataclass(frozen=True)
class BlockThresholdJacobian:
    """One element of the generalized Jacobian of the l2-norm prox.

    case "outside" (||u|| > eta): (1 - eta/||u||) I + eta u u' / ||u||^3;
    case "boundary" (||u|| = eta): t u u' / eta^2 with the fixed choice t = 0;
    case "inside" (||u|| < eta): the zero operator.
    """

    case: str
    u: np.ndarray
    norm: float
    eta: float
    t: float = 0.0

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if self.case == "outside":
            if self.eta == 0.0:
                return v.copy()
            s = 1.0 - self.eta / self.norm
            c = self.eta / self.norm**3
            return s * v + c * float(self.u @ v) * self.u
        if self.case == "boundary" and self.t != 0.0:
            return (self.t / self.eta**2) * float(self.u @ v) * self.u
        return np.zeros_like(v)

    def as_matrix(self) -> np.ndarray:
        dim = self.u.shape[0]
        eye = np.eye(dim)
        return np.column_stack([self.apply(eye[:, i]) for i in range(dim)])


def block_soft_threshold_jacobian(u: np.ndarray, eta: float) -> BlockThresholdJacobian:
    """Case-tagged Jacobian element of block_soft_threshold at u."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    u = np.asarray(u, dtype=np.float64)
    r = float(np.linalg.norm(u))
    if eta == 0.0:
        return BlockThresholdJacobian("outside", u, r, 0.0)
    if abs(r - eta) <= _boundary_tol(eta):
        return BlockThresholdJacobian("boundary", u, r, eta)
    case = "outside" if r > eta else "inside"
    return BlockThresholdJacobian(case, u, r, eta)


@dataclass(frozen=True)
class SvtFactorization:
    """Full SVD G = [U1 U2] [Diag(sigma); 0] V' cached for Jacobian reuse."""

    u1: np.ndarray  # (d1, d2)
    u2: np.ndarray  # (d1, d1 - d2)
    v: np.ndarray  # (d2, d2)
    sigma: np.ndarray  # (d2,), nonincreasing
    gamma: float

    @property
    def d1(self) -> int:
        return self.u1.shape[0]

    @property
    def d2(self) -> int:
        return self.u1.shape[1]


def svt(g: np.ndarray, gamma: float):
    """Singular value thresholding: soft-threshold the spectrum by gamma.

    Returns the thresholded matrix and the cached factorization. Requires
    d1 >= d2.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < g.shape[1]:
        raise ValueError(f"svt expects a d1 x d2 matrix with d1 >= d2, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("svt input contains non-finite entries")
    u, s, vt = np.linalg.svd(g, full_matrices=True)
    d2 = g.shape[1]
    fact = SvtFactorization(u[:, :d2], u[:, d2:], vt.T, s, float(gamma))
    x = (fact.u1 * np.maximum(s - gamma, 0.0)) @ vt
    return x, fact


def _svt_index_sets(sigma: np.ndarray, gamma: float):
    top = sigma[..., :1] if sigma.ndim > 1 else sigma[:1]
    tol = BOUNDARY_RTOL * np.maximum(1.0, top)
    at = np.abs(sigma - gamma) <= tol
    above = (sigma > gamma) & ~at
    below = ~(above | at)
    return above, at, below


def _gamma_blocks(sigma: np.ndarray, gamma: float, d1: int):
    """The coefficient matrices of the SVT Jacobian, batched over leading axes.

    sigma has shape (..., d2); returns gaa, gag of shape (..., d2, d2) and the
    per-column multipliers mu of shape (..., d2) for the U2 block.
    """
    a1, _, a3 = _svt_index_sets(sigma, gamma)
    si = sigma[..., :, None]
    sj = sigma[..., None, :]
    i1 = a1[..., :, None]
    j1 = a1[..., None, :]
    i3 = a3[..., :, None]
    j3 = a3[..., None, :]
    i12 = ~i3
    j12 = ~j3

    tau_up = (si - gamma) / np.maximum(si - sj, DENOM_FLOOR)
    tau_lo = (sj - gamma) / np.maximum(sj - si, DENOM_FLOOR)
    gaa = np.zeros(np.broadcast_shapes(si.shape, sj.shape))
    gaa = np.where((i1 & j12) | (i12 & j1), 1.0, gaa)
    gaa = np.where(i1 & j3, tau_up, gaa)
    gaa = np.where(i3 & j1, tau_lo, gaa)

    pos = np.maximum(sigma - gamma, 0.0)
    denom = np.maximum(si + sj, DENOM_FLOOR)
    omega_up = (si - gamma + pos[..., None, :]) / denom
    omega_lo = (sj - gamma + pos[..., :, None]) / denom
    gag = np.zeros_like(gaa)
    gag = np.where(i1, omega_up, gag)
    gag = np.where(j1 & ~i1, omega_lo, gag)

    mu = np.where(a1, (sigma - gamma) / np.maximum(sigma, DENOM_FLOOR), 0.0)
    return gaa, gag, mu


@dataclass(frozen=True)
class NuclearJacobian:
    """One element of the generalized Jacobian of the SVT map.

    Index sets: alpha1 (sigma > gamma), alpha2 (sigma = gamma), alpha3
    (sigma < gamma). Applying the element is a spectral Hadamard map in the
    cached singular basis; it is self-adjoint with eigenvalues in [0, 1].
    """

    fact: SvtFactorization
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    gaa: np.ndarray  # (d2, d2) symmetric coefficients (1 / tau entries)
    gag: np.ndarray  # (d2, d2) symmetric coefficients (omega entries)
    mu: np.ndarray  # (d2,) column multipliers of the U2 block (mu entries)


def nuclear_jacobian(fact: SvtFactorization) -> NuclearJacobian:
    """Build the Jacobian element at the cached SVT factorization."""
    a1, a2, a3 = _svt_index_sets(fact.sigma, fact.gamma)
    gaa, gag, mu = _gamma_blocks(fact.sigma, fact.gamma, fact.d1)
    idx = np.arange(fact.d2)
    return NuclearJacobian(fact, idx[a1], idx[a2], idx[a3], gaa, gag, mu)


def apply_nuclear_jacobian(jac: NuclearJacobian, w: np.ndarray) -> np.ndarray:
    """Apply the Jacobian element to a d1 x d2 direction matrix."""
    fact = jac.fact
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (fact.d1, fact.d2):
        raise ValueError(f"direction must have shape {(fact.d1, fact.d2)}, got {w.shape}")
    w1 = fact.u1.T @ w @ fact.v
    sym = 0.5 * (w1 + w1.T)
    skw = 0.5 * (w1 - w1.T)
    out = fact.u1 @ (jac.gaa * sym + jac.gag * skw)
    if fact.d1 > fact.d2:
        w2 = fact.u2.T @ w @ fact.v
        out = out + fact.u2 @ (jac.mu[None, :] * w2)
    return out @ fact.v.T


def prox_g(y: np.ndarray, nu: float, graph: WeightedGraph, gamma1: float) -> np.ndarray:
    """Prox of nu*g on the stacked edge vector: per-edge block soft threshold
    with eta = nu * gamma1 * w_ij."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    y = np.asarray(y, dtype=np.float64)
    m = graph.m
    if m == 0:
        if y.size != 0:
            raise ValueError("expected empty edge vector for edgeless graph")
        return y.copy()
    if y.size % m != 0:
        raise ValueError(f"edge vector length {y.size} not divisible by {m} edges")
    blocks = y.reshape(m, -1)
    eta = nu * gamma1 * graph.weights
    r = np.linalg.norm(blocks, axis=1)
    scale = np.where(r > 0, np.maximum(0.0, 1.0 - eta / np.maximum(r, DENOM_FLOOR)), 0.0)
    return (blocks * scale[:, None]).reshape(-1)


def prox_h(z: np.ndarray, nu: float, d1: int, d2: int, gamma2: float) -> np.ndarray:
    """Prox of nu*h on the stacked node vector: per-sample SVT with threshold
    nu * gamma2 after reshaping block i to d1 x d2."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    z = np.asarray(z, dtype=np.float64)
    d = d1 * d2
    if z.size % d != 0:
        raise ValueError(f"node vector length {z.size} not divisible by d={d}")
    thr = nu * gamma2
    if thr == 0.0:
        return z.copy()
    mats = z.reshape(-1, d1, d2)
    u, s, vt = np.linalg.svd(mats, full_matrices=False)
    shrunk = np.maximum(s - thr, 0.0)
    return np.matmul(u * shrunk[:, None, :], vt).reshape(-1)


# ---------------------------------------------------------------------------
# Batched Jacobian caches for the Newton solver. These mirror the per-block
# operators above but build every edge / sample at once; a consistency test
# pins them to the reference implementations.
# ---------------------------------------------------------------------------

class EdgeThresholdCache:
    """Jacobians of the blockwise l2 prox at all edge blocks of one point."""

    def __init__(self, blocks: np.ndarray, eta: np.ndarray):
        r = np.linalg.norm(blocks, axis=1)
        boundary = np.abs(r - eta) <= BOUNDARY_RTOL * np.maximum(1.0, eta)
        outside = (r > eta) & ~boundary
        outside |= eta == 0.0
        safe_r = np.maximum(r, DENOM_FLOOR)
        self.blocks = blocks
        self.outside = outside
        # On outside blocks W = s I + c u u'; elsewhere W = 0.
        self.s = np.where(outside, 1.0 - eta / safe_r, 0.0)
        self.c = np.divide(eta, safe_r**3, out=np.zeros_like(eta), where=outside)
        self._prox_scale = np.where(r > 0, np.maximum(0.0, 1.0 - eta / safe_r), 0.0)

    def prox(self) -> np.ndarray:
        """Blockwise soft-threshold values at the cached point."""
        return self.blocks * self._prox_scale[:, None]

    def apply(self, y: np.ndarray) -> np.ndarray:
        dots = np.einsum("ed,ed->e", self.blocks, y)
        return self.s[:, None] * y + (self.c * dots)[:, None] * self.blocks

    def apply_complement(self, y: np.ndarray) -> np.ndarray:
        """(I - W) applied per edge block."""
        return y - self.apply(y)


class NuclearThresholdCache:
    """SVT values and Jacobians at all sample blocks of one point."""

    def __init__(self, mats: np.ndarray, gamma: float):
        n, d1, d2 = mats.shape
        self.shape = (n, d1, d2)
        self.gamma = float(gamma)
        u, s, vt = np.linalg.svd(mats, full_matrices=True)
        self.u1 = u[:, :, :d2]
        self.u2 = u[:, :, d2:]
        self.v = np.swapaxes(vt, 1, 2)
        self.sigma = s
        self.prox = np.matmul(self.u1 * np.maximum(s - gamma, 0.0)[:, None, :], vt)
        self.gaa, self.gag, self.mu = _gamma_blocks(s, gamma, d1)

    def apply(self, w: np.ndarray) -> np.ndarray:
        w1 = np.matmul(np.swapaxes(self.u1, 1, 2), np.matmul(w, self.v))
        w1t = np.swapaxes(w1, 1, 2)
        mixed = self.gaa * (0.5 * (w1 + w1t)) + self.gag * (0.5 * (w1 - w1t))
        out = np.matmul(self.u1, mixed)
        if self.u2.shape[2] > 0:
            w2 = np.matmul(np.swapaxes(self.u2, 1, 2), np.matmul(w, self.v))
            out = out + np.matmul(self.u2, self.mu[:, None, :] * w2)
        return np.matmul(out, np.swapaxes(self.v, 1, 2))

    def apply_complement(self, w: np.ndarray) -> np.ndarray:
        return w - self.apply(w)
