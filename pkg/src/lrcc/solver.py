"""Double-loop solver for low-rank convex clustering.

The model, in stacked vector form over x in R^{dn}, is

    min  0.5 ||x - a||^2  +  gamma1 * sum_l w_l ||D_l x||  +  gamma2 * sum_i ||mat(x_i)||_*

with D_l the edge-difference blocks of the graph. The outer loop is an
augmented Lagrangian method on the constrained split (x, y, z) with
multipliers (v, w) and penalty sigma; each subproblem reduces to the smooth
strongly convex function phi(x) (a Moreau envelope in y and z) solved by a
semismooth Newton-CG method. Cluster labels come from connected components of
near-equal centroids, and a deliberately slow Douglas-Rachford reference
solver is provided as an independent cross-check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .dataset import ObservationSet
from .graph import WeightedGraph, apply_D, apply_Dt, connected_components
from .prox import EdgeThresholdCache, NuclearThresholdCache, prox_g, prox_h


class SolverError(RuntimeError):
    pass


class CgBreakdownError(SolverError):
    """CG produced a non-finite iterate; carries the iteration index."""

    def __init__(self, iteration: int):
        super().__init__(f"conjugate gradient broke down at iteration {iteration}")
        self.iteration = iteration


class LineSearchError(SolverError):
    """Armijo search failed; gradient and Jacobian are inconsistent."""


class NonFiniteStateError(SolverError):
    pass


class OracleIterationError(SolverError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Observations in stacked form plus graph and penalty parameters."""

    a: np.ndarray  # (n*d,) stacked observations
    n: int
    d1: int
    d2: int
    graph: WeightedGraph
    gamma1: float
    gamma2: float

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        if a.shape != (self.n * self.d,):
            raise ValueError(f"stacked data must have length {self.n * self.d}")
        if not np.all(np.isfinite(a)):
            raise ValueError("observations contain non-finite entries")
        if self.graph.n != self.n:
            raise ValueError("graph node count must equal sample count")
        if self.d1 < self.d2:
            raise ValueError("requires d1 >= d2")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("penalty parameters must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_observations(cls, obs: ObservationSet, graph: WeightedGraph,
                          gamma1: float, gamma2: float) -> "ProblemSpec":
        return cls(obs.stacked(), obs.n, obs.d1, obs.d2, graph, gamma1, gamma2)

    @property
    def d(self) -> int:
        return self.d1 * self.d2

    def matrices(self, x: np.ndarray) -> np.ndarray:
        """View a stacked centroid vector as (n, d1, d2) blocks."""
        return np.asarray(x).reshape(self.n, self.d1, self.d2)


@dataclass(frozen=True)
class SolverOptions:
    """Algorithm constants; defaults satisfy the summability and range
    requirements of the convergence theory."""

    sigma0: float = 1.0
    sigma_growth: float = 3.0
    sigma_cap: float = 1e8
    tol: float = 1e-6
    max_outer: int = 100
    # Inner-exit sequences eps_k = eps_scale/(k+1)^2, delta_k = delta_scale/(k+1)^2
    # (both summable) and deltap_k = deltap_scale/(k+1) (vanishing).
    eps_scale: float = 1.0
    delta_scale: float = 1.0
    deltap_scale: float = 1.0
    armijo_mu: float = 1e-4
    newton_tau: float = 0.5
    cg_tol_cap: float = 0.1
    ls_beta: float = 0.5
    cg_max_iter: int = 500
    max_inner: int = 100
    ls_max: int = 50
    merge_tol: float = 1e-6

    def __post_init__(self):
        checks = [
            (self.sigma0 > 0, "sigma0 must be positive"),
            (self.sigma_growth > 1, "sigma growth factor must exceed 1"),
            (self.sigma_cap >= self.sigma0, "sigma cap must be at least sigma0"),
            (self.tol > 0, "tolerance must be positive"),
            (0 < self.armijo_mu < 0.5, "armijo_mu must lie in (0, 1/2)"),
            (0 < self.newton_tau <= 1, "newton_tau must lie in (0, 1]"),
            (0 < self.cg_tol_cap < 1, "cg_tol_cap must lie in (0, 1)"),
            (0 < self.ls_beta < 1, "ls_beta must lie in (0, 1)"),
            (self.eps_scale >= 0 and self.delta_scale >= 0 and self.deltap_scale >= 0,
             "exit-sequence scales must be nonnegative"),
            (self.merge_tol >= 0, "merge tolerance must be nonnegative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


@dataclass
class PrimalDualState:
    """The ALM iterate: primal (x, y, z), multipliers (v, w), penalty sigma."""

    x: np.ndarray  # (n*d,)
    y: np.ndarray  # (m*d,)
    z: np.ndarray  # (n*d,)
    v: np.ndarray  # (m*d,)
    w: np.ndarray  # (n*d,)
    sigma: float

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(arr)) for arr in (self.x, self.y, self.z, self.v, self.w))


@dataclass(frozen=True)
class KktResidual:
    r1: float
    r2: float
    r3: float
    r4: float
    r5: float

    @property
    def max(self) -> float:
        return max(self.r1, self.r2, self.r3, self.r4, self.r5)

    def as_tuple(self):
        return (self.r1, self.r2, self.r3, self.r4, self.r5)


@dataclass(frozen=True)
class DualValue:
    """Dual objective; value is meaningful only when the duals sit inside the
    conjugate-norm balls (violation is the largest excess)."""

    value: float
    feasible: bool
    violation: float

    @property
    def objective(self) -> float:
        return self.value if self.feasible else -np.inf


@dataclass
class OuterRecord:
    k: int
    inner_iterations: int
    cg_iterations: int
    r1: float
    r2: float
    r3: float
    r4: float
    r5: float
    max_residual: float
    primal: float
    dual: float
    gap: float
    sigma: float
    dual_change: float
    inner_grad_norms: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "inner_iters": self.inner_iterations,
            "cg_iters": self.cg_iterations,
            "R1": self.r1, "R2": self.r2, "R3": self.r3,
            "R4": self.r4, "R5": self.r5,
            "max_residual": self.max_residual,
            "primal": self.primal,
            "dual": self.dual,
            "sigma": self.sigma,
        }


@dataclass
class SolveReport:
    records: list
    success: bool
    message: str
    wall_time: float

    @property
    def outer_iterations(self) -> int:
        return len(self.records)

    @property
    def final_residual(self) -> float:
        return self.records[-1].max_residual if self.records else np.inf

    def as_dict(self) -> dict:
        return {
            "success": self.success,
            "message": self.message,
            "wall_time": self.wall_time,
            "outer_iterations": self.outer_iterations,
            "final_residual": self.final_residual,
            "iterations": [r.as_dict() for r in self.records],
        }


@dataclass
class ClusteringResult:
    """Cluster assignment extracted from merged centroids."""

    labels: np.ndarray  # (n,)
    centroids: np.ndarray  # (K, d1, d2)
    ranks: np.ndarray  # (K,)
    objective: float

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


# ---------------------------------------------------------------------------
# Objectives and residuals
# ---------------------------------------------------------------------------

def _nuclear_norms(mats: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mats, compute_uv=False).sum(axis=1)


def primal_objective(spec: ProblemSpec, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != spec.a.shape:
        raise ValueError("x has the wrong length")
    val = 0.5 * float(np.sum((x - spec.a) ** 2))
    if spec.graph.m and spec.gamma1 > 0:
        diffs = apply_D(spec.graph, x, spec.d).reshape(spec.graph.m, spec.d)
        val += spec.gamma1 * float(spec.graph.weights @ np.linalg.norm(diffs, axis=1))
    if spec.gamma2 > 0:
        val += spec.gamma2 * float(_nuclear_norms(spec.matrices(x)).sum())
    return val


def dual_objective(spec: ProblemSpec, v: np.ndarray, w: np.ndarray,
                   feas_rtol: float = 1e-9) -> DualValue:
    """Dual value -0.5||D*v + w - a||^2 + 0.5||a||^2 with ball feasibility.

    Feasibility means ||v_l|| <= gamma1 w_l per edge and spectral norm
    ||mat(w_i)||_2 <= gamma2 per sample; the conjugates of g and h are the
    indicators of those balls.
    """
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    m, d = spec.graph.m, spec.d
    if v.shape != (m * d,) or w.shape != (spec.n * d,):
        raise ValueError("dual variables have the wrong length")
    violation = 0.0
    if m:
        vnorms = np.linalg.norm(v.reshape(m, d), axis=1)
        violation = max(violation, float(np.max(vnorms - spec.gamma1 * spec.graph.weights)))
    specnorms = np.linalg.svd(spec.matrices(w), compute_uv=False)[:, 0]
    violation = max(violation, float(np.max(specnorms - spec.gamma2)))
    violation = max(violation, 0.0)
    scale = max(1.0, spec.gamma1, spec.gamma2)
    feasible = violation <= feas_rtol * scale
    resid = apply_Dt(spec.graph, v, d) + w - spec.a
    value = -0.5 * float(resid @ resid) + 0.5 * float(spec.a @ spec.a)
    return DualValue(value, feasible, violation)


def kkt_residual(spec: ProblemSpec, state: PrimalDualState) -> KktResidual:
    """Normalized violations of the five optimality equations."""
    x, y, z, v, w = state.x, state.y, state.z, state.v, state.w
    d = spec.d
    norm_a = np.linalg.norm(spec.a)
    norm_y = np.linalg.norm(y)
    norm_x = np.linalg.norm(x)
    r1 = np.linalg.norm(x - spec.a + apply_Dt(spec.graph, v, d) + w) / (1 + norm_a)
    if spec.graph.m:
        r2 = np.linalg.norm(y - prox_g(v + y, 1.0, spec.graph, spec.gamma1)) / (1 + norm_y)
        r4 = np.linalg.norm(apply_D(spec.graph, x, d) - y) / (1 + norm_y)
    else:
        r2 = 0.0
        r4 = 0.0
    r3 = np.linalg.norm(z - prox_h(w + z, 1.0, spec.d1, spec.d2, spec.gamma2)) / (1 + np.linalg.norm(z))
    r5 = np.linalg.norm(x - z) / (1 + norm_x)
    return KktResidual(float(r1), float(r2), float(r3), float(r4), float(r5))


# ---------------------------------------------------------------------------
# The smooth subproblem function phi and its derivatives
# ---------------------------------------------------------------------------

class _PointEval:
    """phi, its gradient, and the prox caches at one inner iterate.

    Shares a single sweep of prox evaluations between the function value, the
    gradient, the feasibility norm used by the inner stopping rule, and the
    generalized Hessian applied in CG.
    """

    __slots__ = ("phi", "grad", "feas", "edge_cache", "node_cache",
                 "pg", "ph", "rg", "rh")

    def __init__(self, spec: ProblemSpec, x: np.ndarray, vt: np.ndarray,
                 wt: np.ndarray, sigma: float):
        m, d = spec.graph.m, spec.d
        diff = x - spec.a
        val = 0.5 * float(diff @ diff)
        grad = diff.copy()

        feas_sq = 0.0
        if m:
            ug = apply_D(spec.graph, x, d).reshape(m, d) + vt.reshape(m, d) / sigma
            eta = (spec.gamma1 / sigma) * spec.graph.weights
            self.edge_cache = EdgeThresholdCache(ug, eta)
            self.pg = self.edge_cache.prox()
            self.rg = ug - self.pg
            val += spec.gamma1 * float(
                spec.graph.weights @ np.linalg.norm(self.pg, axis=1))
            val += 0.5 * sigma * float(np.sum(self.rg * self.rg))
            grad += sigma * apply_Dt(spec.graph, self.rg.reshape(-1), d)
            fg = self.rg - vt.reshape(m, d) / sigma
            feas_sq += float(np.sum(fg * fg))
            val -= float(vt @ vt) / (2.0 * sigma)
        else:
            self.edge_cache = None
            self.pg = np.zeros((0, d))
            self.rg = np.zeros((0, d))

        uh = spec.matrices(x + wt / sigma)
        if spec.gamma2 > 0:
            self.node_cache = NuclearThresholdCache(uh, spec.gamma2 / sigma)
            self.ph = self.node_cache.prox
            val += spec.gamma2 * float(
                np.maximum(self.node_cache.sigma - spec.gamma2 / sigma, 0.0).sum())
            self.rh = uh - self.ph
            val += 0.5 * sigma * float(np.sum(self.rh * self.rh))
            grad += sigma * self.rh.reshape(-1)
        else:
            self.node_cache = None
            self.ph = uh
            self.rh = np.zeros_like(uh)
        fh = self.rh.reshape(-1) - wt / sigma
        feas_sq += float(fh @ fh)
        val -= float(wt @ wt) / (2.0 * sigma)

        self.phi = val
        self.grad = grad
        self.feas = float(np.sqrt(feas_sq))

    def hessian_matvec(self, spec: ProblemSpec, sigma: float, dvec: np.ndarray) -> np.ndarray:
        """(I + sigma D*(I - W)D + sigma (I - Q)) d, matrix-free."""
        out = dvec.copy()
        d = spec.d
        if self.edge_cache is not None:
            t = apply_D(spec.graph, dvec, d).reshape(spec.graph.m, d)
            t = self.edge_cache.apply_complement(t)
            out += sigma * apply_Dt(spec.graph, t.reshape(-1), d)
        if self.node_cache is not None:
            blocks = spec.matrices(dvec)
            out += sigma * self.node_cache.apply_complement(blocks).reshape(-1)
        return out


def phi_value(spec: ProblemSpec, x: np.ndarray, vt: np.ndarray, wt: np.ndarray,
              sigma: float) -> float:
    """The ALM subproblem objective after minimizing out y and z."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return _PointEval(spec, np.asarray(x, dtype=np.float64), vt, wt, sigma).phi


def phi_gradient(spec: ProblemSpec, x: np.ndarray, vt: np.ndarray, wt: np.ndarray,
                 sigma: float) -> np.ndarray:
    """Gradient of phi, assembled matrix-free."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return _PointEval(spec, np.asarray(x, dtype=np.float64), vt, wt, sigma).grad


def hessian_apply(spec: ProblemSpec, dvec: np.ndarray,
                  edge_cache: EdgeThresholdCache | None,
                  node_cache: NuclearThresholdCache | None,
                  sigma: float) -> np.ndarray:
    """Apply one generalized Hessian element with prebuilt Jacobian caches."""
    dvec = np.asarray(dvec, dtype=np.float64)
    if dvec.shape != (spec.n * spec.d,):
        raise ValueError("direction has the wrong length")
    out = dvec.copy()
    d = spec.d
    if edge_cache is not None and spec.graph.m:
        t = apply_D(spec.graph, dvec, d).reshape(spec.graph.m, d)
        t = edge_cache.apply_complement(t)
        out += sigma * apply_Dt(spec.graph, t.reshape(-1), d)
    if node_cache is not None:
        out += sigma * node_cache.apply_complement(spec.matrices(dvec)).reshape(-1)
    return out


# ---------------------------------------------------------------------------
# Inner loop: semismooth Newton-CG
# ---------------------------------------------------------------------------

def cg_solve(apply_h, grad: np.ndarray, tol: float, max_iter: int):
    """CG for H d = -grad on a self-adjoint positive definite operator.

    Stops when the residual norm drops to tol; hitting the cap returns the
    best iterate with converged=False.
    """
    d = np.zeros_like(grad)
    r = -grad.copy()
    rs = float(r @ r)
    if np.sqrt(rs) <= tol:
        return d, 0, True
    p = r.copy()
    for it in range(max_iter):
        hp = apply_h(p)
        if not np.all(np.isfinite(hp)):
            raise CgBreakdownError(it)
        alpha = rs / float(p @ hp)
        d += alpha * p
        r -= alpha * hp
        rs_new = float(r @ r)
        if not np.isfinite(rs_new):
            raise CgBreakdownError(it)
        if np.sqrt(rs_new) <= tol:
            return d, it + 1, True
        p = r + (rs_new / rs) * p
        rs = rs_new
    return d, max_iter, False


@dataclass
class SsnInfo:
    iterations: int = 0
    cg_iterations: int = 0
    grad_norms: list = field(default_factory=list)
    phis: list = field(default_factory=list)


def ssncg(spec: ProblemSpec, x0: np.ndarray, vt: np.ndarray, wt: np.ndarray,
          sigma: float, options: SolverOptions, exit_test):
    """Semismooth Newton-CG on phi with Armijo line search.

    exit_test(grad_norm, feas_norm) decides when the caller's accuracy rule is
    met; feas_norm is ||(Dx - y(x), x - z(x))|| for the prox-recovered y, z.
    Returns (x, final _PointEval, SsnInfo).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    ev = _PointEval(spec, x, vt, wt, sigma)
    info = SsnInfo()
    floor = 1e-12 * (1.0 + np.linalg.norm(spec.a))
    for _ in range(options.max_inner):
        gnorm = float(np.linalg.norm(ev.grad))
        info.grad_norms.append(gnorm)
        info.phis.append(ev.phi)
        if exit_test(gnorm, ev.feas) or gnorm <= floor:
            break
        cg_tol = min(options.cg_tol_cap, gnorm ** (1.0 + options.newton_tau))
        direction, cg_iters, _ = cg_solve(
            lambda p: ev.hessian_matvec(spec, sigma, p),
            ev.grad, cg_tol, options.cg_max_iter)
        info.cg_iterations += cg_iters
        slope = float(ev.grad @ direction)
        if slope >= 0.0:
            # Roundoff produced a non-descent direction; fall back to steepest.
            direction = -ev.grad
            slope = -gnorm * gnorm
        accepted = False
        step = 1.0
        for _ in range(options.ls_max):
            trial = x + step * direction
            ev_trial = _PointEval(spec, trial, vt, wt, sigma)
            if ev_trial.phi <= ev.phi + options.armijo_mu * step * slope:
                x, ev = trial, ev_trial
                accepted = True
                break
            step *= options.ls_beta
        if not accepted:
            if gnorm <= 1e3 * floor:
                break  # at floating-point resolution of phi
            raise LineSearchError(
                f"Armijo search failed after {options.ls_max} backtracks "
                f"(||grad|| = {gnorm:.3e})")
        info.iterations += 1
    return x, ev, info


# ---------------------------------------------------------------------------
# Outer loop: augmented Lagrangian method
# ---------------------------------------------------------------------------

def alm_solve(spec: ProblemSpec, options: SolverOptions = SolverOptions(),
              x0: np.ndarray | None = None, v0: np.ndarray | None = None,
              w0: np.ndarray | None = None, trace=None):
    """Run the augmented Lagrangian method to the KKT tolerance.

    Initializes at x = a with zero multipliers unless warm-start vectors are
    given. The inner solver exits once the gradient of phi passes all three
    implementable accuracy rules (summable absolute, summable relative, and
    vanishing relative in the feasibility norm). Returns the final state and
    a report; outer-cap exhaustion sets success=False rather than raising.
    """
    m, d = spec.graph.m, spec.d
    x = spec.a.copy() if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    v = np.zeros(m * d) if v0 is None else np.asarray(v0, dtype=np.float64).copy()
    w = np.zeros(spec.n * d) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    sigma = options.sigma0
    records = []
    start = time.perf_counter()
    success = False
    message = "outer iteration cap exceeded"
    state = PrimalDualState(x, np.zeros(m * d), x.copy(), v, w, sigma)
    for k in range(options.max_outer):
        eps_k = options.eps_scale / (k + 1) ** 2
        delta_k = options.delta_scale / (k + 1) ** 2
        deltap_k = options.deltap_scale / (k + 1)
        sig = sigma

        def exit_test(gnorm, feas, _sig=sig, _eps=eps_k, _del=delta_k, _delp=deltap_k):
            thr = min(_eps / np.sqrt(_sig),
                      _del * np.sqrt(_sig) * feas,
                      _delp * feas)
            return gnorm <= thr

        x, ev, info = ssncg(spec, x, v, w, sigma, options, exit_test)
        y = ev.pg.reshape(-1)
        z = ev.ph.reshape(-1)
        dx_minus_y = (apply_D(spec.graph, x, d) - y) if m else np.zeros(0)
        x_minus_z = x - z
        v = v + sigma * dx_minus_y
        w = w + sigma * x_minus_z
        dual_change = sigma * float(
            np.sqrt(np.sum(dx_minus_y**2) + np.sum(x_minus_z**2)))

        state = PrimalDualState(x, y, z, v, w, sigma)
        if not state.is_finite():
            raise NonFiniteStateError(f"non-finite ALM state at outer iteration {k}")
        res = kkt_residual(spec, state)
        primal = primal_objective(spec, x)
        dual = dual_objective(spec, v, w)
        gap = abs(primal - dual.value) / (1.0 + abs(primal))
        rec = OuterRecord(
            k=k, inner_iterations=info.iterations, cg_iterations=info.cg_iterations,
            r1=res.r1, r2=res.r2, r3=res.r3, r4=res.r4, r5=res.r5,
            max_residual=res.max, primal=primal, dual=dual.value, gap=gap,
            sigma=sigma, dual_change=dual_change, inner_grad_norms=info.grad_norms)
        records.append(rec)
        if trace is not None:
            trace(rec.as_dict())
        if res.max <= options.tol:
            success = True
            message = "converged"
            break
        sigma = min(sigma * options.sigma_growth, options.sigma_cap)
    report = SolveReport(records, success, message, time.perf_counter() - start)
    return state, report


# ---------------------------------------------------------------------------
# Cluster extraction and the regularization path
# ---------------------------------------------------------------------------

ALL_PAIRS_LIMIT = 2000


def extract_clusters(spec: ProblemSpec, state: PrimalDualState,
                     merge_tol: float = 1e-6) -> ClusteringResult:
    """Group samples whose centroids coincide up to the merge tolerance.

    Two samples join when ||X_i - X_j||_F <= tol * (1 + max(||X_i||, ||X_j||)),
    tested over graph edges plus all pairs for n <= 2000; labels are the
    connected components of that relation.
    """
    if not state.is_finite():
        raise NonFiniteStateError("cannot extract clusters from a non-finite state")
    n, d = spec.n, spec.d
    mats = spec.matrices(state.x)
    flat = mats.reshape(n, d)
    norms = np.linalg.norm(flat, axis=1)
    pairs_i = [spec.graph.heads]
    pairs_j = [spec.graph.tails]
    if n <= ALL_PAIRS_LIMIT:
        iu, ju = np.triu_indices(n, k=1)
        pairs_i.append(iu)
        pairs_j.append(ju)
    ii = np.concatenate(pairs_i)
    jj = np.concatenate(pairs_j)
    if ii.size:
        dist = np.linalg.norm(flat[ii] - flat[jj], axis=1)
        close = dist <= merge_tol * (1.0 + np.maximum(norms[ii], norms[jj]))
        edges = zip(ii[close].tolist(), jj[close].tolist())
    else:
        edges = []
    comp = connected_components(n, edges)
    k = comp.count
    centroids = np.zeros((k, spec.d1, spec.d2))
    counts = np.bincount(comp.labels, minlength=k).astype(float)
    np.add.at(centroids, comp.labels, mats)
    centroids /= counts[:, None, None]
    svals = np.linalg.svd(centroids, compute_uv=False)
    top = svals[:, 0]
    above = (svals > 1e-8 * np.maximum(top, 1e-300)[:, None]).sum(axis=1)
    ranks = np.where(top > 0, above, 0).astype(np.int64)
    return ClusteringResult(comp.labels, centroids, ranks,
                            primal_objective(spec, state.x))


@dataclass
class PathPoint:
    gamma1: float
    gamma2: float
    result: ClusteringResult | None
    report: SolveReport | None
    error: str | None = None


def clusterpath(spec: ProblemSpec, gamma1_grid, gamma2_grid,
                options: SolverOptions = SolverOptions()) -> list:
    """Solve the (gamma1, gamma2) grid, warm-starting along ascending gamma1.

    The previous (x, v, w) of the same gamma2 row seeds the next solve.
    Per-point failures are recorded and the sweep continues.
    """
    g1 = [float(g) for g in gamma1_grid]
    g2 = [float(g) for g in gamma2_grid]
    if not g1 or not g2:
        raise ValueError("parameter grids must be nonempty")
    if any(b < a for a, b in zip(g1, g1[1:])):
        raise ValueError("gamma1 grid must be ascending")
    points = []
    for gamma2 in g2:
        warm = None
        for gamma1 in g1:
            sub = replace(spec, gamma1=gamma1, gamma2=gamma2)
            try:
                if warm is None:
                    state, report = alm_solve(sub, options)
                else:
                    state, report = alm_solve(sub, options, x0=warm.x,
                                              v0=warm.v, w0=warm.w)
                warm = state
                result = extract_clusters(sub, state, options.merge_tol)
                points.append(PathPoint(gamma1, gamma2, result, report,
                                        None if report.success else report.message))
            except SolverError as exc:
                points.append(PathPoint(gamma1, gamma2, None, None, str(exc)))
                warm = None
    return points


# ---------------------------------------------------------------------------
# Independent reference solver (primal-dual Douglas-Rachford splitting)
# ---------------------------------------------------------------------------

ORACLE_SIZE_LIMIT = 5000


def oracle_solve(spec: ProblemSpec, tol: float = 1e-10,
                 max_iter: int = 500_000) -> np.ndarray:
    """Slow reference minimizer of the same objective.

    Douglas-Rachford primal-dual splitting over the quadratic fidelity, the
    fusion term composed with the edge-difference operator, and the nuclear
    term, with a small fixed step; iterates until the primal iterate moves
    less than tol. Deliberately simple: used only to cross-check alm_solve on
    small instances (n*d <= 5000).
    """
    n, d, m = spec.n, spec.d, spec.graph.m
    if n * d > ORACLE_SIZE_LIMIT:
        raise ValueError(f"oracle_solve is limited to n*d <= {ORACLE_SIZE_LIMIT}")
    if m:
        lap = spec.graph.incidence @ spec.graph.incidence.T
        opnorm_d_sq = float(scipy.linalg.eigh(lap.toarray(), eigvals_only=True)[-1])
    else:
        opnorm_d_sq = 0.0
    tau = 0.5
    s = 2.0 / (tau * (opnorm_d_sq + 1.0))  # tau * s * (||D||^2 + 1) = 2 < 4
    a = spec.a

    def prox_f(u):
        return (u + tau * a) / (1.0 + tau)

    def prox_gstar(u):
        return u - s * prox_g(u / s, 1.0 / s, spec.graph, spec.gamma1)

    def prox_hstar(u):
        return u - s * prox_h(u / s, 1.0 / s, spec.d1, spec.d2, spec.gamma2)

    x = a.copy()
    v1 = np.zeros(m * d)
    v2 = np.zeros(n * d)
    prev = None
    for _ in range(max_iter):
        t = apply_Dt(spec.graph, v1, d) + v2 if m else v2.copy()
        p1 = prox_f(x - 0.5 * tau * t)
        w1 = 2.0 * p1 - x
        x = x - p1
        if m:
            p2a = prox_gstar(v1 + 0.5 * s * apply_D(spec.graph, w1, d))
            w2a = 2.0 * p2a - v1
        p2b = prox_hstar(v2 + 0.5 * s * w1)
        w2b = 2.0 * p2b - v2
        t2 = apply_Dt(spec.graph, w2a, d) + w2b if m else w2b.copy()
        z1 = w1 - 0.5 * tau * t2
        x = x + z1
        q = 2.0 * z1 - w1
        if m:
            v1 = v1 + (w2a + 0.5 * s * apply_D(spec.graph, q, d)) - p2a
        v2 = v2 + (w2b + 0.5 * s * q) - p2b
        if prev is not None and float(np.linalg.norm(p1 - prev)) <= tol:
            return p1
        prev = p1
    raise OracleIterationError(
        f"reference solver did not settle within {max_iter} iterations")
