"""Developer smoke checks for the solver core (not part of the test suite)."""
import numpy as np

from lrcc import (
    ObservationSet, ProblemSpec, SolverOptions, alm_solve, oracle_solve,
    knn_graph, gaussian_weights, phi_value, phi_gradient, primal_objective,
    dual_objective, kkt_residual, extract_clusters,
)
from lrcc.rng import make_rng, normal
from lrcc.solver import _PointEval

rng = make_rng(42)

n, d1, d2 = 8, 5, 3
data = normal(rng, (n, d1, d2))
obs = ObservationSet(data)
graph = gaussian_weights(obs, knn_graph(obs, 3), 0.5)
spec = ProblemSpec.from_observations(obs, graph, 0.3, 0.2)

# gradient vs central differences
x = normal(rng, n * d1 * d2)
vt = normal(rng, graph.m * d1 * d2)
wt = normal(rng, n * d1 * d2)
sigma = 1.7
g = phi_gradient(spec, x, vt, wt, sigma)
err_max = 0.0
for _ in range(10):
    h = normal(rng, x.size)
    h /= np.linalg.norm(h)
    eps = 1e-6
    fd = (phi_value(spec, x + eps * h, vt, wt, sigma)
          - phi_value(spec, x - eps * h, vt, wt, sigma)) / (2 * eps)
    err = abs(fd - g @ h) / max(1.0, abs(fd))
    err_max = max(err_max, err)
print("grad FD max rel err:", err_max)

# hessian self-adjoint + PD
ev = _PointEval(spec, x, vt, wt, sigma)
d1v = normal(rng, x.size)
d2v = normal(rng, x.size)
h1 = ev.hessian_matvec(spec, sigma, d1v)
h2 = ev.hessian_matvec(spec, sigma, d2v)
print("hessian self-adjoint rel err:", abs(d2v @ h1 - d1v @ h2) / max(1.0, abs(d1v @ h2)))
print("hessian PD margin:", (d1v @ h1) / (d1v @ d1v))

# hessian vs directional difference of gradient
hdir = normal(rng, x.size); hdir /= np.linalg.norm(hdir)
eps = 1e-6
gfd = (phi_gradient(spec, x + eps * hdir, vt, wt, sigma)
       - phi_gradient(spec, x - eps * hdir, vt, wt, sigma)) / (2 * eps)
hv = ev.hessian_matvec(spec, sigma, hdir)
print("hess FD rel err:", np.linalg.norm(gfd - hv) / np.linalg.norm(hv))

# ALM vs oracle
state, report = alm_solve(spec, SolverOptions(tol=1e-8))
print("ALM success:", report.success, "outer:", report.outer_iterations,
      "residual:", report.final_residual)
x_ref = oracle_solve(spec, tol=1e-11)
p_alm = primal_objective(spec, state.x)
p_ref = primal_objective(spec, x_ref)
print("objective alm:", p_alm, "oracle:", p_ref, "rel gap:", abs(p_alm - p_ref) / max(1, abs(p_ref)))
dv = dual_objective(spec, state.v, state.w)
print("dual feasible:", dv.feasible, "gap:", (p_alm - dv.value) / (1 + abs(p_alm)))

res = kkt_residual(spec, state)
print("KKT:", res.as_tuple(), "max:", res.max)

result = extract_clusters(spec, state, 1e-6)
print("clusters:", result.n_clusters, "ranks:", result.ranks)
