"""Command-line entry point for reproducible experiment runs.

Subcommands: gen, graph, fit, path, check, baseline, eval, embed. Every run
writes a manifest (command, parameters, seed, RNG id, sha256 of each output)
sufficient to reproduce it. Options may come from a JSON config file via
--config; explicit flags win.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import baseline as baseline_mod
from . import dataset, graph as graph_mod, metrics, solver, theory
from .rng import RNG_ALGORITHM, make_rng

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_IO = 3


class UsageError(ValueError):
    pass


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump_json(payload, path: Path | None = None) -> str:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if path is not None:
        path.write_text(text + "\n")
    return text


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: Path, command: str, params: dict, outputs: list) -> dict:
    manifest = {
        "command": command,
        "params": {k: v for k, v in sorted(params.items())
                   if v is not None and k not in ("func", "command")},
        "rng": RNG_ALGORITHM,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = outdir / "manifest.json"
    _dump_json(manifest, path)
    return manifest


def _outdir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_grid(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from exc


def _load_inputs(args):
    obs = dataset.load_mts(args.data)
    labels = dataset.load_labels(args.labels) if getattr(args, "labels", None) else None
    if labels is not None and labels.n != obs.n:
        raise UsageError("label file length does not match the data")
    return obs, labels


def _resolve_graph(args, obs) -> graph_mod.WeightedGraph:
    if getattr(args, "edges", None):
        return graph_mod.load_edges(args.edges, obs.n)
    if getattr(args, "graph_k", None) is None:
        raise UsageError("provide --edges or --graph-k")
    g = graph_mod.knn_graph(obs, args.graph_k)
    if getattr(args, "kernel_scale", None):
        g = graph_mod.gaussian_weights(obs, g, args.kernel_scale)
    return g


def _solver_options(args) -> solver.SolverOptions:
    kwargs = {}
    if getattr(args, "tol", None) is not None:
        kwargs["tol"] = args.tol
    if getattr(args, "max_outer", None) is not None:
        kwargs["max_outer"] = args.max_outer
    if getattr(args, "merge_tol", None) is not None:
        kwargs["merge_tol"] = args.merge_tol
    return solver.SolverOptions(**kwargs)


def _write_metrics(outdir: Path, pred, truth) -> Path:
    path = outdir / "metrics.json"
    payload = {"ari": metrics.ari(pred, truth), "nmi": metrics.nmi(pred, truth)}
    _dump_json(payload, path)
    return path


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    outdir = _outdir(args)
    seed = args.seed or 0
    noise = 0.1 if args.noise is None else args.noise
    means = None
    if args.generator == "quarter-spheres":
        if not args.n_per_cluster:
            raise UsageError("quarter-spheres needs --n-per-cluster")
        obs, labels = dataset.gen_quarter_spheres(
            args.n_per_cluster, args.d1 or 20, args.d2 or 10, noise, seed)
    elif args.generator == "unbalanced-gaussian":
        sizes = ([int(s) for s in args.sizes.split(",")] if args.sizes
                 else list(dataset.UNBALANCED_FULL_SIZES))
        obs, labels = dataset.gen_unbalanced_gaussian(
            sizes, args.d1 or 20, args.d2 or 10, noise, seed)
        means = dataset.unbalanced_gaussian_means(args.d1 or 20, args.d2 or 10,
                                                  make_rng(seed))
    elif args.generator == "low-rank-mixture":
        k = args.k or 4
        rank = args.rank or 2
        means = dataset.random_low_rank_means(k, args.d1 or 20, args.d2 or 10, rank, seed)
        spec = dataset.MixtureSpec(means, np.full(k, 1.0 / k), noise, np.full(k, rank))
        if args.n_per_cluster:
            obs, labels = dataset.gen_mixture_with_counts(
                spec, [args.n_per_cluster] * k, seed)
        elif args.n:
            obs, labels = dataset.gen_low_rank_mixture(spec, args.n, seed)
        else:
            raise UsageError("low-rank-mixture needs --n or --n-per-cluster")
    else:
        raise UsageError(f"unknown generator {args.generator!r}")

    outputs = []
    data_path = outdir / "data.mts"
    dataset.save_mts(obs, data_path)
    outputs.append(data_path)
    labels_path = outdir / "labels.txt"
    dataset.save_labels(labels, labels_path)
    outputs.append(labels_path)
    if means is not None:
        means_path = outdir / "means.mts"
        dataset.save_mts(dataset.ObservationSet(means), means_path)
        outputs.append(means_path)
    manifest = _write_manifest(outdir, "gen", vars(args) | {"noise": noise, "seed": seed},
                               outputs)
    print(json.dumps(manifest, sort_keys=True, default=_json_default))
    return EXIT_OK


def cmd_graph(args) -> int:
    outdir = _outdir(args)
    obs, _ = _load_inputs(args)
    g = _resolve_graph(args, obs)
    edges_path = outdir / "edges.txt"
    graph_mod.save_edges(g, edges_path)
    _write_manifest(outdir, "graph", vars(args), [edges_path])
    print(f"graph: n={g.n} edges={g.m}")
    return EXIT_OK


def cmd_fit(args) -> int:
    outdir = _outdir(args)
    obs, truth = _load_inputs(args)
    g = _resolve_graph(args, obs)
    spec = solver.ProblemSpec.from_observations(obs, g, args.gamma1, args.gamma2)
    options = _solver_options(args)
    trace_fh = None
    trace_cb = None
    if args.trace:
        trace_fh = open(outdir / "trace.jsonl", "w", encoding="utf-8")
        trace_cb = lambda rec: trace_fh.write(json.dumps(rec) + "\n")
    try:
        state, report = solver.alm_solve(spec, options, trace=trace_cb)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    result = solver.extract_clusters(spec, state, options.merge_tol)

    outputs = []
    labels_path = outdir / "labels.txt"
    dataset.save_labels(dataset.LabelVector(result.labels), labels_path)
    outputs.append(labels_path)
    cent_path = outdir / "centroids.mts"
    dataset.save_mts(dataset.ObservationSet(result.centroids), cent_path)
    outputs.append(cent_path)
    report_path = outdir / "report.json"
    payload = report.as_dict() | {
        "n_clusters": int(result.n_clusters),
        "centroid_ranks": result.ranks.tolist(),
        "objective": result.objective,
    }
    _dump_json(payload, report_path)
    outputs.append(report_path)
    if truth is not None:
        outputs.append(_write_metrics(outdir, result.labels, truth.labels))
    _write_manifest(outdir, "fit", vars(args), outputs)
    print(f"fit: clusters={result.n_clusters} outer={report.outer_iterations} "
          f"residual={report.final_residual:.3e} success={report.success}")
    return EXIT_OK if report.success else EXIT_SOLVER


def _path_row(payload):
    spec_args, g1_grid, gamma2, opt_kwargs = payload
    spec = solver.ProblemSpec(*spec_args)
    options = solver.SolverOptions(**opt_kwargs)
    return solver.clusterpath(spec, g1_grid, [gamma2], options)


def cmd_path(args) -> int:
    outdir = _outdir(args)
    obs, truth = _load_inputs(args)
    g = _resolve_graph(args, obs)
    g1_grid = _parse_grid(args.gamma1_grid)
    g2_grid = _parse_grid(args.gamma2_grid)
    options = _solver_options(args)
    spec = solver.ProblemSpec.from_observations(obs, g, g1_grid[0], g2_grid[0])
    report = (theory.recovery_check(obs, truth, g, g1_grid[0], g2_grid[0],
                                    keep_pairs=False)
              if truth is not None else None)

    workers = args.workers or 1
    if workers > 1 and len(g2_grid) > 1:
        spec_args = (spec.a, spec.n, spec.d1, spec.d2, spec.graph,
                     spec.gamma1, spec.gamma2)
        opt_kwargs = {"tol": options.tol, "max_outer": options.max_outer,
                      "merge_tol": options.merge_tol}
        payloads = [(spec_args, g1_grid, g2, opt_kwargs) for g2 in g2_grid]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_path_row, payloads))
        points = [pt for row in rows for pt in row]
    else:
        points = solver.clusterpath(spec, g1_grid, g2_grid, options)

    sweep_path = outdir / "sweep.csv"
    failures = 0
    with open(sweep_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma1", "gamma2", "n_clusters", "ari", "region", "error"])
        for pt in points:
            n_clusters = pt.result.n_clusters if pt.result else ""
            ari_val = ""
            if pt.result is not None and truth is not None:
                ari_val = f"{metrics.ari(pt.result.labels, truth.labels):.6f}"
            region = (theory.region_classify(report, pt.gamma1, pt.gamma2)
                      if report is not None else "")
            writer.writerow([pt.gamma1, pt.gamma2, n_clusters, ari_val, region,
                             pt.error or ""])
            if pt.result is None:
                failures += 1
    _write_manifest(outdir, "path", vars(args), [sweep_path])
    print(f"path: {len(points)} grid points, {failures} failures -> {sweep_path}")
    return EXIT_OK if failures == 0 else EXIT_SOLVER


def cmd_check(args) -> int:
    outdir = _outdir(args)
    obs, truth = _load_inputs(args)
    g = _resolve_graph(args, obs)
    mode = args.mode or "exact"
    gamma1 = args.gamma1 if args.gamma1 is not None else 0.0
    gamma2 = args.gamma2 if args.gamma2 is not None else 0.0
    if mode == "exact":
        if truth is None:
            raise UsageError("check --mode exact needs --labels")
        report = theory.recovery_check(obs, truth, g, gamma1, gamma2)
        payload = report.as_dict()
    elif mode == "asymptotic":
        if args.means is None or args.sigma is None or args.t is None \
                or args.epsilon is None:
            raise UsageError("check --mode asymptotic needs --means, --sigma, --t, --epsilon")
        means = dataset.load_mts(args.means).data
        report = theory.asymptotic_check(obs, means, args.sigma, g, args.t,
                                         args.epsilon, gamma1, gamma2)
        payload = report.as_dict()
    elif mode == "prediction":
        if args.means is None or args.sigma is None or truth is None:
            raise UsageError("check --mode prediction needs --means, --sigma, --labels")
        means = dataset.load_mts(args.means).data
        x0 = means[truth.labels].reshape(-1)
        report = theory.prediction_bound(x0, g, args.sigma, gamma1, gamma2,
                                         obs.n, obs.d1, obs.d2)
        payload = report.as_dict()
    else:
        raise UsageError(f"unknown check mode {mode!r}")
    report_path = outdir / "check.json"
    _dump_json(payload, report_path)
    _write_manifest(outdir, "check", vars(args), [report_path])
    print(json.dumps(payload if mode != "exact"
                     else {"region": payload["region"],
                           "boundary_lines": payload["boundary_lines"]},
                     default=_json_default))
    return EXIT_OK


def cmd_baseline(args) -> int:
    outdir = _outdir(args)
    obs, truth = _load_inputs(args)
    options = baseline_mod.LloydOptions(
        k=args.k, rank=args.rank or obs.d2, max_iter=args.max_outer or 100,
        init=args.init or "random", seed=args.seed or 0)
    result = baseline_mod.lr_lloyd(obs, options)
    outputs = []
    labels_path = outdir / "labels.txt"
    dataset.save_labels(dataset.LabelVector(result.labels), labels_path)
    outputs.append(labels_path)
    cent_path = outdir / "centroids.mts"
    dataset.save_mts(dataset.ObservationSet(result.centroids), cent_path)
    outputs.append(cent_path)
    report_path = outdir / "report.json"
    _dump_json({
        "iterations": result.iterations,
        "objective": result.objectives[-1] if result.objectives else None,
        "init": options.init,
        "note": "spectral init is a simple unfolding heuristic, not the cited "
                "tensor-based initialization",
    }, report_path)
    outputs.append(report_path)
    if truth is not None:
        outputs.append(_write_metrics(outdir, result.labels, truth.labels))
    _write_manifest(outdir, "baseline", vars(args), outputs)
    print(f"baseline: iterations={result.iterations}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = dataset.load_labels(args.labels)
    truth = dataset.load_labels(args.truth)
    if pred.n != truth.n:
        raise UsageError("label files have different lengths")
    payload = {"ari": metrics.ari(pred.labels, truth.labels),
               "nmi": metrics.nmi(pred.labels, truth.labels)}
    print(json.dumps(payload, default=_json_default))
    if args.out:
        outdir = _outdir(args)
        path = outdir / "metrics.json"
        _dump_json(payload, path)
        _write_manifest(outdir, "eval", vars(args), [path])
    return EXIT_OK


def cmd_embed(args) -> int:
    outdir = _outdir(args)
    obs, _ = _load_inputs(args)
    coords = metrics.pca_embed(obs, args.dims or 2)
    coords_path = outdir / "coords.csv"
    with open(coords_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"pc{i+1}" for i in range(coords.shape[1])])
        writer.writerows(coords.tolist())
    _write_manifest(outdir, "embed", vars(args), [coords_path])
    print(f"embed: wrote {coords_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrcc",
        description="Low-rank convex clustering of matrix-valued observations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", help="MTS1 data file")
            p.add_argument("--labels", help="ground-truth labels file")
            p.add_argument("--graph-k", type=int, help="k for the k-NN graph")
            p.add_argument("--kernel-scale", type=float,
                           help="Gaussian kernel scale (unit weights if omitted)")
            p.add_argument("--edges", help="prebuilt edge-list file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="JSON config file; flags win")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--generator", required=True,
                   choices=["quarter-spheres", "unbalanced-gaussian", "low-rank-mixture"])
    p.add_argument("--n", type=int)
    p.add_argument("--n-per-cluster", type=int)
    p.add_argument("--d1", type=int)
    p.add_argument("--d2", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--sizes", help="comma-separated cluster sizes (unbalanced-gaussian)")
    p.add_argument("--k", type=int, help="mixture components (low-rank-mixture)")
    p.add_argument("--rank", type=int, help="mean rank (low-rank-mixture)")
    common(p, data=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("graph", help="build and save a neighborhood graph")
    common(p)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("fit", help="solve the clustering model")
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--merge-tol", type=float)
    p.add_argument("--trace", action="store_true", help="stream trace.jsonl")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="sweep a (gamma1, gamma2) grid")
    p.add_argument("--gamma1-grid", required=True)
    p.add_argument("--gamma2-grid", required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--merge-tol", type=float)
    p.add_argument("--workers", type=int)
    common(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("check", help="theory diagnostics")
    p.add_argument("--mode", choices=["exact", "asymptotic", "prediction"])
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--means", help="MTS1 file of true means")
    p.add_argument("--sigma", type=float, help="noise level")
    p.add_argument("--t", type=float, help="tube radius in noise units")
    p.add_argument("--epsilon", type=float)
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("baseline", help="low-rank Lloyd baseline")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rank", type=int)
    p.add_argument("--init", choices=["random", "spectral"])
    p.add_argument("--max-outer", type=int, help="iteration cap")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score two label files")
    p.add_argument("--labels", required=True, help="predicted labels file")
    p.add_argument("--truth", required=True, help="reference labels file")
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed", help="export PCA coordinates")
    p.add_argument("--dims", type=int)
    common(p)
    p.set_defaults(func=cmd_embed)

    return parser


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    try:
        loaded = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in loaded.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"config key {key!r} is not a known option")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        if getattr(args, "data", None) is None and args.command not in ("gen", "eval"):
            raise UsageError("--data is required")
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except solver.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
