"""Command-line interface: generators, constructions, evaluation, audits.

Exit codes: 0 success, 1 a verification or report check failed, 2 usage
or input error (malformed files report path and line). All randomness
comes from explicit --seed flags; outputs are byte-identical across runs
and thread settings for identical inputs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import fileio
from .errors import FormatError, InvariantError, MetricError, TreebedError
from .evaluate import (
    DistortionReport,
    make_report,
    tree_all_pairs,
    verify_radius_invariants,
)
from .generators import GeneratorSpec, generate
from .graphs import WeightedGraph, shortest_path_metric
from .metrics import MetricSpace
from .prob import build_prob_spanning_tree, make_density, sample_tree_ensemble
from .spantree import SpanningTree, build_spanning_tree
from .ultrametric import build_ultrametric

__all__ = ["cli", "main"]


def _parse_q_list(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("inf", "infinity"):
            out.append(math.inf)
            continue
        try:
            q = float(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad q value {tok!r}") from None
        if q < 1.0:
            raise argparse.ArgumentTypeError(f"q must be >= 1, got {tok}")
        out.append(q)
    if not out:
        raise argparse.ArgumentTypeError("empty q list")
    return out


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treebed",
                                 description="Tree embeddings of metrics and graphs "
                                             "with certified distortion audits.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark graph or metric")
    g.add_argument("--kind", required=True,
                   choices=["cycle", "path", "grid", "gnp", "random-metric"])
    g.add_argument("--n", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--p", type=float, default=0.3)
    g.add_argument("--w-min", type=float, default=1.0)
    g.add_argument("--w-max", type=float, default=2.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    u = sub.add_parser("ultrametric", help="embed a metric or graph into an ultrametric")
    u.add_argument("input")
    u.add_argument("--out", required=True, help="ultrametric tree JSON")
    u.add_argument("--report", help="distortion report JSON")
    u.add_argument("--K", type=float, default=150.0)
    u.set_defaults(func=_cmd_ultrametric)

    s = sub.add_parser("spantree", help="deterministic low-distortion spanning tree")
    s.add_argument("input")
    s.add_argument("--out", required=True, help="tree edge list")
    s.add_argument("--trace", help="construction trace JSON")
    s.set_defaults(func=_cmd_spantree)

    p = sub.add_parser("spantree-prob", help="randomized spanning tree (seeded)")
    p.add_argument("input")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=1,
                   help="ensemble size; seeds S..S+K-1 (tree output is always seed S)")
    p.add_argument("--density", default="inverse-square",
                   choices=["inverse-square", "iterated-log"])
    p.add_argument("--t", type=int, default=1, help="log tower depth (iterated-log)")
    p.add_argument("--theta", type=float, default=1.0, help="tail exponent (iterated-log)")
    p.add_argument("--out", required=True, help="tree edge list (seed S)")
    p.add_argument("--trace", help="construction trace JSON (seed S)")
    p.add_argument("--report", help="report JSON (single tree, or ensemble summary)")
    p.set_defaults(func=_cmd_spantree_prob)

    e = sub.add_parser("evaluate", help="distortion report for an embedding")
    e.add_argument("--graph", required=True, help="base graph or metric file")
    grp = e.add_mutually_exclusive_group(required=True)
    grp.add_argument("--tree", help="spanning tree edge list")
    grp.add_argument("--ultrametric", help="ultrametric tree JSON")
    e.add_argument("--q", type=_parse_q_list, default=[1.0, 2.0, math.inf],
                   help="comma-separated exponents, e.g. 1,2,inf")
    e.add_argument("--K", type=float, default=150.0)
    e.add_argument("--profile", help="scaling profile CSV output")
    e.add_argument("--report", help="report JSON output")
    e.add_argument("--figures", help="directory for rendered PNG figures")
    e.set_defaults(func=_cmd_evaluate)

    v = sub.add_parser("verify", help="audit a construction trace against its tree")
    v.add_argument("--trace", required=True)
    v.add_argument("--tree", required=True)
    v.set_defaults(func=_cmd_verify)
    return ap


def _base_metric(path: str) -> tuple[MetricSpace, WeightedGraph | None]:
    obj = fileio.read_input(path)
    if isinstance(obj, WeightedGraph):
        return shortest_path_metric(obj), obj
    return obj, None


def _require_graph(path: str, command: str) -> WeightedGraph:
    obj = fileio.read_input(path)
    if not isinstance(obj, WeightedGraph):
        raise MetricError(
            f"{command} needs a graph edge list; {path} holds a dense metric")
    return obj


def _cmd_generate(args) -> int:
    spec = GeneratorSpec(kind=args.kind, n=args.n, seed=args.seed, p=args.p,
                         weight_range=(args.w_min, args.w_max),
                         width=args.width, height=args.height)
    obj = generate(spec)
    if isinstance(obj, WeightedGraph):
        fileio.write_graph(args.out, obj)
        print(f"graph {args.kind}: n={obj.n} m={obj.m} -> {args.out}")
    else:
        fileio.write_metric(args.out, obj)
        print(f"metric {args.kind}: n={obj.n} -> {args.out}")
    return 0


def _print_lq(report: DistortionReport) -> None:
    for key in sorted(report.lq, key=lambda s: math.inf if s == "inf" else float(s)):
        print(f"l{key} distortion: {report.lq[key]:.6g}")
    for name, state in report.checks.items():
        print(f"check {name}: {state}")


def _report_exit(report: DistortionReport) -> int:
    return 1 if any(v == "fail" for v in report.checks.values()) else 0


def _cmd_ultrametric(args) -> int:
    base, _ = _base_metric(args.input)
    tree = build_ultrametric(base)
    fileio.write_ultrametric(args.out, tree)
    print(f"ultrametric over {base.n} points ({tree.num_nodes} nodes) -> {args.out}")
    if args.report:
        report = make_report(base, tree, K=args.K)
        fileio.write_report(args.report, report.to_json_obj())
        _print_lq(report)
        return _report_exit(report)
    return 0


def _cmd_spantree(args) -> int:
    g = _require_graph(args.input, "spantree")
    tree, trace = build_spanning_tree(g)
    fileio.write_tree(args.out, tree)
    print(f"spanning tree: kept {len(tree.edges)} of {g.m} edges -> {args.out}")
    if args.trace:
        fileio.write_trace(args.trace, trace)
        print(f"trace: {len(trace.nodes)} nodes -> {args.trace}")
    return 0


def _cmd_spantree_prob(args) -> int:
    g = _require_graph(args.input, "spantree-prob")
    if args.samples < 1:
        raise MetricError(f"--samples must be >= 1, got {args.samples}")
    density = make_density(args.density, t=args.t, theta=args.theta)
    tree, trace = build_prob_spanning_tree(g, args.seed, density=density)
    fileio.write_tree(args.out, tree)
    print(f"sampled spanning tree (seed {args.seed}): kept {len(tree.edges)} "
          f"of {g.m} edges -> {args.out}")
    if args.trace:
        fileio.write_trace(args.trace, trace)
        print(f"trace: {len(trace.nodes)} nodes -> {args.trace}")
    if not args.report:
        return 0
    base = shortest_path_metric(g)
    if args.samples == 1:
        report = make_report(base, tree, trace=trace, tree=tree)
        fileio.write_report(args.report, report.to_json_obj())
        _print_lq(report)
        return _report_exit(report)
    seeds = list(range(args.seed, args.seed + args.samples))
    ensemble = sample_tree_ensemble(g, seeds, density=density)
    iu, ju = np.triu_indices(g.n, k=1)
    mean_pairs = ensemble.mean[iu, ju]
    per_seed_l1 = [float(np.mean(s.distortion[iu, ju])) for s in ensemble.samples]
    obj = {
        "n": g.n, "samples": args.samples, "seeds": seeds,
        "density": density.tag,
        "lq_of_mean": {
            "1": float(np.mean(mean_pairs)),
            "2": float(np.sqrt(np.mean(mean_pairs ** 2))),
            "inf": float(np.max(mean_pairs)),
        },
        "per_seed_l1": per_seed_l1,
    }
    fileio.write_report(args.report, obj)
    print(f"ensemble of {args.samples}: mean l1 distortion "
          f"{obj['lq_of_mean']['1']:.6g} -> {args.report}")
    return 0


def _render_figures(figdir: str, report: DistortionReport) -> list[str]:
    os.makedirs(figdir, exist_ok=True)
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    rows = report.profile.rows()
    eps = [r["epsilon"] for r in rows]
    dist = [r["distortion"] for r in rows]
    ax.step(eps, dist, where="post")
    ax.set_xscale("log")
    ax.set_xlabel("excluded fraction of pairs")
    ax.set_ylabel("distortion bound on the rest")
    ax.set_title("empirical scaling profile")
    fig.tight_layout()
    path = os.path.join(figdir, "scaling_profile.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(report.values, bins=50)
    ax.set_yscale("log")
    ax.set_xlabel("pair distortion")
    ax.set_ylabel("pairs")
    ax.set_title("distortion histogram")
    fig.tight_layout()
    path = os.path.join(figdir, "distortion_hist.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    grid = [row["epsilon"] for row in report.bad_counts]
    counts = [row["count"] for row in report.bad_counts]
    budgets = [row["budget"] for row in report.bad_counts]
    ax.plot(grid, budgets, marker="o", label="budget eps*C(n,2)")
    ax.plot(grid, counts, marker="x", label="bad pairs")
    ax.set_xscale("log")
    ax.set_yscale("symlog")
    ax.set_xlabel("eps")
    ax.legend()
    ax.set_title("bad-pair counts vs budget")
    fig.tight_layout()
    path = os.path.join(figdir, "bad_pairs.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def _cmd_evaluate(args) -> int:
    base, _ = _base_metric(args.graph)
    if args.tree:
        tree = fileio.read_tree(args.tree)
        if tree.n != base.n:
            raise MetricError(f"tree has {tree.n} vertices, base has {base.n}")
        embedded = tree_all_pairs(tree)
    else:
        um = fileio.read_ultrametric(args.ultrametric)
        if um.n != base.n:
            raise MetricError(f"ultrametric has {um.n} leaves, base has {base.n}")
        embedded = tree_all_pairs(um)
    report = make_report(base, embedded, K=args.K, q_values=args.q)
    print(f"n={base.n} pairs={report.profile.n_pairs}")
    _print_lq(report)
    if args.profile:
        fileio.write_profile_csv(args.profile, report.profile.rows())
        print(f"profile -> {args.profile}")
    if args.report:
        fileio.write_report(args.report, report.to_json_obj())
        print(f"report -> {args.report}")
    if args.figures:
        for path in _render_figures(args.figures, report):
            print(f"figure -> {path}")
    return _report_exit(report)


def _verify_structure(trace, tree: SpanningTree) -> list[str]:
    """Consistency of a trace with itself and with the tree's edges."""
    problems = []
    if trace.n != tree.n:
        problems.append(f"trace is over {trace.n} vertices, tree over {tree.n}")
        return problems
    nodes = {node.id: node for node in trace.nodes}
    roots = [node for node in trace.nodes if node.parent == -1]
    if len(roots) != 1:
        problems.append(f"expected exactly one root node, found {len(roots)}")
        return problems
    if not np.array_equal(np.sort(roots[0].points), np.arange(trace.n)):
        problems.append("root cluster does not cover all vertices")
    tree_edges = {(min(u, v), max(u, v)) for u, v, _ in tree.edges}
    crossing = []
    for node in trace.nodes:
        if not node.parts:
            continue
        child_pts = []
        for part in node.parts:
            child = nodes.get(part.child_id)
            if child is None or child.parent != node.id:
                problems.append(f"node {node.id}: broken child link {part.child_id}")
                continue
            child_pts.append(child.points)
            if part.kind == "cone":
                if part.edge is None:
                    problems.append(f"node {node.id}: cone without a crossing edge")
                    continue
                y, x, eid = part.edge
                if x != part.tip or x not in set(int(q) for q in child.points):
                    problems.append(f"node {node.id}: cone tip {part.tip} inconsistent")
                key = (min(y, x), max(y, x))
                if key not in tree_edges:
                    problems.append(f"node {node.id}: crossing edge {key} not in tree")
                crossing.append(key)
        merged = np.sort(np.concatenate(child_pts)) if child_pts else np.empty(0)
        if not np.array_equal(merged, np.sort(node.points)):
            problems.append(f"node {node.id}: parts do not partition the cluster")
    if len(crossing) != len(set(crossing)):
        problems.append("duplicate crossing edges in trace")
    if len(set(crossing)) != tree.n - 1:
        problems.append(
            f"trace records {len(set(crossing))} crossing edges, tree has {tree.n - 1}")
    return problems


def _cmd_verify(args) -> int:
    trace = fileio.read_trace(args.trace)
    g = fileio.read_graph(args.tree)
    try:
        tree = SpanningTree(g.n, g.edges)
    except InvariantError as e:
        print(f"tree check: fail ({e})")
        return 1
    problems = _verify_structure(trace, tree)
    for msg in problems:
        print(f"structure: {msg}")
    print(f"check structure: {'fail' if problems else 'pass'}")
    radius = verify_radius_invariants(trace, tree)
    if not radius.passed:
        print(f"radius invariants first fail at node {radius.worst_node}")
    print(f"check radius: {'pass' if radius.passed else 'fail'}")
    return 0 if radius.passed and not problems else 1


def cli(argv=None) -> int:
    """Run one command; returns the process exit code."""
    threads = os.environ.get("TREEBED_THREADS")
    if threads is not None and threads.strip():
        try:
            nthreads = int(threads)
        except ValueError:
            print(f"TREEBED_THREADS must be an integer >= 0, got {threads!r}",
                  file=sys.stderr)
            return 2
        if nthreads < 0:
            print(f"TREEBED_THREADS must be >= 0, got {nthreads}", file=sys.stderr)
            return 2
        # All computations are sequential; the variable only caps parallelism.
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MetricError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli(sys.argv[1:]))
