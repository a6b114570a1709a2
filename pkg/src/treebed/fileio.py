"""Text and JSON serialization for graphs, metrics, trees, and traces.

Text formats print floats with %.17g and JSON uses Python's shortest
round-trip repr; both reproduce the exact double on re-read. JSON keys
are sorted and files end with a newline, so identical objects serialize
to identical bytes. Malformed inputs raise FormatError carrying the
1-based line number.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .cutting import CutCertificate, DeletedInterval
from .errors import FormatError, TreebedError
from .graphs import WeightedGraph
from .metrics import MetricSpace
from .spantree import ConstructionTrace, SpanningTree, TraceNode, TracePart
from .ultrametric import UltrametricTree

__all__ = [
    "read_graph",
    "write_graph",
    "read_metric",
    "write_metric",
    "read_input",
    "read_tree",
    "write_tree",
    "read_ultrametric",
    "write_ultrametric",
    "read_trace",
    "write_trace",
    "write_report",
    "write_profile_csv",
    "write_json",
]


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _lines(path: str) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as e:
        raise FormatError(f"cannot read file: {e.strerror or e}", path=path) from e


def _tokens(lines: list[str], lineno: int, path: str) -> list[str]:
    if lineno > len(lines):
        raise FormatError("file ends early", path=path, line=len(lines))
    return lines[lineno - 1].split()


def _parse_int(tok: str, what: str, path: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"{what} must be an integer, got {tok!r}",
                          path=path, line=line) from None


def _parse_float(tok: str, what: str, path: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"{what} must be a number, got {tok!r}",
                          path=path, line=line) from None


def _check_trailing(lines: list[str], first_unused: int, path: str) -> None:
    for i in range(first_unused, len(lines) + 1):
        if i <= len(lines) and lines[i - 1].strip():
            raise FormatError("unexpected extra content", path=path, line=i)


def _read_edge_list(lines: list[str], path: str) -> WeightedGraph:
    head = _tokens(lines, 1, path)
    if len(head) != 2:
        raise FormatError(f"expected header 'n m', got {lines[0]!r}", path=path, line=1)
    n = _parse_int(head[0], "vertex count", path, 1)
    m = _parse_int(head[1], "edge count", path, 1)
    if n < 1 or m < 0:
        raise FormatError(f"need n >= 1 and m >= 0, got n={n} m={m}", path=path, line=1)
    edges = []
    for k in range(m):
        line = 2 + k
        toks = _tokens(lines, line, path)
        if len(toks) != 3:
            raise FormatError(f"expected 'u v w', got {lines[line - 1]!r}",
                              path=path, line=line)
        u = _parse_int(toks[0], "endpoint", path, line)
        v = _parse_int(toks[1], "endpoint", path, line)
        w = _parse_float(toks[2], "weight", path, line)
        edges.append((u, v, w))
    _check_trailing(lines, 2 + m, path)
    try:
        return WeightedGraph(n, tuple(edges))
    except TreebedError as e:
        raise FormatError(str(e), path=path) from e


def read_graph(path: str) -> WeightedGraph:
    return _read_edge_list(_lines(path), path)


def write_graph(path: str, g: WeightedGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {_fmt(w)}\n")


def _read_dense(lines: list[str], path: str) -> MetricSpace:
    head = _tokens(lines, 1, path)
    n = _parse_int(head[0], "point count", path, 1)
    if n < 1:
        raise FormatError(f"need n >= 1, got {n}", path=path, line=1)
    rows = []
    for k in range(n):
        line = 2 + k
        toks = _tokens(lines, line, path)
        if len(toks) != n:
            raise FormatError(f"expected {n} entries, got {len(toks)}",
                              path=path, line=line)
        rows.append([_parse_float(t, "distance", path, line) for t in toks])
    _check_trailing(lines, 2 + n, path)
    try:
        return MetricSpace(np.asarray(rows, dtype=np.float64))
    except TreebedError as e:
        raise FormatError(str(e), path=path) from e


def read_metric(path: str) -> MetricSpace:
    lines = _lines(path)
    head = _tokens(lines, 1, path)
    if len(head) != 1:
        raise FormatError(f"expected header 'n', got {lines[0]!r}", path=path, line=1)
    return _read_dense(lines, path)


def write_metric(path: str, m: MetricSpace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.n}\n")
        for row in m.d:
            fh.write(" ".join(_fmt(x) for x in row) + "\n")


def read_input(path: str):
    """Sniff by header: 'n m' means edge list, a single 'n' means dense metric."""
    lines = _lines(path)
    head = _tokens(lines, 1, path)
    if len(head) == 2:
        return _read_edge_list(lines, path)
    if len(head) == 1:
        return _read_dense(lines, path)
    raise FormatError(
        f"header must be 'n m' (edge list) or 'n' (dense metric), got {lines[0]!r}",
        path=path, line=1)


def read_tree(path: str) -> SpanningTree:
    g = read_graph(path)
    try:
        return SpanningTree(g.n, g.edges)
    except TreebedError as e:
        raise FormatError(str(e), path=path) from e


def write_tree(path: str, tree: SpanningTree) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{tree.n} {len(tree.edges)}\n")
        for u, v, w in tree.edges:
            fh.write(f"{u} {v} {_fmt(w)}\n")


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise FormatError(f"cannot read file: {e.strerror or e}", path=path) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path=path, line=e.lineno) from e


def read_ultrametric(path: str) -> UltrametricTree:
    obj = _load_json(path)
    try:
        return UltrametricTree.from_json_obj(obj)
    except TreebedError as e:
        raise FormatError(str(e), path=path) from e


def write_ultrametric(path: str, t: UltrametricTree) -> None:
    write_json(path, t.to_json_obj())


def _cert_to_obj(cert: CutCertificate | None):
    return None if cert is None else cert.scalar_dict()


def _cert_from_obj(obj) -> CutCertificate | None:
    if obj is None:
        return None
    deleted = tuple(
        DeletedInterval(r=d["r"], eps=d["eps"], lo=d["lo"], hi=d["hi"], k=int(d["k"]))
        for d in obj.get("deleted", ())
    )
    return CutCertificate(
        u=int(obj["u"]), eps_hat=float(obj["eps_hat"]), S_lo=float(obj["S_lo"]),
        S_hi=float(obj["S_hi"]), deleted=deleted, r=float(obj["r"]),
        case=int(obj["case"]), theta=float(obj["theta"]), alpha=float(obj["alpha"]),
        lam_hat=float(obj["lam_hat"]), beta=float(obj["beta"]),
        n_reset=int(obj["n_reset"]), eps_lim=float(obj["eps_lim"]),
        big_c=float(obj["big_c"]), shell_constant=float(obj["shell_constant"]),
        n_points=int(obj["n_points"]),
        z_count=None if obj.get("z_size") is None else int(obj["z_size"]),
    )


def trace_to_json_obj(trace: ConstructionTrace) -> dict:
    nodes = []
    for node in trace.nodes:
        parts = [
            {"kind": p.kind, "child_id": p.child_id, "tip": p.tip,
             "edge": None if p.edge is None else [int(p.edge[0]), int(p.edge[1]), int(p.edge[2])],
             "chi": p.chi, "radius": p.radius, "cert": _cert_to_obj(p.cert)}
            for p in node.parts
        ]
        nodes.append({
            "id": node.id, "parent": node.parent,
            "points": [int(x) for x in node.points],
            "center": node.center, "rad": node.rad, "is_reset": node.is_reset,
            "n_reset": node.n_reset, "lam": node.lam, "beta": node.beta,
            "eps_lim": node.eps_lim, "alpha": node.alpha, "rand": node.rand,
            "parts": parts,
        })
    return {"kind": trace.kind, "n": trace.n, "seed": trace.seed,
            "density": trace.density, "nodes": nodes}


def write_trace(path: str, trace: ConstructionTrace) -> None:
    write_json(path, trace_to_json_obj(trace))


def read_trace(path: str) -> ConstructionTrace:
    obj = _load_json(path)
    try:
        trace = ConstructionTrace(kind=str(obj["kind"]), n=int(obj["n"]),
                                  seed=obj.get("seed"), density=obj.get("density"))
        for nd in obj["nodes"]:
            node = TraceNode(
                id=int(nd["id"]), parent=int(nd["parent"]),
                points=np.asarray(nd["points"], dtype=np.int64),
                center=int(nd["center"]), rad=float(nd["rad"]),
                is_reset=bool(nd["is_reset"]), n_reset=int(nd["n_reset"]),
                lam=float(nd["lam"]), beta=nd.get("beta"),
                eps_lim=nd.get("eps_lim"), alpha=nd.get("alpha"),
                rand=nd.get("rand"),
            )
            for p in nd.get("parts", ()):
                edge = p.get("edge")
                node.parts.append(TracePart(
                    kind=str(p["kind"]), child_id=int(p["child_id"]),
                    tip=int(p["tip"]),
                    edge=None if edge is None else (int(edge[0]), int(edge[1]), int(edge[2])),
                    cert=_cert_from_obj(p.get("cert")), chi=p.get("chi"),
                    radius=p.get("radius"),
                ))
            trace.nodes.append(node)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed trace: {e!r}", path=path) from e
    return trace


def write_report(path: str, report_obj: dict) -> None:
    write_json(path, report_obj)


def write_profile_csv(path: str, profile_rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,epsilon,distortion\n")
        for row in profile_rows:
            fh.write(f"{row['rank']},{_fmt(row['epsilon'])},{_fmt(row['distortion'])}\n")
