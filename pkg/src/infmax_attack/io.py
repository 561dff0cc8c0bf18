"""Readers and writers for the on-disk formats.

* edge list: one whitespace-separated token pair per line, ``#`` comments
* features: CSV rows ``token,x_1,...,x_D``
* labels: CSV rows ``token,class``
* perturbation: ``# D=<d>,lambda=<lam>`` then ``feature_index,value`` for nonzeros
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .graph_core import Graph, GraphError, build_graph


def _token(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def _normalize(tokens: list[str]) -> list:
    # integer ids sort numerically only if every token is an integer
    conv = [_token(t) for t in tokens]
    if all(isinstance(t, int) for t in conv):
        return conv
    return list(tokens)


def read_edge_list(path) -> list[tuple]:
    raw = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{n}: expected two node tokens, got {len(parts)}")
        raw.append(parts)
    flat = _normalize([t for p in raw for t in p])
    return list(zip(flat[0::2], flat[1::2]))


def write_edge_list(path, g: Graph) -> None:
    lines = [f"{g.node_ids[u]} {g.node_ids[v]}" for u, v in g.edge_list()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_features(path) -> dict:
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r and not r[0].startswith("#")]
    toks = _normalize([r[0] for r in rows])
    feats = {}
    for t, r in zip(toks, rows):
        feats[t] = np.array([float(x) for x in r[1:]])
    widths = {len(v) for v in feats.values()}
    if len(widths) > 1:
        raise GraphError(f"{path}: feature rows have differing widths {sorted(widths)}")
    return feats


def write_features(path, g: Graph) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for t, row in zip(g.node_ids, g.features):
            w.writerow([t, *(repr(float(x)) for x in row)])


def read_labels(path) -> dict:
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r and not r[0].startswith("#")]
    toks = _normalize([r[0] for r in rows])
    return {t: int(r[1]) for t, r in zip(toks, rows)}


def write_labels(path, g: Graph) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for t, c in zip(g.node_ids, g.labels):
            w.writerow([t, int(c)])


def load_graph(edges, features=None, labels=None) -> Graph:
    """Assemble a graph from the three files; keyed features fix the node set."""
    feats = read_features(features) if features else None
    labs = read_labels(labels) if labels else None
    nodes = None
    if feats is None and labs is not None:
        nodes = list(labs)
    return build_graph(read_edge_list(edges), feats, labs, nodes=nodes)


def save_graph(directory, g: Graph) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {"edges": "edges.txt"}
    write_edge_list(d / "edges.txt", g)
    if g.features is not None:
        write_features(d / "features.csv", g)
        files["features"] = "features.csv"
    if g.labels is not None:
        write_labels(d / "labels.csv", g)
        files["labels"] = "labels.csv"
    return files


def write_epsilon(path, epsilon: np.ndarray) -> None:
    eps = np.asarray(epsilon, dtype=float)
    lam = float(np.max(np.abs(eps))) if eps.size else 0.0
    lines = [f"# D={len(eps)},lambda={lam!r}", "feature_index,value"]
    lines += [f"{j},{float(eps[j])!r}" for j in np.flatnonzero(eps)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_epsilon(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# D=...,lambda=...' header")
    meta = dict(kv.split("=", 1) for kv in lines[0][1:].strip().split(","))
    eps = np.zeros(int(meta["D"]))
    for line in lines[2:]:
        if line.strip():
            j, v = line.split(",")
            eps[int(j)] = float(v)
    return eps


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())
