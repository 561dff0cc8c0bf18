"""Degree, betweenness and PageRank scores for the centrality baselines."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph_core import Graph

KINDS = ("degree", "betweenness", "pagerank")


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CentralityScores:
    kind: str
    values: np.ndarray
    # per-iteration L1 change, PageRank only
    residuals: tuple = field(default=(), repr=False)


def degree_centrality(g: Graph) -> CentralityScores:
    return CentralityScores("degree", g.neighborhood_sizes / g.n_nodes)


def betweenness_centrality(g: Graph) -> CentralityScores:
    """Brandes accumulation over unordered pairs ``j < k``; unreachable pairs add nothing."""
    n = g.n_nodes
    indptr, indices = g.adj.indptr, g.adj.indices
    cb = np.zeros(n)
    for s in range(n):
        order = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            order.append(v)
            for w in indices[indptr[v]:indptr[v + 1]]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    # every unordered pair was accumulated from both endpoints
    return CentralityScores("betweenness", cb / 2.0)


def pagerank_operator(g: Graph, include_self_loops: bool = False) -> tuple[sp.csr_matrix, np.ndarray]:
    """Column-stochastic propagation matrix and the dangling-node indicator."""
    adj = g.adj
    if include_self_loops:
        adj = (adj + sp.identity(g.n_nodes, format="csr")).tocsr()
    out = np.asarray(adj.sum(axis=0)).ravel()
    dangling = out == 0
    scale = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out))
    # P[i, j] = 1/deg(j) for every edge (i, j)
    P = (adj @ sp.diags(scale)).tocsr()
    return P, dangling


def pagerank_centrality(
    g: Graph,
    alpha: float = 0.85,
    tol: float = 1e-12,
    max_iter: int = 10000,
    include_self_loops: bool = False,
) -> CentralityScores:
    """Power iteration of ``PR = (1-alpha)/N + alpha * P PR``.

    Neighbour sets exclude the node itself unless ``include_self_loops`` is set.
    Rank held by isolated nodes is spread uniformly.  Stops once the max-norm
    change drops below ``tol``.
    """
    n = g.n_nodes
    P, dangling = pagerank_operator(g, include_self_loops)
    pr = np.full(n, 1.0 / n)
    residuals = []
    for _ in range(max_iter):
        nxt = alpha * (P @ pr) + (alpha * pr[dangling].sum() + 1.0 - alpha) / n
        diff = np.abs(nxt - pr)
        residuals.append(float(diff.sum()))
        pr = nxt
        if diff.max() < tol:
            break
    else:
        raise ConvergenceError(f"PageRank did not converge in {max_iter} iterations", float(diff.max()))
    return CentralityScores("pagerank", pr, tuple(residuals))


def centrality(g: Graph, kind: str, **kwargs) -> CentralityScores:
    if kind == "degree":
        return degree_centrality(g)
    if kind == "betweenness":
        return betweenness_centrality(g)
    if kind == "pagerank":
        return pagerank_centrality(g, **kwargs)
    raise ValueError(f"unknown centrality {kind!r}; expected one of {KINDS}")
