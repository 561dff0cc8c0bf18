"""Stochastic blockmodel graphs with class-informative features, plus layout export."""
from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .graph_core import Graph, bfs_distances
from .strategies import AttackPlan


@dataclass(frozen=True)
class SBMConfig:
    n_communities: int = 4
    nodes_per_community: int = 100
    p_in: float = 0.05
    p_out: float = 0.005
    feature_dim: int = 100
    signal: float = 1.0
    noise_sd: float = 1.0
    # features whose class means differ; the rest are pure noise
    informative: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p_out <= self.p_in <= 1:
            raise ValueError(f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if self.nodes_per_community < 1 or self.n_communities < 1:
            raise ValueError("need at least one community with at least one node")

    def to_json(self) -> dict:
        return asdict(self)


def generate_sbm(cfg: SBMConfig) -> Graph:
    """Sample edges block by block and give each class a Gaussian feature mean.

    Labels equal the generating community.  Each informative feature is tied
    to one class (round robin) and shifted by ``signal`` for its members.
    """
    rng = np.random.default_rng(cfg.seed)
    k, per = cfg.n_communities, cfg.nodes_per_community
    n = k * per
    labels = np.repeat(np.arange(k), per)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, cfg.p_in, cfg.p_out)
    hit = rng.random(len(iu)) < prob
    rows, cols = iu[hit], ju[hit]
    adj = sp.csr_matrix((np.ones(2 * len(rows)), (np.r_[rows, cols], np.r_[cols, rows])), shape=(n, n))
    adj.sort_indices()

    D = cfg.feature_dim
    n_inf = D if cfg.informative is None else min(cfg.informative, D)
    means = np.zeros((k, D))
    for f in range(n_inf):
        means[f % k, f] = cfg.signal
    X = means[labels] + rng.normal(0.0, cfg.noise_sd, size=(n, D))
    return Graph(adj, tuple(range(n)), X, labels)


def communities_hit(labels: np.ndarray, selected: Sequence[int]) -> int:
    return len({int(labels[i]) for i in selected})


def mean_pairwise_distance(g: Graph, selected: Sequence[int]) -> float | None:
    """Mean hop distance over connected pairs of selected nodes; None without such pairs."""
    sel = list(selected)
    dists = []
    for a, b in itertools.combinations(range(len(sel)), 2):
        d = bfs_distances(g, sel[a])[sel[b]]
        if d >= 0:
            dists.append(int(d))
    return float(np.mean(dists)) if dists else None


def case_study_export(g: Graph, plans: Sequence[AttackPlan]) -> dict:
    """Plot-ready layout data: communities, adjacency and per-strategy selections."""
    labels = g.labels if g.labels is not None else np.zeros(g.n_nodes, dtype=int)
    out = {
        "nodes": [{"id": t, "community": int(labels[k])} for k, t in enumerate(g.node_ids)],
        "edges": [[g.node_ids[u], g.node_ids[v]] for u, v in g.edge_list()],
        "plans": [],
    }
    for plan in plans:
        out["plans"].append({
            "strategy": plan.strategy,
            "selected": g.ids_of(plan.selected),
            "communities_hit": communities_hit(labels, plan.selected),
            "mean_pairwise_distance": mean_pairwise_distance(g, plan.selected),
        })
    return out
