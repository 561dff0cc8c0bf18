"""Node-selection strategies under the budget/degree constraint.

Every strategy returns an :class:`AttackPlan` whose nodes have neighbourhood
size (degree + 1) at most ``m`` and number at most ``r``.  Equal scores or
gains, up to a relative ``TIE_RTOL``, resolve to the smallest node index.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import centrality as cent
from .graph_core import Graph, InfluenceMatrix, full_power, influence_columns, k_hop_neighbors, transition_matrix
from .ltm import ThresholdSpec, expected_objective, marginal_gains

log = logging.getLogger(__name__)

TIE_RTOL = 1e-12
STRATEGIES = (
    "infmax-unif",
    "infmax-norm",
    "rwcs",
    "gc-rwcs",
    "degree",
    "betweenness",
    "pagerank",
    "random",
)


@dataclass(frozen=True)
class SelectionConstraint:
    """At most ``r`` nodes, each with ``|N_i| <= m``.

    Give ``m`` directly or ``percentile``: the cap then equals the smallest
    ``|N_i|`` among the top ``ceil(percentile * N)`` nodes by ``|N_i|``.
    """

    r: int
    m: int | None = None
    percentile: float | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if (self.m is None) == (self.percentile is None):
            raise ValueError("give exactly one of m or percentile")
        if self.percentile is not None and not 0 < self.percentile <= 1:
            raise ValueError(f"percentile must lie in (0, 1], got {self.percentile}")

    def degree_cap(self, g: Graph) -> int:
        if self.m is not None:
            return int(self.m)
        sizes = np.sort(g.neighborhood_sizes)[::-1]
        rank = max(1, math.ceil(self.percentile * g.n_nodes))
        return int(sizes[rank - 1])

    def candidates(self, g: Graph) -> list[int]:
        cap = self.degree_cap(g)
        return np.flatnonzero(g.neighborhood_sizes <= cap).tolist()

    def to_json(self) -> dict:
        return {"r": self.r, "m": self.m, "percentile": self.percentile}


@dataclass
class AttackPlan:
    selected: list[int]
    strategy: str
    params: dict = field(default_factory=dict)
    trace: list[float] = field(default_factory=list)
    shortfall: int = 0

    def to_json(self, g: Graph | None = None) -> dict:
        ids = self.selected if g is None else g.ids_of(self.selected)
        return {
            "strategy": self.strategy,
            "params": self.params,
            "selected": list(ids),
            "trace": list(self.trace),
            "shortfall": self.shortfall,
        }

    @classmethod
    def from_json(cls, d: dict, g: Graph | None = None) -> "AttackPlan":
        sel = list(d["selected"]) if g is None else g.indices_of(d["selected"])
        return cls(sel, d["strategy"], dict(d.get("params", {})), list(d.get("trace", [])), d.get("shortfall", 0))


def argmax_lowest(values: np.ndarray) -> int:
    """Position of the maximum; near-equal values go to the earliest position."""
    best = values.max()
    return int(np.flatnonzero(values >= best - TIE_RTOL * abs(best))[0])


def _pick_top(scores: np.ndarray, cands: list[int], r: int) -> list[int]:
    remaining = list(cands)
    vals = np.asarray([scores[i] for i in remaining], dtype=float)
    picked = []
    while remaining and len(picked) < r:
        k = argmax_lowest(vals)
        picked.append(remaining.pop(k))
        vals = np.delete(vals, k)
    return picked


def _shortfall(n_cands: int, r: int, name: str) -> int:
    short = max(0, r - n_cands)
    if short:
        log.warning("%s: only %d candidates for budget r=%d", name, n_cands, r)
    return short


def greedy_maximize(source, spec: ThresholdSpec, r: int, candidates: Sequence[int] | None = None):
    """Plain greedy on ``h`` over ``source`` (an influence matrix or bipartite instance).

    Each step adds the candidate with the largest marginal gain, ties to the
    smallest index, and keeps going through zero-gain steps until ``r`` picks.
    Returns the ordered picks and ``h`` after each pick.
    """
    cands = sorted(int(c) for c in (source.candidates if candidates is None else candidates))
    block = source.matrix(cands)
    infl = np.zeros(source.n_targets)
    alive = np.ones(len(cands), dtype=bool)
    picked, trace = [], []
    for _ in range(min(r, len(cands))):
        gains = marginal_gains(infl, block, spec, scaled=False)
        gains = np.where(alive, gains, -np.inf)
        k = argmax_lowest(gains)
        alive[k] = False
        infl = infl + block[:, k]
        picked.append(cands[k])
        trace.append(expected_objective(source, spec, picked))
    return picked, trace


def _influence(g: Graph, cands: Sequence[int], L: int) -> InfluenceMatrix:
    return influence_columns(transition_matrix(g), cands, L)


def select_infmax(
    g: Graph,
    c: SelectionConstraint,
    L: int = 4,
    family: str = "uniform",
    a: float = 0.01,
    b: float | None = None,
    sigma: float = 0.01,
) -> AttackPlan:
    """InfMax-Unif (``family='uniform'``) or InfMax-Norm (``family='normal'``)."""
    if family == "uniform":
        spec = ThresholdSpec.uniform(a, b)
        name, params = "infmax-unif", {"L": L, "a": a, "b": spec.b}
    elif family == "normal":
        spec = ThresholdSpec.normal(sigma)
        name, params = "infmax-norm", {"L": L, "sigma": sigma}
    else:
        raise ValueError(f"unknown threshold family {family!r}")
    cands = c.candidates(g)
    if not cands:
        raise ValueError("no node satisfies the degree cap")
    params["m"] = c.degree_cap(g)
    B = _influence(g, cands, L)
    picked, trace = greedy_maximize(B, spec, c.r, cands)
    return AttackPlan(picked, name, params, trace, _shortfall(len(cands), c.r, name))


def rwcs_scores(g: Graph, cands: Sequence[int], L: int = 4) -> np.ndarray:
    """Column sums of ``M**L`` for the candidates, zero elsewhere."""
    B = _influence(g, cands, L)
    scores = np.zeros(g.n_nodes)
    if len(cands):
        scores[list(cands)] = B.matrix(list(cands)).sum(axis=0)
    return scores


def select_rwcs(g: Graph, c: SelectionConstraint, L: int = 4) -> AttackPlan:
    cands = c.candidates(g)
    scores = rwcs_scores(g, cands, L)
    picked = _pick_top(scores, cands, c.r)
    return AttackPlan(picked, "rwcs", {"L": L, "m": c.degree_cap(g)}, [float(scores[i]) for i in picked],
                      _shortfall(len(cands), c.r, "rwcs"))


def binarize_top(power: np.ndarray, l: int) -> np.ndarray:
    """Keep a 1 at the top ``l`` nonzero entries of each row, ties to lower columns."""
    n_rows, n_cols = power.shape
    q = np.zeros(power.shape, dtype=np.int8)
    cols = np.arange(n_cols)
    for j in range(n_rows):
        row = power[j]
        nz = np.flatnonzero(row > 0)
        if len(nz) > l:
            # descending value, ascending column on ties
            order = np.lexsort((cols[nz], -row[nz]))
            nz = nz[order[:l]]
        q[j, nz] = 1
    return q


def select_gc_rwcs(g: Graph, c: SelectionConstraint, L: int = 4, l: int = 30, k: int = 1) -> AttackPlan:
    """Greedily corrected RWCS with binarized dynamic scores and k-hop exclusion."""
    cands = c.candidates(g)
    q = binarize_top(full_power(transition_matrix(g), L), l).astype(np.int64)
    remaining = list(cands)
    picked, trace = [], []
    while remaining and len(picked) < c.r:
        scores = q[:, remaining].sum(axis=0)
        pos = int(np.flatnonzero(scores == scores.max())[0])
        i = remaining[pos]
        picked.append(i)
        trace.append(float(scores[pos]))
        q[q[:, i] == 1, :] = 0
        banned = k_hop_neighbors(g, i, k)
        remaining = [v for v in remaining if v not in banned]
    short = c.r - len(picked)
    if short:
        log.warning("gc-rwcs: candidates exhausted after %d of %d picks", len(picked), c.r)
    return AttackPlan(picked, "gc-rwcs", {"L": L, "l": l, "k": k, "m": c.degree_cap(g)}, trace, short)


def select_baseline(g: Graph, c: SelectionConstraint, kind: str, rng_seed=None, **kwargs) -> AttackPlan:
    cands = c.candidates(g)
    params = {"m": c.degree_cap(g)}
    if kind == "random":
        rng = np.random.default_rng(rng_seed)
        n = min(c.r, len(cands))
        picked = sorted(rng.choice(np.asarray(cands, dtype=int), size=n, replace=False).tolist())
        params["seed"] = rng_seed
        trace = []
    else:
        scores = cent.centrality(g, kind, **kwargs).values
        picked = _pick_top(scores, cands, c.r)
        trace = [float(scores[i]) for i in picked]
    return AttackPlan(picked, kind, params, trace, _shortfall(len(cands), c.r, kind))


def select(g: Graph, c: SelectionConstraint, strategy: str, L: int = 4, a: float = 0.01, sigma: float = 0.01,
           l: int = 30, k: int = 1, seed=None) -> AttackPlan:
    """Dispatch by strategy name (see ``STRATEGIES``)."""
    if strategy == "infmax-unif":
        return select_infmax(g, c, L, "uniform", a=a)
    if strategy == "infmax-norm":
        return select_infmax(g, c, L, "normal", sigma=sigma)
    if strategy == "rwcs":
        return select_rwcs(g, c, L)
    if strategy == "gc-rwcs":
        return select_gc_rwcs(g, c, L, l, k)
    if strategy in ("degree", "betweenness", "pagerank", "random"):
        return select_baseline(g, c, strategy, seed)
    if strategy == "none":
        return AttackPlan([], "none")
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
