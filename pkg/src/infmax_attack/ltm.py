"""Threshold-model objectives on the seed -> target bipartite graph.

Target ``j`` receives influence ``s_j = sum_{i in S} B[j, i]`` from a seed set
``S``.  It is counted as activated (mis-classified) when ``s_j > theta_j``.
With random thresholds of CDF ``F`` the expected count is
``h(S) = sum_j F(s_j)``, which is monotone submodular whenever ``F`` is concave
on ``[0, inf)``.

The Monte-Carlo simulator activates on ``s_j >= theta_j`` instead.  For the
continuous threshold families the two conventions agree almost surely.
"""
from __future__ import annotations

import itertools
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import erf, erfc

from .graph_core import InfluenceMatrix

SQRT2 = math.sqrt(2.0)
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class ThresholdSpec:
    """Threshold distribution: ``uniform(-b, a)``, ``normal(0, sigma^2)`` or explicit values."""

    family: str
    a: float | None = None
    b: float | None = None
    sigma: float | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.family == "uniform":
            if self.b is None:
                object.__setattr__(self, "b", self.a)
            if self.a is None or not (self.a > 0 and self.b > 0):
                raise ValueError(f"uniform thresholds need a > 0 and b > 0, got a={self.a}, b={self.b}")
        elif self.family == "normal":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"normal thresholds need sigma > 0, got {self.sigma}")
        elif self.family == "explicit":
            if self.values is None:
                raise ValueError("explicit thresholds need a value vector")
            vals = np.asarray(self.values, dtype=float)
            if np.isnan(vals).any():
                raise ValueError("thresholds may be +-inf but not NaN")
            object.__setattr__(self, "values", vals)
        else:
            raise ValueError(f"unknown threshold family {self.family!r}")

    @classmethod
    def uniform(cls, a: float, b: float | None = None) -> "ThresholdSpec":
        return cls("uniform", a=a, b=b)

    @classmethod
    def normal(cls, sigma: float) -> "ThresholdSpec":
        return cls("normal", sigma=sigma)

    @classmethod
    def explicit(cls, values) -> "ThresholdSpec":
        return cls("explicit", values=np.asarray(values, dtype=float))

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == "uniform":
            return (np.clip(x, -self.b, self.a) + self.b) / (self.a + self.b)
        if self.family == "normal":
            return 0.5 * (1.0 + erf(x / (self.sigma * SQRT2)))
        raise ValueError("explicit thresholds have no CDF")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "uniform":
            return rng.uniform(-self.b, self.a, size=size)
        if self.family == "normal":
            return rng.normal(0.0, self.sigma, size=size)
        return np.broadcast_to(self.values, size).copy()

    def to_json(self) -> dict:
        if self.family == "explicit":
            return {"family": "explicit", "values": [_json_float(v) for v in self.values]}
        if self.family == "uniform":
            return {"family": "uniform", "params": {"a": self.a, "b": self.b}}
        return {"family": "normal", "params": {"sigma": self.sigma}}

    @classmethod
    def from_json(cls, d: dict) -> "ThresholdSpec":
        if d["family"] == "explicit":
            return cls.explicit([float(v) for v in d["values"]])
        return cls(d["family"], **d.get("params", {}))


def _json_float(v: float):
    # JSON has no infinity literal
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


@dataclass(frozen=True, eq=False)
class BipartiteInstance:
    """Seeds on one side, targets on the other; ``weights[j, i]`` is seed ``i`` -> target ``j``."""

    weights: sp.csc_matrix
    thresholds: ThresholdSpec

    def __post_init__(self):
        w = sp.csc_matrix(self.weights, dtype=float)
        if w.nnz and w.data.min() < 0:
            raise ValueError("influence weights must be non-negative")
        object.__setattr__(self, "weights", w)
        if self.thresholds.family == "explicit" and self.thresholds.values.shape != (w.shape[0],):
            raise ValueError("need one explicit threshold per target")

    @property
    def n_targets(self) -> int:
        return self.weights.shape[0]

    @property
    def n_seeds(self) -> int:
        return self.weights.shape[1]

    @property
    def candidates(self) -> list[int]:
        return list(range(self.n_seeds))

    def column(self, i: int) -> np.ndarray:
        if not 0 <= int(i) < self.n_seeds:
            raise KeyError(f"seed {i} out of range")
        return self.weights[:, [int(i)]].toarray().ravel()

    def matrix(self, nodes: Sequence[int]) -> np.ndarray:
        return self.weights[:, list(nodes)].toarray()

    def influence(self, nodes: Iterable[int]) -> np.ndarray:
        total = np.zeros(self.n_targets)
        for i in sorted(int(v) for v in nodes):
            total += self.column(i)
        return total

    def to_json(self) -> dict:
        coo = self.weights.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return {
            "n_seeds": self.n_seeds,
            "n_targets": self.n_targets,
            "weights": [[int(coo.col[k]), int(coo.row[k]), float(coo.data[k])] for k in order],
            "thresholds": self.thresholds.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "BipartiteInstance":
        triples = d["weights"]
        seeds = [int(t[0]) for t in triples]
        targets = [int(t[1]) for t in triples]
        vals = [float(t[2]) for t in triples]
        w = sp.csc_matrix((vals, (targets, seeds)), shape=(d["n_targets"], d["n_seeds"]))
        return cls(w, ThresholdSpec.from_json(d["thresholds"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def bipartite_from_influence(b: InfluenceMatrix, thresholds: ThresholdSpec) -> BipartiteInstance:
    """Seed ``k`` of the instance is the ``k``-th sorted candidate of ``b``."""
    return BipartiteInstance(sp.csc_matrix(b.matrix(b.candidates)), thresholds)


def _check_members(source, S) -> list[int]:
    S = sorted({int(i) for i in S})
    for i in S:
        try:
            source.column(i)
        except KeyError:
            raise KeyError(f"node {i} has no influence column") from None
    return S


def exact_objective(B, theta, S: Iterable[int]) -> int:
    """Number of targets with ``sum_{i in S} B[j, i] > theta_j``."""
    theta = theta.values if isinstance(theta, ThresholdSpec) else np.asarray(theta, dtype=float)
    s = B.influence(_check_members(B, S))
    return int(np.count_nonzero(s > theta))


def expected_objective_uniform(B, a: float, b: float, S: Iterable[int]) -> float:
    if not (a > 0 and b > 0):
        raise ValueError(f"need a > 0 and b > 0, got a={a}, b={b}")
    s = B.influence(_check_members(B, S))
    return float(np.sum(np.minimum(s, a) + b) / (a + b))


def expected_objective_normal(B, sigma: float, S: Iterable[int]) -> float:
    if not sigma > 0:
        raise ValueError(f"need sigma > 0, got {sigma}")
    s = B.influence(_check_members(B, S))
    return float(0.5 * np.sum(1.0 + erf(s / (sigma * SQRT2))))


def expected_objective(B, spec: ThresholdSpec, S: Iterable[int]) -> float:
    if spec.family == "uniform":
        return expected_objective_uniform(B, spec.a, spec.b, S)
    if spec.family == "normal":
        return expected_objective_normal(B, spec.sigma, S)
    return float(exact_objective(B, spec.values, S))


def marginal_gains(influence: np.ndarray, block: np.ndarray, spec: ThresholdSpec, scaled: bool = True) -> np.ndarray:
    """``h(S + {v}) - h(S)`` for every column ``v`` of ``block``.

    ``influence`` is the current per-target total for ``S``.  Gains are formed
    per target without subtracting two large objective values, so that they
    stay accurate when ``a`` is huge or ``sigma`` tiny.  With ``scaled=False``
    uniform gains omit the constant ``1/(a+b)`` factor; below saturation they
    are then bit-identical to plain column sums.
    """
    s = influence[:, None]
    if spec.family == "uniform":
        room = np.maximum(spec.a - influence, 0.0)[:, None]
        gains = np.minimum(block, room).sum(axis=0)
        return gains / (spec.a + spec.b) if scaled else gains
    if spec.family == "normal":
        z = spec.sigma * SQRT2
        # erf(x) - erf(y) == erfc(y) - erfc(x), accurate in the saturated tail
        return 0.5 * (erfc(s / z) - erfc((s + block) / z)).sum(axis=0)
    theta = spec.values[:, None]
    return ((s + block) > theta).sum(axis=0) - (s > theta).sum(axis=0)


def simulate_spread(
    inst: BipartiteInstance,
    S: Iterable[int],
    rng_seed=None,
    trials: int = 1,
    chunk: int = 20000,
) -> np.ndarray:
    """Activated-target counts for ``trials`` independent threshold draws.

    A target activates when its received influence reaches its threshold
    (``>=``).  Explicit thresholds are used as-is on every trial.
    """
    s = inst.influence(_check_members(inst, S))
    if inst.thresholds.family == "explicit":
        return np.full(trials, np.count_nonzero(s >= inst.thresholds.values), dtype=np.int64)
    rng = np.random.default_rng(rng_seed)
    out = np.empty(trials, dtype=np.int64)
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        theta = inst.thresholds.sample(rng, (n, inst.n_targets))
        out[start:start + n] = np.count_nonzero(s[None, :] >= theta, axis=1)
    return out


def brute_force_optimum(
    source,
    spec: ThresholdSpec,
    r: int,
    candidates: Iterable[int] | None = None,
    limit: int = BRUTE_FORCE_LIMIT,
) -> tuple[tuple[int, ...], float]:
    """Exhaustive search over all candidate subsets of size ``<= r``.

    Explicit thresholds give the exact count objective, the other families
    their closed-form expectations.  Exact value ties go to the
    lexicographically smallest sorted index tuple, so the empty set wins any
    tie it is part of.
    """
    cands = sorted(int(c) for c in (source.candidates if candidates is None else candidates))
    r = min(int(r), len(cands))
    total = sum(math.comb(len(cands), k) for k in range(r + 1))
    if total > limit:
        raise ValueError(f"{total} subsets exceed the brute-force limit of {limit}")
    block = source.matrix(cands)
    best_set: tuple[int, ...] = ()
    best_val = -math.inf
    for k in range(r + 1):
        for combo in itertools.combinations(range(len(cands)), k):
            s = block[:, list(combo)].sum(axis=1) if combo else np.zeros(source.n_targets)
            if spec.family == "uniform":
                val = float(np.sum(np.minimum(s, spec.a) + spec.b) / (spec.a + spec.b))
            elif spec.family == "normal":
                val = float(0.5 * np.sum(1.0 + erf(s / (spec.sigma * SQRT2))))
            else:
                val = float(np.count_nonzero(s > spec.values))
            chosen = tuple(cands[c] for c in combo)
            if val > best_val or (val == best_val and chosen < best_set):
                best_set, best_val = chosen, val
    return best_set, best_val


def setcover_instance(n: int, subsets: Sequence[Iterable[int]], influence: float = 1.0) -> BipartiteInstance:
    """Set Cover as bipartite influence maximization.

    One seed per subset, one target per universe element, weight ``influence``
    when the subset contains the element and every threshold at half of it,
    so a target activates exactly when some chosen subset covers it.
    """
    if n < 1:
        raise ValueError("universe must be non-empty")
    if not influence > 0:
        raise ValueError("influence must be positive")
    rows, cols = [], []
    for i, sub in enumerate(subsets):
        for e in sorted(set(int(x) for x in sub)):
            if not 0 <= e < n:
                raise ValueError(f"subset {i} has element {e} outside 0..{n - 1}")
            rows.append(e)
            cols.append(i)
    w = sp.csc_matrix((np.full(len(rows), float(influence)), (rows, cols)), shape=(n, len(subsets)))
    return BipartiteInstance(w, ThresholdSpec.explicit(np.full(n, influence / 2.0)))


def setcover_decision(n: int, subsets: Sequence[Iterable[int]], r: int) -> bool:
    """Decide whether ``r`` of the subsets cover the universe, via the reduction.

    Counting the ``r`` chosen seeds as activated, a cover exists exactly when
    the optimum reaches ``n + r`` activations, i.e. when every target fires.
    """
    inst = setcover_instance(n, subsets)
    _, best = brute_force_optimum(inst, inst.thresholds, r)
    return best >= n
