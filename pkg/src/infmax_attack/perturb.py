"""Constant perturbation vector from proxy-model gradient scores."""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .graph_core import Graph, transition_matrix
from .victim import TrainConfig, TrainingError, gradient_scores, random_split, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerturbationSpec:
    lam: float = 10.0
    top_fraction: float = 0.02
    sign_agreement: float = 0.8
    n_proxies: int = 20
    flip_sign: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not 0 < self.top_fraction <= 1:
            raise ValueError(f"top_fraction must lie in (0, 1], got {self.top_fraction}")
        if not 0.5 < self.sign_agreement <= 1:
            raise ValueError(f"sign_agreement must lie in (0.5, 1], got {self.sign_agreement}")
        if self.n_proxies < 1:
            raise ValueError("need at least one proxy")


def build_epsilon(score_sets: Sequence[np.ndarray], spec: PerturbationSpec = PerturbationSpec()) -> np.ndarray:
    """Perturb the strongest sign-consistent features by ``+-lambda``.

    A feature qualifies when at least ``sign_agreement`` of the score sets give
    it the same strict sign.  The ``floor(top_fraction * D)`` qualifying
    features with the largest mean absolute score (ties to lower index) get
    ``lambda`` times the majority sign, i.e. the loss-ascent direction;
    ``flip_sign`` reverses it.
    """
    scores = np.atleast_2d(np.asarray(score_sets, dtype=float))
    if scores.size == 0:
        raise ValueError("no score sets given")
    n_sets, D = scores.shape
    pos = (scores > 0).sum(axis=0) / n_sets
    neg = (scores < 0).sum(axis=0) / n_sets
    keep = (pos >= spec.sign_agreement) | (neg >= spec.sign_agreement)
    if not keep.any():
        raise ValueError(
            f"no feature reaches {spec.sign_agreement:.0%} sign agreement across {n_sets} score sets "
            f"(max positive share {pos.max():.2f}, max negative share {neg.max():.2f})"
        )
    budget = math.floor(spec.top_fraction * D)
    if budget < 1:
        raise ValueError(f"top_fraction {spec.top_fraction} of D={D} selects no feature")
    strength = np.abs(scores).mean(axis=0)
    idx = np.flatnonzero(keep)
    order = np.lexsort((idx, -strength[idx]))
    chosen = idx[order[:budget]]
    sign = np.where(pos[chosen] >= neg[chosen], 1.0, -1.0)
    if spec.flip_sign:
        sign = -sign
    eps = np.zeros(D)
    eps[chosen] = spec.lam * sign
    return eps


def proxy_scores(g: Graph, n_proxies: int = 20, config: TrainConfig = TrainConfig(), rng_seed=0,
                 walk=None) -> list[np.ndarray]:
    """Gradient scores of ``n_proxies`` GCNs, each trained on its own random split.

    Proxy ``k`` uses a split and an initialization derived from ``rng_seed``;
    callers keep victim seeds on a separate branch of the seed tree.
    """
    walk = walk if walk is not None else transition_matrix(g)
    out = []
    for k, child in enumerate(np.random.SeedSequence(rng_seed).spawn(n_proxies)):
        split_seed, init_seed = (int(x) for x in child.generate_state(2))
        split = random_split(g.n_nodes, split_seed)
        try:
            model = train(g, split, TrainConfig(**{**config.__dict__, "seed": init_seed}), walk)
        except TrainingError as exc:
            log.warning("proxy %d dropped: %s", k, exc)
            continue
        out.append(gradient_scores(model, g, walk))
    if not out:
        raise TrainingError("every proxy model failed to train")
    return out
