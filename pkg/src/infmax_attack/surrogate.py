"""Linearized GCN surrogate, flip thresholds and the equivalence checks.

When every ReLU is replaced by an independent Bernoulli gate, the expected
logits are linear in the features::

    H(X) = rho * M^L X (W_L ... W_1)^T

so adding ``eps`` to the features of a node set ``S`` shifts the logits of node
``j`` by ``s_j * W eps`` with ``s_j = sum_{i in S} [M^L]_{ji}`` and
``W = rho * W_L ... W_1``.  Node ``j`` is then mis-classified exactly when
``s_j`` exceeds a per-node threshold ``theta_j``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .graph_core import Graph, influence_columns, transition_matrix
from .victim import TrainConfig, TrainingError, VictimGCN, perturbed_features, random_split, train

log = logging.getLogger(__name__)

TIE_TOL = 1e-9


@dataclass(eq=False)
class SurrogateModel:
    """Weights ``W^(1) .. W^(L)``, each ``out x in``, and the path activation probability ``rho``."""

    layers: list[np.ndarray]
    rho: float = 1.0

    def __post_init__(self):
        self.layers = [np.asarray(w, dtype=float) for w in self.layers]
        if not self.layers:
            raise ValueError("surrogate needs at least one layer")
        for lo, hi in zip(self.layers, self.layers[1:]):
            if hi.shape[1] != lo.shape[0]:
                raise ValueError(f"layer shapes do not chain: {lo.shape} then {hi.shape}")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n_features(self) -> int:
        return self.layers[0].shape[1]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].shape[0]

    @property
    def gamma(self) -> float:
        """Per-ReLU activation rate implied by ``rho`` (ReLUs sit on layers 1..L-1)."""
        if self.depth == 1:
            return 1.0
        return self.rho ** (1.0 / (self.depth - 1))

    def effective_weight(self) -> np.ndarray:
        """``rho * W_L ... W_1``, shape ``K x D``."""
        w = self.layers[0]
        for layer in self.layers[1:]:
            w = layer @ w
        return self.rho * w

    @classmethod
    def from_victim(cls, model: VictimGCN, rho: float = 1.0) -> "SurrogateModel":
        return cls([model.W1.copy(), model.W2.copy()], rho)

    def to_json(self) -> dict:
        return {"layers": [{"shape": list(w.shape), "values": w.ravel().tolist()} for w in self.layers],
                "rho": self.rho}

    @classmethod
    def from_json(cls, d: dict) -> "SurrogateModel":
        layers = [np.asarray(m["values"], dtype=float).reshape(m["shape"]) for m in d["layers"]]
        return cls(layers, d.get("rho", 1.0))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _walk_for(g, walk):
    return walk if walk is not None else transition_matrix(g)


def expected_forward(model: SurrogateModel, g: Graph, X: np.ndarray, walk=None) -> np.ndarray:
    """Expected logits with each hidden layer scaled by ``gamma`` in place of its ReLU."""
    X = np.asarray(X, dtype=float)
    if X.shape != (g.n_nodes, model.n_features):
        raise ValueError(f"features must be {(g.n_nodes, model.n_features)}, got {X.shape}")
    A = _walk_for(g, walk).matrix
    H = X
    for layer in model.layers[:-1]:
        H = model.gamma * (A @ (H @ layer.T))
    H = A @ (H @ model.layers[-1].T)
    if model.depth == 1:
        H = model.rho * H
    return H


@dataclass(eq=False)
class ThetaReport:
    """Per-node flip thresholds.

    ``khat`` is the class that first overtakes the true class as the received
    influence grows; ``theta = margin / denom`` for it.  ``khat == y`` marks a
    node no perturbation strength can flip (``theta = inf``).  Nodes already
    mis-classified without attack get a negative threshold (``-inf`` when the
    gap cannot be divided out).  ``monotone`` is False where the node is wrong
    at zero influence, turns right, then wrong again; no single threshold
    describes such a node.
    """

    theta: np.ndarray
    khat: np.ndarray
    margin: np.ndarray
    denom: np.ndarray
    monotone: np.ndarray
    runner_up: np.ndarray


def compute_theta(model: SurrogateModel, g: Graph, X: np.ndarray, y: np.ndarray, epsilon: np.ndarray,
                  walk=None) -> ThetaReport:
    epsilon = np.asarray(epsilon, dtype=float)
    if epsilon.shape != (model.n_features,):
        raise ValueError(f"epsilon must have length {model.n_features}, got {epsilon.shape}")
    y = np.asarray(y)
    H0 = expected_forward(model, g, X, walk)
    shift = model.effective_weight() @ epsilon
    n, K = H0.shape
    rows = np.arange(n)
    margins = H0[rows, y][:, None] - H0              # n x K, zero at the true class
    deltas = shift[None, :] - shift[y][:, None]       # logit gain per unit influence
    other = np.ones((n, K), dtype=bool)
    other[rows, y] = False

    masked = np.where(other, H0, -np.inf)
    runner_up = masked.argmax(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(other & (deltas > 0), margins / deltas, np.inf)
    khat_up = cross.argmin(axis=1)
    t_up = cross[rows, khat_up]

    wrong = other & (margins < 0)
    stuck = (wrong & (deltas == 0)).any(axis=1)       # beaten at every influence level
    with np.errstate(divide="ignore", invalid="ignore"):
        d_down = np.where(wrong & (deltas < 0), margins / deltas, 0.0).max(axis=1)
    miscls = wrong.any(axis=1)

    theta = np.empty(n)
    khat = np.empty(n, dtype=np.int64)
    monotone = np.ones(n, dtype=bool)
    for j in range(n):
        if not miscls[j]:
            theta[j] = t_up[j]
            khat[j] = khat_up[j] if np.isfinite(t_up[j]) else y[j]
        elif t_up[j] < 0:
            theta[j], khat[j] = t_up[j], khat_up[j]
        else:
            theta[j], khat[j] = -np.inf, runner_up[j]
            if not stuck[j] and t_up[j] > d_down[j]:
                monotone[j] = False
    margin = margins[rows, khat]
    denom = deltas[rows, khat]
    return ThetaReport(theta, khat, margin, denom, monotone, runner_up)


@dataclass
class EquivalenceReport:
    n_nodes: int
    ties: list[int]
    violations: list[int]
    non_monotone: list[int]
    runner_up_changed: list[int]
    linearity_error: float

    @property
    def agreement(self) -> float:
        checked = self.n_nodes - len(self.ties)
        return 1.0 if checked == 0 else 1.0 - len(self.violations) / checked


def verify_equivalence(model: SurrogateModel, g: Graph, X: np.ndarray, y: np.ndarray, epsilon: np.ndarray,
                       S, L_walk: int | None = None, walk=None) -> EquivalenceReport:
    """Compare direct mis-classification under ``S`` with ``s_j > theta_j``, node by node."""
    L_walk = model.depth if L_walk is None else L_walk
    if L_walk != model.depth:
        raise ValueError(f"the threshold rewrite needs L_walk == model depth ({model.depth}), got {L_walk}")
    walk = _walk_for(g, walk)
    y = np.asarray(y)
    S = sorted({int(i) for i in S})
    rep = compute_theta(model, g, X, y, epsilon, walk)
    H0 = expected_forward(model, g, X, walk)
    HS = expected_forward(model, g, perturbed_features(X, S, epsilon), walk)
    s = influence_columns(walk, S, L_walk).influence(S)

    predicted = H0 + np.outer(s, model.effective_weight() @ epsilon)
    scale = max(1.0, float(np.abs(HS).max()))
    lin_err = float(np.max(np.abs(HS - predicted)) / scale) if HS.size else 0.0

    rows = np.arange(g.n_nodes)
    direct = HS.max(axis=1) > HS[rows, y]
    with np.errstate(invalid="ignore"):
        gap = np.abs(s - rep.theta)
    tie = np.isfinite(rep.theta) & (gap < TIE_TOL)
    via_theta = s > rep.theta
    bad = (direct != via_theta) & ~tie
    realized = HS.argmax(axis=1)
    changed = direct & (realized != rep.runner_up)
    return EquivalenceReport(
        n_nodes=g.n_nodes,
        ties=np.flatnonzero(tie).tolist(),
        violations=np.flatnonzero(bad).tolist(),
        non_monotone=np.flatnonzero(~rep.monotone).tolist(),
        runner_up_changed=np.flatnonzero(changed).tolist(),
        linearity_error=lin_err,
    )


def path_jacobian(model: SurrogateModel, g: Graph, walk=None) -> np.ndarray:
    """``dH_j / dX_i = rho [M^L]_{ji} W_L ... W_1`` as an ``N x N x K x D`` array."""
    walk = _walk_for(g, walk)
    B = influence_columns(walk, range(g.n_nodes), model.depth).matrix(list(range(g.n_nodes)))
    return np.einsum("ji,kd->jikd", B, model.effective_weight())


@dataclass
class ThetaSamples:
    samples: np.ndarray                       # trials x N, may hold +-inf
    skipped: int = 0
    nonincreasing: list = field(default_factory=list)   # per node: True / False / None (not assessable)

    @property
    def diagnostic_fraction(self) -> float | None:
        judged = [v for v in self.nonincreasing if v is not None]
        if not judged:
            return None
        return sum(judged) / len(judged)


def density_nonincreasing(values: np.ndarray, noise_sd: float = 2.0) -> bool | None:
    """Whether a Freedman-Diaconis histogram of the positive values never rises.

    The bin width comes from all finite values; bins start at zero.  A rise
    from one bin to the next is ignored while it stays within ``noise_sd``
    Poisson standard errors, ``sqrt(c_i + c_{i+1})``, so that sparse tail bins
    do not decide the answer; ``noise_sd=0`` asks for a strictly monotone
    histogram.  Returns None when fewer than two positive values exist or the
    width degenerates.
    """
    finite = values[np.isfinite(values)]
    pos = finite[finite > 0]
    if len(pos) < 2 or len(finite) < 2:
        return None
    q75, q25 = np.percentile(finite, [75, 25])
    width = 2.0 * (q75 - q25) / len(finite) ** (1.0 / 3.0)
    if not width > 0:
        return None
    n_bins = int(np.ceil(pos.max() / width)) or 1
    counts, _ = np.histogram(pos, bins=n_bins, range=(0.0, n_bins * width))
    rise = np.diff(counts)
    slack = noise_sd * np.sqrt(counts[:-1] + counts[1:])
    return bool(np.all(rise <= slack))


def theta_histogram(g: Graph, X: np.ndarray, y: np.ndarray, epsilon: np.ndarray,
                    config: TrainConfig = TrainConfig(), trials: int = 50, rng_seed=0) -> ThetaSamples:
    """Train ``trials`` victims from independent initializations and collect their thresholds.

    All trials share one data split drawn from ``rng_seed``; each surrogate
    uses ``rho = 1``.
    """
    walk = transition_matrix(g)
    seq = np.random.SeedSequence(rng_seed)
    split_seq, *trial_seqs = seq.spawn(trials + 1)
    split = random_split(g.n_nodes, split_seq)
    gx = g.with_features(X)
    rows, skipped = [], 0
    for ts in trial_seqs:
        seed = int(ts.generate_state(1)[0])
        try:
            model = train(gx, split, TrainConfig(**{**config.__dict__, "seed": seed}), walk)
        except TrainingError as exc:
            log.warning("theta trial skipped: %s", exc)
            skipped += 1
            continue
        rows.append(compute_theta(SurrogateModel.from_victim(model), gx, X, y, epsilon, walk).theta)
    samples = np.array(rows) if rows else np.zeros((0, g.n_nodes))
    flags = [density_nonincreasing(samples[:, j]) if len(rows) else None for j in range(g.n_nodes)]
    return ThetaSamples(samples, skipped, flags)
