"""Two-layer GCN victim with hand-written backpropagation.

Forward pass, with ``A`` the self-looped random-walk matrix::

    Z1 = A X W1^T,  H1 = relu(Z1),  logits = A H1 W2^T

Training is full-batch Adam on the mean cross-entropy of the training nodes
plus an L2 penalty, keeping the weights of the best validation epoch.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph_core import Graph, RandomWalkMatrix, transition_matrix
from .strategies import AttackPlan


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 32
    lr: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def random_split(n: int, rng_seed, fractions=(0.6, 0.2, 0.2)) -> Split:
    """Boolean train/val/test masks from a seeded permutation."""
    perm = np.random.default_rng(rng_seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    masks = []
    for part in (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]):
        m = np.zeros(n, dtype=bool)
        m[part] = True
        masks.append(m)
    return Split(*masks)


@dataclass(eq=False)
class VictimGCN:
    W1: np.ndarray
    W2: np.ndarray
    config: TrainConfig = field(default_factory=TrainConfig)
    split: Split | None = None
    best_epoch: int = 0
    val_accuracy: float = float("nan")

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def to_json(self) -> dict:
        return {
            "layers": [_matrix_json(self.W1), _matrix_json(self.W2)],
            "config": asdict(self.config),
            "best_epoch": self.best_epoch,
            "val_accuracy": self.val_accuracy,
            "split": None if self.split is None else {
                "n": int(len(self.split.train)),
                **{part: np.flatnonzero(getattr(self.split, part)).tolist() for part in ("train", "val", "test")},
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> "VictimGCN":
        w1, w2 = (_matrix_from_json(m) for m in d["layers"])
        split = None
        if d.get("split") is not None:
            parts = d["split"]
            n = int(parts["n"])
            masks = []
            for part in ("train", "val", "test"):
                m = np.zeros(n, dtype=bool)
                m[parts[part]] = True
                masks.append(m)
            split = Split(*masks)
        val = d.get("val_accuracy")
        return cls(w1, w2, TrainConfig(**d.get("config", {})), split, d.get("best_epoch", 0),
                   float("nan") if val is None else float(val))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _matrix_json(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "values": a.ravel().tolist()}


def _matrix_from_json(d: dict) -> np.ndarray:
    return np.asarray(d["values"], dtype=float).reshape(d["shape"])


def _glorot(rng, n_out, n_in):
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


def init_weights(D: int, K: int, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    return _glorot(rng, config.hidden_dim, D), _glorot(rng, K, config.hidden_dim)


def _walk(g: Graph, walk: RandomWalkMatrix | None) -> sp.csr_matrix:
    return (walk if walk is not None else transition_matrix(g)).matrix


def forward(W1, W2, A: sp.csr_matrix, X: np.ndarray, AX: np.ndarray | None = None) -> np.ndarray:
    AX = A @ X if AX is None else AX
    H1 = np.maximum(AX @ W1.T, 0.0)
    return A @ (H1 @ W2.T)


def predict(model: VictimGCN, g: Graph, X: np.ndarray | None = None, walk=None) -> np.ndarray:
    X = g.features if X is None else X
    return forward(model.W1, model.W2, _walk(g, walk), X)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(W1, W2, A, X, y, mask, weight_decay=0.0, AX=None, AT=None, want_x=False):
    """Mean masked cross-entropy plus ``weight_decay/2 * (|W1|^2 + |W2|^2)``.

    Returns ``(loss, dW1, dW2, dX)``; ``dX`` is only filled when ``want_x``.
    """
    AX = A @ X if AX is None else AX
    AT = A.T.tocsr() if AT is None else AT
    Z1 = AX @ W1.T
    H1 = np.maximum(Z1, 0.0)
    AH1 = A @ H1
    logits = AH1 @ W2.T
    idx = np.flatnonzero(mask)
    n = len(idx)
    P = _softmax(logits[idx])
    yi = y[idx]
    loss = -np.mean(np.log(P[np.arange(n), yi] + 1e-300))
    loss += 0.5 * weight_decay * (np.sum(W1 * W1) + np.sum(W2 * W2))
    dlogits = np.zeros_like(logits)
    P[np.arange(n), yi] -= 1.0
    dlogits[idx] = P / n
    dW2 = dlogits.T @ AH1 + weight_decay * W2
    dH1 = AT @ (dlogits @ W2)
    dZ1 = dH1 * (Z1 > 0)
    dW1 = dZ1.T @ AX + weight_decay * W1
    dX = AT @ (dZ1 @ W1) if want_x else None
    return float(loss), dW1, dW2, dX


def accuracy(logits: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return float("nan")
    return float(np.mean(logits[idx].argmax(axis=1) == y[idx]))


def train(g: Graph, split: Split, config: TrainConfig = TrainConfig(), walk=None) -> VictimGCN:
    """Full-batch Adam training; returns the weights of the best validation epoch."""
    if g.labels is None or g.features is None:
        raise TrainingError("training needs node features and labels")
    A = _walk(g, walk)
    AT = A.T.tocsr()
    X, y = g.features, g.labels
    AX = A @ X
    W1, W2 = init_weights(X.shape[1], g.n_classes, config)
    best = (W1.copy(), W2.copy())
    best_val = accuracy(forward(W1, W2, A, X, AX), y, split.val)
    best_epoch = 0
    params = [W1, W2]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    for epoch in range(1, config.epochs + 1):
        loss, dW1, dW2, _ = loss_and_grads(W1, W2, A, X, y, split.train, config.weight_decay, AX, AT)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss} at epoch {epoch} (lr={config.lr}, seed={config.seed})")
        for k, grad in enumerate((dW1, dW2)):
            m[k] = b1 * m[k] + (1 - b1) * grad
            v[k] = b2 * v[k] + (1 - b2) * grad * grad
            mhat = m[k] / (1 - b1**epoch)
            vhat = v[k] / (1 - b2**epoch)
            params[k] -= config.lr * mhat / (np.sqrt(vhat) + eps)
        val = accuracy(forward(W1, W2, A, X, AX), y, split.val)
        if val > best_val:
            best_val, best_epoch = val, epoch
            best = (W1.copy(), W2.copy())
    return VictimGCN(best[0], best[1], config, split, best_epoch, best_val)


@dataclass
class AttackOutcome:
    clean_accuracy: float
    attacked_accuracy: float
    flipped: int
    misclassified: int
    plan: AttackPlan
    lam: float

    def to_json(self, g: Graph | None = None) -> dict:
        return {
            "clean_accuracy": self.clean_accuracy,
            "attacked_accuracy": self.attacked_accuracy,
            "flipped": self.flipped,
            "misclassified": self.misclassified,
            "lambda": self.lam,
            "plan": self.plan.to_json(g),
        }


def perturbed_features(X: np.ndarray, selected, epsilon: np.ndarray) -> np.ndarray:
    Xp = X.copy()
    sel = np.asarray(sorted(set(int(i) for i in selected)), dtype=int)
    if len(sel):
        Xp[sel] += epsilon
    return Xp


def evaluate_attack(model: VictimGCN, g: Graph, plan: AttackPlan, epsilon: np.ndarray,
                    mask: np.ndarray | None = None, walk=None) -> AttackOutcome:
    """Accuracy on ``mask`` (default: the model's test mask) before and after adding ``epsilon``
    to the selected nodes' features."""
    epsilon = np.asarray(epsilon, dtype=float)
    if epsilon.shape != (g.features.shape[1],):
        raise ValueError(f"epsilon must have length {g.features.shape[1]}")
    if mask is None:
        mask = model.split.test
    A = _walk(g, walk)
    y = g.labels
    clean = forward(model.W1, model.W2, A, g.features).argmax(axis=1)
    attacked = forward(model.W1, model.W2, A, perturbed_features(g.features, plan.selected, epsilon)).argmax(axis=1)
    idx = np.flatnonzero(mask)
    clean_ok = clean[idx] == y[idx]
    att_ok = attacked[idx] == y[idx]
    return AttackOutcome(
        clean_accuracy=float(clean_ok.mean()) if len(idx) else float("nan"),
        attacked_accuracy=float(att_ok.mean()) if len(idx) else float("nan"),
        flipped=int(np.count_nonzero(clean_ok & ~att_ok)),
        misclassified=int(np.count_nonzero(~att_ok)),
        plan=plan,
        lam=float(np.max(np.abs(epsilon))) if epsilon.size else 0.0,
    )


def gradient_scores(model: VictimGCN, g: Graph, walk=None) -> np.ndarray:
    """Per-feature gradient of the loss averaged over nodes.

    The loss is the mean cross-entropy over all labelled nodes; the score of
    feature ``j`` is ``(1/N) * sum_i dLoss/dX[i, j]``.
    """
    A = _walk(g, walk)
    mask = np.ones(g.n_nodes, dtype=bool)
    _, _, _, dX = loss_and_grads(model.W1, model.W2, A, g.features, g.labels, mask, 0.0, want_x=True)
    return dX.mean(axis=0)
