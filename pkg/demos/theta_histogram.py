"""
How thresholds vary over retrained victims
==========================================

Retraining the victim from new initializations gives a sample of flip
thresholds per node.  We look at how often the positive part of that sample
has a density that never rises, and draw one node's histogram in text.
"""
import numpy as np

from infmax_attack import PerturbationSpec, SBMConfig, TrainConfig, build_epsilon, generate_sbm, proxy_scores
from infmax_attack import theta_histogram

g = generate_sbm(SBMConfig(4, 100, p_in=0.03, p_out=0.003, feature_dim=100, signal=0.3, seed=0))
eps = build_epsilon(proxy_scores(g, 20, TrainConfig(), rng_seed=11), PerturbationSpec(lam=300))

res = theta_histogram(g, g.features, g.labels, eps, TrainConfig(), trials=50, rng_seed=11)
print(f"{res.samples.shape[0]} trials, fraction with non-increasing density: {res.diagnostic_fraction:.3f}")

# the node with the most finite positive samples
pos = np.where(np.isfinite(res.samples) & (res.samples > 0), res.samples, np.nan)
j = int(np.argmax(np.sum(~np.isnan(pos), axis=0)))
vals = pos[:, j][~np.isnan(pos[:, j])]
counts, edges = np.histogram(vals, bins=8, range=(0, vals.max()))
print(f"node {j}:")
for c, lo, hi in zip(counts, edges, edges[1:]):
    print(f"  {lo:8.4f} - {hi:8.4f} {'#' * int(c)}")
