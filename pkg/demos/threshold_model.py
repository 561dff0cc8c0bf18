"""
Influence under random thresholds
=================================

A small bipartite instance: seeds push influence onto targets, and a target
activates once its received influence reaches a random threshold.  We compare
the closed-form expected number of activations with sampling, then check the
greedy picks against exhaustive search.
"""
import math

import numpy as np
import scipy.sparse as sp

from infmax_attack import BipartiteInstance, ThresholdSpec, brute_force_optimum, greedy_maximize, simulate_spread
from infmax_attack.ltm import expected_objective, setcover_decision

rng = np.random.default_rng(0)

# 8 seeds, 12 targets, about half of the edges present
w = rng.uniform(0, 0.01, size=(12, 8)) * (rng.random((12, 8)) < 0.5)
spec = ThresholdSpec.uniform(0.01)
inst = BipartiteInstance(sp.csc_matrix(w), spec)

# closed form against 200k threshold draws
S = [0, 3, 5]
counts = simulate_spread(inst, S, rng_seed=1, trials=200_000)
se = counts.std(ddof=1) / math.sqrt(len(counts))
print(f"closed form {expected_objective(inst, spec, S):.4f}   sampled {counts.mean():.4f} +- {se:.4f}")

# greedy against the exhaustive optimum, for both threshold families
for family in (ThresholdSpec.uniform(0.01), ThresholdSpec.normal(0.01)):
    picked, trace = greedy_maximize(inst, family, 3)
    best, opt = brute_force_optimum(inst, family, 3)
    print(f"{family.family:8s} greedy {picked} -> {trace[-1]:.4f}   optimum {list(best)} -> {opt:.4f}"
          f"   ratio {trace[-1] / opt:.3f}")

# Set Cover hiding inside the same objective: can two subsets cover 0..5?
subsets = [{0, 1, 2}, {3, 4, 5}, {0, 3}, {1, 4, 5}]
print("cover with 2 subsets:", setcover_decision(6, subsets, 2))
print("cover with 1 subset: ", setcover_decision(6, subsets, 1))
