"""
Choosing nodes to perturb
=========================

Every selection strategy on one blockmodel graph, under a budget of 1% of
the nodes and a cap that rules out the best-connected 30%.  Strategies that
model saturating influence tend to spread their picks across communities.
"""
import json

from infmax_attack import SBMConfig, SelectionConstraint, case_study_export, generate_sbm, select
from infmax_attack.strategies import STRATEGIES
from infmax_attack.synth import communities_hit, mean_pairwise_distance

g = generate_sbm(SBMConfig(4, 100, p_in=0.03, p_out=0.003, feature_dim=100, signal=0.3, seed=0))
c = SelectionConstraint(4, percentile=0.3)
print(f"{g.n_nodes} nodes, {g.n_edges} edges, neighbourhood-size cap {c.degree_cap(g)}")

plans = []
for name in STRATEGIES:
    plan = select(g, c, name, seed=0)
    plans.append(plan)
    dist = mean_pairwise_distance(g, plan.selected)
    shown = "disconnected" if dist is None else f"{dist:.2f}"
    print(f"{name:12s} {plan.selected}  communities hit {communities_hit(g.labels, plan.selected)}"
          f"  mean hop distance {shown}")

# plot-ready layout for an external drawing tool
layout = case_study_export(g, plans)
print("layout keys:", sorted(layout), "with", len(json.dumps(layout)), "bytes of JSON")
