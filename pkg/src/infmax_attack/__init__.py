"""Black-box node-selection attacks on GNNs as influence maximization on a threshold model."""
from .centrality import betweenness_centrality, degree_centrality, pagerank_centrality
from .graph_core import Graph, InfluenceMatrix, build_graph, influence_columns, transition_matrix
from .ltm import (
    BipartiteInstance,
    ThresholdSpec,
    brute_force_optimum,
    exact_objective,
    expected_objective_normal,
    expected_objective_uniform,
    setcover_instance,
    simulate_spread,
)
from .perturb import PerturbationSpec, build_epsilon, proxy_scores
from .strategies import (
    AttackPlan,
    SelectionConstraint,
    greedy_maximize,
    select,
    select_baseline,
    select_gc_rwcs,
    select_infmax,
    select_rwcs,
)
from .surrogate import SurrogateModel, compute_theta, expected_forward, theta_histogram, verify_equivalence
from .synth import SBMConfig, case_study_export, generate_sbm
from .victim import TrainConfig, VictimGCN, evaluate_attack, gradient_scores, random_split, train

__version__ = "0.1.0"
