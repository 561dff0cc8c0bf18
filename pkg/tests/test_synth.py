import numpy as np
import pytest

from infmax_attack.strategies import AttackPlan, SelectionConstraint, select
from infmax_attack.synth import (
    SBMConfig,
    case_study_export,
    communities_hit,
    generate_sbm,
    mean_pairwise_distance,
)


def _block_counts(g):
    within = cross = 0
    for u, v in g.edge_list():
        if g.labels[u] == g.labels[v]:
            within += 1
        else:
            cross += 1
    return within, cross


def test_config_validation():
    with pytest.raises(ValueError):
        SBMConfig(p_in=0.1, p_out=0.2)
    with pytest.raises(ValueError):
        SBMConfig(nodes_per_community=0)


def test_complete_blocks():
    g = generate_sbm(SBMConfig(2, 3, p_in=1.0, p_out=0.0, feature_dim=2))
    assert g.n_edges == 6
    assert sorted(map(tuple, g.edge_list())) == [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
    assert g.labels.tolist() == [0, 0, 0, 1, 1, 1]


def test_binomial_edge_counts():
    cfg = SBMConfig(4, 100, p_in=0.05, p_out=0.005, seed=11)
    within, cross = _block_counts(generate_sbm(cfg))
    n_within = 4 * 100 * 99 // 2
    n_cross = 6 * 100 * 100
    for count, pairs, p in ((within, n_within, 0.05), (cross, n_cross, 0.005)):
        mu, sd = pairs * p, np.sqrt(pairs * p * (1 - p))
        assert abs(count - mu) <= 4 * sd


def test_equal_probabilities_no_assortativity():
    fractions = []
    for seed in range(20):
        g = generate_sbm(SBMConfig(4, 25, p_in=0.1, p_out=0.1, seed=seed))
        within, cross = _block_counts(g)
        fractions.append(within / (within + cross))
    expected = (4 * 25 * 24 / 2) / (100 * 99 / 2)
    assert abs(np.mean(fractions) - expected) <= 0.02


def test_seeded_and_labelled_by_block():
    cfg = SBMConfig(3, 20, seed=5)
    a, b = generate_sbm(cfg), generate_sbm(cfg)
    assert (a.adj != b.adj).nnz == 0
    assert a.features.tobytes() == b.features.tobytes()
    np.testing.assert_array_equal(a.labels, np.repeat(np.arange(3), 20))


def test_feature_means():
    g = generate_sbm(SBMConfig(2, 2000, p_in=0.0, p_out=0.0, feature_dim=4, signal=2.0, seed=0))
    mean0 = g.features[g.labels == 0].mean(axis=0)
    np.testing.assert_allclose(mean0, [2.0, 0.0, 2.0, 0.0], atol=0.1)


def test_dispersion_statistics():
    g = generate_sbm(SBMConfig(4, 10, p_in=1.0, p_out=0.0, feature_dim=2))
    assert communities_hit(g.labels, [0, 10, 20, 30]) == 4
    assert communities_hit(g.labels, [0, 1, 2]) == 1
    assert mean_pairwise_distance(g, [0, 1, 2]) == 1.0
    assert mean_pairwise_distance(g, [0, 10]) is None


def test_case_study_export():
    g = generate_sbm(SBMConfig(4, 10, p_in=0.6, p_out=0.05, feature_dim=2, seed=1))
    plans = [AttackPlan([0, 10, 20, 30], "manual"), AttackPlan([0, 1], "one-block")]
    out = case_study_export(g, plans)
    assert len(out["nodes"]) == 40
    assert len(out["edges"]) == g.n_edges
    assert [p["communities_hit"] for p in out["plans"]] == [4, 1]


def test_infmax_spreads_at_least_as_degree():
    hits = {"infmax-unif": [], "degree": []}
    for seed in range(10):
        g = generate_sbm(SBMConfig(4, 100, p_in=0.05, p_out=0.005, seed=seed))
        c = SelectionConstraint(8, percentile=0.3)
        for name in hits:
            hits[name].append(communities_hit(g.labels, select(g, c, name).selected))
    assert np.mean(hits["infmax-unif"]) >= np.mean(hits["degree"])
