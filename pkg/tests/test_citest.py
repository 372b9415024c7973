import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knnmi_graph.citest import (FisherZTest, HybridTest, PermutationTest, SeparationOracle,
                                SingularCovarianceError, TestSpec, fisher_z_ci_test,
                                hybrid_ci_test, make_ci_test, partial_correlation, permutation,
                                permutation_ci_test, test_key)
from knnmi_graph.core import EstimatorConfig, UndirectedGraph
from knnmi_graph.estimators import DegenerateDataError, conditional_mutual_information


def shuffled_statistics(x, y, z, cfg, test_id=()):
    """CMI of every shuffle the test will draw, computed the slow way."""
    return np.array([conditional_mutual_information(x, y[permutation(len(y), cfg.seed, test_id, i)],
                                                    z, cfg.k, seed=cfg.seed)
                     for i in range(cfg.permutations)])


def test_p_value_boundary_k9_of_199_is_not_a_rejection():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=120), rng.normal(size=120)
    cfg = EstimatorConfig(permutations=199, alpha=0.05, seed=4)
    null = np.sort(shuffled_statistics(x, y, None, cfg))[::-1]
    # strictly between the 10th and 9th largest shuffled values -> exactly 9 at or above
    stat = (null[8] + null[9]) / 2
    assert null[8] > null[9]
    res = permutation_ci_test(x, y, None, cfg, statistic=stat)
    assert res.p_value == 10 / 200 == 0.05
    assert res.independent
    stat = (null[7] + null[8]) / 2  # K = 8 -> 9/200 < 0.05
    assert not permutation_ci_test(x, y, None, cfg, statistic=stat).independent


def test_counts_ties_as_at_or_above():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=100), rng.normal(size=100)
    cfg = EstimatorConfig(permutations=19, seed=1)
    null = shuffled_statistics(x, y, None, cfg)
    res = permutation_ci_test(x, y, None, cfg, statistic=float(null.max()))
    assert res.p_value == (int((null >= null.max()).sum()) + 1) / 20


def test_strong_dependence_gives_minimum_p():
    rng = np.random.default_rng(3)
    x = rng.normal(size=500)
    y = x + 0.1 * rng.normal(size=500)
    res = permutation_ci_test(x, y, None, EstimatorConfig(permutations=200))
    assert res.p_value == 1 / 201
    assert not res.independent
    assert res.permutation_count == 200 and not res.used_shortcut


def test_permutation_test_is_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(4)
    z = rng.normal(size=300)
    x, y = z + rng.normal(size=300), z + rng.normal(size=300)
    cfg = EstimatorConfig(permutations=50, seed=9)
    a = permutation_ci_test(x, y, z, cfg, test_id=(0, 1, 1, 2))
    assert permutation_ci_test(x, y, z, cfg, test_id=(0, 1, 1, 2)) == a
    np.testing.assert_array_equal(permutation(300, 9, (0, 1), 3), permutation(300, 9, (0, 1), 3))
    assert not np.array_equal(permutation(300, 9, (0, 1), 3), permutation(300, 9, (0, 2), 3))
    assert not np.array_equal(permutation(300, 9, (0, 1), 3), permutation(300, 9, (0, 1), 4))


def test_permutation_rejects_constant_input():
    x = np.random.default_rng(5).normal(size=50)
    with pytest.raises(DegenerateDataError):
        permutation_ci_test(x, np.ones(50), None, EstimatorConfig(permutations=5))


def test_permutation_level_small_battery():
    rejections = 0
    for s in range(30):
        rng = np.random.default_rng(100 + s)
        x, y, z = rng.normal(size=(3, 200))
        rejections += not permutation_ci_test(x, y, z, EstimatorConfig(permutations=99, seed=s)).independent
    assert rejections <= 5  # binomial(30, 0.05) exceeds 5 with probability < 0.5%


# ------------------------------------------------------------------ Fisher z


def test_partial_correlation_matches_regression_oracle():
    rng = np.random.default_rng(6)
    z = rng.normal(size=(400, 2))
    x = z @ [1.0, -0.5] + rng.normal(size=400)
    y = 0.4 * x + z @ [0.3, 0.2] + rng.normal(size=400)
    design = np.column_stack([np.ones(400), z])
    rx = x - design @ np.linalg.lstsq(design, x, rcond=None)[0]
    ry = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
    expected = np.corrcoef(rx, ry)[0, 1]
    assert partial_correlation(x, y, z) == pytest.approx(expected, abs=1e-12)


def test_fisher_z_independent_p_is_one_at_zero_correlation():
    x = np.array([1.0, -1.0, 1.0, -1.0, 0.0, 0.0])
    y = np.array([1.0, 1.0, -1.0, -1.0, 2.0, -2.0])
    res = fisher_z_ci_test(x, y, None)
    assert res.partial_correlation == pytest.approx(0.0, abs=1e-15)
    assert res.p_value == pytest.approx(1.0)
    assert res.independent


def test_fisher_z_closed_form():
    rng = np.random.default_rng(7)
    x = rng.normal(size=200)
    y = 0.3 * x + rng.normal(size=200)
    res = fisher_z_ci_test(x, y, None)
    r = np.corrcoef(x, y)[0, 1]
    zstat = math.sqrt(197) * math.atanh(r)
    assert res.p_value == pytest.approx(math.erfc(abs(zstat) / math.sqrt(2)), rel=1e-9)
    assert res.statistic == pytest.approx(-0.5 * math.log(1 - r * r), rel=1e-12)


def test_fisher_z_sample_size_guard():
    rng = np.random.default_rng(8)
    with pytest.raises(ValueError):
        fisher_z_ci_test(rng.normal(size=5), rng.normal(size=5), rng.normal(size=(5, 2)))


def test_fisher_z_collinear_conditioning_uses_fallback():
    rng = np.random.default_rng(9)
    z1 = rng.normal(size=300)
    z = np.column_stack([z1, 2 * z1])  # singular correlation matrix
    x = z1 + rng.normal(size=300)
    y = z1 + rng.normal(size=300)
    rho = partial_correlation(x, y, z)
    assert rho == pytest.approx(partial_correlation(x, y, z1), abs=1e-10)


def test_fisher_z_y_determined_by_z():
    rng = np.random.default_rng(10)
    z = rng.normal(size=100)
    with pytest.raises(SingularCovarianceError):
        partial_correlation(rng.normal(size=100), 3 * z, z)


def test_fisher_z_level_small_battery():
    rejections = sum(not fisher_z_ci_test(*np.random.default_rng(s).normal(size=(3, 300)),
                                          alpha=0.05).independent for s in range(200))
    assert rejections / 200 <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / 200)


# -------------------------------------------------------------------- hybrid


def test_hybrid_takes_shortcut_when_both_agree():
    rng = np.random.default_rng(11)
    x, y = rng.normal(size=(2, 400))
    cfg = EstimatorConfig(permutations=50, shortcut_threshold=0.001)
    res = hybrid_ci_test(x, y, None, cfg, statistic=-0.01)
    assert res.used_shortcut and res.independent and res.permutation_count == 0


def test_hybrid_permutes_when_fisher_disagrees():
    # tiny CMI claimed, but a strong linear association: Fisher rejects -> full test
    rng = np.random.default_rng(12)
    x = rng.normal(size=400)
    y = x + 0.2 * rng.normal(size=400)
    res = hybrid_ci_test(x, y, None, EstimatorConfig(permutations=30), statistic=0.0)
    assert not res.used_shortcut and res.permutation_count == 30


def test_hybrid_permutes_above_threshold():
    rng = np.random.default_rng(13)
    x = rng.normal(size=400)
    y = np.cos(2 * x) + 0.3 * rng.normal(size=400)  # uncorrelated but dependent
    res = hybrid_ci_test(x, y, None, EstimatorConfig(permutations=30))
    assert not res.used_shortcut
    assert not res.independent


def test_hybrid_matches_permutation_when_not_shortcut():
    rng = np.random.default_rng(14)
    x = rng.normal(size=300)
    y = x ** 2 + rng.normal(size=300)
    cfg = EstimatorConfig(permutations=40, seed=2)
    assert hybrid_ci_test(x, y, None, cfg, test_id=(5,)) == \
        permutation_ci_test(x, y, None, cfg, test_id=(5,))


# ------------------------------------------------------------------ adapters


def test_test_key_is_order_free_in_conditioning_set():
    assert test_key(1, 2, [5, 3]) == test_key(1, 2, (3, 5)) == (1, 2, 2, 3, 5)


def test_make_ci_test():
    assert isinstance(make_ci_test(TestSpec("hybrid")), HybridTest)
    assert isinstance(make_ci_test(TestSpec("permutation-mi")), PermutationTest)
    assert isinstance(make_ci_test(TestSpec("fisher-z")), FisherZTest)
    with pytest.raises(ValueError):
        TestSpec("bogus")


def test_fisher_association_is_monotone_in_abs_rho():
    rng = np.random.default_rng(15)
    x = rng.normal(size=500)
    data = np.column_stack([x, 0.2 * x + rng.normal(size=500), -0.8 * x + rng.normal(size=500)])
    t = FisherZTest()
    assert t.association(data, 0, 2, []) > t.association(data, 0, 1, [])


def brute_separated(edges, p, x, y, cond):
    """Separation by enumerating all simple paths."""
    adj = {i: set() for i in range(p)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)

    def walk(v, seen):
        if v == y:
            return True
        return any(walk(w, seen | {w}) for w in adj[v]
                   if w not in seen and (w == y or w not in cond))
    return not walk(x, {x})


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6).flatmap(lambda p: st.tuples(
    st.just(p),
    st.sets(st.tuples(st.integers(0, p - 1), st.integers(0, p - 1)).filter(lambda e: e[0] < e[1])),
    st.integers(0, p - 1), st.integers(0, p - 1), st.sets(st.integers(0, p - 1)))))
def test_separation_oracle_against_path_enumeration(case):
    p, edges, x, y, cond = case
    if x == y:
        return
    cond = cond - {x, y}
    oracle = SeparationOracle(UndirectedGraph.from_edges(p, edges))
    assert oracle.separated(x, y, cond) == brute_separated(edges, p, x, y, cond)
