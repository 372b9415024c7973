import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from knnmi_graph.core import (EstimatorConfig, UndirectedGraph, read_edge_list, save_dataset,
                              write_edge_list)
from knnmi_graph.eval import (aggregate, cell_seeds, CellResult, fisherz_and,
                              hamming_distance, knnmi_and, method_from_name, run_benchmark,
                              run_external_benchmark, summary, write_results_csv)
from knnmi_graph.synthdata import GeneratorSpec

edge_sets = st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)).filter(lambda e: e[0] < e[1]))


def test_hamming_examples():
    truth = UndirectedGraph.from_edges(4, [(0, 1), (1, 2)])
    assert hamming_distance(truth, truth) == 0
    assert hamming_distance(UndirectedGraph.from_edges(4, [(0, 1), (2, 3)]), truth) == 2
    assert hamming_distance(UndirectedGraph.from_edges(4, []), truth) == 2
    with pytest.raises(ValueError):
        hamming_distance(UndirectedGraph.from_edges(3, []), truth)


@given(edge_sets, edge_sets, edge_sets)
def test_hamming_is_a_metric(a, b, c):
    ga, gb, gc = (UndirectedGraph.from_edges(6, e) for e in (a, b, c))
    assert hamming_distance(ga, gb) == hamming_distance(gb, ga)
    assert (hamming_distance(ga, gb) == 0) == (ga == gb)
    assert hamming_distance(ga, gc) <= hamming_distance(ga, gb) + hamming_distance(gb, gc)


def test_method_names():
    assert method_from_name("knnmi-and").name == "knnmi-and"
    m = method_from_name("fisherz-and+ecdf")
    assert m.preprocess == "ecdf" and m.name == "fisherz-and+ecdf"
    for bad in ("glasso", "knnmi-and+rank"):
        with pytest.raises(ValueError):
            method_from_name(bad)


def test_with_seed_reaches_the_estimator():
    m = knnmi_and(EstimatorConfig(seed=1)).with_seed(42)
    assert m.learner.test.config.seed == 42
    assert fisherz_and().with_seed(3) == fisherz_and()


def test_cell_seeds_are_stable_and_distinct():
    assert cell_seeds(0, 250, 1) == cell_seeds(0, 250, 1)
    seen = {cell_seeds(s, n, r) for s in range(3) for n in (125, 250) for r in range(5)}
    assert len(seen) == 30


def test_aggregate_single_rep_and_failures():
    r = aggregate("m", None, 10, [CellResult("m", 10, 0, 3)])
    assert (r.mean, r.sem, r.sem_defined) == (3.0, 0.0, False)
    r = aggregate("m", None, 10, [CellResult("m", 10, 0, 2), CellResult("m", 10, 1, 4),
                                  CellResult("m", 10, 2, None, "boom")])
    assert r.mean == 3.0 and r.sem == pytest.approx(math.sqrt(2) / math.sqrt(2)) and r.failed == 1
    r = aggregate("m", None, 10, [CellResult("m", 10, 0, None, "boom")])
    assert math.isnan(r.mean) and summary([r])[0]["mean"] is None


FAST = EstimatorConfig(permutations=20)


def test_paired_design_uses_the_same_data(tmp_path):
    spec = GeneratorSpec("small", "linear", "gaussian")
    audit = tmp_path / "audit"
    audit.mkdir()
    res = run_benchmark(spec, [knnmi_and(FAST), fisherz_and()], [150], reps=2, seed=3,
                        audit_dir=str(audit))
    assert [(r.method, r.n, r.reps) for r in res] == [("knnmi-and", 150, 2), ("fisherz-and", 150, 2)]
    truths = sorted(audit.glob("*truth.txt"))
    assert len(truths) == 4
    for rep in range(2):
        a = (audit / f"cell_knnmi-and_n150_r{rep}.truth.txt").read_text()
        b = (audit / f"cell_fisherz-and_n150_r{rep}.truth.txt").read_text()
        assert a == b
    # the scored data are exactly what the generator yields for the cell seed
    data_seed, _ = cell_seeds(3, 150, 0)
    data, truth = spec.generate(150, data_seed)
    est = read_edge_list(audit / "cell_fisherz-and_n150_r0.est.txt", data.names)
    assert hamming_distance(est, truth) == res[1].cells[0].hamming


def test_benchmark_is_repeatable_and_reps_one(tmp_path):
    spec = GeneratorSpec("small", "nonlinear", "t2")
    a = run_benchmark(spec, [fisherz_and()], [100, 200], reps=1, seed=0)
    b = run_benchmark(spec, [fisherz_and()], [100, 200], reps=1, seed=0)
    assert a == b
    assert all(not r.sem_defined for r in a)
    write_results_csv(a, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "method,topology,mechanism,noise,post_transform,n,rep,hamming,error"
    assert len(lines) == 3
    with pytest.raises(ValueError):
        run_benchmark(spec, [fisherz_and()], [100], reps=0)


def test_failures_are_recorded_not_raised():
    # n=4 is too small for the Fisher test with a conditioning set; the cell
    # records the error and the sweep continues
    res = run_benchmark(GeneratorSpec("small", "linear", "gaussian"), [fisherz_and()], [4, 60],
                        reps=1, seed=0)
    assert res[0].failed == 1 and res[0].cells[0].error
    assert res[1].failed == 0


def test_external_benchmark(tmp_path):
    pairs = []
    for i in range(2):
        data, truth = GeneratorSpec("small", "linear", "gaussian").generate(300, i)
        d, t = tmp_path / f"d{i}.csv", tmp_path / f"t{i}.txt"
        save_dataset(data, d)
        write_edge_list(truth, data.names, t)
        pairs.append((str(d), str(t)))
    res = run_external_benchmark(pairs, [fisherz_and()])
    assert len(res) == 1 and res[0].reps == 2 and res[0].spec is None
