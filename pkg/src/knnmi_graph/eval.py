"""Scoring learned graphs and running seeded benchmark sweeps."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .citest import FisherZTest, HybridTest, PermutationTest, TestSpec
from .core import Dataset, EstimatorConfig, UndirectedGraph, load_dataset, read_edge_list, write_edge_list
from .structure import LearnerConfig, learn_graph
from .synthdata import GeneratorSpec, ecdf_transform


def hamming_distance(estimated: UndirectedGraph, truth: UndirectedGraph) -> int:
    """False positive plus false negative edges."""
    if estimated.node_count != truth.node_count:
        raise ValueError(f"node counts differ: {estimated.node_count} vs {truth.node_count}")
    return len(estimated.edges ^ truth.edges)


@dataclass(frozen=True)
class Method:
    name: str
    learner: LearnerConfig
    preprocess: str = "none"

    def __post_init__(self):
        if self.preprocess not in ("none", "ecdf"):
            raise ValueError(f"unknown preprocess {self.preprocess!r}")

    def with_seed(self, seed: int) -> "Method":
        test = self.learner.test
        if isinstance(test, TestSpec):
            test = replace(test, config=replace(test.config, seed=seed))
        elif isinstance(test, (HybridTest, PermutationTest)):
            test = replace(test, config=replace(test.config, seed=seed))
        return replace(self, learner=replace(self.learner, test=test))

    def learn(self, data: Dataset) -> UndirectedGraph:
        if self.preprocess == "ecdf":
            data = ecdf_transform(data)
        return learn_graph(data, self.learner)


def knnmi_and(config: EstimatorConfig | None = None, *, ecdf: bool = False) -> Method:
    cfg = config or EstimatorConfig()
    return Method("knnmi-and" + ("+ecdf" if ecdf else ""),
                  LearnerConfig(test=HybridTest(cfg)), "ecdf" if ecdf else "none")


def fisherz_and(alpha: float = 0.05, *, ecdf: bool = False) -> Method:
    return Method("fisherz-and" + ("+ecdf" if ecdf else ""),
                  LearnerConfig(test=FisherZTest(alpha)), "ecdf" if ecdf else "none")


def method_from_name(name: str, config: EstimatorConfig | None = None) -> Method:
    """``knnmi-and`` or ``fisherz-and``, optionally suffixed with ``+ecdf``."""
    base, _, suffix = name.partition("+")
    if suffix not in ("", "ecdf"):
        raise ValueError(f"unknown method modifier {suffix!r}")
    cfg = config or EstimatorConfig()
    if base == "knnmi-and":
        return knnmi_and(cfg, ecdf=bool(suffix))
    if base == "fisherz-and":
        return fisherz_and(cfg.alpha, ecdf=bool(suffix))
    raise ValueError(f"unknown method {base!r}; choose knnmi-and or fisherz-and")


@dataclass(frozen=True)
class CellResult:
    method: str
    n: int
    rep: int
    hamming: int | None
    error: str | None = None


@dataclass(frozen=True)
class BenchmarkResult:
    method: str
    spec: GeneratorSpec | None
    n: int
    reps: int
    distances: tuple[int, ...]
    mean: float
    sem: float
    sem_defined: bool
    cells: tuple[CellResult, ...] = ()

    @property
    def failed(self) -> int:
        return sum(c.error is not None for c in self.cells)


def cell_seeds(seed: int, n: int, rep: int) -> tuple[int, int]:
    """(data seed, learner seed) for one (sample size, repetition) cell."""
    words = np.random.SeedSequence([int(seed), int(n), int(rep)]).generate_state(2, dtype=np.uint32)
    return int(words[0]), int(words[1])


def aggregate(method: str, spec, n: int, cells: Sequence[CellResult]) -> BenchmarkResult:
    d = [c.hamming for c in cells if c.error is None]
    if d:
        mean = float(np.mean(d))
        sem_defined = len(d) > 1
        sem = float(np.std(d, ddof=1) / math.sqrt(len(d))) if sem_defined else 0.0
    else:
        mean, sem, sem_defined = math.nan, 0.0, False
    return BenchmarkResult(method, spec, n, len(cells), tuple(d), mean, sem, sem_defined, tuple(cells))


def _score(methods, data, truth, learn_seed, n, rep, audit_dir, tag) -> list[CellResult]:
    out = []
    for m in methods:
        try:
            est = m.with_seed(learn_seed).learn(data)
            out.append(CellResult(m.name, n, rep, hamming_distance(est, truth)))
            if audit_dir:
                stem = os.path.join(audit_dir, f"{tag}_{m.name}_n{n}_r{rep}")
                write_edge_list(est, data.names, stem + ".est.txt")
                write_edge_list(truth, data.names, stem + ".truth.txt")
        except Exception as e:  # recorded per cell, the sweep carries on
            out.append(CellResult(m.name, n, rep, None, f"{type(e).__name__}: {e}"))
    return out


def _run_cell(args) -> list[CellResult]:
    spec, methods, n, rep, seed, audit_dir = args
    data_seed, learn_seed = cell_seeds(seed, n, rep)
    data, truth = spec.generate(n, data_seed)
    return _score(methods, data, truth, learn_seed, n, rep, audit_dir, "cell")


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_benchmark(spec: GeneratorSpec, methods: Sequence[Method], sample_sizes: Iterable[int],
                  reps: int, seed: int = 0, *, workers: int = 1,
                  audit_dir: str | None = None) -> list[BenchmarkResult]:
    """Every method is scored on the same generated dataset in each (n, rep) cell."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    sizes = list(sample_sizes)
    jobs = [(spec, list(methods), n, r, seed, audit_dir) for n in sizes for r in range(reps)]
    cells = [c for batch in _map(_run_cell, jobs, workers) for c in batch]
    results = []
    for m in methods:
        for n in sizes:
            mine = [c for c in cells if c.method == m.name and c.n == n]
            results.append(aggregate(m.name, spec, n, mine))
    return results


def _run_external(args) -> list[CellResult]:
    data_path, truth_path, methods, rep, seed, audit_dir = args
    data = load_dataset(data_path)
    truth = read_edge_list(truth_path, data.names)
    _, learn_seed = cell_seeds(seed, data.n, rep)
    return _score(methods, data, truth, learn_seed, data.n, rep, audit_dir, "external")


def run_external_benchmark(pairs: Sequence[tuple[str, str]], methods: Sequence[Method],
                           seed: int = 0, *, workers: int = 1,
                           audit_dir: str | None = None) -> list[BenchmarkResult]:
    """Score methods on externally generated (data CSV, truth edge list) pairs.

    Pairs with equal sample size are pooled as repetitions of one cell.
    """
    jobs = [(d, t, list(methods), r, seed, audit_dir) for r, (d, t) in enumerate(pairs)]
    cells = [c for batch in _map(_run_external, jobs, workers) for c in batch]
    results = []
    for m in methods:
        for n in sorted({c.n for c in cells}):
            mine = [c for c in cells if c.method == m.name and c.n == n]
            results.append(aggregate(m.name, None, n, mine))
    return results


# -------------------------------------------------------------- serialisers

RESULT_COLUMNS = ("method", "topology", "mechanism", "noise", "post_transform", "n", "rep",
                  "hamming", "error")


def _spec_fields(spec: GeneratorSpec | None) -> tuple[str, str, str, str]:
    if spec is None:
        return ("external", "", "", "")
    return (spec.topology, spec.mechanism, spec.noise, spec.post_transform)


def write_results_csv(results: Sequence[BenchmarkResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for res in results:
            topo, mech, noise, post = _spec_fields(res.spec)
            for c in sorted(res.cells, key=lambda c: c.rep):
                w.writerow([c.method, topo, mech, noise, post, c.n, c.rep,
                            "" if c.hamming is None else c.hamming, c.error or ""])


def summary(results: Sequence[BenchmarkResult]) -> list[dict]:
    rows = []
    for res in results:
        topo, mech, noise, post = _spec_fields(res.spec)
        rows.append({
            "method": res.method, "topology": topo, "mechanism": mech, "noise": noise,
            "post_transform": post, "n": res.n, "reps": res.reps,
            "mean": None if math.isnan(res.mean) else res.mean,
            "sem": res.sem, "sem_defined": res.sem_defined, "failed": res.failed,
        })
    return rows


def write_summary_json(results: Sequence[BenchmarkResult], path, config: dict | None = None) -> None:
    doc = {"config": config or {}, "results": summary(results)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
