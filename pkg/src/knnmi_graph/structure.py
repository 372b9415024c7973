"""Markov network structure learning: IAMB blanket search per node, AND-rule
assembly into an undirected graph."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .citest import HybridTest, TestSpec, make_ci_test
from .core import Dataset, MarkovBlanket, UndirectedGraph
from .estimators import break_ties

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnerConfig:
    """``test`` is a :class:`TestSpec` or any object exposing
    ``association(data, x, y, cond)`` and ``test(data, x, y, cond, statistic=None)``.
    """

    test: Any = field(default_factory=HybridTest)
    max_blanket_size: int | None = None
    parallel_nodes: bool = False
    workers: int = 1

    def ci_test(self):
        return make_ci_test(self.test) if isinstance(self.test, TestSpec) else self.test

    def check(self, p: int) -> None:
        if self.max_blanket_size is not None and not 1 <= self.max_blanket_size < p:
            raise ValueError(f"max_blanket_size must be in [1, {p - 1}]")


@dataclass(frozen=True)
class BlanketSearch:
    blanket: MarkovBlanket
    order: tuple[int, ...]
    tests: int
    estimates: int
    shortcuts: int


def _jitter_seed(test) -> int:
    cfg = getattr(test, "config", None)
    return getattr(cfg, "seed", 0)


def search_blanket(values: np.ndarray, target: int, test, max_size: int | None = None) -> BlanketSearch:
    p = values.shape[1]
    mb: list[int] = []
    tests = estimates = shortcuts = 0

    while max_size is None or len(mb) < max_size:
        candidates = [c for c in range(p) if c != target and c not in mb]
        if not candidates:
            break
        best, best_score = None, -np.inf
        for c in candidates:
            s = test.association(values, target, c, mb)
            estimates += 1
            if best is None or s > best_score:
                best, best_score = c, s
        res = test.test(values, target, best, mb, statistic=best_score)
        tests += 1
        shortcuts += res.used_shortcut
        if res.independent:
            break
        mb.append(best)
    grown = tuple(mb)

    for j in grown:
        cond = [m for m in mb if m != j]
        res = test.test(values, target, j, cond)
        tests += 1
        shortcuts += res.used_shortcut
        if res.independent:
            mb.remove(j)

    log.debug("node %d: grown %s, kept %s", target, grown, mb)
    return BlanketSearch(MarkovBlanket(target, frozenset(mb)), tuple(mb), tests, estimates, shortcuts)


def iamb_blanket(data: Dataset, target: int, cfg: LearnerConfig) -> MarkovBlanket:
    if data.p < 2:
        raise ValueError("need at least two variables")
    cfg.check(data.p)
    test = cfg.ci_test()
    values = break_ties(data.values, _jitter_seed(test))
    return search_blanket(values, target, test, cfg.max_blanket_size).blanket


def _search_star(args):
    return search_blanket(*args)


def learn_blankets(data: Dataset, cfg: LearnerConfig) -> list[BlanketSearch]:
    """Blanket search for every node; identical output for any worker count."""
    if data.p < 2:
        raise ValueError("need at least two variables")
    cfg.check(data.p)
    test = cfg.ci_test()
    values = np.asfortranarray(break_ties(data.values, _jitter_seed(test)))
    jobs = [(values, t, test, cfg.max_blanket_size) for t in range(data.p)]
    if cfg.parallel_nodes and cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_search_star, jobs))
    return [_search_star(j) for j in jobs]


def and_rule(blankets: Sequence[MarkovBlanket], node_count: int) -> UndirectedGraph:
    """Edge (i, j) iff j is in the blanket of i and i is in the blanket of j."""
    members = {b.target: b.members for b in blankets}
    edges = [(i, j) for i in range(node_count) for j in members.get(i, ())
             if i < j and i in members.get(j, ())]
    return UndirectedGraph.from_edges(node_count, edges)


def learn_graph(data: Dataset, cfg: LearnerConfig | None = None) -> UndirectedGraph:
    cfg = cfg or LearnerConfig()
    searches = learn_blankets(data, cfg)
    return and_rule([s.blanket for s in searches], data.p)
