"""Synthetic benchmark data with known ground-truth graphs.

* The seven-node network, sampled ancestrally along its DAG with either the
  linear or the non-linear structural equations.
* Disjoint copies of the seven-node network.
* Gaussian Markov random fields on Erdos-Renyi graphs, optionally cubed.

Plus the shrunken-ECDF (nonparanormal) transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .core import DataError, Dataset, UndirectedGraph

NOISE_FAMILIES = ("gaussian", "uniform", "t2")
MECHANISMS = ("linear", "nonlinear")
TOPOLOGIES = ("small", "random", "replicated-small")
POST_TRANSFORMS = ("none", "cube")

# 0-based edges of the seven-node network (X1..X7)
SMALL_NETWORK_EDGES = ((0, 1), (1, 2), (2, 3), (1, 4), (2, 4), (4, 5), (2, 6), (4, 6))
SMALL_NETWORK_NAMES = tuple(f"X{i}" for i in range(1, 8))

EDGE_PRECISION = 0.25
MIN_PRECISION_EIGENVALUE = 0.1
_LOG_GUARD = 1e-300


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_noise(family: str, count: int, seed=None) -> np.ndarray:
    """I.i.d. draws: N(0, 1), U(-1, 1) or Student t with 2 degrees of freedom.

    t2 draws are built as ``N(0,1) / sqrt(chi2_2 / 2)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _rng(seed)
    if family == "gaussian":
        return rng.standard_normal(count)
    if family == "uniform":
        return rng.uniform(-1.0, 1.0, count)
    if family == "t2":
        g = rng.standard_normal(count)
        return g / np.sqrt(rng.chisquare(2.0, count) / 2.0)
    raise ValueError(f"unknown noise family {family!r}; choose from {NOISE_FAMILIES}")


def small_network_graph() -> UndirectedGraph:
    return UndirectedGraph.from_edges(7, SMALL_NETWORK_EDGES)


def structural_equations(mechanism: str, noise: np.ndarray) -> np.ndarray:
    """Push an (n, 7) noise matrix through the seven-node DAG."""
    e = np.asarray(noise, dtype=np.float64)
    if e.ndim != 2 or e.shape[1] != 7:
        raise ValueError("noise must be an n x 7 matrix")
    x = np.empty_like(e)
    if mechanism == "linear":
        x[:, 0] = e[:, 0]
        x[:, 1] = 0.2 * x[:, 0] + e[:, 1]
        x[:, 2] = 0.5 * x[:, 1] + e[:, 2]
        x[:, 3] = 0.25 * x[:, 2] + e[:, 3]
        x[:, 4] = 0.35 * x[:, 1] + 0.55 * x[:, 2] + e[:, 4]
        x[:, 5] = 0.65 * x[:, 4] + e[:, 5]
        x[:, 6] = 0.9 * x[:, 2] + 0.25 * x[:, 4] + e[:, 6]
    elif mechanism == "nonlinear":
        x[:, 0] = e[:, 0]
        x[:, 1] = 2.0 * np.cos(x[:, 0]) + e[:, 1]
        x[:, 2] = 2.0 * np.sin(np.pi * x[:, 1]) + e[:, 2]
        x[:, 3] = 3.0 * np.cos(x[:, 2]) + e[:, 3]
        x[:, 4] = 0.75 * x[:, 1] * x[:, 2] + e[:, 4]
        x[:, 5] = 2.5 * x[:, 4] + e[:, 5]
        with np.errstate(divide="ignore"):
            x[:, 6] = 3.0 * np.cos(0.2 * x[:, 2]) + np.log(np.abs(x[:, 4])) + e[:, 6]
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}; choose from {MECHANISMS}")
    return x


def _draw_small(mechanism: str, noise: str, n: int, rng: np.random.Generator) -> np.ndarray:
    eps = sample_noise(noise, 7 * n, rng).reshape(n, 7)
    x = structural_equations(mechanism, eps)
    if mechanism == "nonlinear":
        bad = np.abs(x[:, 4]) < _LOG_GUARD
        while bad.any():
            eps[bad, 4] = sample_noise(noise, int(bad.sum()), rng)
            x = structural_equations(mechanism, eps)
            bad = np.abs(x[:, 4]) < _LOG_GUARD
    return x


def generate_small_network(mechanism: str, noise: str, n: int, seed=None):
    if n < 1:
        raise ValueError("n must be >= 1")
    x = _draw_small(mechanism, noise, n, _rng(seed))
    return Dataset(x, SMALL_NETWORK_NAMES), small_network_graph()


def generate_replicated_network(copies: int, mechanism: str, noise: str, n: int, seed=None):
    """``copies`` independent seven-node blocks side by side (7*copies variables)."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    children = np.random.SeedSequence(seed).spawn(copies)
    blocks = [_draw_small(mechanism, noise, n, np.random.default_rng(c)) for c in children]
    edges = [(a + 7 * b, c + 7 * b) for b in range(copies) for a, c in SMALL_NETWORK_EDGES]
    names = [f"X{j}" for j in range(1, 7 * copies + 1)]
    return Dataset(np.hstack(blocks), names), UndirectedGraph.from_edges(7 * copies, edges)


def random_graph(p: int, edge_prob: float | None = None, seed=None) -> UndirectedGraph:
    if p < 2:
        raise ValueError("p must be >= 2")
    prob = 3.0 / p if edge_prob is None else edge_prob
    if not 0.0 < prob <= 1.0:
        raise ValueError("edge_prob must lie in (0, 1]")
    rng = _rng(seed)
    iu, ju = np.triu_indices(p, k=1)
    keep = rng.random(iu.size) < prob
    return UndirectedGraph.from_edges(p, zip(iu[keep].tolist(), ju[keep].tolist()))


def precision_matrix(graph: UndirectedGraph, edge_value: float = EDGE_PRECISION,
                     min_eigenvalue: float = MIN_PRECISION_EIGENVALUE) -> np.ndarray:
    """Positive-definite precision whose off-diagonal support is exactly the edge set.

    Unit diagonal, ``edge_value`` on edges, then ``c * I`` added until the
    smallest eigenvalue reaches ``min_eigenvalue``, then rescaled back to a
    unit diagonal.
    """
    omega = np.eye(graph.node_count) + edge_value * graph.adjacency()
    lam = np.linalg.eigvalsh(omega)[0]
    if lam < min_eigenvalue:
        omega += (min_eigenvalue - lam) * np.eye(graph.node_count)
    d = 1.0 / np.sqrt(np.diag(omega))
    omega = omega * d[:, None] * d[None, :]
    if np.linalg.eigvalsh(omega)[0] <= 0:
        raise np.linalg.LinAlgError("precision matrix is not positive definite")
    return omega


def generate_random_network(p: int, edge_prob: float | None = None, n: int = 1000, seed=None,
                            post_transform: str = "none"):
    if post_transform not in POST_TRANSFORMS:
        raise ValueError(f"unknown post_transform {post_transform!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    graph = random_graph(p, edge_prob, rng)
    cov = np.linalg.inv(precision_matrix(graph))
    chol = np.linalg.cholesky((cov + cov.T) / 2)
    x = rng.standard_normal((n, p)) @ chol.T
    if post_transform == "cube":
        x = x ** 3
    return Dataset(x, [f"X{j}" for j in range(1, p + 1)]), graph


def shrinkage_delta(n: int) -> float:
    return 1.0 / (4.0 * n ** 0.25 * math.sqrt(math.pi * math.log(n)))


def ecdf_transform(data: Dataset) -> Dataset:
    """Per column: ECDF value rank/n (average ranks for ties), clipped to
    ``[delta_n, 1 - delta_n]``, mapped through the standard normal quantile."""
    n = data.n
    if n < 2:
        raise DataError("ECDF transform needs n >= 2")
    v = data.values
    if np.any(np.ptp(v, axis=0) == 0):
        raise DataError("ECDF transform is undefined for a constant column")
    delta = shrinkage_delta(n)
    u = stats.rankdata(v, axis=0) / n
    u = np.clip(u, delta, 1.0 - delta)
    return Dataset(special.ndtri(u), data.names)


@dataclass(frozen=True)
class GeneratorSpec:
    topology: str = "small"
    mechanism: str = "nonlinear"
    noise: str = "gaussian"
    post_transform: str = "none"
    p: int = 10
    edge_prob: float | None = None
    copies: int = 3

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; choose from {TOPOLOGIES}")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.noise not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise {self.noise!r}")
        if self.post_transform not in POST_TRANSFORMS:
            raise ValueError(f"unknown post_transform {self.post_transform!r}")

    def generate(self, n: int, seed=None) -> tuple[Dataset, UndirectedGraph]:
        if self.topology == "small":
            data, graph = generate_small_network(self.mechanism, self.noise, n, seed)
        elif self.topology == "replicated-small":
            data, graph = generate_replicated_network(self.copies, self.mechanism, self.noise, n, seed)
        else:
            return generate_random_network(self.p, self.edge_prob, n, seed, self.post_transform)
        if self.post_transform == "cube":
            data = Dataset(data.values ** 3, data.names)
        return data, graph
