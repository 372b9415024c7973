"""Domain types shared across the package: datasets, graphs, blankets, configs."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data violates the dataset invariants."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n-by-p sample with unique column names.

    Values are stored column-major so that a single variable, or a block of
    variables, is a contiguous slice.
    """

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got shape {values.shape}")
        n, p = values.shape
        if n < 1 or p < 1:
            raise DataError(f"dataset must have n >= 1 and p >= 1, got {n}x{p}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        names = tuple(str(s) for s in self.names)
        if len(names) != p:
            raise DataError(f"{len(names)} names for {p} columns")
        if len(set(names)) != p:
            raise DataError("variable names must be unique")
        values = np.asfortranarray(values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "Dataset":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"X{j + 1}" for j in range(values.shape[1])]
        return cls(values, tuple(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def columns(self, idx: Sequence[int]) -> np.ndarray:
        return self.values[:, list(idx)]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no variable named {name!r}") from None

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    __hash__ = None


def _edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UndirectedGraph:
    """Graph on nodes ``0..node_count-1``; edges are stored as sorted pairs."""

    node_count: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.node_count) < 1:
            raise ValueError("node_count must be positive")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i}, {j}) outside [0, {self.node_count})")
            norm.add(_edge(i, j))
        object.__setattr__(self, "node_count", int(self.node_count))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "UndirectedGraph":
        return cls(node_count, frozenset(edges))

    def has_edge(self, i: int, j: int) -> bool:
        return _edge(i, j) in self.edges

    def neighbors(self, i: int) -> frozenset[int]:
        return frozenset(b if a == i else a for a, b in self.edges if i in (a, b))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class MarkovBlanket:
    target: int
    members: frozenset[int]

    def __post_init__(self):
        members = frozenset(int(m) for m in self.members)
        if self.target in members:
            raise ValueError("target cannot be a member of its own blanket")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for the kNN estimators and the permutation test.

    Defaults: k=3 neighbours, T=200 permutations, alpha=0.05, and a 0.001 nat
    threshold for skipping permutations when the partial-correlation test
    also accepts independence.
    """

    k: int = 3
    permutations: int = 200
    alpha: float = 0.05
    shortcut_threshold: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.permutations < 1:
            raise ValueError("permutations must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.shortcut_threshold < 0:
            raise ValueError("shortcut_threshold must be >= 0")

    def check_sample_size(self, n: int) -> None:
        if not self.k < n:
            raise ValueError(f"k={self.k} requires more than {self.k} samples, got {n}")


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    p_value: float
    independent: bool
    used_shortcut: bool = False
    permutation_count: int = 0
    partial_correlation: float | None = None

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "independent": self.independent,
            "used_shortcut": self.used_shortcut,
            "permutation_count": self.permutation_count,
            "partial_correlation": self.partial_correlation,
        }


# --------------------------------------------------------------------- I/O


def load_dataset(path: str | os.PathLike) -> Dataset:
    """Read a comma-separated file whose first row holds the variable names."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    p = len(header)
    values = np.empty((len(rows) - 1, p))
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != p:
            raise DataError(f"{path}:{line}: ragged row with {len(row)} columns, expected {p}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}:{line}: cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{line}: non-finite value {cell!r} in column {header[c]!r}")
            values[r, c] = v
    return Dataset(values, tuple(header))


def save_dataset(data: Dataset, path: str | os.PathLike) -> None:
    # repr() of a float is the shortest string that round-trips exactly
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for row in data.values:
            w.writerow([repr(float(v)) for v in row])


def format_edge_list(graph: UndirectedGraph, names: Sequence[str]) -> str:
    if len(names) != graph.node_count:
        raise ValueError("name count does not match node count")
    lines = sorted("\t".join(sorted((names[i], names[j]))) for i, j in graph.edges)
    return "".join(line + "\n" for line in lines)


def write_edge_list(graph: UndirectedGraph, names: Sequence[str], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_edge_list(graph, names))


def read_edge_list(path: str | os.PathLike, names: Sequence[str]) -> UndirectedGraph:
    lookup = {name: i for i, name in enumerate(names)}
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected two tab-separated names")
            try:
                edges.append((lookup[parts[0]], lookup[parts[1]]))
            except KeyError as e:
                raise DataError(f"{path}:{lineno}: unknown variable {e.args[0]!r}") from None
    return UndirectedGraph.from_edges(len(names), edges)
