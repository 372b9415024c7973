"""kNN estimators of differential entropy, mutual information and
conditional mutual information, all in nats and all under the max norm.

The MI and CMI estimators fix a length scale per point from the k-th
neighbour in the joint space and then count neighbours strictly inside that
radius in each marginal space. Estimates are returned as-is, so they can be
slightly negative on independent data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import _sweep
from .knn import SpatialIndex, knn_radii

JITTER_SCALE = 1e-10
_JITTER_STREAM = 0x6A177E5

BACKENDS = ("sweep", "kdtree")


class DegenerateDataError(ValueError):
    """Raised when the sample cannot support a kNN estimate."""


def digamma(x):
    """Digamma function for positive arguments; scalars in, float out."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise ValueError("digamma is only defined here for x > 0")
    out = special.digamma(arr)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def _psi_table(n: int) -> np.ndarray:
    # table[m] == psi(m + 1) for counts m = 0..n-1
    t = special.digamma(np.arange(1, n + 1, dtype=np.float64))
    t.flags.writeable = False
    return t


def _mean_psi(table: np.ndarray, counts: np.ndarray) -> float:
    # fsum is exactly rounded, so the result does not depend on row order
    return math.fsum(table[counts]) / counts.shape[0]


def _as_2d(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a vector or an n x d matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def break_ties(values: np.ndarray, seed: int = 0, scale: float = JITTER_SCALE) -> np.ndarray:
    """Return a copy in which every column holding repeated values is jittered.

    The noise is uniform on ``(-s, s)`` with ``s = scale * column sd`` and is
    drawn from a stream derived from ``seed``. Columns without ties are left
    bit-identical. A constant column stays constant.
    """
    values = np.array(values, dtype=np.float64, copy=True)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    n = values.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _JITTER_STREAM]))
    noise = rng.uniform(-1.0, 1.0, size=values.shape)
    for j in range(values.shape[1]):
        col = values[:, j]
        if np.unique(col).size < n:
            sd = col.std()
            if sd > 0:
                values[:, j] = col + scale * sd * noise[:, j]
    return values[:, 0] if squeeze else values


def _check_k(k: int, n: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample size n={n}")


@dataclass(frozen=True)
class MarginalCounts:
    """Per-point joint radius and strict marginal neighbour counts.

    ``radius`` is half of the joint-space neighbourhood diameter, i.e. the
    k-th neighbour distance itself.
    """

    radius: np.ndarray
    n_x: np.ndarray | None = None
    n_y: np.ndarray | None = None
    n_z: np.ndarray | None = None
    n_xz: np.ndarray | None = None
    n_yz: np.ndarray | None = None


# ----------------------------------------------------------------- kernels


class _MIKernel:
    """I(x; y) for a fixed x and any y of matching length."""

    def __init__(self, x: np.ndarray, k: int):
        self.k = k
        self.n = x.shape[0]
        self.dx = x.shape[1]
        self.order = np.argsort(x[:, 0], kind="stable")
        self.xs = np.ascontiguousarray(x[self.order])
        self.psi = _psi_table(self.n)

    def counts(self, y: np.ndarray) -> MarginalCounts:
        ys = y[self.order]
        joint = np.ascontiguousarray(np.hstack([self.xs, ys]))
        radius = _sweep.kth_distance_sorted(joint, self.k)
        n_x = _sweep.count_strict_sorted(self.xs, radius)
        yorder = np.argsort(ys[:, 0], kind="stable")
        n_y = np.empty(self.n, dtype=np.int64)
        n_y[yorder] = _sweep.count_strict_sorted(
            np.ascontiguousarray(ys[yorder]), np.ascontiguousarray(radius[yorder]))
        return MarginalCounts(radius=radius, n_x=n_x, n_y=n_y)

    def __call__(self, y: np.ndarray) -> float:
        c = self.counts(y)
        psi = self.psi
        return (psi[self.k - 1] + psi[self.n - 1]
                - (_mean_psi(psi, c.n_x) + _mean_psi(psi, c.n_y)))


class _CMIKernel:
    """I(x; y | z) for fixed x, z and any y of matching length."""

    def __init__(self, x: np.ndarray, z: np.ndarray, k: int):
        self.k = k
        self.n = x.shape[0]
        self.dx = x.shape[1]
        self.dz = z.shape[1]
        self.order = np.argsort(z[:, 0], kind="stable")
        self.zx = np.ascontiguousarray(np.hstack([z, x])[self.order])
        self.psi = _psi_table(self.n)

    def counts(self, y: np.ndarray) -> MarginalCounts:
        joint = np.ascontiguousarray(np.hstack([self.zx, y[self.order]]))
        radius = _sweep.kth_distance_sorted(joint, self.k)
        n_xz, n_yz, n_z = _sweep.conditional_counts_sorted(joint, radius, self.dz, self.dx)
        return MarginalCounts(radius=radius, n_z=n_z, n_xz=n_xz, n_yz=n_yz)

    def __call__(self, y: np.ndarray) -> float:
        c = self.counts(y)
        psi = self.psi
        return psi[self.k - 1] - (_mean_psi(psi, c.n_xz) + _mean_psi(psi, c.n_yz)
                                  - _mean_psi(psi, c.n_z))


def _kdtree_counts(x, y, z, k) -> MarginalCounts:
    """Reference path through :class:`SpatialIndex`; results in input order."""
    if z is None:
        radius = SpatialIndex(np.hstack([x, y])).kth_neighbor_distances(k)
        return MarginalCounts(
            radius=radius,
            n_x=SpatialIndex(x).count_within_all(radius),
            n_y=SpatialIndex(y).count_within_all(radius))
    radius = SpatialIndex(np.hstack([x, y, z])).kth_neighbor_distances(k)
    return MarginalCounts(
        radius=radius,
        n_z=SpatialIndex(z).count_within_all(radius),
        n_xz=SpatialIndex(np.hstack([x, z])).count_within_all(radius),
        n_yz=SpatialIndex(np.hstack([y, z])).count_within_all(radius))


def _unsort(counts: MarginalCounts, order: np.ndarray) -> MarginalCounts:
    def back(a):
        if a is None:
            return None
        out = np.empty_like(a)
        out[order] = a
        return out
    return MarginalCounts(*(back(getattr(counts, f)) for f in
                            ("radius", "n_x", "n_y", "n_z", "n_xz", "n_yz")))


# -------------------------------------------------------------- public API


def _prepare(x, y, z, k, seed):
    x = _as_2d(x, "x")
    y = _as_2d(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"x has {n} rows but y has {y.shape[0]}")
    blocks = [x, y]
    if z is not None:
        z = _as_2d(z, "z")
        if z.shape[0] != n:
            raise ValueError(f"x has {n} rows but z has {z.shape[0]}")
        if z.shape[1] == 0:
            z = None
        else:
            blocks.append(z)
    _check_k(k, n)
    joint = break_ties(np.hstack(blocks), seed)
    dx, dy = x.shape[1], y.shape[1]
    x, y = joint[:, :dx], joint[:, dx:dx + dy]
    z = joint[:, dx + dy:] if z is not None else None
    return x, y, z


def marginal_counts(x, y, z=None, k: int = 3, *, seed: int = 0,
                    backend: str = "sweep") -> MarginalCounts:
    """Joint radii and marginal counts behind the MI (``z=None``) or CMI estimate."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    x, y, z = _prepare(x, y, z, k, seed)
    if backend == "kdtree":
        return _kdtree_counts(x, y, z, k)
    if z is None:
        kern = _MIKernel(x, k)
    else:
        kern = _CMIKernel(x, z, k)
    return _unsort(kern.counts(y), kern.order)


def entropy(data, k: int = 3, *, seed: int = 0, backend: str = "sweep") -> float:
    """Kozachenko-Leonenko entropy estimate in nats (max norm, so log c_d = 0).

    ``psi(n) - psi(k) + (d/n) * sum(log eps_i)`` where ``eps_i`` is twice the
    k-th neighbour distance of point i.
    """
    x = _as_2d(data, "data")
    n, d = x.shape
    _check_k(k, n)
    x = break_ties(x, seed)
    if backend == "kdtree":
        r = SpatialIndex(x).kth_neighbor_distances(k)
    elif backend == "sweep":
        r = knn_radii(x, k)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if np.any(r <= 0):
        raise DegenerateDataError("zero neighbour distance; data contain exact duplicates")
    return (special.digamma(n) - special.digamma(k)
            + d * math.fsum(np.log(2.0 * r)) / n)


def mutual_information(x, y, k: int = 3, *, seed: int = 0, backend: str = "sweep") -> float:
    """KSG estimate of I(X; Y) in nats."""
    c = marginal_counts(x, y, None, k, seed=seed, backend=backend)
    n = c.radius.shape[0]
    psi = _psi_table(n)
    return psi[k - 1] + psi[n - 1] - (_mean_psi(psi, c.n_x) + _mean_psi(psi, c.n_y))


def conditional_mutual_information(x, y, z, k: int = 3, *, seed: int = 0,
                                   backend: str = "sweep") -> float:
    """kNN estimate of I(X; Y | Z) in nats; an empty ``z`` falls back to MI."""
    if z is None or np.asarray(z).size == 0:
        return mutual_information(x, y, k, seed=seed, backend=backend)
    c = marginal_counts(x, y, z, k, seed=seed, backend=backend)
    n = c.radius.shape[0]
    psi = _psi_table(n)
    return psi[k - 1] - (_mean_psi(psi, c.n_xz) + _mean_psi(psi, c.n_yz)
                         - _mean_psi(psi, c.n_z))


def make_kernel(x: np.ndarray, z: np.ndarray | None, k: int):
    """Reusable estimator of I(x; y | z) as a function of y alone.

    Inputs must already be validated and tie-free; used by the permutation
    test, where x and z stay fixed across all shuffles of y.
    """
    if z is None or z.shape[1] == 0:
        return _MIKernel(x, k)
    return _CMIKernel(x, z, k)
