"""Conditional independence tests.

Three decision procedures share the :class:`~knnmi_graph.core.CITestResult`
output:

* a permutation test on the kNN CMI statistic, where y is shuffled T times
  and ``p = (K + 1) / (T + 1)`` with K the number of shuffled estimates at or
  above the observed one;
* Fisher's z test on the sample partial correlation;
* a hybrid that skips the permutations when the CMI estimate is tiny and the
  Fisher test also accepts independence.

The learner talks to tests through two methods, ``association`` (a score used
to rank candidates) and ``test`` (the decision). :class:`SeparationOracle` is a
data-free implementation that answers from a known graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import stats

from .core import CITestResult, EstimatorConfig, UndirectedGraph
from .estimators import DegenerateDataError, _prepare, make_kernel

METHODS = ("permutation-mi", "fisher-z", "hybrid")
EIGEN_TOL = 1e-12
_PERMUTATION_STREAM = 0x9E3779B1


class SingularCovarianceError(ValueError):
    """Raised when a partial correlation is undefined for the sample."""


@dataclass(frozen=True)
class TestSpec:
    __test__ = False

    method: str = "hybrid"
    config: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown CI test method {self.method!r}; choose from {METHODS}")


def _config(spec) -> EstimatorConfig:
    if isinstance(spec, TestSpec):
        return spec.config
    if isinstance(spec, EstimatorConfig):
        return spec
    raise TypeError("expected a TestSpec or EstimatorConfig")


def _seed_words(seed: int, test_id: Sequence[int]) -> list[int]:
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, _PERMUTATION_STREAM, len(test_id)]
    words.extend(int(t) for t in test_id)
    return words


def permutation(n: int, seed: int, test_id: Sequence[int], i: int) -> np.ndarray:
    """The i-th shuffle for a given test; independent of every other shuffle."""
    ss = np.random.SeedSequence(_seed_words(seed, test_id) + [i])
    return np.random.default_rng(ss).permutation(n)


def _check_not_constant(*blocks) -> None:
    for b in blocks:
        if b is None:
            continue
        if np.any(np.ptp(b, axis=0) == 0):
            raise DegenerateDataError("constant column in CI test input")


def _estimate(x, y, z, cfg: EstimatorConfig):
    x, y, z = _prepare(x, y, z, cfg.k, cfg.seed)
    kernel = make_kernel(x, z, cfg.k)
    return x, y, z, kernel


def permutation_ci_test(x, y, z, spec, *, test_id: Sequence[int] = (),
                        statistic: float | None = None) -> CITestResult:
    """Permutation test of X independent of Y given Z using the kNN CMI.

    ``statistic`` lets a caller that already estimated I(x; y | z) on the same
    inputs skip the repeated estimate. ``test_id`` keys the permutation
    streams, so the same (seed, test_id) always draws the same shuffles.
    """
    cfg = _config(spec)
    x, y, z, kernel = _estimate(x, y, z, cfg)
    _check_not_constant(x, y, z)
    est = kernel(y) if statistic is None else float(statistic)
    n = y.shape[0]
    T = cfg.permutations
    K = 0
    for i in range(T):
        perm = permutation(n, cfg.seed, test_id, i)
        if kernel(y[perm]) >= est:
            K += 1
    p = (K + 1) / (T + 1)
    return CITestResult(statistic=est, p_value=p, independent=not p < cfg.alpha,
                        used_shortcut=False, permutation_count=T)


def partial_correlation(x, y, z=None) -> float:
    """Sample partial correlation of x and y given the columns of z.

    Read off the inverse correlation matrix when it is well conditioned;
    otherwise fall back to correlating least-squares residuals.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.shape[0]
    if z is None:
        z = np.empty((n, 0))
    z = np.asarray(z, dtype=np.float64).reshape(n, -1)
    m = np.column_stack([x, y, z])
    sd = m.std(axis=0)
    if sd[0] == 0 or sd[1] == 0:
        raise DegenerateDataError("x or y is constant")
    if np.any(sd[2:] == 0):
        raise SingularCovarianceError("conditioning set contains a constant column")
    corr = np.corrcoef(m, rowvar=False).reshape(m.shape[1], m.shape[1])
    if np.linalg.eigvalsh(corr)[0] > EIGEN_TOL:
        prec = np.linalg.inv(corr)
        rho = -prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])
    else:
        design = np.column_stack([np.ones(n), z])
        coef, *_ = np.linalg.lstsq(design, m[:, :2], rcond=None)
        res = m[:, :2] - design @ coef
        scale = np.sqrt((res ** 2).sum(axis=0))
        if np.any(scale <= EIGEN_TOL * np.sqrt(n) * sd[:2]):
            raise SingularCovarianceError("x or y is a linear function of the conditioning set")
        rho = float(res[:, 0] @ res[:, 1] / (scale[0] * scale[1]))
    return float(np.clip(rho, -1.0, 1.0))


def fisher_z_ci_test(x, y, z, alpha: float = 0.05) -> CITestResult:
    """Two-sided Fisher z test of zero partial correlation."""
    n = np.asarray(x).shape[0]
    dz = 0 if z is None else np.asarray(z).reshape(n, -1).shape[1]
    if n - dz - 3 <= 0:
        raise ValueError(f"Fisher z test needs n > d_z + 3 (n={n}, d_z={dz})")
    rho = partial_correlation(x, y, z)
    if abs(rho) >= 1.0:
        zstat, p, info = math.inf, 0.0, math.inf
    else:
        zstat = math.sqrt(n - dz - 3) * math.atanh(rho)
        p = float(2.0 * stats.norm.sf(abs(zstat)))
        info = -0.5 * math.log1p(-rho * rho)
    return CITestResult(statistic=info, p_value=p, independent=not p < alpha,
                        used_shortcut=False, permutation_count=0,
                        partial_correlation=rho)


def hybrid_ci_test(x, y, z, spec, *, test_id: Sequence[int] = (),
                   statistic: float | None = None) -> CITestResult:
    """Skip the permutations when the CMI estimate is below the shortcut
    threshold and Fisher's z test accepts at the same alpha; otherwise run
    the full permutation test, reusing the single CMI estimate."""
    cfg = _config(spec)
    if statistic is None:
        _, yy, _, kernel = _estimate(x, y, z, cfg)
        statistic = kernel(yy)
    if statistic < cfg.shortcut_threshold:
        fz = fisher_z_ci_test(x, y, z, cfg.alpha)
        if fz.independent:
            return CITestResult(statistic=statistic, p_value=fz.p_value, independent=True,
                                used_shortcut=True, permutation_count=0,
                                partial_correlation=fz.partial_correlation)
    return permutation_ci_test(x, y, z, cfg, test_id=test_id, statistic=statistic)


# ------------------------------------------------- learner-facing adapters


def _blocks(data: np.ndarray, x: int, y: int, cond: Sequence[int]):
    z = data[:, list(cond)] if len(cond) else None
    return data[:, x], data[:, y], z


def test_key(x: int, y: int, cond: Sequence[int]) -> tuple[int, ...]:
    return (x, y, len(cond), *sorted(cond))


test_key.__test__ = False


@dataclass(frozen=True)
class _KnnTestBase:
    config: EstimatorConfig = field(default_factory=EstimatorConfig)

    def association(self, data: np.ndarray, x: int, y: int, cond: Sequence[int]) -> float:
        xs, ys, zs = _blocks(data, x, y, cond)
        _, yy, _, kernel = _estimate(xs, ys, zs, self.config)
        return kernel(yy)


@dataclass(frozen=True)
class PermutationTest(_KnnTestBase):
    __test__ = False

    def test(self, data, x, y, cond, statistic=None) -> CITestResult:
        xs, ys, zs = _blocks(data, x, y, cond)
        return permutation_ci_test(xs, ys, zs, self.config, test_id=test_key(x, y, cond),
                                   statistic=statistic)


@dataclass(frozen=True)
class HybridTest(_KnnTestBase):
    __test__ = False

    def test(self, data, x, y, cond, statistic=None) -> CITestResult:
        xs, ys, zs = _blocks(data, x, y, cond)
        return hybrid_ci_test(xs, ys, zs, self.config, test_id=test_key(x, y, cond),
                              statistic=statistic)


@dataclass(frozen=True)
class FisherZTest:
    """Partial-correlation test; candidates are ranked by the Gaussian CMI
    ``-log(1 - rho^2) / 2``, which is monotone in ``|rho|``."""

    __test__ = False
    alpha: float = 0.05

    def association(self, data, x, y, cond) -> float:
        rho = partial_correlation(*_blocks(data, x, y, cond))
        return math.inf if abs(rho) >= 1 else -0.5 * math.log1p(-rho * rho)

    def test(self, data, x, y, cond, statistic=None) -> CITestResult:
        return fisher_z_ci_test(*_blocks(data, x, y, cond), self.alpha)


@dataclass(frozen=True)
class SeparationOracle:
    """Exact CI answers for a Markov network: X_x is independent of X_y
    given X_S iff S separates x and y in ``graph``. Data are ignored."""

    graph: UndirectedGraph

    @cached_property
    def _adjacency(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(self.graph.neighbors(i)) for i in range(self.graph.node_count))

    def separated(self, x: int, y: int, cond: Sequence[int]) -> bool:
        blocked = set(cond)
        adj = self._adjacency
        seen = {x}
        stack = [x]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w == y:
                    return False
                if w not in seen and w not in blocked:
                    seen.add(w)
                    stack.append(w)
        return True

    def association(self, data, x, y, cond) -> float:
        return 0.0 if self.separated(x, y, cond) else 1.0

    def test(self, data, x, y, cond, statistic=None) -> CITestResult:
        sep = self.separated(x, y, cond)
        return CITestResult(statistic=0.0 if sep else 1.0, p_value=1.0 if sep else 0.0,
                            independent=sep)


def make_ci_test(spec: TestSpec):
    if spec.method == "permutation-mi":
        return PermutationTest(spec.config)
    if spec.method == "hybrid":
        return HybridTest(spec.config)
    return FisherZTest(spec.config.alpha)
