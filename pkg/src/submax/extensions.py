"""Continuous extensions of set functions.

Two extensions drive the optimizer: the multilinear extension F(x) (expected
value under independent inclusion), used for the submodular part, and the
concave closure (best convex-combination value), used for the concave part.
Exact evaluation enumerates all 2^n subsets and is gated by caps; beyond the
cap the multilinear quantities fall back to seeded Monte Carlo estimates
with a Hoeffding-derived sample count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from .mconcave import MNatConcaveFn, ModularPlusIndicator
from .setfn import (TOL, CapExceededError, SetFunctionOracle, as_mask,
                    mask_to_set)
from .simplex import solve_equality_lp

POINT_TOL = 1e-7
DEFAULT_EXT_CAP = 16


@dataclass(frozen=True)
class EstimatorConfig:
    """Monte Carlo estimator settings.

    The contract: with ``samples`` independent draws of a quantity ranging
    over [0, value_range], the estimate errs by at most
    epsilon_est * value_range with probability >= 1 - delta_fail (Hoeffding).
    ``sample_count`` overrides the derived count when set.
    """

    epsilon_est: float = 0.05
    delta_fail: float = 0.05
    value_range: float = 1.0
    sample_count: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon_est > 0:
            raise ValueError("epsilon_est must be positive")
        if not 0 < self.delta_fail < 1:
            raise ValueError("delta_fail must lie in (0, 1)")
        if self.value_range < 0:
            raise ValueError("value_range must be nonnegative")
        if self.sample_count is not None and self.sample_count < 1:
            raise ValueError("sample_count must be positive")

    @property
    def samples(self) -> int:
        if self.sample_count is not None:
            return self.sample_count
        return math.ceil(math.log(2.0 / self.delta_fail)
                         / (2.0 * self.epsilon_est ** 2))

    @property
    def envelope(self) -> float:
        return self.epsilon_est * self.value_range

    def with_seed(self, seed) -> "EstimatorConfig":
        return EstimatorConfig(self.epsilon_est, self.delta_fail,
                               self.value_range, self.sample_count, seed)


@dataclass(frozen=True)
class ConvexCombination:
    """Weights over equal-size subsets; Sum lambda 1_Y is the fractional point."""

    n: int
    terms: Tuple[Tuple[float, frozenset], ...]

    @property
    def cardinality(self) -> int:
        return len(self.terms[0][1]) if self.terms else 0

    def point(self) -> np.ndarray:
        x = np.zeros(self.n)
        for lam, Y in self.terms:
            for i in Y:
                x[i] += lam
        return x

    def value(self, h) -> float:
        return float(sum(lam * h.value_mask(as_mask(Y, self.n))
                         for lam, Y in self.terms))

    def validate(self, x: Optional[np.ndarray] = None, tol: float = POINT_TOL):
        if not self.terms:
            raise ValueError("combination has no terms")
        k = self.cardinality
        total = 0.0
        for lam, Y in self.terms:
            if lam < -tol:
                raise ValueError("weights must be nonnegative")
            if len(Y) != k:
                raise ValueError("all subsets must share one cardinality")
            total += lam
        if abs(total - 1.0) > tol:
            raise ValueError(f"weights sum to {total}, expected 1")
        if x is not None and np.max(np.abs(self.point() - x)) > tol:
            raise ValueError("combination does not reconstruct the point")

    def merged(self, drop_tol: float = 1e-12) -> "ConvexCombination":
        """Merge duplicate subsets and drop negligible weights."""
        acc = {}
        for lam, Y in self.terms:
            acc[Y] = acc.get(Y, 0.0) + lam
        kept = sorted(((lam, Y) for Y, lam in acc.items() if lam > drop_tol),
                      key=lambda t: tuple(sorted(t[1])))
        return ConvexCombination(self.n, tuple(kept))

    def to_payload(self) -> list:
        return [{"weight": lam, "set": sorted(Y)} for lam, Y in self.terms]


def _table_of(f, cap: int) -> np.ndarray:
    if isinstance(f, np.ndarray):
        return f
    if isinstance(f, SetFunctionOracle):
        return f.value_table(cap)
    if isinstance(f, MNatConcaveFn):
        return f.table(cap)
    raise TypeError(f"cannot tabulate {type(f).__name__}")


class MultilinearEvaluator:
    """Exact multilinear extension F and gradient from a full value table.

    The gradient uses the difference table D[i, m] = f(m + i) - f(m - i), so
    grad(x) = D @ w(x) where w(x) are the 2^n inclusion probabilities.
    """

    def __init__(self, f, cap: int = DEFAULT_EXT_CAP):
        t = np.asarray(_table_of(f, cap), dtype=float)
        self.n = len(t).bit_length() - 1
        if self.n > cap:
            raise CapExceededError(
                f"multilinear table for n={self.n} exceeds cap {cap}")
        self.table = t
        masks = np.arange(1 << self.n)
        self._diff = np.empty((self.n, 1 << self.n))
        for i in range(self.n):
            bi = 1 << i
            self._diff[i] = t[masks | bi] - t[masks & ~bi]

    def weights(self, x: np.ndarray) -> np.ndarray:
        w = np.ones(1)
        for xi in x:
            w = np.concatenate([w * (1.0 - xi), w * xi])
        return w

    def value(self, x) -> float:
        return float(self.weights(np.asarray(x, dtype=float)) @ self.table)

    def grad(self, x) -> np.ndarray:
        return self._diff @ self.weights(np.asarray(x, dtype=float))


def multilinear_exact(f, x, *, cap: int = DEFAULT_EXT_CAP) -> float:
    return MultilinearEvaluator(f, cap).value(x)


def _sample_masks(rng, x: np.ndarray, count: int) -> np.ndarray:
    draws = rng.random((count, len(x))) < x[None, :]
    powers = 1 << np.arange(len(x), dtype=np.int64)
    return draws @ powers


def _mean_over_masks(f: SetFunctionOracle, masks: np.ndarray) -> float:
    unique, counts = np.unique(masks, return_counts=True)
    vals = np.array([f.eval_mask(int(m)) for m in unique])
    return float(vals @ counts / counts.sum())


def multilinear_sample(f: SetFunctionOracle, x, cfg: EstimatorConfig) -> float:
    """Unbiased Monte Carlo estimate of F(x); each unique sample evaluated once."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    return _mean_over_masks(f, _sample_masks(rng, x, cfg.samples))


def multilinear_grad(f: SetFunctionOracle, x, cfg: Optional[EstimatorConfig] = None,
                     *, cap: int = DEFAULT_EXT_CAP, method: str = "auto") -> np.ndarray:
    """Gradient of the multilinear extension.

    Component i is F(x with x_i = 1) - F(x with x_i = 0).  Exact below the
    enumeration cap; otherwise each component is estimated from its own
    deterministic sample stream (seeded by (cfg.seed, i)), sampling the
    marginal f(R + i) - f(R - i) which ranges over [0, max marginal] for
    monotone submodular f.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if method not in ("auto", "exact", "sample"):
        raise ValueError(f"unknown gradient method {method!r}")
    if method == "exact" or (method == "auto" and n <= cap):
        return MultilinearEvaluator(f, cap).grad(x)
    if cfg is None:
        cfg = EstimatorConfig()
    out = np.empty(n)
    for i in range(n):
        rng = np.random.default_rng([cfg.seed, i])
        masks = _sample_masks(rng, x, cfg.samples)
        bi = 1 << i
        unique, counts = np.unique(masks, return_counts=True)
        vals = np.array([f.eval_mask(int(m) | bi) - f.eval_mask(int(m) & ~bi)
                         for m in unique])
        out[i] = vals @ counts / counts.sum()
    return out


def in_hypersimplex(x, k: int, tol: float = POINT_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= -tol) and np.all(x <= 1 + tol)
                and abs(float(x.sum()) - k) <= tol)


def concave_closure(h: MNatConcaveFn, x, k: int, *,
                    cap: int = DEFAULT_EXT_CAP):
    """Best value of Sum lambda_Y h(Y) over size-k combinations representing x.

    Returns (value, ConvexCombination); the witness is a basic LP solution and
    therefore supported on at most n + 1 subsets.  x must lie in the size-k
    hypersimplex (componentwise in [0,1] with coordinate sum k).
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n != h.n:
        raise ValueError("point dimension must match the ground set")
    if not in_hypersimplex(x, k):
        raise ValueError("point is outside the size-k hull")
    if n > cap:
        raise CapExceededError(
            f"closure LP for n={n} exceeds cap {cap}; use a closed form such "
            f"as closure_special_modular_indicator when applicable")
    if k == 0:
        comb = ConvexCombination(n, ((1.0, frozenset()),))
        return 0.0, comb
    support = [i for i in range(n) if x[i] > TOL]
    if len(support) < k:
        raise ValueError("point is outside the size-k hull")
    if len(support) == k:
        Y = frozenset(support)
        return h.value_mask(as_mask(Y, n)), ConvexCombination(n, ((1.0, Y),))

    cols = list(combinations(support, k))
    m = len(support)
    A = np.zeros((m + 1, len(cols)))
    values = np.empty(len(cols))
    pos = {e: r for r, e in enumerate(support)}
    for j, S in enumerate(cols):
        for e in S:
            A[pos[e], j] = 1.0
        values[j] = h.value_mask(as_mask(S, n))
    A[m, :] = 1.0
    b = np.concatenate([x[support], [1.0]])
    res = solve_equality_lp(values, A, b, maximize=True)
    if res.status != "optimal":
        raise ValueError("point is outside the size-k hull")
    terms = [(float(lam), frozenset(cols[j]))
             for j, lam in enumerate(res.x) if lam > 1e-10]
    terms.sort(key=lambda t: tuple(sorted(t[1])))
    comb = ConvexCombination(n, tuple(terms))
    return float(res.value), comb


def closure_special_modular_indicator(ell, c0: float, x, k: int) -> float:
    """Closed-form closure of h(X) = ell(X) + c0*[X nonempty] on the size-k hull.

    Every size-k representation of x uses only nonempty sets when k >= 1, so
    the indicator contributes c0 in full.
    """
    if k == 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    ell = np.asarray(ell, dtype=float)
    if abs(float(x.sum()) - k) > 1e-6:
        raise ValueError("coordinate sum must equal k")
    return float(ell @ x + c0)


def combination_from_payload(n: int, payload) -> ConvexCombination:
    terms = tuple((float(t["weight"]), frozenset(int(e) for e in t["set"]))
                  for t in payload)
    return ConvexCombination(n, terms)
