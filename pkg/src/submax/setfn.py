"""Ground set and set-function oracle primitives.

The ground set is {0, ..., n-1}.  Subsets cross the public API as iterables of
indices (sets, frozensets, tuples) and are handled internally as integer
bitmasks, which keeps brute-force enumeration and table-backed evaluation
cheap at desk scale.  All real-valued comparisons in this package use the
absolute tolerance ``TOL`` unless a caller overrides it.

Every value oracle is normalized so that f(empty) = 0; instances whose raw
callable violates this are shifted at construction.  Oracles count their
evaluations, so tests can pin exact call budgets (e.g. a curvature run needs
at most 2n + 2 evaluations).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Optional

import numpy as np

TOL = 1e-9
DEFAULT_ENUM_CAP = 20
DEFAULT_CHECK_CAP = 12


class CapExceededError(ValueError):
    """Raised when an enumeration-based routine is asked to exceed its cap."""


def as_mask(subset, n: Optional[int] = None) -> int:
    """Convert an iterable of element indices (or a mask) to a bitmask."""
    if isinstance(subset, (int, np.integer)):
        mask = int(subset)
        if mask < 0:
            raise ValueError("negative bitmask")
    else:
        mask = 0
        for e in subset:
            e = int(e)
            if e < 0:
                raise ValueError(f"negative element {e}")
            mask |= 1 << e
    if n is not None and mask >> n:
        raise ValueError(f"subset contains elements outside ground set of size {n}")
    return mask


def mask_to_set(mask: int) -> frozenset:
    return frozenset(iter_bits(mask))


def iter_bits(mask: int):
    """Yield the set bits of ``mask`` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return int(mask).bit_count()


def subsets_of_size(n: int, k: int):
    """Masks of all size-k subsets, in lexicographic order of sorted tuples."""
    for combo in combinations(range(n), k):
        m = 0
        for e in combo:
            m |= 1 << e
        yield m


@dataclass(frozen=True)
class GroundSet:
    """A finite ground set {0, ..., n-1}."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ground set must have at least one element")

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(range(self.n))

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1


class SetFunctionOracle:
    """Counting value oracle for a set function on {0, ..., n-1}.

    Parameters
    ----------
    n : size of the ground set.
    fn : callable mapping a frozenset of indices to a float.
    name : label used in diagnostics.
    normalize : when True (default) the value at the empty set is probed once
        at construction and subtracted from every subsequent evaluation.

    The oracle is pure: it never mutates its inputs, and the only internal
    state is the call counter (guarded by a lock so concurrent evaluation
    stays consistent) and a single optional memo table of all 2^n values.
    """

    def __init__(self, n: int, fn: Callable[[frozenset], float], *,
                 name: str = "f", normalize: bool = True):
        if n < 1:
            raise ValueError("ground set must have at least one element")
        self.n = int(n)
        self.name = name
        self._fn = fn
        self._lock = threading.Lock()
        self._calls = 0
        base = float(fn(frozenset()))
        self._count(1)
        if normalize:
            self._offset = base
            self.normalized = True
        else:
            self._offset = 0.0
            self.normalized = abs(base) <= TOL
        self._table: Optional[np.ndarray] = None

    @classmethod
    def from_table(cls, values, *, name: str = "f", normalize: bool = True) -> "SetFunctionOracle":
        """Oracle backed by an explicit table of 2^n values (mask-indexed)."""
        values = np.asarray(values, dtype=float)
        size = len(values)
        n = size.bit_length() - 1
        if 1 << n != size:
            raise ValueError("table length must be a power of two")
        oracle = cls(n, lambda S: float(values[as_mask(S)]), name=name, normalize=normalize)
        oracle._table = values - oracle._offset
        return oracle

    def _count(self, k: int):
        with self._lock:
            self._calls += k

    @property
    def calls(self) -> int:
        with self._lock:
            return self._calls

    def reset_calls(self):
        with self._lock:
            self._calls = 0

    def eval_mask(self, mask: int) -> float:
        self._count(1)
        return float(self._fn(mask_to_set(mask))) - self._offset

    def __call__(self, subset) -> float:
        return self.eval_mask(as_mask(subset, self.n))

    def value_table(self, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
        """All 2^n values as a mask-indexed array (built once, then memoized)."""
        if self._table is None:
            if self.n > cap:
                raise CapExceededError(
                    f"value table for n={self.n} exceeds enumeration cap {cap}")
            size = 1 << self.n
            vals = np.empty(size)
            fn = self._fn
            for m in range(size):
                vals[m] = fn(mask_to_set(m))
            self._count(size)
            self._table = vals - self._offset
        return self._table


def marginal(f: SetFunctionOracle, i: int, X) -> float:
    """Marginal gain f(X + i) - f(X); requires i not already in X.

    Uses two oracle calls, or a single call when X is empty and f is known
    to be normalized.
    """
    mask = as_mask(X, f.n)
    if not 0 <= i < f.n:
        raise ValueError(f"element {i} outside ground set")
    if mask >> i & 1:
        raise ValueError(f"element {i} already in base set")
    if mask == 0 and f.normalized:
        return f.eval_mask(1 << i)
    return f.eval_mask(mask | 1 << i) - f.eval_mask(mask)


@dataclass(frozen=True)
class CurvatureReport:
    """Total curvature c = 1 - min_i f(i | E - i) / f(i).

    Elements with f(i) = 0 are excluded from the minimum and listed in
    ``excluded``; their ratio entry is None.
    """

    c: float
    argmin_element: int
    per_element_ratios: tuple
    excluded: tuple


def total_curvature(f: SetFunctionOracle) -> CurvatureReport:
    """Compute total curvature with at most 2n + 2 oracle calls."""
    n = f.n
    full = (1 << n) - 1
    f_full = f.eval_mask(full)
    ratios = []
    excluded = []
    best = None
    best_i = -1
    for i in range(n):
        singleton = f.eval_mask(1 << i)
        if singleton <= TOL:
            ratios.append(None)
            excluded.append(i)
            continue
        top_marginal = f_full - f.eval_mask(full ^ (1 << i))
        r = top_marginal / singleton
        ratios.append(r)
        if best is None or r < best:
            best = r
            best_i = i
    if best is None:
        raise ValueError("total curvature undefined: every singleton has zero value")
    c = 1.0 - best
    c = min(1.0, max(0.0, c))
    return CurvatureReport(c=c, argmin_element=best_i,
                           per_element_ratios=tuple(ratios), excluded=tuple(excluded))


def brute_force_max(f: SetFunctionOracle, k: int, *, cap: int = DEFAULT_ENUM_CAP,
                    exact_size: bool = False):
    """Exhaustive maximizer of f over subsets of size <= k (or exactly k).

    Returns (subset, value) with the lexicographically smallest maximizer
    (compared as sorted index tuples) among values tied within TOL.
    """
    n = f.n
    if n > cap:
        raise CapExceededError(f"brute force over n={n} exceeds cap {cap}")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    best_v = -np.inf
    best_tup = None
    for mask in range(1 << n):
        pc = popcount(mask)
        if (pc != k) if exact_size else (pc > k):
            continue
        v = f.eval_mask(mask)
        tup = tuple(iter_bits(mask))
        if v > best_v + TOL:
            best_v = v
            best_tup = tup
        elif v > best_v - TOL and tup < best_tup:
            best_tup = tup
    return frozenset(best_tup), float(best_v)


@dataclass(frozen=True)
class Violation:
    """Witness of a failed monotonicity or submodularity check."""

    kind: str  # "monotonicity" or "submodularity"
    X: frozenset
    i: int
    j: Optional[int]
    value: float


def verify_monotone_submodular(f: SetFunctionOracle, *, cap: int = DEFAULT_CHECK_CAP,
                               tol: float = TOL):
    """Exhaustively check nonnegative marginals and nonpositive second differences.

    Returns (True, None) or (False, Violation) with the first violation found,
    scanning monotonicity (i ascending, X ascending by mask) before
    submodularity (i < j ascending, X ascending by mask).
    """
    t = f.value_table(cap)
    n = f.n
    masks = np.arange(1 << n)
    for i in range(n):
        bi = 1 << i
        without = masks[(masks & bi) == 0]
        diff = t[without | bi] - t[without]
        bad = np.nonzero(diff < -tol)[0]
        if len(bad):
            m = int(without[bad[0]])
            return False, Violation("monotonicity", mask_to_set(m), i, None,
                                    float(diff[bad[0]]))
    for i in range(n):
        bi = 1 << i
        for j in range(i + 1, n):
            bj = 1 << j
            base = masks[(masks & (bi | bj)) == 0]
            second = t[base | bi | bj] + t[base] - t[base | bi] - t[base | bj]
            bad = np.nonzero(second > tol)[0]
            if len(bad):
                m = int(base[bad[0]])
                return False, Violation("submodularity", mask_to_set(m), i, j,
                                        float(second[bad[0]]))
    return True, None
