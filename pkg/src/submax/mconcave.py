"""Gross-substitutes style concave set functions and their exchange structure.

The classes here model the tractable pieces that optimization routines lean
on: sums of concave functions over a laminar family, weighted matroid ranks,
ultrametric-interaction quadratics, and the modular-plus-indicator special
case.  Each class validates its defining structure at construction and can
round-trip through a JSON payload.

Two operational facts about this family drive the rest of the package:

* a local exchange step between two equal-size sets can always be completed
  without losing value (``exchange_partner``), which is what makes the
  rounding stage lossless in expectation, and
* adding a modular term keeps the family closed, so a greedy sweep maximizes
  ``w . 1_X + mu * h(X)`` exactly over sets of a fixed size
  (``greedy_max_card``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .setfn import (TOL, CapExceededError, SetFunctionOracle, as_mask, iter_bits,
                    mask_to_set, popcount)


class MNatIntegrityError(RuntimeError):
    """A structural guarantee of the concave-part class failed at runtime."""


# ---------------------------------------------------------------------------
# matroids


class UniformMatroid:
    """Independent sets are all subsets of size <= rank."""

    kind = "uniform"

    def __init__(self, n: int, rank: int):
        if not 0 <= rank <= n:
            raise ValueError(f"rank {rank} outside [0, {n}]")
        self.n = n
        self.rank = rank

    def rank_mask(self, mask: int) -> int:
        return min(popcount(mask), self.rank)

    def to_payload(self) -> dict:
        return {"kind": "uniform", "n": self.n, "rank": self.rank}


class PartitionMatroid:
    """At most capacity[t] elements from block t; blocks partition the ground set."""

    kind = "partition"

    def __init__(self, n: int, blocks: Sequence[Sequence[int]],
                 capacities: Sequence[int]):
        if len(blocks) != len(capacities):
            raise ValueError("one capacity per block required")
        self.n = n
        self.block_masks = tuple(as_mask(b, n) for b in blocks)
        self.capacities = tuple(int(c) for c in capacities)
        union = 0
        for m in self.block_masks:
            if union & m:
                raise ValueError("blocks must be disjoint")
            union |= m
        if union != (1 << n) - 1:
            raise ValueError("blocks must cover the ground set")
        for c in self.capacities:
            if c < 0:
                raise ValueError("capacities must be nonnegative")

    def rank_mask(self, mask: int) -> int:
        return sum(min(popcount(mask & bm), c)
                   for bm, c in zip(self.block_masks, self.capacities))

    def to_payload(self) -> dict:
        return {"kind": "partition", "n": self.n,
                "blocks": [sorted(iter_bits(m)) for m in self.block_masks],
                "capacities": list(self.capacities)}


class RankOracleMatroid:
    """Matroid given by an arbitrary rank callable on masks (not serializable)."""

    kind = "rank_oracle"

    def __init__(self, n: int, rank_fn):
        self.n = n
        self._rank_fn = rank_fn

    def rank_mask(self, mask: int) -> int:
        return int(self._rank_fn(mask))

    def to_payload(self) -> dict:
        raise TypeError("rank-oracle matroids have no serializable payload")


def matroid_from_payload(payload: dict):
    kind = payload["kind"]
    if kind == "uniform":
        return UniformMatroid(payload["n"], payload["rank"])
    if kind == "partition":
        return PartitionMatroid(payload["n"], payload["blocks"], payload["capacities"])
    raise ValueError(f"unknown matroid kind {kind!r}")


def matroid_rank(matroid, subset) -> int:
    return matroid.rank_mask(as_mask(subset, matroid.n))


def verify_matroid_rank(matroid, *, cap: int = 12):
    """Check the rank axioms exhaustively: r(0)=0, unit steps, submodularity.

    Returns (True, None) or (False, reason-string).
    """
    n = matroid.n
    if n > cap:
        raise CapExceededError(f"rank axiom check over n={n} exceeds cap {cap}")
    size = 1 << n
    r = np.empty(size, dtype=np.int64)
    for m in range(size):
        r[m] = matroid.rank_mask(m)
    if r[0] != 0:
        return False, "rank of the empty set must be 0"
    masks = np.arange(size)
    for i in range(n):
        bi = 1 << i
        base = masks[(masks & bi) == 0]
        step = r[base | bi] - r[base]
        if np.any(step < 0) or np.any(step > 1):
            return False, f"rank must grow by 0 or 1 when adding element {i}"
    for i in range(n):
        bi = 1 << i
        for j in range(i + 1, n):
            bj = 1 << j
            base = masks[(masks & (bi | bj)) == 0]
            second = r[base | bi | bj] + r[base] - r[base | bi] - r[base | bj]
            if np.any(second > 0):
                return False, f"rank is not submodular on pair ({i}, {j})"
    return True, None


def max_weight_independent(matroid, weights, restrict=None):
    """Greedy max-weight independent subset of ``restrict`` (default: everything).

    Weights must be nonnegative; zero-weight elements are never taken, and
    weight ties are broken toward the smaller index.  Returns (mask, value).
    """
    n = matroid.n
    w = np.asarray(weights, dtype=float)
    if len(w) != n:
        raise ValueError("one weight per ground element required")
    if np.any(w < -TOL):
        raise ValueError("weights must be nonnegative")
    pool = (1 << n) - 1 if restrict is None else as_mask(restrict, n)
    idx = [i for i in iter_bits(pool) if w[i] > TOL]
    idx.sort(key=lambda i: (-w[i], i))
    chosen = 0
    rank = 0
    value = 0.0
    for i in idx:
        cand = chosen | 1 << i
        nr = matroid.rank_mask(cand)
        if nr > rank:
            chosen = cand
            rank = nr
            value += w[i]
    return chosen, value


# ---------------------------------------------------------------------------
# concave-part function classes


class MNatConcaveFn:
    """Base class: a set function with the equal-size exchange guarantee."""

    kind = "abstract"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("ground set must have at least one element")
        self.n = int(n)
        self._table: Optional[np.ndarray] = None

    def value_mask(self, mask: int) -> float:
        raise NotImplementedError

    def value(self, subset) -> float:
        return self.value_mask(as_mask(subset, self.n))

    def __call__(self, subset) -> float:
        return self.value(subset)

    def table(self, cap: int = 16) -> np.ndarray:
        """All 2^n values, mask-indexed; built once and memoized."""
        if self._table is None:
            if self.n > cap:
                raise CapExceededError(
                    f"value table for n={self.n} exceeds enumeration cap {cap}")
            self._table = np.array([self.value_mask(m) for m in range(1 << self.n)])
        return self._table

    def as_oracle(self, name: str = "h") -> SetFunctionOracle:
        return SetFunctionOracle(self.n, lambda S: self.value_mask(as_mask(S)),
                                 name=name, normalize=False)

    def to_payload(self) -> dict:
        raise NotImplementedError


class LaminarConcave(MNatConcaveFn):
    """Sum of concave functions of intersection sizes over a laminar family.

    ``terms`` is a sequence of (subset, values) pairs where values[t] is the
    contribution when t elements of the subset are present.  Each values
    sequence must start at 0 and have nonincreasing increments; the subsets
    must be pairwise nested or disjoint.
    """

    kind = "laminar"

    def __init__(self, n: int, terms):
        super().__init__(n)
        parsed = []
        for subset, values in terms:
            mask = as_mask(subset, n)
            vals = np.asarray(values, dtype=float)
            if len(vals) != popcount(mask) + 1:
                raise ValueError("need one value per possible intersection size")
            if abs(vals[0]) > TOL:
                raise ValueError("term value at size 0 must be 0")
            diffs = np.diff(vals)
            if len(diffs) > 1 and np.any(np.diff(diffs) > TOL):
                raise ValueError("term increments must be nonincreasing")
            parsed.append((mask, vals))
        for a in range(len(parsed)):
            for b in range(a + 1, len(parsed)):
                ma, mb = parsed[a][0], parsed[b][0]
                inter = ma & mb
                if inter and inter != ma and inter != mb:
                    raise ValueError("subsets must be pairwise nested or disjoint")
        self.terms = tuple(parsed)

    def value_mask(self, mask: int) -> float:
        return float(sum(vals[popcount(mask & m)] for m, vals in self.terms))

    def to_payload(self) -> dict:
        return {"kind": "laminar", "n": self.n,
                "terms": [{"set": sorted(iter_bits(m)), "values": vals.tolist()}
                          for m, vals in self.terms]}


class WeightedMatroidRank(MNatConcaveFn):
    """h(X) = max-weight independent subset of X, with nonnegative weights."""

    kind = "weighted_matroid_rank"

    def __init__(self, matroid, weights):
        super().__init__(matroid.n)
        self.matroid = matroid
        self.weights = np.asarray(weights, dtype=float)
        if len(self.weights) != self.n:
            raise ValueError("one weight per ground element required")
        if np.any(self.weights < -TOL):
            raise ValueError("weights must be nonnegative")
        self.weights = np.maximum(self.weights, 0.0)
        # precomputed descending-weight order shared by every evaluation
        self._order = sorted(range(self.n), key=lambda i: (-self.weights[i], i))

    def value_mask(self, mask: int) -> float:
        m = self.matroid
        if isinstance(m, UniformMatroid):
            w = sorted((self.weights[i] for i in iter_bits(mask)), reverse=True)
            return float(sum(w[:m.rank]))
        if isinstance(m, PartitionMatroid):
            total = 0.0
            for bm, c in zip(m.block_masks, m.capacities):
                w = sorted((self.weights[i] for i in iter_bits(mask & bm)),
                           reverse=True)
                total += sum(w[:c])
            return float(total)
        chosen = 0
        rank = 0
        value = 0.0
        for i in self._order:
            if not mask >> i & 1 or self.weights[i] <= TOL:
                continue
            cand = chosen | 1 << i
            nr = m.rank_mask(cand)
            if nr > rank:
                chosen = cand
                rank = nr
                value += self.weights[i]
        return value

    def to_payload(self) -> dict:
        return {"kind": "weighted_matroid_rank", "n": self.n,
                "weights": self.weights.tolist(),
                "matroid": self.matroid.to_payload()}


class QuadraticMNat(MNatConcaveFn):
    """Quadratic set function h(X) = (1/2) 1_X^T A 1_X with A symmetric.

    Valid only when every off-diagonal entry is nonpositive and every
    off-diagonal triple attains its maximum at least twice, i.e.
    A_ij <= max(A_ik, A_jk) for distinct i, j, k.  That is the interaction
    pattern of a hierarchy: pairs deeper in a common cluster interact more
    negatively.  The diagonal is unconstrained and carries the linear part
    (the marginal of a singleton is A_ii / 2).
    """

    kind = "quadratic"

    def __init__(self, matrix, *, validate: bool = True):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("quadratic form requires a square matrix")
        n = A.shape[0]
        super().__init__(n)
        if validate:
            if not np.allclose(A, A.T, atol=TOL):
                raise ValueError("matrix must be symmetric")
            off = A[~np.eye(n, dtype=bool)]
            if off.size and np.max(off) > TOL:
                raise ValueError("off-diagonal entries must be nonpositive")
            bad = find_hierarchy_violation(A)
            if bad is not None:
                i, j, k = bad
                raise ValueError(
                    f"triple ({i}, {j}, {k}) breaks the hierarchy pattern: "
                    f"A[{i},{j}] exceeds both other interactions")
        self.matrix = A.copy()

    def value_mask(self, mask: int) -> float:
        idx = list(iter_bits(mask))
        if not idx:
            return 0.0
        sub = self.matrix[np.ix_(idx, idx)]
        return float(0.5 * sub.sum())

    def table(self, cap: int = 16) -> np.ndarray:
        if self._table is None:
            if self.n > cap:
                raise CapExceededError(
                    f"value table for n={self.n} exceeds enumeration cap {cap}")
            masks = np.arange(1 << self.n)
            ind = (masks[:, None] >> np.arange(self.n)[None, :]) & 1
            ind = ind.astype(float)
            self._table = 0.5 * np.einsum("mi,ij,mj->m", ind, self.matrix, ind)
        return self._table

    def to_payload(self) -> dict:
        return {"kind": "quadratic", "n": self.n, "matrix": self.matrix.tolist()}


def find_hierarchy_violation(A: np.ndarray, tol: float = TOL):
    """First (i, j, k) whose off-diagonal triple attains its maximum only once.

    Returns None when A_ij <= max(A_ik, A_jk) holds for all distinct triples
    (vacuously for n <= 2).
    """
    n = len(A)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                vals = sorted((A[i, j], A[i, k], A[j, k]))
                if vals[2] - vals[1] > tol:
                    return (i, j, k)
    return None


class ModularPlusIndicator(MNatConcaveFn):
    """h(X) = ell . 1_X + c0 * [X nonempty], with ell >= 0 and c0 >= 0."""

    kind = "modular_plus_indicator"

    def __init__(self, ell, c0: float):
        ell = np.asarray(ell, dtype=float)
        super().__init__(len(ell))
        if np.any(ell < -TOL):
            raise ValueError("linear coefficients must be nonnegative")
        if c0 < -TOL:
            raise ValueError("indicator weight must be nonnegative")
        self.ell = np.maximum(ell, 0.0)
        self.c0 = max(float(c0), 0.0)

    def value_mask(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        return float(sum(self.ell[i] for i in iter_bits(mask)) + self.c0)

    def table(self, cap: int = 16) -> np.ndarray:
        if self._table is None:
            if self.n > cap:
                raise CapExceededError(
                    f"value table for n={self.n} exceeds enumeration cap {cap}")
            masks = np.arange(1 << self.n)
            ind = ((masks[:, None] >> np.arange(self.n)[None, :]) & 1).astype(float)
            self._table = ind @ self.ell + self.c0 * (masks > 0)
        return self._table

    def to_payload(self) -> dict:
        return {"kind": "modular_plus_indicator", "n": self.n,
                "linear": self.ell.tolist(), "constant": self.c0}


class ExplicitSetFunction(MNatConcaveFn):
    """Unvalidated table-backed set function; use the exchange check to vet it."""

    kind = "table"

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        size = len(values)
        n = size.bit_length() - 1
        if 1 << n != size:
            raise ValueError("table length must be a power of two")
        super().__init__(n)
        self._table = values

    def value_mask(self, mask: int) -> float:
        return float(self._table[mask])

    def table(self, cap: int = 16) -> np.ndarray:
        return self._table

    def to_payload(self) -> dict:
        return {"kind": "table", "n": self.n, "values": self._table.tolist()}


def fn_from_payload(payload: dict) -> MNatConcaveFn:
    kind = payload["kind"]
    if kind == "laminar":
        return LaminarConcave(payload["n"],
                              [(t["set"], t["values"]) for t in payload["terms"]])
    if kind == "weighted_matroid_rank":
        return WeightedMatroidRank(matroid_from_payload(payload["matroid"]),
                                   payload["weights"])
    if kind == "quadratic":
        return QuadraticMNat(payload["matrix"])
    if kind == "modular_plus_indicator":
        return ModularPlusIndicator(payload["linear"], payload["constant"])
    if kind == "table":
        return ExplicitSetFunction(payload["values"])
    raise ValueError(f"unknown function kind {kind!r}")


# ---------------------------------------------------------------------------
# exchange structure


@dataclass(frozen=True)
class ExchangeViolation:
    """A pair (X, Y) and element i in X \\ Y with no valid exchange move."""

    X: frozenset
    Y: frozenset
    i: int


def _value_table_of(h, cap: int) -> np.ndarray:
    if isinstance(h, np.ndarray):
        return h
    if isinstance(h, MNatConcaveFn):
        return h.table(cap)
    if isinstance(h, SetFunctionOracle):
        return h.value_table(cap)
    raise TypeError(f"cannot tabulate {type(h).__name__}")


def check_exchange_property(h, *, cap: int = 10, tol: float = TOL):
    """Exhaustively test the exchange axiom for every (X, Y, i in X \\ Y).

    The axiom demands h(X) + h(Y) <= h(X - i) + h(Y + i), or some j in Y \\ X
    with h(X) + h(Y) <= h(X - i + j) + h(Y + i - j).  Returns (True, None) or
    (False, ExchangeViolation); among violations, the one with the smallest
    (Y, X, i) -- comparing sets as bitmasks -- is reported.
    """
    t = _value_table_of(h, cap)
    n = len(t).bit_length() - 1
    if n > cap:
        raise CapExceededError(f"exchange check over n={n} exceeds cap {cap}")
    masks = np.arange(1 << n)
    found = []  # (Ymask, Xmask, i)
    for i in range(n):
        bi = 1 << i
        X = masks[(masks & bi) != 0]
        Y = masks[(masks & bi) == 0]
        lhs = t[X][:, None] + t[Y][None, :]
        rhs = t[X ^ bi][:, None] + t[Y | bi][None, :]
        ok = lhs <= rhs + tol
        for j in range(n):
            if j == i or ok.all():
                continue
            bj = 1 << j
            valid = ((X & bj) == 0)[:, None] & ((Y & bj) != 0)[None, :]
            swap = t[(X ^ bi) | bj][:, None] + t[(Y | bi) ^ bj][None, :]
            ok |= valid & (lhs <= swap + tol)
        bad_x, bad_y = np.nonzero(~ok)
        for a, b in zip(bad_x, bad_y):
            found.append((int(Y[b]), int(X[a]), i))
    if not found:
        return True, None
    ymask, xmask, i = min(found)
    return False, ExchangeViolation(X=mask_to_set(xmask), Y=mask_to_set(ymask), i=i)


def exchange_partner(h: MNatConcaveFn, Xa, Xb, i: int) -> int:
    """Smallest j in Xb \\ Xa with h(Xa - i + j) + h(Xb + i - j) >= h(Xa) + h(Xb).

    Xa and Xb must have equal size and i must lie in Xa \\ Xb.  For a valid
    concave-part function such a j always exists; failure to find one means
    the function lost its exchange structure and raises MNatIntegrityError.
    """
    ma = as_mask(Xa, h.n)
    mb = as_mask(Xb, h.n)
    if popcount(ma) != popcount(mb):
        raise ValueError("exchange requires equal-size sets")
    if not (ma >> i & 1) or (mb >> i & 1):
        raise ValueError(f"element {i} must lie in the first set only")
    bi = 1 << i
    target = h.value_mask(ma) + h.value_mask(mb)
    for j in iter_bits(mb & ~ma):
        bj = 1 << j
        if h.value_mask((ma ^ bi) | bj) + h.value_mask((mb | bi) ^ bj) >= target - TOL:
            return j
    raise MNatIntegrityError(
        f"no value-preserving exchange for element {i} between "
        f"{sorted(iter_bits(ma))} and {sorted(iter_bits(mb))}")


# ---------------------------------------------------------------------------
# greedy maximization


def combo_greedy(grad, h: MNatConcaveFn, mu: float, k: int):
    """Maximize grad . 1_X + mu * h(X) over |X| = k exactly (mu >= 0).

    The objective is modular plus a scaled concave part, so the incremental
    greedy sweep is exact on every cardinality level.  Ties go to the smaller
    index.  Returns (mask, value).
    """
    n = h.n
    grad = np.asarray(grad, dtype=float)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    if k == 0:
        return 0, 0.0
    if isinstance(h, ModularPlusIndicator):
        scores = grad + mu * h.ell
        order = np.lexsort((np.arange(n), -scores))
        mask = 0
        for i in order[:k]:
            mask |= 1 << int(i)
        return mask, float(scores[order[:k]].sum() + mu * h.c0)
    mask = 0
    value = 0.0
    h_cur = 0.0
    for _ in range(k):
        best_gain = None
        best_i = -1
        best_h = 0.0
        for i in range(n):
            if mask >> i & 1:
                continue
            h_new = h.value_mask(mask | 1 << i)
            gain = grad[i] + mu * (h_new - h_cur)
            if best_gain is None or gain > best_gain + TOL:
                best_gain = gain
                best_i = i
                best_h = h_new
        mask |= 1 << best_i
        value += best_gain
        h_cur = best_h
    return mask, value


def greedy_max_card(h: MNatConcaveFn, weights, k: int):
    """Exact maximizer of w . 1_X + h(X) over |X| = k.  Returns (frozenset, value)."""
    mask, value = combo_greedy(weights, h, 1.0, k)
    return mask_to_set(mask), value
