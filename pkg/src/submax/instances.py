"""Benchmark families: coverage, facility location, weighted-rank sums.

Each family carries its own decomposition with a closed-form concave part
and a curvature bound, plus a seeded generator and JSON round-tripping so
runs are reproducible from the instance file alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .decompose import (Decomposition, HessianBounds,
                        build_quadratic_decomposition, h_curvature,
                        hessian_upper_bounds, residual_oracle,
                        trivial_curvature_decomposition, DEFAULT_GAMMA_CAP)
from .mconcave import (ModularPlusIndicator, PartitionMatroid, UniformMatroid,
                       WeightedMatroidRank, matroid_from_payload, matroid_rank)
from .setfn import SetFunctionOracle, as_mask, total_curvature

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# coverage


@dataclass(frozen=True)
class CoverageInstance:
    """Bipartite coverage: each point v contributes 1 once a neighbor is picked."""

    n: int
    cover: tuple  # one frozenset of ground elements per point

    def __post_init__(self):
        for i, nb in enumerate(self.cover):
            if not nb:
                raise ValueError(f"point {i} has an empty neighborhood")
            if any(not 0 <= e < self.n for e in nb):
                raise ValueError(f"point {i} references elements outside the ground set")

    def masks(self):
        return [as_mask(nb, self.n) for nb in self.cover]


def coverage_function(inst: CoverageInstance) -> SetFunctionOracle:
    masks = inst.masks()

    def ev(S):
        m = as_mask(S, inst.n)
        return float(sum(1 for nm in masks if nm & m))

    return SetFunctionOracle(inst.n, ev, name="coverage", normalize=False)


def coverage_pair_counts(inst: CoverageInstance) -> HessianBounds:
    """Exact Hessian bound: -(number of points whose neighborhood is {i, j})."""
    return hessian_upper_bounds(None, "coverage", cover_masks=inst.masks(),
                                n=inst.n)


def coverage_decompose(inst: CoverageInstance, **kwargs) -> Decomposition:
    f = coverage_function(inst)
    dec = build_quadratic_decomposition(f, "coverage",
                                        cover_masks=inst.masks(), **kwargs)
    return dec


# ---------------------------------------------------------------------------
# facility location


@dataclass(frozen=True)
class FacilityLocationInstance:
    """Revenue matrix: customer i earns its best open facility, w >= 0."""

    weights: np.ndarray  # customers x facilities

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] < 1:
            raise ValueError("need a 2-d matrix with at least one customer")
        if W.min() < 0:
            raise ValueError("revenues must be nonnegative")
        object.__setattr__(self, "weights", W)

    @property
    def n(self) -> int:
        return self.weights.shape[1]


def facility_function(inst: FacilityLocationInstance) -> SetFunctionOracle:
    W = inst.weights
    n = inst.n

    def ev(S):
        m = as_mask(S, n)
        if m == 0:
            return 0.0
        cols = [j for j in range(n) if m >> j & 1]
        return float(W[:, cols].max(axis=1).sum())

    return SetFunctionOracle(n, ev, name="facility", normalize=False)


def fl_decompose(inst: FacilityLocationInstance, *,
                 gamma_cap: int = DEFAULT_GAMMA_CAP) -> Decomposition:
    """Pull each customer's worst-case revenue into an indicator term.

    For nonempty X, max_j w_ij = w_i_min + max_j (w_ij - w_i_min), so the
    sum of row minima rides an indicator [X nonempty] and the remaining
    reduced-weight objective splits into its top-marginal modular part
    (into h) and a residual (into g).
    """
    W = inst.weights
    n = inst.n
    f = facility_function(inst)
    w_min = W.min(axis=1)
    w_max = W.max(axis=1)
    Wbar = W - w_min[:, None]

    red = facility_function(FacilityLocationInstance(Wbar))
    full = (1 << n) - 1
    red_full = red.eval_mask(full)
    ell = np.array([max(0.0, red_full - red.eval_mask(full ^ (1 << j)))
                    for j in range(n)])
    h = ModularPlusIndicator(ell, float(w_min.sum()))
    g = residual_oracle(f, h)
    c = total_curvature(f).c
    gamma = h_curvature(f, h) if n <= gamma_cap else None
    meta = {"w_min_sum": float(w_min.sum()), "w_max_sum": float(w_max.sum())}
    if w_max.sum() > 0:
        meta["gamma_bound"] = float(c - w_min.sum() / w_max.sum())
        if gamma is not None:
            meta["bound_holds"] = bool(gamma <= meta["gamma_bound"] + 1e-9)
    return Decomposition(n, g, h, c, gamma, "facility-location", meta)


def fl_to_wrs(inst: FacilityLocationInstance) -> "WRSInstance":
    """One rank-1 term per customer: picking the best facility is a rank-1 greedy."""
    n = inst.n
    terms = tuple((1.0, UniformMatroid(n, 1), inst.weights[i].copy())
                  for i in range(inst.weights.shape[0]))
    return WRSInstance(n, terms)


# ---------------------------------------------------------------------------
# weighted rank sums


@dataclass(frozen=True)
class WRSInstance:
    """Mixture sum_t coef_t * (max-weight independent set in X under M_t)."""

    n: int
    terms: tuple  # (coef > 0, Matroid, weights >= 0) per term

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one term")
        for coef, M, w in self.terms:
            if coef <= 0:
                raise ValueError("mixture coefficients must be positive")
            if M.n != self.n:
                raise ValueError("all matroids must share the ground set")
            if np.asarray(w, dtype=float).min() < 0:
                raise ValueError("weights must be nonnegative")

    def folded(self):
        """Coefficients folded into the weights; list of (Matroid, weights)."""
        return [(M, coef * np.asarray(w, dtype=float))
                for coef, M, w in self.terms]


def wrs_function(inst: WRSInstance) -> SetFunctionOracle:
    parts = [WeightedMatroidRank(M, w) for M, w in inst.folded()]

    def ev(S):
        m = as_mask(S, inst.n)
        return float(sum(p.value_mask(m) for p in parts))

    return SetFunctionOracle(inst.n, ev, name="wrs", normalize=False)


def _is_indicator_rank(M) -> bool:
    """rank(X) = [X nonempty]: full rank 1 and no loops."""
    n = M.n
    if matroid_rank(M, frozenset(range(n))) != 1:
        return False
    return all(matroid_rank(M, frozenset([i])) == 1 for i in range(n))


def wrs_decompose(inst: WRSInstance, *,
                  gamma_cap: int = DEFAULT_GAMMA_CAP) -> Decomposition:
    """Reduced-weight split of a weighted-rank mixture.

    A term's minimum weight can ride the [X nonempty] indicator only when
    that term's rank function is itself an indicator (rank 1, no loops);
    for those terms the weights are reduced by their minimum.  Higher-rank
    terms keep their weights: reducing them would change the function by
    w_min * rank(X), which an indicator cannot represent.  The reduced sum's
    top marginals form the modular part of h and the residual goes to g, so
    g + h = f holds exactly.
    """
    n = inst.n
    f = wrs_function(inst)
    reduced = []
    extracted = 0.0
    literal_min = 0.0
    literal_max = 0.0
    for M, w in inst.folded():
        if matroid_rank(M, frozenset(range(n))) == 0:
            raise ValueError("terms must have rank at least 1")
        literal_min += float(w.min())
        literal_max += float(w.max())
        if _is_indicator_rank(M):
            m = float(w.min())
            extracted += m
            reduced.append(WeightedMatroidRank(M, w - m))
        else:
            reduced.append(WeightedMatroidRank(M, w))

    def red_ev(S):
        m = as_mask(S, n)
        return float(sum(p.value_mask(m) for p in reduced))

    red = SetFunctionOracle(n, red_ev, name="wrs-reduced", normalize=False)
    full = (1 << n) - 1
    red_full = red.eval_mask(full)
    ell = np.array([max(0.0, red_full - red.eval_mask(full ^ (1 << j)))
                    for j in range(n)])
    h = ModularPlusIndicator(ell, extracted)
    g = residual_oracle(f, h)
    c = total_curvature(f).c
    gamma = h_curvature(f, h) if n <= gamma_cap else None
    meta = {"extracted_min_sum": extracted, "weight_min_sum": literal_min,
            "weight_max_sum": literal_max}
    if literal_max > 0:
        meta["gamma_bound"] = float(c - literal_min / literal_max)
        if gamma is not None:
            meta["bound_holds"] = bool(gamma <= meta["gamma_bound"] + 1e-9)
    return Decomposition(n, g, h, c, gamma, "weighted-rank-sum", meta)


def wrs_dominant_decompose(inst: WRSInstance, *,
                           gamma_cap: int = DEFAULT_GAMMA_CAP) -> Decomposition:
    """Keep the heaviest mixture term whole as h; everything else is g.

    A single weighted rank function passes the exchange check outright, so
    when one coefficient dominates the mixture this h hugs f closely and
    gamma is at most the non-dominant share (for mixtures whose terms
    dominate each other pointwise).
    """
    n = inst.n
    coefs = np.array([c for c, _, _ in inst.terms], dtype=float)
    star = int(np.argmax(coefs))
    _, M, w = inst.terms[star]
    h = WeightedMatroidRank(M, coefs[star] * np.asarray(w, dtype=float))
    f = wrs_function(inst)
    g = residual_oracle(f, h)
    c = total_curvature(f).c
    gamma = h_curvature(f, h) if n <= gamma_cap else None
    share = float(coefs[star] / coefs.sum())
    return Decomposition(n, g, h, c, gamma, "wrs-dominant",
                         {"dominant_index": star, "dominant_share": share,
                          "offdominant_share": 1.0 - share})


# ---------------------------------------------------------------------------
# generation

# Generated weights are small integers: golden tests stay exact and the
# curvature values come out rational.


def generate(family: str, params: dict, seed: int):
    if family == "coverage":
        return _gen_coverage(seed=seed, **params)
    if family == "facility":
        return _gen_facility(seed=seed, **params)
    if family == "wrs":
        return _gen_wrs(seed=seed, **params)
    raise ValueError(f"unknown family {family!r}")


def _gen_coverage(n: int = 10, points: int = 20, density: float = 0.3, *,
                  seed: int = 0) -> CoverageInstance:
    rng = np.random.default_rng([seed, 0])
    cover = []
    for _ in range(points):
        picks = np.flatnonzero(rng.random(n) < density)
        if len(picks) == 0:
            picks = [int(rng.integers(n))]
        cover.append(frozenset(int(e) for e in picks))
    return CoverageInstance(n, tuple(cover))


def _gen_facility(n: int = 8, customers: int = 5, w_max: int = 10, *,
                  seed: int = 0) -> FacilityLocationInstance:
    rng = np.random.default_rng([seed, 1])
    W = rng.integers(0, w_max + 1, size=(customers, n)).astype(float)
    for i in range(customers):
        if W[i].max() == 0:
            W[i, int(rng.integers(n))] = 1.0
    return FacilityLocationInstance(W)


def _gen_wrs(n: int = 8, terms: int = 3, w_max: int = 9, *,
             seed: int = 0) -> WRSInstance:
    rng = np.random.default_rng([seed, 2])
    out = []
    for t in range(terms):
        coef = float(rng.integers(1, 4))
        w = rng.integers(0, w_max + 1, size=n).astype(float)
        if w.max() == 0:
            w[int(rng.integers(n))] = 1.0
        if rng.random() < 0.5:
            M = UniformMatroid(n, int(rng.integers(1, n + 1)))
        else:
            blocks, caps = _random_partition(rng, n)
            M = PartitionMatroid(n, blocks, caps)
        if matroid_rank(M, frozenset(range(n))) >= 2:
            # keep the reduced-weight identity exact: a higher-rank term
            # must carry a zero weight so nothing rides the indicator
            w[int(rng.integers(n))] = 0.0
            if w.max() == 0:
                w[int(rng.integers(n))] = 1.0
        out.append((coef, M, w))
    return WRSInstance(n, tuple(out))


def _random_partition(rng, n: int):
    nblocks = int(rng.integers(2, max(3, n // 2) + 1))
    labels = rng.integers(0, nblocks, size=n)
    # every block must be nonempty for the partition to cover the ground set
    blocks = []
    caps = []
    for b in range(nblocks):
        members = frozenset(int(i) for i in np.flatnonzero(labels == b))
        if members:
            blocks.append(members)
            caps.append(int(rng.integers(1, len(members) + 1)))
    if len(blocks) == 1:
        half = n // 2 or 1
        blocks = [frozenset(range(half)), frozenset(range(half, n))]
        blocks = [b for b in blocks if b]
        caps = [1 for _ in blocks]
    return tuple(blocks), tuple(caps)


def family_decomposition(inst, method: str = "family", **kwargs) -> Decomposition:
    """Dispatch an instance to its bespoke decomposition (or a generic one)."""
    f = instance_function(inst)
    if method == "trivial":
        return trivial_curvature_decomposition(f, **kwargs)
    if method == "quadratic":
        if isinstance(inst, CoverageInstance):
            return build_quadratic_decomposition(
                f, "coverage", cover_masks=inst.masks(), **kwargs)
        return build_quadratic_decomposition(f, "generic", **kwargs)
    if method != "family":
        raise ValueError(f"unknown decomposition method {method!r}")
    if isinstance(inst, CoverageInstance):
        return coverage_decompose(inst, **kwargs)
    if isinstance(inst, FacilityLocationInstance):
        return fl_decompose(inst, **kwargs)
    if isinstance(inst, WRSInstance):
        return wrs_decompose(inst, **kwargs)
    raise TypeError(f"no decomposition for {type(inst).__name__}")


def instance_function(inst) -> SetFunctionOracle:
    if isinstance(inst, CoverageInstance):
        return coverage_function(inst)
    if isinstance(inst, FacilityLocationInstance):
        return facility_function(inst)
    if isinstance(inst, WRSInstance):
        return wrs_function(inst)
    raise TypeError(f"no oracle for {type(inst).__name__}")


# ---------------------------------------------------------------------------
# serialization


def instance_to_payload(inst, seed: Optional[int] = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION}
    if seed is not None:
        doc["seed"] = seed
    if isinstance(inst, CoverageInstance):
        doc.update(family="coverage", n=inst.n,
                   cover=[sorted(nb) for nb in inst.cover])
    elif isinstance(inst, FacilityLocationInstance):
        doc.update(family="facility", n=inst.n,
                   weights=[list(map(float, row)) for row in inst.weights])
    elif isinstance(inst, WRSInstance):
        doc.update(family="wrs", n=inst.n, terms=[
            {"coef": float(c), "matroid": M.to_payload(),
             "weights": list(map(float, w))} for c, M, w in inst.terms])
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    return doc


def instance_from_payload(doc: dict):
    fam = doc.get("family")
    if fam == "coverage":
        return CoverageInstance(doc["n"],
                                tuple(frozenset(nb) for nb in doc["cover"]))
    if fam == "facility":
        return FacilityLocationInstance(np.asarray(doc["weights"], dtype=float))
    if fam == "wrs":
        terms = tuple((float(t["coef"]), matroid_from_payload(t["matroid"]),
                       np.asarray(t["weights"], dtype=float))
                      for t in doc["terms"])
        return WRSInstance(doc["n"], terms)
    raise ValueError(f"unknown family {fam!r}")


def save_instance(inst, path, seed: Optional[int] = None) -> None:
    Path(path).write_text(
        json.dumps(instance_to_payload(inst, seed), sort_keys=True, indent=2)
        + "\n")


def load_instance(path):
    return instance_from_payload(json.loads(Path(path).read_text()))
