"""Splitting a monotone submodular f into g + h with a quadratic concave part.

The pipeline: bound the discrete Hessian from above pairwise (exhaustively,
or by the closed form for coverage), fit those bounds by a matrix with the
hierarchy interaction pattern (every off-diagonal triple attains its maximum
at least twice) minimizing the worst-case gap, then complete the diagonal so
the residual g = f - h keeps nonnegative marginals.  The fitted pattern is
exactly an ultrametric in disguise, so it also unpacks into a laminar-family
representation.

Curvature accounting lives here too: the classical total-curvature
decomposition (h modular from top marginals) and the decomposition-specific
curvature gamma = 1 - min h/f that the optimizer's guarantee consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mconcave import (MNatConcaveFn, MNatIntegrityError, ModularPlusIndicator,
                       QuadraticMNat, LaminarConcave, check_exchange_property,
                       find_hierarchy_violation)
from .setfn import (TOL, CapExceededError, SetFunctionOracle, as_mask,
                    iter_bits, mask_to_set, popcount, total_curvature,
                    verify_monotone_submodular)

DEFAULT_HESSIAN_CAP = 10
DEFAULT_GAMMA_CAP = 14


def discrete_hessian(f: SetFunctionOracle, X, i: int, j: int) -> float:
    """Second difference f(X+i+j) + f(X) - f(X+i) - f(X+j); four oracle calls."""
    mask = as_mask(X, f.n)
    if i == j:
        raise ValueError("elements must be distinct")
    for e in (i, j):
        if not 0 <= e < f.n:
            raise ValueError(f"element {e} outside ground set")
        if mask >> e & 1:
            raise ValueError(f"element {e} already in base set")
    bi, bj = 1 << i, 1 << j
    return (f.eval_mask(mask | bi | bj) + f.eval_mask(mask)
            - f.eval_mask(mask | bi) - f.eval_mask(mask | bj))


@dataclass(frozen=True)
class HessianBounds:
    """Pairwise upper bounds H_ij >= Hess_f(X)_ij for all X; zero diagonal."""

    matrix: np.ndarray
    source: str  # "generic-bruteforce" | "coverage-closedform" | "user-supplied"


def hessian_upper_bounds(f: Optional[SetFunctionOracle] = None,
                         mode: str = "generic", *,
                         cover_masks=None, n: Optional[int] = None,
                         cap: int = DEFAULT_HESSIAN_CAP) -> HessianBounds:
    """Upper-bound the discrete Hessian pairwise.

    generic: exhaustive max over all X per pair (needs f, n <= cap).
    coverage: H_ij = - count of points covered by exactly {i, j}; exact
    because coverage Hessians are nondecreasing in X.
    """
    if mode == "generic":
        if f is None:
            raise ValueError("generic mode requires the function oracle")
        nn = f.n
        if nn > cap:
            raise CapExceededError(f"generic Hessian bounds for n={nn} exceed cap {cap}")
        t = f.value_table(cap)
        masks = np.arange(1 << nn)
        H = np.zeros((nn, nn))
        for i in range(nn):
            bi = 1 << i
            for j in range(i + 1, nn):
                bj = 1 << j
                base = masks[(masks & (bi | bj)) == 0]
                second = t[base | bi | bj] + t[base] - t[base | bi] - t[base | bj]
                H[i, j] = H[j, i] = min(0.0, float(second.max()))
        return HessianBounds(H, "generic-bruteforce")
    if mode == "coverage":
        if cover_masks is None:
            raise ValueError("coverage mode requires the neighborhood masks")
        if n is None:
            n = f.n if f is not None else max(m.bit_length() for m in cover_masks)
        H = np.zeros((n, n))
        for m in cover_masks:
            if popcount(m) == 2:
                bits = list(iter_bits(m))
                i, j = bits[0], bits[1]
                H[i, j] -= 1.0
                H[j, i] -= 1.0
        return HessianBounds(H, "coverage-closedform")
    raise ValueError(f"unknown Hessian bound mode {mode!r}")


@dataclass(frozen=True)
class UltrametricFit:
    """Off-diagonal fit A (zero diagonal) and its L-infinity distance to H."""

    matrix: np.ndarray
    error: float


def _closure_below(U: np.ndarray) -> np.ndarray:
    """Pointwise-largest hierarchy-pattern matrix <= U (off-diagonal, U <= 0).

    In distance form D = -A this is the max-min path closure of L = -U: a
    pair's entry must rise to the best bottleneck over all connecting paths,
    and that closure is the least such matrix above L.
    """
    L = -U.copy()
    np.fill_diagonal(L, 0.0)
    n = len(L)
    for k in range(n):
        L = np.maximum(L, np.minimum(L[:, k:k + 1], L[k:k + 1, :]))
    np.fill_diagonal(L, 0.0)
    return -L


def ultrametric_fit(H, tol: float = TOL) -> UltrametricFit:
    """Fit H by the closest hierarchy-pattern matrix in the L-infinity sense.

    The fit A satisfies H_ij <= A_ij <= 0 with every off-diagonal triple's
    maximum attained at least twice, minimizing max |A_ij - H_ij|.  Among
    optima the entrywise-largest one is returned (the unique closure of the
    upper box), which keeps the residual's submodularity slack maximal.

    The search is exact: feasibility of a radius eps is monotone and decided
    by closing the box ceiling min(0, H + eps) from below and comparing with
    H, and the optimal radius is one of the finitely many values where the
    box ordering can change.
    """
    if isinstance(H, HessianBounds):
        H = H.matrix
    H = np.asarray(H, dtype=float)
    n = len(H)
    if not np.allclose(H, H.T, atol=1e-7):
        raise ValueError("Hessian bounds must be symmetric")
    off_mask = ~np.eye(n, dtype=bool)
    if n >= 2 and np.max(H[off_mask]) > tol:
        raise ValueError("Hessian bounds must be nonpositive off the diagonal")
    Hc = np.minimum(H, 0.0)
    np.fill_diagonal(Hc, 0.0)
    if n <= 2:
        return UltrametricFit(Hc.copy(), 0.0)

    vals = np.abs(Hc[np.triu_indices(n, 1)])
    cands = np.unique(np.concatenate(
        [[0.0], vals, np.abs(vals[:, None] - vals[None, :]).ravel()]))

    def attempt(eps: float):
        A = _closure_below(np.minimum(0.0, Hc + eps))
        if np.min((A - Hc)[off_mask]) >= -1e-12:
            return A
        return None

    lo, hi = 0, len(cands) - 1
    best = attempt(cands[hi])
    if best is None:
        raise MNatIntegrityError("fit failed at the largest candidate radius")
    if (A0 := attempt(cands[0])) is not None:
        best, hi = A0, 0
    while lo < hi:
        mid = (lo + hi) // 2
        A = attempt(cands[mid])
        if A is not None:
            best, hi = A, mid
        else:
            lo = mid + 1
    err = float(np.max(np.abs(best - Hc)[off_mask])) if n >= 2 else 0.0
    return UltrametricFit(best, err)


def complete_diagonal(f: SetFunctionOracle, A_offdiag) -> np.ndarray:
    """Fill A_ii = 2 f(i|E-i) - 2 sum_k A_ik so the residual keeps its slack.

    With this diagonal the quadratic's top marginal matches f's exactly, so
    g = f - h has zero marginal at the top and, being submodular, nonnegative
    marginals everywhere.
    """
    A = np.asarray(A_offdiag, dtype=float).copy()
    n = f.n
    full = (1 << n) - 1
    f_full = f.eval_mask(full)
    for i in range(n):
        top = f_full - f.eval_mask(full ^ (1 << i))
        others = A[i].sum() - A[i, i]
        A[i, i] = 2.0 * top - 2.0 * others
    return A


@dataclass(frozen=True)
class LaminarQuadraticRep:
    """A = sum_L lam_L 1_L 1_L^T + Diag(d) with laminar sets and lam_L <= 0."""

    n: int
    sets: tuple  # masks of the laminar sets, each with >= 2 elements
    lams: tuple
    d: np.ndarray

    def reconstruct(self) -> np.ndarray:
        A = np.diag(self.d).astype(float)
        for mask, lam in zip(self.sets, self.lams):
            idx = list(iter_bits(mask))
            A[np.ix_(idx, idx)] += lam
        return A

    def to_laminar_concave(self) -> LaminarConcave:
        """Equivalent sum-of-concave-over-laminar-family form of the quadratic."""
        terms = []
        for mask, lam in zip(self.sets, self.lams):
            size = popcount(mask)
            terms.append((mask_to_set(mask),
                          [0.5 * lam * t * t for t in range(size + 1)]))
        for i in range(self.n):
            terms.append((frozenset([i]), [0.0, 0.5 * float(self.d[i])]))
        return LaminarConcave(self.n, terms)


def laminar_from_ultrametric(A) -> LaminarQuadraticRep:
    """Unpack a hierarchy-pattern matrix into its laminar merge tree.

    Processing off-diagonal levels from most negative upward, each union-find
    merge event becomes a laminar set whose coefficient is the gap to its
    parent's level; the diagonal absorbs the remainder.  Reconstruction is
    exact because the levels along any pair's ancestor chain telescope to
    A_ij.
    """
    A = np.asarray(A, dtype=float)
    n = len(A)
    if not np.allclose(A, A.T, atol=1e-7):
        raise ValueError("matrix must be symmetric")
    off = A[~np.eye(n, dtype=bool)]
    if n >= 2 and np.max(off) > TOL:
        raise ValueError("off-diagonal entries must be nonpositive")
    bad = find_hierarchy_violation(A)
    if bad is not None:
        raise ValueError(f"triple {bad} breaks the hierarchy pattern")

    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    pairs = [(A[i, j], i, j) for i in range(n) for j in range(i + 1, n)
             if A[i, j] < -TOL]
    pairs.sort()
    nodes = []  # (mask, level), formation order is deepest first
    comp_mask = {i: 1 << i for i in range(n)}
    formed_at = {}  # root -> index into nodes of its current node
    idx = 0
    while idx < len(pairs):
        level = pairs[idx][0]
        group = []
        while idx < len(pairs) and pairs[idx][0] <= level + TOL:
            group.append(pairs[idx])
            idx += 1
        touched = set()
        for _, i, j in group:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[rj] = ri
                comp_mask[ri] |= comp_mask[rj]
            touched.add(find(i))
        for r in touched:
            r = find(r)
            nodes.append((comp_mask[r], level))
            formed_at[r] = len(nodes) - 1

    lams = []
    out_sets = []
    for mask, level in nodes:
        parent_level = 0.0
        best = None
        for omask, olevel in nodes:
            if omask != mask and (omask & mask) == mask and olevel > level:
                if best is None or olevel < best:
                    best = olevel
        if best is not None:
            parent_level = best
        out_sets.append(mask)
        lams.append(level - parent_level)

    d = A.diagonal().astype(float).copy()
    for mask, lam in zip(out_sets, lams):
        for i in iter_bits(mask):
            d[i] -= lam
    rep = LaminarQuadraticRep(n, tuple(out_sets), tuple(lams), d)
    if not np.allclose(rep.reconstruct(), A, atol=1e-7):
        raise MNatIntegrityError("laminar reconstruction mismatch")
    return rep


# ---------------------------------------------------------------------------
# decompositions


@dataclass
class Decomposition:
    """f = g + h with curvature accounting; g is defined as f - h."""

    n: int
    g: SetFunctionOracle
    h: MNatConcaveFn
    c: Optional[float]
    gamma_h: Optional[float]
    method: str
    meta: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {"method": self.method, "c": self.c, "gamma_h": self.gamma_h,
                "h": self.h.to_payload(), "meta": dict(self.meta)}


def residual_oracle(f: SetFunctionOracle, h: MNatConcaveFn,
                    name: str = "g") -> SetFunctionOracle:
    return SetFunctionOracle(
        f.n, lambda S: f.eval_mask(as_mask(S, f.n)) - h.value_mask(as_mask(S, f.n)),
        name=name, normalize=False)


def h_curvature(f: SetFunctionOracle, h: MNatConcaveFn, *,
                cap: int = DEFAULT_GAMMA_CAP) -> float:
    """gamma = 1 - min over X with f(X) > 0 of h(X)/f(X), clamped to [0, 1].

    Subsets where f vanishes are skipped (0/0 reads as ratio 1 for any valid
    decomposition, so they never attain the minimum).
    """
    if f.n > cap:
        raise CapExceededError(f"curvature scan for n={f.n} exceeds cap {cap}")
    tf = f.value_table(cap)
    th = h.table(max(cap, 16))
    live = tf > TOL
    if not live.any():
        raise ValueError("f vanishes everywhere; gamma undefined")
    ratio = float(np.min(th[live] / tf[live]))
    return min(1.0, max(0.0, 1.0 - ratio))


def trivial_curvature_decomposition(f: SetFunctionOracle, *,
                                    gamma_cap: int = DEFAULT_GAMMA_CAP) -> Decomposition:
    """h modular with the top marginals f(i|E-i); the classical curvature split."""
    n = f.n
    full = (1 << n) - 1
    f_full = f.eval_mask(full)
    weights = np.array([max(0.0, f_full - f.eval_mask(full ^ (1 << i)))
                        for i in range(n)])
    h = ModularPlusIndicator(weights, 0.0)
    g = residual_oracle(f, h)
    rep = total_curvature(f)
    gamma = h_curvature(f, h) if n <= gamma_cap else None
    return Decomposition(n, g, h, rep.c, gamma, "trivial",
                         {"gamma_bound": rep.c})


def build_quadratic_decomposition(f: SetFunctionOracle, mode: str = "generic", *,
                                  cover_masks=None,
                                  cap: int = DEFAULT_HESSIAN_CAP,
                                  gamma_cap: int = DEFAULT_GAMMA_CAP) -> Decomposition:
    """Hessian bounds -> hierarchy fit -> diagonal completion -> quadratic h."""
    bounds = hessian_upper_bounds(f, mode, cover_masks=cover_masks, cap=cap)
    fit = ultrametric_fit(bounds.matrix)
    A = complete_diagonal(f, fit.matrix)
    h = QuadraticMNat(A)
    g = residual_oracle(f, h)
    rep = total_curvature(f)
    gamma = h_curvature(f, h) if f.n <= gamma_cap else None
    return Decomposition(f.n, g, h, rep.c, gamma, "quadratic",
                         {"fit_error": fit.error, "hessian_source": bounds.source})


def identity_decomposition(h: MNatConcaveFn, *,
                           name: str = "f") -> Decomposition:
    """g = 0, h = f, for instances that are concave-part functions outright."""
    f = h.as_oracle(name)
    zero = SetFunctionOracle(h.n, lambda S: 0.0, name="g", normalize=False)
    rep = total_curvature(f)
    return Decomposition(h.n, zero, h, rep.c, 0.0, "identity", {})


def verify_decomposition(f: SetFunctionOracle, dec: Decomposition, *,
                         cap: int = 12, exchange_cap: int = 10) -> dict:
    """Exhaustive validity report for a decomposition at desk scale.

    Checks: g + h = f on every subset (via the actual g oracle on a sample,
    tables for the rest), g monotone submodular and nonnegative, h passes the
    exchange check (when n is inside the cap) and is nonnegative, and
    gamma_h <= c when both are known.
    """
    n = dec.n
    if n > cap:
        raise CapExceededError(f"verification for n={n} exceeds cap {cap}")
    tf = f.value_table(cap)
    th = dec.h.table(max(cap, 16))
    tg = tf - th
    report = {"ok": True}

    sample = list({0, (1 << n) - 1, *(1 << i for i in range(n)),
                   *range(0, 1 << n, max(1, (1 << n) // 16))})
    worst = max(abs(dec.g.eval_mask(m) + th[m] - tf[m]) for m in sample)
    report["sum_matches"] = bool(worst <= 1e-9)
    report["sum_error"] = float(worst)

    ok, witness = verify_monotone_submodular(
        SetFunctionOracle.from_table(tg, name="g", normalize=False), cap=cap)
    report["g_monotone_submodular"] = bool(ok)
    if not ok:
        report["g_witness"] = {"kind": witness.kind, "X": sorted(witness.X),
                               "i": witness.i, "j": witness.j}
    report["g_nonnegative"] = bool(tg.min() >= -TOL)
    report["h_nonnegative"] = bool(th.min() >= -TOL)

    if n <= exchange_cap:
        okx, wx = check_exchange_property(th[:1 << n])
        report["h_exchange"] = bool(okx)
        if not okx:
            report["h_witness"] = {"X": sorted(wx.X), "Y": sorted(wx.Y), "i": wx.i}
    else:
        report["h_exchange"] = None

    if dec.gamma_h is not None and dec.c is not None:
        report["gamma_le_c"] = bool(dec.gamma_h <= dec.c + 1e-9)
    else:
        report["gamma_le_c"] = None

    report["ok"] = all(v is not False for k, v in report.items()
                       if k not in ("sum_error",) and isinstance(v, (bool, type(None))))
    return report
