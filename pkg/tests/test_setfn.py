"""Ground-set helpers, curvature reports, and the exhaustive check oracles."""

import math

import numpy as np
import pytest

from submax import (
    CapExceededError,
    SetFunctionOracle,
    as_mask,
    brute_force_max,
    iter_bits,
    marginal,
    mask_to_set,
    popcount,
    subsets_of_size,
    total_curvature,
    verify_monotone_submodular,
)

from _factories import random_weighted_coverage, rng


def sqrt_card(n):
    return SetFunctionOracle(n, lambda S: math.sqrt(len(S)), name="sqrt",
                             normalize=False)


def modular(weights):
    w = np.asarray(weights, dtype=float)
    return SetFunctionOracle(len(w), lambda S: float(sum(w[i] for i in S)),
                             name="mod", normalize=False)


def coverage_single(n, neigh):
    # one point covered by any element of neigh
    m = as_mask(neigh, n)
    return SetFunctionOracle(n, lambda S: 1.0 if as_mask(S, n) & m else 0.0,
                             name="cov1", normalize=False)


# ---------------------------------------------------------------------------
# masks and subsets


def test_mask_set_roundtrip():
    assert as_mask({0, 2}, 4) == 5
    assert as_mask(5) == 5
    assert mask_to_set(5) == frozenset({0, 2})
    assert list(iter_bits(0b10110)) == [1, 2, 4]
    assert popcount(0b10110) == 3


def test_as_mask_rejects_out_of_range():
    with pytest.raises(ValueError):
        as_mask({3}, 3)
    with pytest.raises(ValueError):
        as_mask({-1})


def test_subsets_of_size_enumeration():
    masks = list(subsets_of_size(5, 2))
    assert len(masks) == 10
    assert len(set(masks)) == 10
    assert all(popcount(m) == 2 for m in masks)
    # lexicographic order of the sorted index tuples
    tuples = [tuple(iter_bits(m)) for m in masks]
    assert tuples == sorted(tuples)


# ---------------------------------------------------------------------------
# oracle plumbing


def test_oracle_counts_calls_and_memoizes_nothing():
    f = sqrt_card(3)
    f.reset_calls()
    f.eval_mask(0b101)
    f.eval_mask(0b101)
    assert f.calls == 2


def test_from_table_normalization():
    # construction shifts f so that f(empty) = 0
    f = SetFunctionOracle.from_table([1.0, 3.0], name="t")
    assert f.eval_mask(0) == 0.0
    assert f.eval_mask(1) == 2.0


def test_value_table_cap():
    f = sqrt_card(6)
    t = f.value_table(8)
    assert t.shape == (64,)
    assert t[0] == 0.0
    assert abs(t[0b111] - math.sqrt(3)) < 1e-12
    with pytest.raises(CapExceededError):
        sqrt_card(6).value_table(5)


# ---------------------------------------------------------------------------
# marginal


def test_marginal_modular():
    f = SetFunctionOracle(3, lambda S: float(len(S)), normalize=False)
    assert marginal(f, 0, {1}) == 1.0


def test_marginal_sqrt():
    f = sqrt_card(4)
    assert abs(marginal(f, 0, {1, 2, 3}) - (2 - math.sqrt(3))) < 1e-12


def test_marginal_coverage_saturated():
    f = coverage_single(2, {0, 1})
    assert marginal(f, 0, {1}) == 0.0


def test_marginal_rejects_member():
    f = sqrt_card(3)
    with pytest.raises(ValueError):
        marginal(f, 1, {1, 2})


def test_marginal_uses_two_calls():
    f = sqrt_card(4)
    f.reset_calls()
    marginal(f, 0, {1})
    assert f.calls == 2


# ---------------------------------------------------------------------------
# total curvature


def test_curvature_modular_is_zero():
    rep = total_curvature(modular((1, 2, 3)))
    assert rep.c == 0.0
    assert rep.excluded == ()
    assert all(abs(r - 1.0) < 1e-12 for r in rep.per_element_ratios)


def test_curvature_sqrt_n4():
    # 1 - (2 - sqrt(3)) = sqrt(3) - 1
    rep = total_curvature(sqrt_card(4))
    assert abs(rep.c - (math.sqrt(3) - 1)) < 1e-12


def test_curvature_saturating_coverage_is_one():
    rep = total_curvature(coverage_single(2, {0, 1}))
    assert rep.c == 1.0


def test_curvature_excludes_zero_singletons():
    # element 1 never contributes; the minimum must come from element 0 alone
    f = SetFunctionOracle(2, lambda S: 1.0 if 0 in S else 0.0,
                          name="only0", normalize=False)
    rep = total_curvature(f)
    assert rep.excluded == (1,)
    assert rep.per_element_ratios[1] is None
    assert rep.c == 0.0
    assert rep.argmin_element == 0


def test_curvature_all_zero_rejected():
    f = SetFunctionOracle(2, lambda S: 0.0, normalize=False)
    with pytest.raises(ValueError):
        total_curvature(f)


def test_curvature_call_budget():
    f = random_weighted_coverage(rng(11, 0), 8)
    f.reset_calls()
    total_curvature(f)
    assert f.calls <= 2 * 8 + 2


# ---------------------------------------------------------------------------
# brute force maximization


def test_brute_force_sqrt_ties_lexicographic():
    X, v = brute_force_max(sqrt_card(4), 2)
    assert X == frozenset({0, 1})
    assert abs(v - math.sqrt(2)) < 1e-12


def test_brute_force_modular():
    X, v = brute_force_max(modular((3, 1, 2)), 2)
    assert X == frozenset({0, 2})
    assert v == 5.0


def test_brute_force_best_response():
    # one facility row W = [[2, 1]]: best single pick is element 0
    f = SetFunctionOracle(2, lambda S: float(max((2.0, 1.0)[i] for i in S),)
                          if S else 0.0, normalize=False)
    X, v = brute_force_max(f, 1)
    assert (X, v) == (frozenset({0}), 2.0)


def test_brute_force_size_modes():
    f = SetFunctionOracle.from_table([0.0, 1.0, 1.0, 1.0], normalize=False)
    X, v = brute_force_max(f, 2)
    assert (X, v) == (frozenset({0}), 1.0)
    X, v = brute_force_max(f, 2, exact_size=True)
    assert (X, v) == (frozenset({0, 1}), 1.0)


def test_brute_force_cap_and_k_validation():
    with pytest.raises(CapExceededError):
        brute_force_max(sqrt_card(6), 2, cap=5)
    with pytest.raises(ValueError):
        brute_force_max(sqrt_card(3), 4)


def test_brute_force_dominates_random_candidates():
    r = rng(11, 1)
    for trial in range(20):
        n = int(r.integers(3, 9))
        f = random_weighted_coverage(r, n)
        k = int(r.integers(1, n + 1))
        _, opt = brute_force_max(f, k)
        pick = sorted(int(i) for i in r.choice(n, size=k, replace=False))
        assert f(pick) <= opt + 1e-9


# ---------------------------------------------------------------------------
# monotone submodular verification


def test_verify_accepts_sqrt():
    ok, witness = verify_monotone_submodular(sqrt_card(5))
    assert ok and witness is None


def test_verify_rejects_square_cardinality():
    f = SetFunctionOracle(3, lambda S: float(len(S) ** 2), normalize=False)
    ok, witness = verify_monotone_submodular(f)
    assert not ok
    assert witness.kind == "submodularity"
    assert witness.X == frozenset()
    assert (witness.i, witness.j) == (0, 1)
    assert abs(witness.value - 2.0) < 1e-12


def test_verify_reports_monotonicity_break():
    # dropping value when element 0 joins {1}
    t = np.array([0.0, 1.0, 2.0, 1.5])
    f = SetFunctionOracle.from_table(t, normalize=False)
    ok, witness = verify_monotone_submodular(f)
    assert not ok
    assert witness.kind == "monotonicity"
    assert witness.i == 0
    assert witness.X == frozenset({1})
    assert witness.value < 0


def test_verify_accepts_random_coverage_sweep():
    r = rng(11, 2)
    for trial in range(15):
        n = int(r.integers(2, 9))
        ok, witness = verify_monotone_submodular(random_weighted_coverage(r, n))
        assert ok, witness
