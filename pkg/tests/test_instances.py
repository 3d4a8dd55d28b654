"""Benchmark families: oracles, bespoke decompositions, generators, IO."""

import json

import numpy as np
import pytest

from _factories import rng, table_of
from submax.decompose import hessian_upper_bounds, verify_decomposition
from submax.instances import (CoverageInstance, FacilityLocationInstance,
                              WRSInstance, coverage_function,
                              coverage_pair_counts, coverage_decompose,
                              facility_function, family_decomposition,
                              fl_decompose, fl_to_wrs, generate,
                              instance_from_payload, instance_function,
                              instance_to_payload, load_instance,
                              save_instance, wrs_decompose,
                              wrs_dominant_decompose, wrs_function)
from submax.mconcave import (ModularPlusIndicator, PartitionMatroid,
                             UniformMatroid, WeightedMatroidRank,
                             check_exchange_property)


def offdiag(n, entries):
    A = np.zeros((n, n))
    for (i, j), v in entries.items():
        A[i, j] = A[j, i] = v
    return A


def assert_tables_equal(f, g, n, tol=1e-9):
    for m in range(1 << n):
        assert abs(f.eval_mask(m) - g.eval_mask(m)) <= tol


# ---------------------------------------------------------------------------
# coverage


def test_coverage_values():
    inst = CoverageInstance(3, (frozenset({0, 1}), frozenset({1, 2})))
    f = coverage_function(inst)
    assert f([]) == 0.0
    assert f([0]) == 1.0
    assert f([1]) == 2.0
    assert f([0, 2]) == 2.0
    assert f([0, 1, 2]) == 2.0


def test_coverage_repeated_point_counts_twice():
    inst = CoverageInstance(2, (frozenset({0}), frozenset({0})))
    assert coverage_function(inst)([0]) == 2.0


def test_coverage_validation():
    with pytest.raises(ValueError, match="empty neighborhood"):
        CoverageInstance(3, (frozenset(),))
    with pytest.raises(ValueError, match="outside the ground set"):
        CoverageInstance(3, (frozenset({0, 3}),))


def test_coverage_pair_counts_single_pair():
    inst = CoverageInstance(3, (frozenset({0, 1}),))
    hb = coverage_pair_counts(inst)
    assert hb.source == "coverage-closedform"
    np.testing.assert_allclose(hb.matrix, offdiag(3, {(0, 1): -1.0}))


def test_coverage_pair_counts_triple_is_not_a_pair():
    # a 3-element neighborhood saturates only after two picks: second
    # differences of the count are 0 for every pair once |Gamma| >= 3
    inst = CoverageInstance(3, (frozenset({0, 1, 2}),))
    hb = coverage_pair_counts(inst)
    np.testing.assert_allclose(hb.matrix, np.zeros((3, 3)))


def test_coverage_pair_counts_multiplicity():
    inst = CoverageInstance(3, (frozenset({0, 1}), frozenset({0, 1})))
    hb = coverage_pair_counts(inst)
    np.testing.assert_allclose(hb.matrix, offdiag(3, {(0, 1): -2.0}))


def test_coverage_pair_counts_match_generic():
    for seed in range(10):
        inst = generate("coverage", {"n": 6, "points": 8, "density": 0.35},
                        seed)
        closed = coverage_pair_counts(inst)
        generic = hessian_upper_bounds(coverage_function(inst), "generic")
        np.testing.assert_allclose(closed.matrix, generic.matrix,
                                   atol=1e-9)


def test_coverage_decompose_is_quadratic_pipeline():
    inst = CoverageInstance(3, (frozenset({0, 1}), frozenset({1, 2})))
    dec = coverage_decompose(inst)
    assert dec.method == "quadratic"
    assert dec.meta["hessian_source"] == "coverage-closedform"
    rep = verify_decomposition(coverage_function(inst), dec)
    assert rep["ok"]


# ---------------------------------------------------------------------------
# facility location


def test_facility_values():
    f = facility_function(FacilityLocationInstance(np.array([[2.0, 1.0]])))
    assert f([]) == 0.0
    assert f([0]) == 2.0
    assert f([1]) == 1.0
    assert f([0, 1]) == 2.0


def test_facility_two_customers():
    f = facility_function(
        FacilityLocationInstance(np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert f([0]) == 1.0
    assert f([0, 1]) == 2.0


def test_facility_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        FacilityLocationInstance(np.array([[1.0, -0.5]]))
    with pytest.raises(ValueError, match="2-d"):
        FacilityLocationInstance(np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="at least one customer"):
        FacilityLocationInstance(np.zeros((0, 3)))


def test_fl_decompose_single_customer():
    # max(w) = w_min + max(w - w_min): the row minimum rides the indicator
    dec = fl_decompose(FacilityLocationInstance(np.array([[2.0, 1.0]])))
    assert dec.method == "facility-location"
    assert isinstance(dec.h, ModularPlusIndicator)
    np.testing.assert_allclose(dec.h.ell, [1.0, 0.0])
    assert dec.h.c0 == 1.0
    assert dec.gamma_h == 0.0
    assert dec.c == 1.0
    assert dec.meta["w_min_sum"] == 1.0
    assert dec.meta["w_max_sum"] == 2.0
    assert dec.meta["gamma_bound"] == pytest.approx(0.5)
    assert dec.meta["bound_holds"]


def test_fl_decompose_flat_row_is_pure_indicator():
    dec = fl_decompose(FacilityLocationInstance(np.array([[1.0, 1.0]])))
    np.testing.assert_allclose(dec.h.ell, [0.0, 0.0])
    assert dec.h.c0 == 1.0
    assert dec.gamma_h == 0.0
    assert dec.meta["gamma_bound"] == pytest.approx(0.0)
    assert dec.meta["bound_holds"]


def test_fl_decompose_modular_matrix():
    # disjoint customer supports make f modular; nothing rides the indicator
    dec = fl_decompose(
        FacilityLocationInstance(np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert dec.h.c0 == 0.0
    np.testing.assert_allclose(dec.h.ell, [1.0, 1.0])
    assert dec.gamma_h == 0.0
    assert dec.c == 0.0


def test_fl_decompose_identity():
    W = rng(41).integers(0, 7, size=(3, 4)).astype(float)
    inst = FacilityLocationInstance(W)
    dec = fl_decompose(inst)
    f = facility_function(inst)

    def total(S):
        return dec.g(S) + dec.h.value(S)

    for m in range(16):
        S = [i for i in range(4) if m >> i & 1]
        assert f(S) == pytest.approx(total(S), abs=1e-9)


def test_fl_decompose_bound_sweep():
    for seed in range(12):
        inst = generate("facility", {"n": 6, "customers": 4, "w_max": 6},
                        seed)
        dec = fl_decompose(inst)
        assert dec.gamma_h is not None
        assert -1e-12 <= dec.gamma_h <= 1.0
        assert dec.gamma_h <= dec.meta["gamma_bound"] + 1e-9
        assert dec.meta["bound_holds"]


def test_fl_decompose_gamma_cap_skips_curvature():
    inst = FacilityLocationInstance(np.array([[2.0, 1.0]]))
    dec = fl_decompose(inst, gamma_cap=1)
    assert dec.gamma_h is None
    assert "gamma_bound" in dec.meta
    assert "bound_holds" not in dec.meta


def test_fl_decompose_verifies():
    inst = generate("facility", {"n": 5, "customers": 3, "w_max": 5}, 7)
    rep = verify_decomposition(facility_function(inst), fl_decompose(inst))
    assert rep["ok"]


def test_fl_to_wrs_structure():
    inst = FacilityLocationInstance(np.array([[2.0, 1.0], [0.0, 3.0]]))
    wrs = fl_to_wrs(inst)
    assert len(wrs.terms) == 2
    for coef, M, w in wrs.terms:
        assert coef == 1.0
        assert isinstance(M, UniformMatroid)
        assert M.rank == 1


def test_fl_to_wrs_same_function():
    W = rng(42).integers(0, 9, size=(3, 4)).astype(float)
    inst = FacilityLocationInstance(W)
    assert_tables_equal(facility_function(inst),
                        wrs_function(fl_to_wrs(inst)), 4)


# ---------------------------------------------------------------------------
# weighted rank sums


def test_wrs_values():
    inst = WRSInstance(3, ((2.0, UniformMatroid(3, 2),
                            np.array([3.0, 1.0, 2.0])),))
    f = wrs_function(inst)
    assert f([1]) == 2.0
    assert f([0, 1, 2]) == 10.0  # best two of (3, 1, 2), doubled


def test_wrs_validation():
    with pytest.raises(ValueError, match="at least one term"):
        WRSInstance(3, ())
    with pytest.raises(ValueError, match="positive"):
        WRSInstance(2, ((0.0, UniformMatroid(2, 1), np.ones(2)),))
    with pytest.raises(ValueError, match="nonnegative"):
        WRSInstance(2, ((1.0, UniformMatroid(2, 1), np.array([1.0, -1.0])),))
    with pytest.raises(ValueError, match="ground set"):
        WRSInstance(2, ((1.0, UniformMatroid(3, 1), np.ones(3)),))


def test_wrs_decompose_free_matroid_is_modular():
    # rank-n term: f is modular, so the top-marginal part recovers it whole.
    # No indicator extraction is possible and the reported literal bound
    # c - w_min/w_max honestly comes out negative (and not satisfied).
    inst = WRSInstance(2, ((1.0, UniformMatroid(2, 2),
                            np.array([2.0, 1.0])),))
    dec = wrs_decompose(inst)
    assert dec.method == "weighted-rank-sum"
    np.testing.assert_allclose(dec.h.ell, [2.0, 1.0])
    assert dec.h.c0 == 0.0
    assert dec.gamma_h == 0.0
    assert dec.c == 0.0
    assert dec.meta["extracted_min_sum"] == 0.0
    assert dec.meta["weight_min_sum"] == 1.0
    assert dec.meta["weight_max_sum"] == 2.0
    assert dec.meta["gamma_bound"] == pytest.approx(-0.5)
    assert not dec.meta["bound_holds"]


def test_wrs_decompose_indicator_term():
    inst = WRSInstance(2, ((1.0, UniformMatroid(2, 1), np.ones(2)),))
    dec = wrs_decompose(inst)
    assert dec.h.c0 == 1.0
    np.testing.assert_allclose(dec.h.ell, [0.0, 0.0])
    assert dec.gamma_h == 0.0
    assert dec.meta["extracted_min_sum"] == 1.0
    assert dec.meta["gamma_bound"] == pytest.approx(0.0)
    assert dec.meta["bound_holds"]


def test_wrs_decompose_folds_coefficients():
    # coef 3 on an indicator term extracts 3 * min(w)
    inst = WRSInstance(2, ((3.0, UniformMatroid(2, 1),
                            np.array([2.0, 5.0])),))
    dec = wrs_decompose(inst)
    assert dec.h.c0 == 6.0
    assert dec.meta["weight_min_sum"] == 6.0
    assert dec.meta["weight_max_sum"] == 15.0


def test_wrs_decompose_rank_zero_rejected():
    inst = WRSInstance(3, ((1.0, UniformMatroid(3, 0), np.ones(3)),))
    with pytest.raises(ValueError, match="rank at least 1"):
        wrs_decompose(inst)


def test_wrs_decompose_sweep():
    for seed in range(12):
        inst = generate("wrs", {"n": 6, "terms": 3}, seed)
        dec = wrs_decompose(inst)
        f = wrs_function(inst)
        r = rng(900, seed)
        for _ in range(20):
            m = int(r.integers(0, 1 << 6))
            S = [i for i in range(6) if m >> i & 1]
            assert f(S) == pytest.approx(
                dec.g(S) + dec.h.value(S), abs=1e-9)
        assert dec.gamma_h <= dec.meta["gamma_bound"] + 1e-9
        assert dec.meta["bound_holds"]


def test_wrs_decompose_sweep_verifies():
    for seed in (0, 3):
        inst = generate("wrs", {"n": 5, "terms": 2}, seed)
        rep = verify_decomposition(wrs_function(inst), wrs_decompose(inst))
        assert rep["ok"]


def test_wrs_dominant_nested_pair():
    # partition-independent sets sit inside the rank-2 uniform family, so
    # with shared weights the dominant term bounds the whole mixture:
    # gamma <= off-dominant coefficient share
    w = np.array([2.0, 1.0, 1.0, 1.0])
    inst = WRSInstance(4, (
        (3.0, UniformMatroid(4, 2), w),
        (1.0, PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1]), w)))
    dec = wrs_dominant_decompose(inst)
    assert dec.method == "wrs-dominant"
    assert isinstance(dec.h, WeightedMatroidRank)
    assert dec.h.value([0]) == 6.0  # coefficient folded into the weights
    assert dec.meta["dominant_index"] == 0
    assert dec.meta["dominant_share"] == pytest.approx(0.75)
    assert dec.meta["offdominant_share"] == pytest.approx(0.25)
    assert dec.gamma_h == pytest.approx(0.25)  # tight here
    assert dec.gamma_h <= dec.meta["offdominant_share"] + 1e-9


def test_wrs_dominant_share_bound_sweep():
    # free matroid dominates every other matroid pointwise at equal weights
    for seed in range(8):
        r = rng(77, seed)
        n = 5
        w = r.integers(1, 8, size=n).astype(float)
        blocks = [[0, 1, 2], [3, 4]]
        inst = WRSInstance(n, (
            (float(r.integers(2, 6)), UniformMatroid(n, n), w),
            (1.0, PartitionMatroid(n, blocks, [1, 1]), w)))
        dec = wrs_dominant_decompose(inst)
        assert dec.meta["dominant_index"] == 0
        assert dec.gamma_h <= dec.meta["offdominant_share"] + 1e-9
        ok, _ = check_exchange_property(table_of(dec.h, n))
        assert ok


# ---------------------------------------------------------------------------
# generators


def test_generate_unknown_family():
    with pytest.raises(ValueError, match="unknown family"):
        generate("mystery", {}, 0)


def test_generate_deterministic():
    a = instance_to_payload(generate("wrs", {"n": 6, "terms": 2}, 5))
    b = instance_to_payload(generate("wrs", {"n": 6, "terms": 2}, 5))
    c = instance_to_payload(generate("wrs", {"n": 6, "terms": 2}, 6))
    assert a == b
    assert a != c


def test_generate_golden_payloads():
    # frozen digests pin generator output across releases
    import hashlib

    def digest(fam, params, seed):
        doc = instance_to_payload(generate(fam, params, seed), seed=seed)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    assert digest("coverage", {"n": 10, "points": 20, "density": 0.3}, 1) == \
        "f0d752fc744e3cddf1dc3e1c48be23cff575bef5e6d0b4fc293eb2fa07e7dbc1"
    assert digest("facility", {"n": 8, "customers": 5, "w_max": 10}, 2) == \
        "640b5d66ced3238d24c1d5ba536f68dd5ba62ae81dd416b45fea058dfadcc088"
    assert digest("wrs", {"n": 8, "terms": 3}, 3) == \
        "a3f5f28d1dd0386d6264a7a8cea77071a95a05c4ddaeb25c2b0f42070664380c"


def test_generated_coverage_neighborhoods_nonempty():
    for seed in range(6):
        inst = generate("coverage", {"n": 7, "points": 10, "density": 0.0},
                        seed)
        assert all(len(nb) == 1 for nb in inst.cover)


def test_generated_facility_rows_nonzero():
    for seed in range(6):
        inst = generate("facility", {"n": 6, "customers": 4, "w_max": 2},
                        seed)
        assert inst.weights.max(axis=1).min() > 0


def test_generated_wrs_higher_rank_terms_carry_a_zero():
    from submax.mconcave import matroid_rank
    saw_high_rank = False
    for seed in range(10):
        inst = generate("wrs", {"n": 6, "terms": 3}, seed)
        for coef, M, w in inst.terms:
            if matroid_rank(M, frozenset(range(6))) >= 2:
                saw_high_rank = True
                assert w.min() == 0.0
    assert saw_high_rank


# ---------------------------------------------------------------------------
# serialization


def test_payload_schema():
    inst = CoverageInstance(3, (frozenset({0, 1}),))
    doc = instance_to_payload(inst, seed=9)
    assert doc["schema_version"] == 1
    assert doc["seed"] == 9
    assert doc["family"] == "coverage"
    assert doc["cover"] == [[0, 1]]


def test_payload_round_trip_each_family():
    for fam, params in [("coverage", {"n": 5, "points": 6, "density": 0.4}),
                        ("facility", {"n": 5, "customers": 3, "w_max": 6}),
                        ("wrs", {"n": 5, "terms": 2})]:
        inst = generate(fam, params, 11)
        back = instance_from_payload(instance_to_payload(inst))
        assert_tables_equal(instance_function(inst), instance_function(back),
                            5)


def test_payload_unknown_family():
    with pytest.raises(ValueError, match="unknown family"):
        instance_from_payload({"family": "mystery"})
    with pytest.raises(TypeError, match="cannot serialize"):
        instance_to_payload(object())


def test_save_load_round_trip(tmp_path):
    inst = generate("coverage", {"n": 8, "points": 12, "density": 0.3}, 4)
    path = tmp_path / "inst.json"
    save_instance(inst, path, seed=4)
    back = load_instance(path)
    f, g = coverage_function(inst), coverage_function(back)
    r = rng(55)
    for _ in range(100):
        m = int(r.integers(0, 1 << 8))
        assert f.eval_mask(m) == g.eval_mask(m)
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1 and doc["seed"] == 4


def test_save_load_wrs_with_partition_matroid(tmp_path):
    inst = WRSInstance(4, (
        (2.0, PartitionMatroid(4, [[0, 1], [2, 3]], [1, 2]),
         np.array([1.0, 4.0, 2.0, 3.0])),))
    path = tmp_path / "w.json"
    save_instance(inst, path)
    assert_tables_equal(wrs_function(inst), wrs_function(load_instance(path)),
                        4)


# ---------------------------------------------------------------------------
# dispatch


def test_family_decomposition_dispatch():
    cov = generate("coverage", {"n": 5, "points": 6, "density": 0.4}, 0)
    fl = generate("facility", {"n": 5, "customers": 3, "w_max": 5}, 0)
    wrs = generate("wrs", {"n": 5, "terms": 2}, 0)
    assert family_decomposition(cov).method == "quadratic"
    assert family_decomposition(fl).method == "facility-location"
    assert family_decomposition(wrs).method == "weighted-rank-sum"


def test_family_decomposition_generic_methods():
    fl = generate("facility", {"n": 4, "customers": 3, "w_max": 5}, 1)
    triv = family_decomposition(fl, method="trivial")
    assert triv.method == "trivial"
    quad = family_decomposition(fl, method="quadratic")
    assert quad.meta["hessian_source"] == "generic-bruteforce"
    with pytest.raises(ValueError, match="unknown decomposition method"):
        family_decomposition(fl, method="bogus")
    with pytest.raises(TypeError, match="no oracle"):
        family_decomposition(object())


def test_instance_function_dispatch():
    cov = CoverageInstance(2, (frozenset({0}),))
    assert instance_function(cov)([0]) == 1.0
    with pytest.raises(TypeError, match="no oracle"):
        instance_function(object())
