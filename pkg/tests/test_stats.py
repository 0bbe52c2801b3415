import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chordforest.errors import DataError
from chordforest.schema import Cohort, Dataset
from chordforest.stats import (
    UTestMethod,
    describe,
    mann_whitney_u,
    pearson_matrix,
    utest_by_cohort,
    utest_csv,
)
from chordforest.synth import SyntheticSpec, generate_synthetic

from conftest import make_dataset


def exact_utest_oracle(a, b):
    """Brute-force two-sided p: enumerate every C(n1+n2, n1) assignment of
    the pooled values and count assignments at least as extreme in U."""
    pooled = list(a) + list(b)
    n1 = len(a)
    idx = range(len(pooled))

    def u_of(group):
        ga = [pooled[i] for i in group]
        gb = [pooled[i] for i in idx if i not in group]
        ua = sum(1.0 if x > y_ else 0.5 if x == y_ else 0.0 for x in ga for y_ in gb)
        return min(ua, len(ga) * len(gb) - ua)

    observed = u_of(tuple(range(n1)))
    assignments = list(itertools.combinations(idx, n1))
    count = sum(1 for g in assignments if u_of(g) <= observed + 1e-12)
    return count / len(assignments)


class TestMannWhitneyU:
    def test_separated_pairs(self):
        res = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
        assert res.u_statistic == 0.0
        assert res.method is UTestMethod.EXACT
        assert res.p_value == pytest.approx(2.0 / 6.0)

    def test_interleaved_pairs(self):
        res = mann_whitney_u([1.0, 3.0], [2.0, 4.0])
        assert res.u_statistic == 1.0
        assert res.p_value == pytest.approx(4.0 / 6.0)

    def test_identical_multisets(self):
        a = [1.0, 2.0, 3.0]
        res = mann_whitney_u(a, list(a))
        assert res.u_statistic == len(a) ** 2 / 2
        assert res.p_value == 1.0

    def test_exact_matches_enumeration_exhaustively(self):
        # all tie-free shapes with n1+n2 <= 8 on one fixed value pool
        rng = np.random.default_rng(0)
        for total in range(2, 9):
            values = list(rng.permutation(np.arange(total, dtype=float) * 7 + 1))
            for n1 in range(1, total):
                a, b = values[:n1], values[n1:]
                res = mann_whitney_u(a, b)
                assert res.method is UTestMethod.EXACT
                assert res.p_value == pytest.approx(exact_utest_oracle(a, b), abs=1e-12)

    @given(st.integers(0, 100_000))
    @settings(max_examples=40, deadline=None)
    def test_exact_matches_enumeration_random(self, seed):
        rng = np.random.default_rng(seed)
        total = int(rng.integers(2, 9))
        n1 = int(rng.integers(1, total))
        vals = rng.permutation(rng.normal(size=total) * 10)
        a, b = vals[:n1], vals[n1:]
        res = mann_whitney_u(a, b)
        assert res.p_value == pytest.approx(exact_utest_oracle(a, b), abs=1e-12)

    def test_u_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=12)
        b = rng.normal(size=9) + 0.8
        base = mann_whitney_u(a, b, exact_cutoff=0)
        for f in (lambda x: 3 * x + 7, np.exp, lambda x: x ** 3):
            res = mann_whitney_u(f(a), f(b), exact_cutoff=0)
            assert res.u_statistic == base.u_statistic
            assert res.p_value == pytest.approx(base.p_value)

    def test_ties_fall_back_to_normal_approx(self):
        res = mann_whitney_u([1.0, 2.0, 2.0], [2.0, 3.0])
        assert res.method is UTestMethod.NORMAL_APPROX

    def test_bounds(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.choice(np.arange(-100, 101, 25), size=rng.integers(2, 30))
            b = rng.choice(np.arange(-100, 101, 25), size=rng.integers(2, 30))
            res = mann_whitney_u(a, b)
            assert 0 <= res.u_statistic <= len(a) * len(b)
            assert 0 < res.p_value <= 1.0

    def test_empty_group_rejected(self):
        with pytest.raises(DataError):
            mann_whitney_u([], [1.0])

    def test_continuity_correction_toggle(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=30)
        b = rng.normal(size=30) + 0.4
        with_cc = mann_whitney_u(a, b, continuity_correction=True)
        without = mann_whitney_u(a, b, continuity_correction=False)
        assert with_cc.p_value >= without.p_value


class TestUTestBatch:
    def test_table_layout(self, sav_schema):
        spec = SyntheticSpec(n=80, missing_rate=0.0)
        ds = generate_synthetic(spec, sav_schema, seed=2)
        items = [c for c in sav_schema.all_items() if c != "PO"]
        rows = utest_by_cohort(ds, items)
        assert len(rows) == 37
        assert all(set(r) == {"item", "p_value", "passed"} for r in rows)
        text = utest_csv(rows)
        assert text.splitlines()[0] == "item,p_value,passed"
        assert len(text.splitlines()) == 38


class TestPearsonMatrix:
    def test_diagonal_is_one(self):
        ds = make_dataset(["a", "b"], [[1, 2], [3, 1], [5, 9], [2, 4]])
        m = pearson_matrix(ds, ["a", "b"])
        assert m[0, 0] == 1.0 and m[1, 1] == 1.0

    def test_perfect_anticorrelation(self):
        vals = [[v, -v] for v in (1.0, 5.0, -3.0, 2.0)]
        m = pearson_matrix(make_dataset(["x", "nx"], vals), ["x", "nx"])
        assert m[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_symmetric_unit_range(self):
        rng = np.random.default_rng(1)
        vals = rng.integers(-100, 101, size=(50, 4)).astype(float)
        ds = make_dataset(list("abcd"), vals)
        m = pearson_matrix(ds, list("abcd"))
        assert np.allclose(m, m.T, atol=1e-12)
        assert np.all(np.abs(m[~np.isnan(m)]) <= 1.0 + 1e-12)

    def test_zero_variance_flagged_not_fabricated(self):
        ds = make_dataset(["a", "c"], [[1, 5], [2, 5], [3, 5]])
        m = pearson_matrix(ds, ["a", "c"])
        assert math.isnan(m[0, 1]) and math.isnan(m[1, 1])

    def test_pairwise_deletion(self):
        vals = [[1, 1], [2, np.nan], [3, 3], [4, 4], [5, 5]]
        m = pearson_matrix(make_dataset(["a", "b"], vals), ["a", "b"])
        assert m[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_travel_mode_fixture_hits_negative_band(self, sav_schema):
        # budget-composed travel shares: car vs public transport lands near
        # the strong negative dependence seen in real mode-share data
        spec = SyntheticSpec(n=284, missing_rate=0.0)
        ds = generate_synthetic(spec, sav_schema, seed=31)
        m = pearson_matrix(ds, list(sav_schema.auxiliary))
        car_pt = m[0, 2]  # travel_car vs travel_pt
        assert -0.84 <= car_pt <= -0.64


class TestDescribe:
    def test_constant_column(self):
        ds = make_dataset(["a"], [[0.0]] * 5)
        d = describe(ds, "a")
        assert (d["mean"], d["sd"], d["n"]) == (0.0, 0.0, 5)

    def test_empty_column_flagged(self):
        ds = make_dataset(["a"], [[np.nan]] * 3)
        d = describe(ds, "a")
        assert d["n"] == 0 and d["mean"] is None and d["sd"] is None

    def test_grid_bins(self):
        ds = make_dataset(["a"], [[-100.0], [-100.0], [0.0], [100.0]])
        d = describe(ds, "a")
        assert d["bins"]["centers"] == [float(c) for c in range(-100, 101, 25)]
        assert d["bins"]["counts"][0] == 2
        assert sum(d["bins"]["counts"]) == 4

    def test_bimodal_synthetic_intention_column(self, sav_schema):
        spec = SyntheticSpec(n=300, adopter_fraction=0.5, missing_rate=0.0)
        ds = generate_synthetic(spec, sav_schema, seed=8)
        d = describe(ds, "BI4")
        counts = d["bins"]["counts"]
        # one mode per side of the scale, with a deep valley at neutrality
        neg_mode = max(counts[:4])
        pos_mode = max(counts[5:])
        assert neg_mode > 3 * counts[4]
        assert pos_mode > 3 * counts[4]
