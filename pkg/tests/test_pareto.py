import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgdmoo import pareto
from pgdmoo.errors import ShapeError
from pgdmoo.pareto import DiversityCriterion as DC

import oracles


class TestDominates:
    def test_strict(self):
        assert pareto.dominates((1, 2), (2, 3))

    def test_equal(self):
        assert not pareto.dominates((1, 2), (1, 2))

    def test_incomparable(self):
        assert not pareto.dominates((1, 3), (2, 2))
        assert not pareto.dominates((2, 2), (1, 3))

    def test_weak(self):
        assert pareto.dominates((1, 2), (1, 3))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            pareto.dominates((1, 2), (1, 2, 3))

    @pytest.mark.parametrize("m", [2, 3])
    def test_irreflexive_transitive(self, m):
        rng = np.random.default_rng(m)
        # coarse grid so premises hold often
        Y = rng.integers(0, 4, size=(10_000, 3, m)).astype(float)
        chained = 0
        for a, b, c in Y:
            assert not pareto.dominates(a, a)
            if pareto.dominates(a, b) and pareto.dominates(b, c):
                chained += 1
                assert pareto.dominates(a, c)
        assert chained > 100


class TestNondominatedSort:
    def test_chain(self):
        fr = pareto.nondominated_sort([(0, 0), (1, 1), (2, 2)])
        assert fr.front.tolist() == [0, 1, 2]

    def test_two_leaders(self):
        fr = pareto.nondominated_sort([(0, 1), (1, 0), (2, 2)])
        assert fr.front.tolist() == [0, 0, 1]

    def test_duplicates_share_front(self):
        fr = pareto.nondominated_sort([(1, 1), (1, 1), (0, 2)])
        assert fr.front.tolist() == [0, 0, 0]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        Y = rng.random((200, 3))
        fr = pareto.nondominated_sort(Y)
        np.testing.assert_array_equal(fr.front, oracles.brute_force_fronts(Y.tolist()))

    def test_front_invariant(self, rng):
        Y = rng.integers(0, 6, size=(150, 2)).astype(float)
        fr = pareto.nondominated_sort(Y)
        for k in range(fr.n_fronts):
            mine = fr.members(k)
            for i in mine:
                assert not any(pareto.dominates(Y[j], Y[i]) for j in mine)
                if k > 0:
                    assert any(pareto.dominates(Y[j], Y[i]) for j in fr.members(k - 1))


class TestCrowding:
    def test_three_point_front(self):
        d = pareto.crowding_distance([(0, 1), (0.5, 0.5), (1, 0)])
        assert d[1] == pytest.approx(2.0)
        assert math.isinf(d[0]) and math.isinf(d[2])

    @pytest.mark.parametrize("n", [1, 2])
    def test_tiny_fronts(self, n):
        assert np.all(np.isinf(pareto.crowding_distance(np.random.rand(n, 3))))

    def test_degenerate_objective_contributes_zero(self):
        F = np.array([(0.0, 5.0), (0.2, 5.0), (0.6, 5.0), (1.0, 5.0)])
        d = pareto.crowding_distance(F)
        assert d[1] == pytest.approx(0.6)
        assert d[2] == pytest.approx(0.8)

    def test_hand_example_four_points(self):
        F = np.array([(0.0, 1.0), (0.25, 0.6), (0.5, 0.3), (1.0, 0.0)])
        d = pareto.crowding_distance(F)
        assert d[1] == pytest.approx(0.5 / 1.0 + 0.7 / 1.0)
        assert d[2] == pytest.approx(0.75 + 0.6)

    def test_interior_finite(self, rng):
        F = rng.random((20, 3))
        d = pareto.crowding_distance(F)
        assert np.isinf(d).sum() <= 6
        assert np.all(d >= 0)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(3, 25), st.integers(2, 4), st.integers(0, 2**32 - 1),
        st.lists(st.floats(0.1, 10), min_size=4, max_size=4),
        st.lists(st.floats(-50, 50), min_size=4, max_size=4),
    )
    def test_affine_invariance(self, n, m, seed, scales, shifts):
        # distinct grid values per column keep the sort order unambiguous
        rng = np.random.default_rng(seed)
        F = np.stack([rng.permutation(n) for _ in range(m)], axis=1).astype(float)
        G = F * np.array(scales[:m]) + np.array(shifts[:m])
        d0 = pareto.crowding_distance(F)
        d1 = pareto.crowding_distance(G)
        assert np.array_equal(np.isinf(d0), np.isinf(d1))
        fin = np.isfinite(d0)
        np.testing.assert_allclose(d0[fin], d1[fin], rtol=1e-9, atol=1e-9)


class TestLabels:
    def setup_method(self):
        # fronts: 0 -> {0, 1, 2}, 1 -> {3, 4}, ... ; crowding hand-set
        self.fr = pareto.FrontAssignment(
            np.array([0, 0, 0, 1, 1, 3]),
            np.array([np.inf, 2.0, np.inf, np.inf, np.inf, np.inf]),
        )

    def test_dominance_by_front(self):
        p = pareto.label_pair(0, 5, self.fr)
        assert (p.label, p.provenance) == (1, "dominance")
        assert pareto.label_pair(5, 0, self.fr).label == 0

    def test_same_front_crowding(self):
        p = pareto.label_pair(0, 1, self.fr, DC.CROWDING)
        assert (p.label, p.provenance) == (1, "diversity")
        assert pareto.label_pair(1, 0, self.fr, DC.CROWDING).label == 0

    def test_two_infinities_skip(self):
        assert pareto.label_pair(0, 2, self.fr, DC.CROWDING) is None

    def test_none_criterion_skips_same_front(self):
        assert pareto.label_pair(0, 1, self.fr, DC.NONE) is None
        assert pareto.label_pair(0, 3, self.fr, DC.NONE).label == 1

    def test_self_pair_skips(self):
        assert pareto.label_pair(3, 3, self.fr) is None

    def test_antisymmetric(self, rng):
        Y = rng.integers(0, 5, size=(80, 2)).astype(float)
        fr = pareto.nondominated_sort(Y)
        for crit in DC:
            scores = pareto.diversity_scores(Y, fr, crit, ref=np.array([6.0, 6.0]))
            a = rng.integers(0, 80, size=2000)
            b = rng.integers(0, 80, size=2000)
            ab = pareto.label_pairs(a, b, fr.front, scores)
            ba = pareto.label_pairs(b, a, fr.front, scores)
            skip = ab == pareto.SKIP
            assert np.array_equal(skip, ba == pareto.SKIP)
            assert np.all(ab[~skip] + ba[~skip] == 1)

    def test_parse(self):
        assert DC.parse("Crowding") is DC.CROWDING
        assert DC.parse("HypervolumeImprovement") is DC.HYPERVOLUME
        assert DC.parse("None") is DC.NONE
        with pytest.raises(ValueError):
            DC.parse("subcrowding")


class TestHvImprovement:
    def test_single_point(self):
        assert pareto.hv_improvement_score(0, [(0.5, 0.5)], (1.1, 1.1)) == pytest.approx(0.36)

    def test_duplicate_point_contributes_nothing(self):
        F = [(0.2, 0.8), (0.5, 0.5), (0.5, 0.5), (0.8, 0.2)]
        assert pareto.hv_improvement_score(1, F, (1, 1)) == pytest.approx(0.0, abs=1e-15)

    def test_closed_form_2d(self):
        F = np.array([(0.2, 0.8), (0.5, 0.5), (0.8, 0.2)])
        # exclusive rectangle of the middle point: (0.8-0.5) x (0.8-0.5)
        assert pareto.hv_improvement_score(1, F, (1, 1)) == pytest.approx(0.09)

    @pytest.mark.parametrize("m", [2, 3])
    def test_sum_bounded_by_total(self, rng, m):
        from pgdmoo.metrics import hypervolume

        for _ in range(5):
            F = rng.random((30, m))
            F = F[pareto.nondominated_mask(F)]
            c = pareto.hv_contributions(F, np.full(m, 1.1))
            assert np.all(c >= 0)
            assert c.sum() <= hypervolume(F, np.full(m, 1.1)) + 1e-12


class TestTopFraction:
    @pytest.mark.parametrize("seed", range(5))
    def test_front_ordering(self, seed):
        rng = np.random.default_rng(seed)
        Y = rng.random((300, 2))
        fr = pareto.nondominated_sort(Y)
        keep = pareto.top_fraction_indices(fr, 0.3)
        assert keep.size == math.ceil(0.3 * 300)
        drop = np.setdiff1d(np.arange(300), keep)
        assert fr.front[keep].max() <= fr.front[drop].min()
        boundary = fr.front[keep].max()
        kb = keep[fr.front[keep] == boundary]
        db = drop[fr.front[drop] == boundary]
        if db.size:
            assert fr.crowding[kb].min() >= fr.crowding[db].max()

    def test_identity(self, rng):
        fr = pareto.nondominated_sort(rng.random((50, 2)))
        np.testing.assert_array_equal(pareto.top_fraction_indices(fr, 1.0), np.arange(50))
