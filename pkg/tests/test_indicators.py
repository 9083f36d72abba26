import numpy as np
import pytest

from embclean import (
    EmbeddingMatrix,
    InputError,
    LabelVector,
    label_error_ranking,
    near_duplicate_ranking,
)

from oracles import brute_force_neighbors, brute_force_pairs


class TestNearDuplicateRanking:
    def test_exact_duplicate_first(self):
        m = EmbeddingMatrix(
            values=np.array([[0.0, 1.0], [1.0, 0.0], [0.6, 0.8], [1.0, 0.0]])
        )
        r = near_duplicate_ranking(m)
        assert tuple(r.keys[0]) == (1, 3)
        assert r.scores[0] == 0.0

    def test_three_point_ties(self):
        m = EmbeddingMatrix(values=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]))
        r = near_duplicate_ranking(m)
        assert [tuple(k) for k in r.keys.tolist()] == [(0, 1), (1, 2), (0, 2)]
        np.testing.assert_array_equal(r.scores, [0.5, 0.5, 1.0])
        assert not r.truncated

    def test_budget_guard(self):
        m = EmbeddingMatrix(values=np.random.default_rng(0).standard_normal((30, 3)))
        with pytest.raises(InputError, match="budget"):
            near_duplicate_ranking(m, budget=100)
        r = near_duplicate_ranking(m, top_k=50, budget=100)
        assert len(r) == 50 and r.truncated
        assert r.total_candidates == 30 * 29 // 2

    def test_top_k_is_head_of_full_list(self):
        rng = np.random.default_rng(42)
        m = EmbeddingMatrix(values=rng.standard_normal((50, 4)))
        full = near_duplicate_ranking(m)
        head = near_duplicate_ranking(m, top_k=100)
        np.testing.assert_array_equal(head.keys, full.keys[:100])
        np.testing.assert_array_equal(head.scores, full.scores[:100])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 40))
        m = EmbeddingMatrix(values=rng.standard_normal((n, 4)))
        r = near_duplicate_ranking(m)
        expected = brute_force_pairs(m)
        assert [tuple(k) for k in r.keys.tolist()] == [(i, j) for _, i, j in expected]
        assert np.abs(r.scores - np.array([e[0] for e in expected])).max() <= 1e-12


class TestLabelErrorRanking:
    def four_point(self):
        m = EmbeddingMatrix(
            values=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [-1.0, 0.0]])
        )
        l = LabelVector(labels=np.array([0, 0, 1, 1]), n_classes=2)
        return m, l

    def test_hand_computed_score(self):
        m, l = self.four_point()
        res = label_error_ranking(m, l)
        scores = dict(zip(res.ranking.keys.tolist(), res.ranking.scores.tolist()))
        # sample 0: m_eq = 0.5 (sample 1), m_neq = 1.0 -> 1 / 1.25 = 0.8
        assert abs(scores[0] - 0.8) <= 1e-12

    def test_equal_distances_give_half(self):
        m = EmbeddingMatrix(
            values=np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [-1.0, 0.0]])
        )
        l = LabelVector(labels=np.array([0, 0, 1, 1]), n_classes=2)
        res = label_error_ranking(m, l)
        scores = dict(zip(res.ranking.keys.tolist(), res.ranking.scores.tolist()))
        assert scores[0] == 0.5

    def test_coincident_foreign_point_ranked_first(self):
        m = EmbeddingMatrix(
            values=np.array(
                [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]]
            )
        )
        l = LabelVector(labels=np.array([0, 0, 1, 1, 0]), n_classes=2)
        res = label_error_ranking(m, l)
        assert int(res.ranking.keys[0]) in (0, 2)
        assert res.ranking.scores[0] == 0.0

    def test_singleton_class_error(self):
        m = EmbeddingMatrix(values=np.eye(3))
        l = LabelVector(labels=np.array([0, 0, 1]), n_classes=2)
        with pytest.raises(InputError, match="class 1 has a single member"):
            label_error_ranking(m, l)

    def test_single_class_error(self):
        m = EmbeddingMatrix(values=np.eye(3))
        l = LabelVector(labels=np.array([0, 0, 0]), n_classes=1)
        with pytest.raises(InputError, match="single-class"):
            label_error_ranking(m, l)

    def test_provenance_recomputes_scores(self):
        rng = np.random.default_rng(3)
        m = EmbeddingMatrix(values=rng.standard_normal((40, 5)))
        labels = rng.integers(0, 3, size=40)
        labels[:6] = [0, 0, 1, 1, 2, 2]
        res = label_error_ranking(m, LabelVector(labels=labels, n_classes=3))
        recomputed = res.m_neq**2 / (res.m_eq**2 + res.m_neq**2)
        for k, s in zip(res.ranking.keys, res.ranking.scores):
            assert abs(recomputed[k] - s) <= 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed + 10)
        n = int(rng.integers(10, 200))
        m = EmbeddingMatrix(values=rng.standard_normal((n, 5)))
        labels = rng.integers(0, 4, size=n)
        labels[:8] = [0, 0, 1, 1, 2, 2, 3, 3]
        l = LabelVector(labels=labels, n_classes=4)
        res = label_error_ranking(m, l, block_size=64)
        nb = brute_force_neighbors(m, labels)
        expected = np.array([ne**2 / (eq**2 + ne**2) for eq, ne, _, _ in nb])
        order = np.lexsort((np.arange(n), expected))
        np.testing.assert_array_equal(res.ranking.keys, order)
        assert np.abs(res.ranking.scores - expected[order]).max() <= 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed + 60)
        n = 30
        v = rng.standard_normal((n, 4))
        labels = rng.integers(0, 2, size=n)
        labels[:4] = [0, 0, 1, 1]
        perm = rng.permutation(n)
        base = label_error_ranking(
            EmbeddingMatrix(values=v), LabelVector(labels=labels, n_classes=2)
        )
        mapped = label_error_ranking(
            EmbeddingMatrix(values=v[perm]),
            LabelVector(labels=labels[perm], n_classes=2),
        )
        inv = np.empty(n, dtype=int)
        inv[perm] = np.arange(n)
        base_scores = {int(k): s for k, s in zip(base.ranking.keys, base.ranking.scores)}
        for k, s in zip(mapped.ranking.keys, mapped.ranking.scores):
            assert abs(base_scores[int(perm[k])] - s) <= 1e-12

    def test_flip_deep_inside_foreign_cluster_drops_rank(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((20, 6)) * 0.05 + np.array([1, 0, 0, 0, 0, 0])
        b = rng.standard_normal((20, 6)) * 0.05 + np.array([0, 1, 0, 0, 0, 0])
        v = np.vstack([a, b])
        labels = np.array([0] * 20 + [1] * 20)
        clean = label_error_ranking(
            EmbeddingMatrix(values=v), LabelVector(labels=labels, n_classes=2)
        )
        flipped_labels = labels.copy()
        flipped_labels[5] = 1  # cluster-a point now claims label b
        flipped = label_error_ranking(
            EmbeddingMatrix(values=v), LabelVector(labels=flipped_labels, n_classes=2)
        )
        pos_clean = int(np.nonzero(clean.ranking.keys == 5)[0][0])
        pos_flipped = int(np.nonzero(flipped.ranking.keys == 5)[0][0])
        assert pos_flipped < pos_clean

    def test_permutation_equivariance_pairs(self):
        rng = np.random.default_rng(8)
        n = 20
        v = rng.standard_normal((n, 4))
        perm = rng.permutation(n)
        base = near_duplicate_ranking(EmbeddingMatrix(values=v))
        mapped = near_duplicate_ranking(EmbeddingMatrix(values=v[perm]))
        base_scores = {tuple(k): s for k, s in zip(map(tuple, base.keys), base.scores)}
        for (i, j), s in zip(mapped.keys.tolist(), mapped.scores):
            key = tuple(sorted((int(perm[i]), int(perm[j]))))
            assert abs(base_scores[key] - s) <= 1e-12
