import numpy as np
import pytest

from fmalign.dataset import DataMatrix
from fmalign.graph import (
    build_incidence,
    build_knn_graph,
    correspondences_from_labels,
    load_correspondences_csv,
    normalized_operator,
)


def brute_force_knn(values, k, alpha):
    """All-pairs cosine, top-k by (similarity desc, index asc), max-symmetrized."""
    m = values.shape[0]
    norms = np.linalg.norm(values, axis=1)
    W = np.zeros((m, m))
    for i in range(m):
        sims = []
        for j in range(m):
            if j == i:
                continue
            sims.append((-(values[i] @ values[j]) / (norms[i] * norms[j]), j))
        sims.sort()
        for negs, j in sims[:k]:
            w = alpha * (-negs)
            if w > 0:
                W[i, j] = w
    return np.maximum(W, W.T)


class TestBuildKnnGraph:
    def test_identical_pair(self):
        X = DataMatrix(values=np.array([[1.0, 2.0], [1.0, 2.0]]))
        G = build_knn_graph(X, k=1, alpha=0.2)
        W = G.weights.toarray()
        assert np.allclose(W, [[0.0, 0.2], [0.2, 0.0]])
        assert np.allclose(G.degrees, [0.2, 0.2])

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(8):
            m = int(rng.integers(6, 25))
            X = DataMatrix(values=rng.standard_normal((m, 3)))
            k = int(rng.integers(1, min(m - 1, 5) + 1))
            W = build_knn_graph(X, k=k, alpha=0.2).weights.toarray()
            oracle = brute_force_knn(X.values, k, 0.2)
            # identical edge set; weights agree up to the last float ulp
            assert np.array_equal(W != 0, oracle != 0)
            assert np.allclose(W, oracle, atol=1e-14, rtol=0)

    def test_row_degree_at_least_k_for_positive_data(self):
        # union symmetrization keeps >= k nonzeros per row when similarities stay positive
        rng = np.random.default_rng(1)
        X = DataMatrix(values=rng.random((40, 6)) + 0.5)
        k = 5
        G = build_knn_graph(X, k=k, alpha=0.2)
        nnz_per_row = np.diff(G.weights.indptr)
        assert np.all(nnz_per_row >= k)

    def test_all_zero_row_rejected(self):
        X = DataMatrix(values=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))
        with pytest.raises(ValueError, match="sample 1"):
            build_knn_graph(X, k=1, alpha=0.2)

    def test_k_out_of_range(self):
        X = DataMatrix(values=np.eye(3))
        with pytest.raises(ValueError, match="k must satisfy"):
            build_knn_graph(X, k=3, alpha=0.2)

    def test_exact_symmetry_and_psd(self):
        rng = np.random.default_rng(2)
        X = DataMatrix(values=rng.standard_normal((15, 4)))
        G = build_knn_graph(X, k=3, alpha=0.2)
        W = G.weights.toarray()
        assert np.array_equal(W, W.T)
        assert np.all(W >= 0)
        assert np.all(W.diagonal() == 0)
        # Laplacian rows sum to zero and the matrix is PSD
        L = G.laplacian.toarray()
        assert np.max(np.abs(L.sum(axis=1))) < 1e-10
        assert np.linalg.eigvalsh((L + L.T) / 2).min() > -1e-10

    def test_negative_similarity_dropped(self):
        X = DataMatrix(values=np.array([[1.0, 0.0], [-1.0, 0.0], [0.9, 0.1]]))
        G = build_knn_graph(X, k=2, alpha=1.0)
        W = G.weights.toarray()
        assert np.all(W >= 0)
        assert W[0, 1] == 0.0  # cos = -1 clamped away

    def test_gaussian_similarity(self):
        rng = np.random.default_rng(3)
        X = DataMatrix(values=rng.standard_normal((12, 3)))
        G = build_knn_graph(X, k=3, alpha=1.0, similarity="gaussian")
        W = G.weights.toarray()
        assert np.array_equal(W, W.T)
        assert np.all(W >= 0)
        assert np.all(np.diff(G.weights.indptr) >= 1)


class TestBuildIncidence:
    def test_single_pair_laplacian(self):
        inc = build_incidence([(0, 0, 1.0)], 1, 1)
        AAt = (inc.entries @ inc.entries.T).toarray()
        assert np.allclose(AAt, [[1.0, -1.0], [-1.0, 1.0]])

    def test_empty_pairs(self):
        inc = build_incidence([], 3, 2)
        assert inc.entries.shape == (5, 0)
        assert np.allclose((inc.entries @ inc.entries.T).toarray(), 0.0)

    def test_matches_adjacency_oracle(self):
        rng = np.random.default_rng(4)
        pairs = [
            (int(rng.integers(0, 4)), int(rng.integers(0, 4)), float(rng.random() + 0.1))
            for _ in range(5)
        ]
        inc = build_incidence(pairs, 4, 4)
        # degree-minus-adjacency Laplacian of the bipartite correspondence graph
        W = np.zeros((8, 8))
        for i, j, w in pairs:
            W[i, 4 + j] += w
            W[4 + j, i] += w
        oracle = np.diag(W.sum(axis=1)) - W
        assert np.allclose((inc.entries @ inc.entries.T).toarray(), oracle, atol=1e-12)

    def test_row_sums_exactly_zero_for_unit_weights(self):
        inc = build_incidence([(0, 1, 1.0), (2, 0, 1.0)], 3, 2)
        AAt = (inc.entries @ inc.entries.T).toarray()
        assert np.all(AAt.sum(axis=1) == 0.0)

    def test_out_of_range_pair(self):
        with pytest.raises(ValueError, match=r"\(5, 0\)"):
            build_incidence([(5, 0, 1.0)], 3, 2)

    def test_weighted_pair_reproduces_weight(self):
        inc = build_incidence([(0, 0, 2.5)], 1, 1)
        AAt = (inc.entries @ inc.entries.T).toarray()
        assert np.allclose(AAt, [[2.5, -2.5], [-2.5, 2.5]])


class TestCorrespondencesFromLabels:
    def test_single_match(self):
        pairs = correspondences_from_labels(
            np.array([0, 1]), np.array([10, 20]), np.array([0]), np.array([20])
        )
        assert pairs == [(1, 0, 1.0)]

    def test_disjoint_labels(self):
        pairs = correspondences_from_labels(
            np.array([0]), np.array([1]), np.array([0]), np.array([2])
        )
        assert pairs == []

    def test_count_matches_combinatorial_oracle(self):
        rng = np.random.default_rng(5)
        src_labels = rng.integers(0, 2, 10)
        tgt_labels = rng.integers(0, 2, 10)
        pairs = correspondences_from_labels(
            np.arange(10), src_labels, np.arange(10), tgt_labels
        )
        expected = sum(
            int(np.sum(src_labels == c)) * int(np.sum(tgt_labels == c)) for c in (0, 1)
        )
        assert len(pairs) == expected

    def test_source_major_ordering(self):
        pairs = correspondences_from_labels(
            np.array([3, 1]), np.array([0, 0]), np.array([2, 0]), np.array([0, 0])
        )
        assert pairs == [(1, 0, 1.0), (1, 2, 1.0), (3, 0, 1.0), (3, 2, 1.0)]


class TestNormalizedOperator:
    def graph_from_weights(self, W):
        from fmalign.graph import graph_from_weights

        return graph_from_weights(W)

    def test_two_node_edge_weight_cancels(self):
        for w in (0.3, 1.0, 7.5):
            G = self.graph_from_weights(np.array([[0.0, w], [w, 0.0]]))
            S = normalized_operator(G)
            assert np.allclose(S, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-6)

    def test_path3_spectrum(self):
        W = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        S = normalized_operator(self.graph_from_weights(W))
        lam = np.linalg.eigvalsh(S)
        assert np.allclose(lam, [0.0, 1.0, 2.0], atol=1e-6)

    def test_disconnected_zero_multiplicity(self):
        W = np.zeros((4, 4))
        W[0, 1] = W[1, 0] = 1.0
        W[2, 3] = W[3, 2] = 1.0
        S = normalized_operator(self.graph_from_weights(W))
        lam = np.linalg.eigvalsh(S)
        assert np.sum(np.abs(lam) < 1e-6) == 2

    def test_eigenvalue_range(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            X = DataMatrix(values=rng.standard_normal((12, 3)))
            G = build_knn_graph(X, k=3, alpha=0.2)
            lam = np.linalg.eigvalsh(normalized_operator(G))
            assert lam.min() > -1e-10
            assert lam.max() < 2.0 + 1e-10


class TestCorrespondenceFile:
    def test_load_with_header_and_default_weight(self, tmp_path):
        p = tmp_path / "pairs.csv"
        p.write_text("src_index,tgt_index\n0,1\n2,3\n", encoding="utf-8")
        assert load_correspondences_csv(p) == [(0, 1, 1.0), (2, 3, 1.0)]

    def test_load_with_weights_no_header(self, tmp_path):
        p = tmp_path / "pairs.csv"
        p.write_text("0,1,0.5\n2,3,2.0\n", encoding="utf-8")
        assert load_correspondences_csv(p) == [(0, 1, 0.5), (2, 3, 2.0)]
