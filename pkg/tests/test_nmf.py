import json
import math

import numpy as np
import pytest
import scipy.sparse as sp

from speechtopics import nmf
from speechtopics.errors import ParameterError

from conftest import planted_nmf_matrix


class TestNndsvdInit:
    def test_diagonal_reconstructs_exactly_before_fill(self):
        A = np.diag([3.0, 2.0])
        W, H = nmf.nndsvd_init(A, 2, zero_fill=False)
        assert np.linalg.norm(A - W @ H) <= 1e-12
        assert W.min() >= 0 and H.min() >= 0

    def test_rank_one_outer_product(self):
        # A = outer([1,2],[1,1,1]): sigma = sqrt(15), u = [1,2]/sqrt(5),
        # v = [1,1,1]/sqrt(3), so W0 H0 = sigma u v^T = A exactly.
        A = np.outer([1.0, 2.0], [1.0, 1.0, 1.0])
        W, H = nmf.nndsvd_init(A, 1, zero_fill=False)
        assert np.linalg.norm(A - W @ H) < 1e-9
        assert W[1, 0] / W[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert H[0, 0] == pytest.approx(H[0, 1], abs=1e-12)
        assert H[0, 1] == pytest.approx(H[0, 2], abs=1e-12)

    def test_repeated_calls_bitwise_identical(self):
        A, k = planted_nmf_matrix(17)
        W1, H1 = nmf.nndsvd_init(A, k)
        W2, H2 = nmf.nndsvd_init(A, k)
        assert np.array_equal(W1, W2)
        assert np.array_equal(H1, H2)

    def test_zero_fill_replaces_exact_zeros(self):
        A = np.diag([3.0, 2.0])
        W, H = nmf.nndsvd_init(A, 2)
        fill = 2.5 * 1e-2  # mean of nonzero entries {3, 2} times 1e-2
        assert W.min() == pytest.approx(fill)
        assert H.min() == pytest.approx(fill)

    def test_k_out_of_range(self):
        A = np.ones((3, 4))
        with pytest.raises(ParameterError):
            nmf.nndsvd_init(A, 4)
        with pytest.raises(ParameterError):
            nmf.nndsvd_init(A, 0)

    def test_negative_matrix_rejected(self):
        with pytest.raises(ParameterError, match="negative"):
            nmf.nndsvd_init(np.array([[1.0, -0.1], [0.0, 1.0]]), 1)

    def test_sparse_input_matches_dense(self):
        A, k = planted_nmf_matrix(23)
        W1, H1 = nmf.nndsvd_init(A, k)
        W2, H2 = nmf.nndsvd_init(sp.csr_matrix(A), k)
        assert np.allclose(W1, W2, atol=1e-12)
        assert np.allclose(H1, H2, atol=1e-12)


class TestFactorize:
    def test_planted_rank3_reaches_tight_error(self):
        rng = np.random.default_rng(71)
        H = np.zeros((3, 36))
        for j, cols in enumerate(np.array_split(np.arange(36), 3)):
            H[j, cols] = 0.5 + rng.random(len(cols))
        W = np.zeros((90, 3))
        W[np.arange(90), rng.integers(0, 3, 90)] = 0.5 + rng.random(90)
        A = W @ H
        f = nmf.factorize(A, 3, max_iter=500, tol=1e-13)
        assert f.final_error < 1e-6 * np.linalg.norm(A)

    def test_objective_never_exceeds_init(self):
        A, _ = planted_nmf_matrix(5)
        f = nmf.factorize(A, 1, max_iter=50, tol=1e-12)
        assert f.error_history[-1] <= f.error_history[0] + 1e-9

    def test_max_iter_zero_rejected(self):
        A, k = planted_nmf_matrix(5)
        with pytest.raises(ParameterError, match="max_iter"):
            nmf.factorize(A, k, max_iter=0)

    def test_monotone_and_nonnegative_random_init(self):
        A, k = planted_nmf_matrix(31)
        f = nmf.factorize(A, k, init="random", seed=3, max_iter=80, tol=1e-12)
        history = np.array(f.error_history)
        assert np.all(np.diff(history) <= 1e-9)
        assert f.W.min() >= 0 and f.H.min() >= 0

    def test_random_init_seeded_reproducible(self):
        A, k = planted_nmf_matrix(31)
        f1 = nmf.factorize(A, k, init="random", seed=9, max_iter=25, tol=1e-12)
        f2 = nmf.factorize(A, k, init="random", seed=9, max_iter=25, tol=1e-12)
        assert np.array_equal(f1.W, f2.W)
        assert np.array_equal(f1.H, f2.H)

    def test_planted_factor_recovery_top5(self):
        # Each topic dominated by a disjoint 5-term block; fitted top-5
        # descriptors must match the planted blocks one-to-one.
        for seed in range(6):
            rng = np.random.default_rng(400 + seed)
            k, block = 4, 5
            m = k * block
            vocab = [f"t{j:02d}" for j in range(m)]
            H = 0.02 * rng.random((k, m))
            for j in range(k):
                H[j, j * block:(j + 1) * block] += 1.0 + rng.random(block)
            W = 0.02 * rng.random((120, k))
            W[np.arange(120), rng.integers(0, k, 120)] += 1.0 + rng.random(120)
            A = W @ H
            f = nmf.factorize(A, k, vocabulary=vocab, max_iter=300, tol=1e-10)
            planted_blocks = [
                frozenset(vocab[j * block:(j + 1) * block]) for j in range(k)
            ]
            matched = set()
            for h in range(k):
                top5 = nmf.top_terms(f, h, 5).term_set()
                scores = [
                    len(top5 & blk) / len(top5 | blk) for blk in planted_blocks
                ]
                best = int(np.argmax(scores))
                assert scores[best] >= 0.8, (seed, h, scores)
                matched.add(best)
            assert matched == set(range(k))

    def test_serialization_roundtrip(self):
        A, k = planted_nmf_matrix(2)
        vocab = [f"v{j}" for j in range(A.shape[1])]
        ids = [f"d{i}" for i in range(A.shape[0])]
        f = nmf.factorize(A, k, vocabulary=vocab, doc_ids=ids, max_iter=20)
        payload = json.loads(f.to_json())
        assert set(payload) == {
            "k", "vocabulary_ref", "doc_ids_ref", "W", "H",
            "final_error", "iterations_run",
        }
        restored = nmf.Factorization.from_json_dict(payload)
        assert np.allclose(restored.W, f.W)
        assert np.allclose(restored.H, f.H)
        assert restored.vocabulary == f.vocabulary


class TestTopTerms:
    def make(self, row, vocab):
        H = np.array([row])
        W = np.ones((1, 1))
        return nmf.Factorization(
            W=W, H=H, k=1, iterations_run=0, final_error=0.0, vocabulary=tuple(vocab)
        )

    def test_descending_sort(self):
        f = self.make([0.5, 0.1, 0.9], ["a", "b", "c"])
        descriptor = nmf.top_terms(f, 0, 2)
        assert descriptor.terms == (("c", 0.9), ("a", 0.5))

    def test_tie_breaks_lexicographically(self):
        f = self.make([0.5, 0.5], ["zebra", "apple"])
        descriptor = nmf.top_terms(f, 0, 1)
        assert descriptor.terms == (("apple", 0.5),)

    def test_full_permutation(self):
        f = self.make([0.3, 0.9, 0.1], ["a", "b", "c"])
        descriptor = nmf.top_terms(f, 0, 3)
        assert descriptor.term_list() == ["b", "a", "c"]

    def test_bounds_checked(self):
        f = self.make([0.3, 0.9], ["a", "b"])
        with pytest.raises(ParameterError):
            nmf.top_terms(f, 1, 1)
        with pytest.raises(ParameterError):
            nmf.top_terms(f, 0, 3)


class TestReconstructionError:
    def test_zero_factors_give_matrix_norm(self):
        A = np.array([[3.0, 4.0]])
        W = np.zeros((1, 1))
        H = np.zeros((1, 2))
        assert nmf.reconstruction_error(A, W, H) == pytest.approx(5.0, abs=1e-12)

    def test_exact_factors_give_zero(self):
        rng = np.random.default_rng(8)
        W = rng.random((12, 3))
        H = rng.random((3, 9))
        assert nmf.reconstruction_error(W @ H, W, H) <= 1e-12

    def test_hand_arithmetic(self):
        assert nmf.reconstruction_error(
            np.array([[1.0]]), np.array([[1.0]]), np.array([[0.0]])
        ) == pytest.approx(1.0, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError, match="shape"):
            nmf.reconstruction_error(np.ones((2, 2)), np.ones((2, 1)), np.ones((1, 3)))

    def test_sparse_input(self):
        A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
        W = np.array([[1.0], [0.0]])
        H = np.array([[1.0, 0.0]])
        assert nmf.reconstruction_error(A, W, H) == pytest.approx(2.0, abs=1e-12)
