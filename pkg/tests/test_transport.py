import unittest

import numpy as np
from scipy.optimize import linprog

from graphmarket.structure.embedding import EmbeddingMatrix
from graphmarket.structure.matching import Permutation
from graphmarket.structure.transport import (
    PooledSummary,
    align_embedding,
    gwd_pair,
    gwd_sets,
    mean_pool,
    structural_disparity,
    w1_1d,
    w1_quantile,
    w1_sorted,
)
from graphmarket.utils.errors import ShapeError, ValidationError


def transport_oracle(a, b):
    """W1 as a linear program with integer masses: every a carries m, every b carries n."""
    n, m = len(a), len(b)
    cost = np.abs(np.subtract.outer(a, b)).ravel()
    rows = np.zeros((n + m, n * m))
    for i in range(n):
        rows[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        rows[n + j, j::m] = 1.0
    supply = np.concatenate([np.full(n, float(m)), np.full(m, float(n))])
    result = linprog(cost, A_eq=rows, b_eq=supply, bounds=(0, None), method="highs")
    return result.fun / (n * m)


class TestWasserstein(unittest.TestCase):
    def test_examples(self):
        self.assertAlmostEqual(w1_1d([0.0], [0.0, 2.0]), 1.0)
        self.assertAlmostEqual(w1_1d([0.0, 2.0], [1.0, 3.0]), 1.0)
        self.assertAlmostEqual(w1_1d([0.0, 0.0], [1.0, 1.0]), 1.0)
        self.assertEqual(w1_1d([1.5, -2.0], [-2.0, 1.5]), 0.0)

    def test_rejects_empty_and_non_finite(self):
        with self.assertRaises(ShapeError):
            w1_1d([], [1.0])
        with self.assertRaises(ShapeError):
            w1_1d([np.nan], [1.0])
        with self.assertRaises(ShapeError):
            w1_sorted([1.0], [1.0, 2.0])

    def test_matches_linear_program(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            a, b = rng.normal(size=n), rng.normal(size=m)
            self.assertAlmostEqual(w1_1d(a, b), transport_oracle(a, b), delta=1e-9)

    def test_sorted_and_quantile_agree(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 20))
            a, b = rng.normal(size=n), rng.normal(size=n)
            self.assertAlmostEqual(w1_sorted(a, b), w1_quantile(a, b), delta=1e-12)

    def test_metric_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            a, b, c = (rng.normal(size=int(rng.integers(1, 9))) for _ in range(3))
            self.assertAlmostEqual(w1_1d(a, b), w1_1d(b, a), delta=1e-12)
            self.assertLessEqual(w1_1d(a, c), w1_1d(a, b) + w1_1d(b, c) + 1e-12)


class TestPooling(unittest.TestCase):
    def test_align_places_matched_nodes(self):
        e = EmbeddingMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]), k=1, k_prime=1)
        aligned = align_embedding(e, Permutation([1, 0]), node_cap=3)
        np.testing.assert_array_equal(aligned, [[2.0, 4.0], [1.0, 3.0], [0.0, 0.0]])

    def test_align_pads_small_graph(self):
        e = EmbeddingMatrix(np.array([[5.0], [7.0]]), k=1, k_prime=1)
        aligned = align_embedding(e, Permutation([2, 0, 1]), node_cap=3)
        np.testing.assert_array_equal(aligned, [[0.0, 0.0], [5.0, 7.0], [0.0, 0.0]])

    def test_align_errors(self):
        e = EmbeddingMatrix(np.ones((2, 3)), k=1, k_prime=1)
        with self.assertRaises(ShapeError):
            align_embedding(e, Permutation.identity(2), node_cap=3)
        e = EmbeddingMatrix(np.ones((2, 2)), k=1, k_prime=1)
        with self.assertRaises(ShapeError):
            align_embedding(e, Permutation.identity(3), node_cap=2)

    def test_mean_pool(self):
        stack = np.array([[[1.0, 3.0], [0.0, 0.0]], [[2.0, 2.0], [4.0, 0.0]]])
        summary = mean_pool(stack)
        np.testing.assert_array_equal(summary.data, [[2.0, 0.0], [2.0, 2.0]])
        self.assertEqual((summary.graph_count, summary.node_cap), (2, 2))
        with self.assertRaises(ShapeError):
            mean_pool(np.zeros((2, 2)))

    def test_summary_is_read_only(self):
        summary = PooledSummary(np.zeros((1, 2)))
        with self.assertRaises(ValueError):
            summary.data[0, 0] = 1.0


class TestGWD(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(gwd_pair(np.array([[0.0]]), np.array([[3.0]])), 3.0)
        self.assertEqual(gwd_pair(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]])), 2.0)
        z1 = np.array([[0.0], [1.0]])
        z2 = np.array([[0.75], [1.75]])
        self.assertAlmostEqual(gwd_pair(z1, z2), 0.75)

    def test_narrower_side_is_zero_padded(self):
        self.assertEqual(gwd_pair(np.array([[1.0]]), np.array([[1.0, 2.0]])), 2.0)

    def test_identical_summaries(self):
        rng = np.random.default_rng(3)
        summary = PooledSummary(rng.normal(size=(5, 8)))
        self.assertEqual(gwd_sets(summary, summary), 0.0)

    def test_thread_parity(self):
        rng = np.random.default_rng(4)
        a = PooledSummary(rng.normal(size=(6, 12)))
        b = PooledSummary(rng.normal(size=(4, 12)))
        self.assertEqual(gwd_sets(a, b), gwd_sets(a, b, threads=4))


class TestDisparity(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(structural_disparity(0.0, 1.0).s, 0.0)
        self.assertEqual(structural_disparity(0.0, 0.0).s, 1.0)
        self.assertEqual(structural_disparity(3.0, 0.0).s, 0.25)
        self.assertEqual(structural_disparity(1.0, 0.5).s, 0.0)

    def test_rejects_bad_input(self):
        for alpha in (-0.1, 1.5):
            with self.assertRaises(ValidationError):
                structural_disparity(1.0, alpha)
        with self.assertRaises(ValidationError):
            structural_disparity(-1.0, 0.5)

    def test_monotone_in_gwd(self):
        values = [0.0, 0.1, 1.0, 10.0, 1000.0]
        grows = [structural_disparity(v, 1.0).s for v in values]
        shrinks = [structural_disparity(v, 0.0).s for v in values]
        self.assertEqual(grows, sorted(grows))
        self.assertEqual(shrinks, sorted(shrinks, reverse=True))
        for v in values:
            self.assertTrue(0.0 <= structural_disparity(v, 0.3).s <= 1.0)


if __name__ == "__main__":
    unittest.main()
