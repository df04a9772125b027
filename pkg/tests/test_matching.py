import itertools
import unittest

import networkx as nx
import numpy as np

from graphmarket.application.experiments import has_simple_spectrum
from graphmarket.application.protocol import summarize_set
from graphmarket.graphs.core import Graph, GraphSet, normalized_laplacian, shuffle_nodes
from graphmarket.structure.matching import (
    KeyFrame,
    MatchResult,
    Permutation,
    conformity_error,
    conjugate,
    pad_laplacian,
    solve_assignment,
    spectral_match,
    transitivity_bound,
)
from graphmarket.structure.transport import gwd_sets, structural_disparity
from graphmarket.utils.errors import ShapeError

P2 = Graph.from_edges(2, [(0, 1)])
P3 = Graph.from_edges(3, [(0, 1), (1, 2)])
K3 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def brute_force(profit):
    n = profit.shape[0]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    totals = profit[np.arange(n), perms].sum(axis=1)
    best = int(np.argmax(totals))
    return perms[best], totals[best]


def random_graph(rng, low, high, p=0.4):
    n = int(rng.integers(low, high + 1))
    return Graph.from_networkx(nx.gnp_random_graph(n, p, seed=int(rng.integers(0, 2**31 - 1))))


def connected_simple(rng, low, high):
    while True:
        g = random_graph(rng, low, high, p=0.45)
        if nx.is_connected(g.to_networkx()) and has_simple_spectrum(g):
            return g


class TestPermutation(unittest.TestCase):
    def test_validation_and_inverse(self):
        with self.assertRaises(ShapeError):
            Permutation([0, 0, 1])
        p = Permutation([2, 0, 1])
        self.assertEqual(p.inverse().mapping.tolist(), [1, 2, 0])
        self.assertEqual(p.extend(5).mapping.tolist(), [2, 0, 1, 3, 4])

    def test_matrix_form_matches_conjugation(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4))
        l = a + a.T
        p = Permutation([3, 1, 0, 2])
        pi = p.as_matrix()
        np.testing.assert_allclose(pi.T @ l @ pi, conjugate(l, p))


class TestPadding(unittest.TestCase):
    def test_examples(self):
        l = normalized_laplacian(P2)
        padded = pad_laplacian(l, 3)
        np.testing.assert_array_equal(padded[:2, :2], l)
        np.testing.assert_array_equal(padded[2], np.zeros(3))
        np.testing.assert_array_equal(pad_laplacian(l, 2), l)
        np.testing.assert_array_equal(pad_laplacian(np.zeros((1, 1)), 2), np.zeros((2, 2)))

    def test_cannot_shrink(self):
        with self.assertRaises(ShapeError):
            pad_laplacian(np.eye(3), 2)


class TestAssignment(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(solve_assignment(np.eye(2)).mapping.tolist(), [0, 1])
        self.assertEqual(solve_assignment(np.array([[0.0, 1.0], [1.0, 0.0]])).mapping.tolist(), [1, 0])

    def test_rejects_non_square(self):
        with self.assertRaises(ShapeError):
            solve_assignment(np.zeros((2, 3)))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(1, 8))
            profit = rng.random((n, n))
            mapping = solve_assignment(profit).mapping
            _, best = brute_force(profit)
            self.assertAlmostEqual(profit[np.arange(n), mapping].sum(), best, delta=1e-9)

    def test_ties_break_to_lexicographically_smallest(self):
        rng = np.random.default_rng(2)
        for _ in range(150):
            n = int(rng.integers(2, 6))
            profit = rng.integers(0, 2, size=(n, n)).astype(np.float64)
            expected, _ = brute_force(profit)
            self.assertEqual(solve_assignment(profit).mapping.tolist(), expected.tolist())

    def test_constant_profit_gives_identity(self):
        self.assertEqual(solve_assignment(np.ones((4, 4))).mapping.tolist(), [0, 1, 2, 3])


class TestSpectralMatch(unittest.TestCase):
    def test_self_match(self):
        self.assertAlmostEqual(spectral_match(P3, P3).residual, 0.0, delta=1e-12)

    def test_shuffled_path(self):
        shuffled, _ = shuffle_nodes(P3, seed=5)
        self.assertLessEqual(spectral_match(P3, shuffled).residual, 1e-9)

    def test_vertex_transitive_target_attains_minimum(self):
        key = pad_laplacian(normalized_laplacian(P2), 3)
        target = normalized_laplacian(K3)
        best = min(
            np.linalg.norm(key - conjugate(target, Permutation(list(perm))))
            for perm in itertools.permutations(range(3))
        )
        self.assertAlmostEqual(spectral_match(P2, K3).residual, best, delta=1e-12)

    def test_isomorphism_recovery(self):
        rng = np.random.default_rng(3)
        for trial in range(100):
            g = connected_simple(rng, 4, 12)
            copy, _ = shuffle_nodes(g, seed=trial)
            self.assertLessEqual(spectral_match(g, copy).residual, 1e-6)

            key = KeyFrame(g)
            original, _ = summarize_set(GraphSet([g]), key, k=6, k_prime=4)
            shuffled, _ = summarize_set(GraphSet([copy]), key, k=6, k_prime=4)
            gwd = gwd_sets(original, shuffled)
            self.assertLessEqual(gwd, 1e-6)
            self.assertLessEqual(structural_disparity(gwd, 1.0).s, 1e-6)

    def test_residual_survives_relabeling(self):
        rng = np.random.default_rng(4)
        for trial in range(20):
            key = connected_simple(rng, 9, 9)
            g = connected_simple(rng, 9, 9)
            shuffled, _ = shuffle_nodes(g, seed=trial)
            frame = KeyFrame(key)
            self.assertAlmostEqual(frame.match(g).residual, frame.match(shuffled).residual, delta=1e-9)


class TestConformity(unittest.TestCase):
    def test_examples(self):
        identity = Permutation.identity(3)
        self.assertEqual(conformity_error(K3, K3, identity, identity), 0.0)
        p = Permutation([2, 0, 1])
        self.assertEqual(conformity_error(P3, P3, p, p), 0.0)
        self.assertAlmostEqual(conformity_error(P2, K3, Permutation.identity(2), identity), np.sqrt(2.5), delta=1e-12)

    def test_permutation_must_cover_graph(self):
        with self.assertRaises(ShapeError):
            conformity_error(K3, K3, Permutation.identity(2), Permutation.identity(3))

    def test_transitivity_bound(self):
        identity = Permutation.identity(1)
        self.assertEqual(transitivity_bound(MatchResult(identity, 0.0), MatchResult(identity, 0.0)), 0.0)
        self.assertEqual(transitivity_bound(MatchResult(identity, 1.5), MatchResult(identity, 2.5)), 4.0)

    def test_bound_holds_on_random_triples(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            key = KeyFrame(random_graph(rng, 2, 20))
            g1 = random_graph(rng, 2, 20)
            g2 = random_graph(rng, 2, 20)
            m1, m2 = key.match(g1), key.match(g2)
            error = conformity_error(g1, g2, m1.permutation, m2.permutation)
            self.assertLessEqual(error, transitivity_bound(m1, m2) + 1e-9)


if __name__ == "__main__":
    unittest.main()
