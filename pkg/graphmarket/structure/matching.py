"""
Spectral graph matching against a key graph.

Matching solves a linear assignment over the absolute Laplacian eigenvector
profiles of both graphs instead of the full quadratic problem. All
permutations read "slot i of the first graph's frame holds node
mapping[i] of the second graph", so P*(G_key, G) lays G out in the key
frame.

Distance compatibility between P*(G1, G2) and P*(G2, G1) is never needed:
every comparison goes through key-relative matches, whose conformity is
bounded by `transitivity_bound`.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from graphmarket.graphs.core import Graph, normalized_laplacian, sym_eig
from graphmarket.utils.errors import ShapeError

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Permutation:
    mapping: np.ndarray

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.int64).copy()
        if mapping.ndim != 1 or not np.array_equal(np.sort(mapping), np.arange(mapping.shape[0])):
            raise ShapeError(f"not a permutation: {mapping.tolist()}")
        mapping.setflags(write=False)
        object.__setattr__(self, "mapping", mapping)

    @property
    def n(self) -> int:
        return int(self.mapping.shape[0])

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    def extend(self, n: int) -> "Permutation":
        """Identity on the extra indices [self.n, n)."""
        if n < self.n:
            raise ShapeError(f"cannot shrink a permutation of size {self.n} to {n}")
        return Permutation(np.concatenate([self.mapping, np.arange(self.n, n)]))

    def inverse(self) -> "Permutation":
        inverse = np.empty_like(self.mapping)
        inverse[self.mapping] = np.arange(self.n)
        return Permutation(inverse)

    def as_matrix(self) -> np.ndarray:
        """Pi with Pi[mapping[i], i] = 1, so Pi^T L Pi = L[mapping][:, mapping]."""
        matrix = np.zeros((self.n, self.n))
        matrix[self.mapping, np.arange(self.n)] = 1.0
        return matrix

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.mapping, other.mapping)

    def __hash__(self) -> int:
        return hash(self.mapping.tobytes())


@dataclass(frozen=True)
class MatchResult:
    permutation: Permutation
    residual: float


def pad_laplacian(l: np.ndarray, target: int) -> np.ndarray:
    l = np.asarray(l, dtype=np.float64)
    n = l.shape[0]
    if target < n:
        raise ShapeError(f"cannot pad a {n}x{n} matrix down to {target}")
    padded = np.zeros((target, target))
    padded[:n, :n] = l
    return padded


def conjugate(l: np.ndarray, p: Permutation) -> np.ndarray:
    """Pi^T L Pi for the permutation matrix of `p`."""
    return l[np.ix_(p.mapping, p.mapping)]


def _dual_tight_edges(profit: np.ndarray, mapping: np.ndarray) -> np.ndarray:
    """Edges with zero reduced cost under an optimal dual of the assignment LP.

    Every optimal assignment uses only these edges (complementary slackness).
    """
    n = profit.shape[0]
    matched = profit[np.arange(n), mapping]
    # difference constraints v[mapping[i]] <= v[j] + weights[j, mapping[i]]
    weights = np.empty((n, n))
    weights[:, mapping] = (matched[:, None] - profit).T
    scale = max(1.0, float(np.max(np.abs(profit))))
    v = np.zeros(n)
    for _ in range(n):
        relaxed = np.minimum(v, np.min(v[:, None] + weights, axis=0))
        if np.all(v - relaxed <= TIE_TOLERANCE * scale * 1e-3):
            v = relaxed
            break
        v = relaxed
    u = matched - v[mapping]
    slack = u[:, None] + v[None, :] - profit
    return slack <= TIE_TOLERANCE * scale


def _alternating_path(
    tight: np.ndarray,
    mapping: np.ndarray,
    owner: np.ndarray,
    fixed: np.ndarray,
    start_row: int,
    goal: int,
    banned: int,
) -> Optional[List[Tuple[int, int]]]:
    """Reassignments moving `start_row` off column `banned` and freeing nothing but `goal`."""
    reached_from: Dict[int, int] = {}
    queue = deque([start_row])
    while queue:
        row = queue.popleft()
        for col in np.flatnonzero(tight[row]):
            col = int(col)
            if fixed[col] or col == banned or col in reached_from:
                continue
            reached_from[col] = row
            if col == goal:
                steps = []
                while True:
                    prev_row = reached_from[col]
                    steps.append((prev_row, col))
                    if prev_row == start_row:
                        return steps
                    col = int(mapping[prev_row])
            queue.append(int(owner[col]))
    return None


def _lexicographic_optimum(profit: np.ndarray, mapping: np.ndarray) -> np.ndarray:
    tight = _dual_tight_edges(profit, mapping)
    mapping = mapping.copy()
    n = mapping.shape[0]
    owner = np.empty(n, dtype=np.int64)
    owner[mapping] = np.arange(n)
    fixed = np.zeros(n, dtype=bool)
    for row in range(n):
        goal = int(mapping[row])
        for col in np.flatnonzero(tight[row]):
            col = int(col)
            if col >= goal:
                break
            if fixed[col]:
                continue
            steps = _alternating_path(tight, mapping, owner, fixed, int(owner[col]), goal, col)
            if steps is None:
                continue
            for moved_row, new_col in steps:
                mapping[moved_row] = new_col
                owner[new_col] = moved_row
            mapping[row] = col
            owner[col] = row
            break
        fixed[mapping[row]] = True
    return mapping


def solve_assignment(profit: np.ndarray, tie_break: bool = True) -> Permutation:
    """Permutation maximising sum_i profit[i, mapping[i]].

    With `tie_break`, the lexicographically smallest optimal mapping is returned.
    """
    profit = np.asarray(profit, dtype=np.float64)
    if profit.ndim != 2 or profit.shape[0] != profit.shape[1]:
        raise ShapeError(f"profit matrix must be square, got shape {profit.shape}")
    if profit.shape[0] == 0:
        raise ShapeError("profit matrix is empty")
    if not np.all(np.isfinite(profit)):
        raise ShapeError("profit matrix has non-finite entries")

    rows, cols = linear_sum_assignment(profit, maximize=True)
    mapping = np.empty(profit.shape[0], dtype=np.int64)
    mapping[rows] = cols
    if tie_break and profit.shape[0] > 1:
        mapping = _lexicographic_optimum(profit, mapping)
    elif not tie_break:
        logger.debug("tie refinement skipped for %dx%d assignment", *profit.shape)
    return Permutation(mapping)


class KeyFrame:
    """A key graph with its padded Laplacian spectra cached per padded size."""

    def __init__(self, key: Graph, tie_break: bool = True):
        self.key = key
        self.tie_break = tie_break
        self._laplacian = normalized_laplacian(key)
        self._profiles: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def padded(self, size: int) -> Tuple[np.ndarray, np.ndarray]:
        """(padded Laplacian, absolute eigenvector profile) of the key at `size`."""
        if size not in self._profiles:
            laplacian = pad_laplacian(self._laplacian, size)
            profile = np.abs(sym_eig(laplacian).eigenvectors)
            self._profiles[size] = (laplacian, profile)
        return self._profiles[size]

    def match(self, g: Graph) -> MatchResult:
        size = max(self.key.node_count, g.node_count)
        key_laplacian, key_profile = self.padded(size)
        laplacian = pad_laplacian(normalized_laplacian(g), size)
        profile = np.abs(sym_eig(laplacian).eigenvectors)
        permutation = solve_assignment(key_profile @ profile.T, tie_break=self.tie_break)
        residual = float(np.linalg.norm(key_laplacian - conjugate(laplacian, permutation)))
        return MatchResult(permutation=permutation, residual=residual)


def spectral_match(g1: Graph, g2: Graph, tie_break: bool = True) -> MatchResult:
    """Align g2 onto g1's frame; residual is ||L1 - Pi^T L2 Pi||_F after padding."""
    return KeyFrame(g1, tie_break=tie_break).match(g2)


def conformity_error(g1: Graph, g2: Graph, p1: Permutation, p2: Permutation) -> float:
    """||Pi1^T L1 Pi1 - Pi2^T L2 Pi2||_F, both sides padded to the larger dimension."""
    if p1.n < g1.node_count or p2.n < g2.node_count:
        raise ShapeError(
            f"permutations of size {p1.n}, {p2.n} cannot cover graphs of "
            f"{g1.node_count}, {g2.node_count} nodes"
        )
    size = max(p1.n, p2.n)
    left = conjugate(pad_laplacian(normalized_laplacian(g1), size), p1.extend(size))
    right = conjugate(pad_laplacian(normalized_laplacian(g2), size), p2.extend(size))
    return float(np.linalg.norm(left - right))


def transitivity_bound(m1: MatchResult, m2: MatchResult) -> float:
    """Upper bound on the conformity of two graphs matched to the same key."""
    return m1.residual + m2.residual
