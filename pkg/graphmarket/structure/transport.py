"""
Graph Wasserstein distance between aligned node embeddings.

Every node slot of the key frame carries a one-dimensional sample (the
embedding coordinates of one graph, or the pooled values of a whole set);
the distance is the sum over slots of the 1-D Wasserstein-1 distance
between the two samples. The optimal 1-D coupling is monotone, so it is
realised through quantile functions and never stored.

Slots are summed, not averaged: magnitudes grow with the node cap, so only
compare distances computed at the same cap. Zero-padding of the narrower
side adds artificial mass at 0 for the missing slots.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from graphmarket.structure.embedding import EmbeddingMatrix
from graphmarket.structure.matching import Permutation
from graphmarket.utils.errors import ShapeError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PooledSummary:
    """|G| x |V| mean-pooled embeddings: row g is graph g, column i is key-frame slot i."""

    data: np.ndarray

    def __post_init__(self):
        try:
            data = np.array(self.data, dtype=np.float64)
        except ValueError as err:
            raise ShapeError(f"pooled summary is not a numeric matrix: {err}")
        if data.ndim != 2 or data.shape[0] == 0:
            raise ShapeError(f"pooled summary must be a non-empty matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("pooled summary has non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def graph_count(self) -> int:
        return int(self.data.shape[0])

    @property
    def node_cap(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True)
class DisparityScore:
    gwd: float
    s: float
    alpha: float


def _as_sample(values: Sequence[float], name: str) -> np.ndarray:
    sample = np.asarray(values, dtype=np.float64).ravel()
    if sample.size == 0:
        raise ShapeError(f"{name} is empty")
    if not np.all(np.isfinite(sample)):
        raise ShapeError(f"{name} has non-finite values")
    return sample


def w1_sorted(a: Sequence[float], b: Sequence[float]) -> float:
    """Equal-size W1: mean absolute difference of the order statistics."""
    a = np.sort(_as_sample(a, "a"))
    b = np.sort(_as_sample(b, "b"))
    if a.size != b.size:
        raise ShapeError(f"w1_sorted needs equal sizes, got {a.size} and {b.size}")
    return float(np.mean(np.abs(a - b)))


def w1_quantile(a: Sequence[float], b: Sequence[float]) -> float:
    """W1 as the integral of |F_a^-1(q) - F_b^-1(q)| over the merged quantile breakpoints.

    Breakpoints i/n and j/m are kept as integers in units of 1/(n*m), so the
    merge is exact for any pair of sizes.
    """
    a = np.sort(_as_sample(a, "a"))
    b = np.sort(_as_sample(b, "b"))
    n, m = a.size, b.size
    a_steps = np.arange(1, n + 1, dtype=np.int64) * m
    b_steps = np.arange(1, m + 1, dtype=np.int64) * n
    breakpoints = np.union1d(a_steps, b_steps)
    a_quantiles = a[np.searchsorted(a_steps, breakpoints, side="left")]
    b_quantiles = b[np.searchsorted(b_steps, breakpoints, side="left")]
    widths = np.diff(np.concatenate([[0], breakpoints]))
    return float(np.sum(widths * np.abs(a_quantiles - b_quantiles)) / (n * m))


def w1_1d(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact 1-D Wasserstein-1 distance between two empirical distributions."""
    a = _as_sample(a, "a")
    b = _as_sample(b, "b")
    if a.size == b.size:
        return w1_sorted(a, b)
    return w1_quantile(a, b)


def align_embedding(e: EmbeddingMatrix, p: Permutation, node_cap: int) -> np.ndarray:
    """node_cap x (k+k') embedding in the key frame: row i is node p.mapping[i], zero rows pad."""
    if p.n < e.node_count:
        raise ShapeError(f"permutation of size {p.n} cannot place {e.node_count} nodes")
    if node_cap < p.n:
        raise ShapeError(f"node cap {node_cap} is below the permutation size {p.n}")
    rows = np.zeros((p.n, e.dim))
    rows[: e.node_count] = e.data.T
    aligned = np.zeros((node_cap, e.dim))
    aligned[: p.n] = rows[p.mapping]
    return aligned


def mean_pool(stack: np.ndarray) -> PooledSummary:
    """Average a |G| x node_cap x (k+k') tensor over its embedding axis."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise ShapeError(f"mean_pool needs a non-empty 3-D tensor, got shape {stack.shape}")
    return PooledSummary(stack.mean(axis=2))


def _pad_columns(matrix: np.ndarray, width: int) -> np.ndarray:
    padded = np.zeros((matrix.shape[0], width))
    padded[:, : matrix.shape[1]] = matrix
    return padded


def gwd_pair(z1: np.ndarray, z2: np.ndarray, threads: Optional[int] = None) -> float:
    """Sum over columns of W1 between column i of z1 and column i of z2.

    Columns are node slots, rows are samples; the narrower matrix is
    zero-padded and the row counts may differ.
    """
    z1 = np.atleast_2d(np.asarray(z1, dtype=np.float64))
    z2 = np.atleast_2d(np.asarray(z2, dtype=np.float64))
    width = max(z1.shape[1], z2.shape[1])
    z1 = _pad_columns(z1, width)
    z2 = _pad_columns(z2, width)

    def column_distance(i: int) -> float:
        return w1_1d(z1[:, i], z2[:, i])

    if threads and threads > 1 and width > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            distances = list(pool.map(column_distance, range(width)))
    else:
        distances = [column_distance(i) for i in range(width)]
    total = 0.0
    for distance in distances:
        total += distance
    return total


def gwd_sets(fb: PooledSummary, fs: PooledSummary, threads: Optional[int] = None) -> float:
    return gwd_pair(fb.data, fs.data, threads=threads)


def structural_disparity(gwd: float, alpha: float) -> DisparityScore:
    """S = |alpha - 1 / (1 + gwd)|."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    if not gwd >= 0.0:
        raise ValidationError(f"gwd must be non-negative, got {gwd}")
    return DisparityScore(gwd=float(gwd), s=abs(alpha - 1.0 / (1.0 + gwd)), alpha=float(alpha))
