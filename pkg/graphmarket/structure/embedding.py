import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from graphmarket.graphs.core import Graph, degree_vector, normalized_laplacian, sym_eig
from graphmarket.utils.errors import ShapeError

logger = logging.getLogger(__name__)

TRIVIAL_EIGENVALUE = 1e-8

DEFAULT_K = 16
DEFAULT_K_PRIME = 8


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Per-node structural encoding, one column per node.

    Rows 0..k hold random-walk return probabilities, rows k..k+k' the
    absolute entries of the first non-trivial Laplacian eigenvectors.
    """

    data: np.ndarray
    k: int
    k_prime: int

    @property
    def node_count(self) -> int:
        return int(self.data.shape[1])

    @property
    def dim(self) -> int:
        return self.k + self.k_prime


def _check_positive(name: str, value: int) -> None:
    if value < 1:
        raise ShapeError(f"{name} must be at least 1, got {value}")


def random_walk_matrix(g: Graph) -> sp.csr_matrix:
    """RW = A B^-1; columns of isolated nodes are zero."""
    degrees = degree_vector(g).astype(np.float64)
    inverse = np.divide(1.0, degrees, out=np.zeros_like(degrees), where=degrees > 0)
    return (g.adjacency @ sp.diags(inverse)).tocsr()


def rwse(g: Graph, k: int) -> np.ndarray:
    """k x N return probabilities: entry (j-1, i) is (RW^j)_ii."""
    _check_positive("k", k)
    walk = random_walk_matrix(g)
    encoding = np.zeros((k, g.node_count), dtype=np.float64)
    power = walk
    encoding[0] = power.diagonal()
    for step in range(1, k):
        power = (power @ walk).tocsr()
        encoding[step] = power.diagonal()
    return encoding


def lap_pe(g: Graph, k_prime: int) -> np.ndarray:
    """k' x N absolute entries of the first k' non-trivial normalized-Laplacian eigenvectors.

    Rows past the number of non-trivial eigenvectors stay zero.
    """
    _check_positive("k_prime", k_prime)
    spectrum = sym_eig(normalized_laplacian(g))
    non_trivial = spectrum.eigenvectors[:, spectrum.eigenvalues > TRIVIAL_EIGENVALUE]
    taken = non_trivial[:, :k_prime]
    encoding = np.zeros((k_prime, g.node_count), dtype=np.float64)
    encoding[: taken.shape[1]] = np.abs(taken).T
    return encoding


def embed(g: Graph, k: int = DEFAULT_K, k_prime: int = DEFAULT_K_PRIME) -> EmbeddingMatrix:
    data = np.vstack([rwse(g, k), lap_pe(g, k_prime)])
    data.setflags(write=False)
    return EmbeddingMatrix(data=data, k=k, k_prime=k_prime)
