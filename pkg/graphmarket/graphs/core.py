import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.sparse as sp

from graphmarket.utils.errors import GraphInvariantError, ShapeError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-10

Edge = Tuple[int, int]


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Graph:
    """An undirected simple graph on nodes 0..node_count-1.

    Edges are stored as sorted (u, v) pairs with u < v. Node features, when
    present, are an N x r float matrix whose row i belongs to node i.
    """

    node_count: int
    edges: Tuple[Edge, ...]
    features: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.node_count < 1:
            raise GraphInvariantError(f"node_count must be positive, got {self.node_count}")

        canonical = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphInvariantError(f"self-loop on node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise GraphInvariantError(
                    f"edge ({u}, {v}) outside node range [0, {self.node_count})"
                )
            canonical.append((min(u, v), max(u, v)))
        canonical.sort()
        for previous, current in zip(canonical, canonical[1:]):
            if previous == current:
                raise GraphInvariantError(f"duplicate edge {current}")
        object.__setattr__(self, "edges", tuple(canonical))

        if self.features is not None:
            features = np.asarray(self.features, dtype=np.float64)
            if features.ndim == 1:
                features = features.reshape(-1, 1)
            if features.ndim != 2 or features.shape[0] != self.node_count:
                raise GraphInvariantError(
                    f"feature matrix has shape {features.shape}, "
                    f"expected {self.node_count} rows"
                )
            if not np.all(np.isfinite(features)):
                raise GraphInvariantError("feature matrix contains non-finite values")
            object.__setattr__(self, "features", _readonly(features))

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[Sequence[int]],
        features: Optional[np.ndarray] = None,
    ) -> "Graph":
        """Build a graph from possibly repeated or mirrored pairs."""
        unique = {(min(int(u), int(v)), max(int(u), int(v))) for u, v in edges}
        return cls(node_count=node_count, edges=tuple(sorted(unique)), features=features)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> Optional[int]:
        return None if self.features is None else int(self.features.shape[1])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.node_count, self.node_count), dtype=np.float64)
        pairs = np.asarray(self.edges, dtype=np.int64)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        data = np.ones(rows.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.node_count, self.node_count))

    def with_features(self, features: Optional[np.ndarray]) -> "Graph":
        return Graph(node_count=self.node_count, edges=self.edges, features=features)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(self.edges)
        return graph

    @classmethod
    def from_networkx(cls, graph: nx.Graph, features: Optional[np.ndarray] = None) -> "Graph":
        index = {node: i for i, node in enumerate(sorted(graph.nodes()))}
        edges = [(index[u], index[v]) for u, v in graph.edges() if u != v]
        return cls.from_edges(len(index), edges, features=features)


@dataclass(frozen=True)
class GraphSet:
    """An ordered, non-empty collection of graphs sharing one feature dimension."""

    graphs: Tuple[Graph, ...]

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise GraphInvariantError("a graph set needs at least one graph")
        dims = {g.feature_dim for g in graphs}
        if len(dims) > 1:
            raise GraphInvariantError(f"graphs carry mixed feature dimensions {sorted(map(str, dims))}")
        object.__setattr__(self, "graphs", graphs)

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self) -> Iterator[Graph]:
        return iter(self.graphs)

    def __getitem__(self, index: int) -> Graph:
        return self.graphs[index]

    @property
    def feature_dim(self) -> Optional[int]:
        return self.graphs[0].feature_dim

    @property
    def has_features(self) -> bool:
        return self.feature_dim is not None

    @property
    def max_nodes(self) -> int:
        return max(g.node_count for g in self.graphs)

    @property
    def total_nodes(self) -> int:
        return sum(g.node_count for g in self.graphs)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues with orthonormal eigenvector columns.

    Each column's entry of largest magnitude is non-negative.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def degree_vector(g: Graph) -> np.ndarray:
    degrees = np.zeros(g.node_count, dtype=np.int64)
    for u, v in g.edges:
        degrees[u] += 1
        degrees[v] += 1
    return degrees


def inverse_sqrt_degrees(g: Graph) -> np.ndarray:
    degrees = degree_vector(g).astype(np.float64)
    with np.errstate(divide="ignore"):
        d_inv_sqrt = 1.0 / np.sqrt(degrees)
    # isolated nodes: pseudo-inverse convention
    d_inv_sqrt[~np.isfinite(d_inv_sqrt)] = 0.0
    return d_inv_sqrt


def normalized_laplacian(g: Graph) -> np.ndarray:
    """Dense I - B^-1/2 A B^-1/2 with zero rows and columns for isolated nodes."""
    d_inv_sqrt = inverse_sqrt_degrees(g)
    scaling = sp.diags(d_inv_sqrt)
    normalized = (scaling @ g.adjacency @ scaling).toarray()
    return np.diag((d_inv_sqrt > 0).astype(np.float64)) - normalized


def sym_eig(m: np.ndarray) -> SpectralDecomposition:
    matrix = np.asarray(m, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"sym_eig needs a square matrix, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE * scale:
        raise ShapeError(f"matrix is not symmetric (max asymmetry {asymmetry:.3e})")

    eigenvalues, eigenvectors = scipy.linalg.eigh((matrix + matrix.T) / 2.0)
    pivots = np.argmax(np.abs(eigenvectors), axis=0)
    signs = np.where(eigenvectors[pivots, np.arange(eigenvectors.shape[1])] < 0, -1.0, 1.0)
    eigenvectors = eigenvectors * signs
    return SpectralDecomposition(eigenvalues=_readonly(eigenvalues), eigenvectors=_readonly(eigenvectors))


def generate_proxy(node_count: int, edge_probability: float = 0.5, seed: int = 0) -> Graph:
    """Seeded Erdos-Renyi G(n, p) proxy graph, resampled with seed+1 until it has an edge."""
    if node_count < 2:
        raise GraphInvariantError(f"a proxy graph needs at least 2 nodes, got {node_count}")
    if not 0.0 < edge_probability < 1.0:
        raise GraphInvariantError(f"edge probability must lie in (0, 1), got {edge_probability}")

    attempt_seed = int(seed)
    while True:
        sample = nx.gnp_random_graph(node_count, edge_probability, seed=attempt_seed)
        if sample.number_of_edges() > 0:
            break
        logger.debug("proxy sample with seed %d is empty, resampling", attempt_seed)
        attempt_seed += 1
    return Graph.from_edges(node_count, sample.edges())


def induced_subgraph(g: Graph, nodes: Sequence[int]) -> Graph:
    """Subgraph on `nodes`; node nodes[i] becomes node i."""
    position = {int(node): i for i, node in enumerate(nodes)}
    if len(position) != len(nodes):
        raise GraphInvariantError("induced_subgraph got repeated nodes")
    edges = [
        (position[u], position[v])
        for u, v in g.edges
        if u in position and v in position
    ]
    features = None if g.features is None else g.features[np.asarray(nodes, dtype=np.int64)]
    return Graph.from_edges(len(position), edges, features=features)


def shuffle_nodes(g: Graph, seed: int) -> Tuple[Graph, np.ndarray]:
    """Relabel nodes randomly. Returns the copy and `order`, where new node i is old node order[i]."""
    order = np.random.default_rng(seed).permutation(g.node_count)
    return induced_subgraph(g, order.tolist()), order
