"""
Synthetic workloads for the featural and proxy experiments.

Featural fixtures give every graph one class label; class c multiplies the
variance of every feature by CLASS_VARIANCE_STEP ** c, so the ratio of a
seller's average class factor to the buyer's orders the sellers.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from graphmarket.application.protocol import (
    broker_featural_score,
    buyer_featural_offer,
    seller_featural_response,
)
from graphmarket.featural.spectrum import FeaturalScores
from graphmarket.graphs.core import Graph, GraphSet, induced_subgraph, normalized_laplacian, shuffle_nodes, sym_eig
from graphmarket.utils.errors import ValidationError

logger = logging.getLogger(__name__)

FEATURE_DIM = 6
BASE_SCALE = 0.05
DIM_STEP = 1.2
CLASS_VARIANCE_STEP = 1.25

GRAPHS_PER_PARTY = 40
NODES_PER_GRAPH = 25
EDGE_PROBABILITY = 0.2

BUYER_CLASSES = tuple(range(5))
SELLER_CLASSES = (
    ("classes 0-4", tuple(range(0, 5))),
    ("classes 1-5", tuple(range(1, 6))),
    ("classes 0-9", tuple(range(0, 10))),
    ("classes 3-9", tuple(range(3, 10))),
    ("classes 5-9", tuple(range(5, 10))),
)
NOISE_LABEL = "noise"

SOURCE_NODES = 300
BLOCKS = 6
SPLIT_MEAN_DEGREE = 1.0
SIMPLE_SPECTRUM_GAP = 1e-6
MAX_FIXTURE_ATTEMPTS = 200


@dataclass(frozen=True)
class TrendRow:
    label: str
    diversity: float
    relevance: float


def feature_scales(dim: int = FEATURE_DIM) -> np.ndarray:
    return BASE_SCALE * DIM_STEP ** np.arange(dim)


def _graph_skeleton(rng: np.random.Generator, nodes: int) -> Graph:
    seed = int(rng.integers(0, 2**31 - 1))
    return Graph.from_networkx(nx.gnp_random_graph(nodes, EDGE_PROBABILITY, seed=seed))


def class_scaled_features(
    classes: Sequence[int],
    rng: np.random.Generator,
    graphs: int = GRAPHS_PER_PARTY,
    nodes: int = NODES_PER_GRAPH,
) -> GraphSet:
    """Zero-mean Gaussian node features; graph i belongs to classes[i % len(classes)]."""
    if not classes:
        raise ValidationError("at least one class is required")
    scales = feature_scales()
    members = []
    for i in range(graphs):
        factor = CLASS_VARIANCE_STEP ** classes[i % len(classes)]
        features = np.sqrt(factor * scales) * rng.standard_normal((nodes, scales.size))
        members.append(_graph_skeleton(rng, nodes).with_features(features))
    return GraphSet(members)


def noise_features(
    rng: np.random.Generator,
    variance: float = 1.0,
    graphs: int = GRAPHS_PER_PARTY,
    nodes: int = NODES_PER_GRAPH,
) -> GraphSet:
    members = []
    for _ in range(graphs):
        features = np.sqrt(variance) * rng.standard_normal((nodes, FEATURE_DIM))
        members.append(_graph_skeleton(rng, nodes).with_features(features))
    return GraphSet(members)


def featural_exchange(buyer: GraphSet, seller: GraphSet) -> FeaturalScores:
    """The featural half of a session on its own: basis to the seller, spectra to the broker."""
    vectors, values = buyer_featural_offer(buyer)
    variances = seller_featural_response(seller, vectors.eigenvectors)
    return broker_featural_score(values.eigenvalues, variances.values)


def _rows(buyer: GraphSet, sellers: Sequence[Tuple[str, GraphSet]]) -> List[TrendRow]:
    rows = []
    for label, seller in sellers:
        scores = featural_exchange(buyer, seller)
        rows.append(TrendRow(label=label, diversity=scores.diversity, relevance=scores.relevance))
    return rows


def featural_trend(seed: int = 0) -> List[TrendRow]:
    """Buyer on classes 0-4 against the five class-range sellers and one unit-variance noise seller."""
    rng = np.random.default_rng(seed)
    buyer = class_scaled_features(BUYER_CLASSES, rng)
    sellers = [(label, class_scaled_features(classes, rng)) for label, classes in SELLER_CLASSES]
    sellers.append((NOISE_LABEL, noise_features(rng)))
    return _rows(buyer, sellers)


def mixture_trend(seed: int = 0, shares: Sequence[float] = (0.2, 0.4, 0.8, 1.0)) -> List[TrendRow]:
    """Buyer is all class 0; each seller mixes in the given share of class 5 graphs."""
    rng = np.random.default_rng(seed)
    buyer = class_scaled_features([0], rng)
    sellers = []
    for share in shares:
        foreign = int(round(share * GRAPHS_PER_PARTY))
        classes = [5] * foreign + [0] * (GRAPHS_PER_PARTY - foreign)
        sellers.append((f"{int(round(share * 100))}% class 5", class_scaled_features(classes, rng)))
    return _rows(buyer, sellers)


def noise_sweep(seed: int = 0, variances: Sequence[float] = (0.5, 2.0, 8.0, 32.0)) -> List[TrendRow]:
    rng = np.random.default_rng(seed)
    buyer = class_scaled_features(BUYER_CLASSES, rng)
    sellers = [(f"noise variance {variance:g}", noise_features(rng, variance)) for variance in variances]
    return _rows(buyer, sellers)


def has_simple_spectrum(g: Graph, gap: float = SIMPLE_SPECTRUM_GAP) -> bool:
    eigenvalues = sym_eig(normalized_laplacian(g)).eigenvalues
    return bool(np.all(np.diff(eigenvalues) > gap))


def block_source(seed: int = 0, nodes: int = SOURCE_NODES, blocks: int = BLOCKS) -> Tuple[Graph, List[List[int]]]:
    """Stochastic block model whose block b has intra-block density 0.1 + 0.05 b.

    Seeds are advanced until block 0 (the baseline) is connected with a simple Laplacian spectrum.
    """
    sizes = [nodes // blocks] * blocks
    sizes[-1] += nodes - sum(sizes)
    densities = [[0.1 + 0.05 * i if i == j else 0.005 for j in range(blocks)] for i in range(blocks)]
    for attempt in range(MAX_FIXTURE_ATTEMPTS):
        sample = nx.stochastic_block_model(sizes, densities, seed=seed + attempt)
        partition = [sorted(block) for block in sample.graph["partition"]]
        source = Graph.from_networkx(sample)
        baseline = induced_subgraph(source, partition[0])
        if nx.is_connected(baseline.to_networkx()) and has_simple_spectrum(baseline):
            if attempt:
                logger.debug("block source accepted after %d resamples", attempt)
            return source, partition
    raise ValidationError(f"no usable block source within {MAX_FIXTURE_ATTEMPTS} seeds from {seed}")


def shuffled_candidates(count: int, seed: int = 0) -> Tuple[GraphSet, List[GraphSet]]:
    """Baseline block of the source graph plus `count` node-shuffled copies of it."""
    source, partition = block_source(seed)
    return shuffled_copies(induced_subgraph(source, partition[0]), count, seed)


def block_split_candidates(count: int, seed: int = 0) -> Tuple[GraphSet, List[GraphSet]]:
    """Baseline block plus the next `count` blocks, each node-shuffled."""
    if not 1 <= count < BLOCKS:
        raise ValidationError(f"a {BLOCKS}-block source offers at most {BLOCKS - 1} candidates")
    source, partition = block_source(seed)
    baseline = induced_subgraph(source, partition[0])
    candidates = []
    for i in range(1, count + 1):
        block = induced_subgraph(source, partition[i])
        candidates.append(GraphSet([shuffle_nodes(block, seed + i)[0]]))
    return GraphSet([baseline]), candidates


def split_source(seed: int = 0, nodes: int = SOURCE_NODES, mean_degree: float = SPLIT_MEAN_DEGREE) -> Graph:
    """Sparse G(n, p) source for random splits; pieces of up to ~n/2 nodes stay below the giant-component threshold."""
    if nodes < 2:
        raise ValidationError(f"split source needs at least 2 nodes, got {nodes}")
    return Graph.from_networkx(nx.gnp_random_graph(nodes, mean_degree / (nodes - 1), seed=seed))


def split_shares(count: int) -> List[int]:
    """Piece i of a split into count + 1 pieces gets share i + 1; equal shares would make candidates exchangeable."""
    return list(range(1, count + 2))


def random_split_candidates(g: Graph, count: int, seed: int = 0) -> Tuple[GraphSet, List[GraphSet]]:
    """Shuffle the nodes of `g` and cut them into count + 1 subgraphs of growing size; the first is the baseline."""
    shares = np.cumsum(split_shares(max(count, 1)))
    if count < 1 or g.node_count < 2 * shares[-1]:
        raise ValidationError(f"cannot split {g.node_count} nodes into {count + 1} subgraphs")
    order = np.random.default_rng(seed).permutation(g.node_count)
    cuts = np.rint(g.node_count * shares[:-1] / shares[-1]).astype(np.int64)
    pieces = [GraphSet([induced_subgraph(g, chunk.tolist())]) for chunk in np.split(order, cuts)]
    return pieces[0], pieces[1:]


def random_split_fixture(count: int, seed: int = 0) -> Tuple[GraphSet, List[GraphSet]]:
    return random_split_candidates(split_source(seed), count, seed)


def shuffled_copies(g: Graph, count: int, seed: int = 0) -> Tuple[GraphSet, List[GraphSet]]:
    """`g` as the baseline and `count` node-shuffled copies of it as candidates."""
    candidates = [GraphSet([shuffle_nodes(g, seed + 1 + i)[0]]) for i in range(count)]
    return GraphSet([g]), candidates


def trend_rows_csv(rows: Sequence[TrendRow], repetition: Optional[int] = None) -> List[List[str]]:
    header = ["seller", "D", "R"] if repetition is None else ["seed", "seller", "D", "R"]
    lead = [] if repetition is None else [str(repetition)]
    return [header] + [lead + [row.label, repr(row.diversity), repr(row.relevance)] for row in rows]
