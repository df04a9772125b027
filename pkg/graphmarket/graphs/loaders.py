"""
Readers and writers for the dataset formats a party can bring:
plain edge lists, per-node feature CSVs, TU-format directories and
JSON manifests that bundle edge lists and feature files into a GraphSet.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from graphmarket.graphs.core import Graph, GraphSet
from graphmarket.utils.errors import DataIOError, GraphFormatError, GraphInvariantError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ManifestEntry(BaseModel):
    edges: str
    features: Optional[str] = None
    # without it, node ids are reindexed densely and isolated nodes are lost
    nodes: Optional[int] = None


class Manifest(BaseModel):
    graphs: List[ManifestEntry]


def _read_lines(path: PathLike) -> List[str]:
    path = Path(path)
    if not path.is_file():
        raise DataIOError("file not found", path=str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read().splitlines()
    except (OSError, UnicodeDecodeError) as err:
        raise DataIOError(f"cannot read file ({err})", path=str(path)) from err


def _parse_edge_lines(path: PathLike, lines: List[str]) -> Tuple[List[Tuple[int, int]], int]:
    pairs = []
    self_loops = 0
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise GraphFormatError(f"expected 'u v', got {raw!r}", path=str(path), line=number)
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id in {raw!r}", path=str(path), line=number)
        if u < 0 or v < 0:
            raise GraphFormatError(f"negative node id in {raw!r}", path=str(path), line=number)
        if u == v:
            self_loops += 1
            continue
        pairs.append((u, v))
    return pairs, self_loops


def load_edge_list(path: PathLike, node_count: Optional[int] = None) -> Graph:
    """Read a whitespace-separated edge list.

    Without `node_count`, node ids are reindexed densely in ascending order.
    With it, ids are kept as-is and must lie in [0, node_count).
    """
    pairs, self_loops = _parse_edge_lines(path, _read_lines(path))
    if self_loops:
        logger.info("%s: dropped %d self-loop(s)", path, self_loops)
    if node_count is not None:
        try:
            return Graph.from_edges(node_count, pairs)
        except GraphInvariantError as err:
            raise GraphFormatError(str(err), path=str(path))
    ids = sorted({node for pair in pairs for node in pair})
    if not ids:
        raise GraphFormatError("edge list contains no edges", path=str(path))
    index = {node: i for i, node in enumerate(ids)}
    return Graph.from_edges(len(ids), [(index[u], index[v]) for u, v in pairs])


def _parse_float_rows(path: PathLike, lines: List[str]) -> np.ndarray:
    rows = []
    width = None
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            row = [float(token) for token in line.split(",")]
        except ValueError:
            raise GraphFormatError(f"non-numeric value in {raw!r}", path=str(path), line=number)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise GraphFormatError(
                f"row has {len(row)} values, expected {width}", path=str(path), line=number
            )
        if not all(np.isfinite(row)):
            raise GraphFormatError("non-finite value", path=str(path), line=number)
        rows.append(row)
    if not rows:
        raise GraphFormatError("no rows", path=str(path))
    return np.asarray(rows, dtype=np.float64)


def load_feature_csv(path: PathLike, g: Graph) -> Graph:
    features = _parse_float_rows(path, _read_lines(path))
    if features.shape[0] != g.node_count:
        raise GraphFormatError(
            f"{features.shape[0]} feature rows for a graph with {g.node_count} nodes",
            path=str(path),
        )
    return g.with_features(features)


def _tu_file(directory: Path, name: str, suffix: str) -> Path:
    return directory / f"{name}_{suffix}.txt"


def load_tu_dataset(directory: PathLike) -> GraphSet:
    """Read a TU-format dataset: DS_A.txt, DS_graph_indicator.txt and optional DS_node_attributes.txt."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataIOError("dataset directory not found", path=str(directory))
    candidates = sorted(directory.glob("*_A.txt"))
    if len(candidates) != 1:
        raise DataIOError(
            f"expected exactly one *_A.txt file, found {len(candidates)}", path=str(directory)
        )
    name = candidates[0].name[: -len("_A.txt")]

    indicator_path = _tu_file(directory, name, "graph_indicator")
    indicator = []
    for number, raw in enumerate(_read_lines(indicator_path), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            indicator.append(int(line))
        except ValueError:
            raise GraphFormatError(f"bad graph id {raw!r}", path=str(indicator_path), line=number)
    if not indicator:
        raise GraphFormatError("empty graph indicator", path=str(indicator_path))

    # global node id (0-based) -> (graph position, local index)
    graph_ids = sorted(set(indicator))
    position = {gid: i for i, gid in enumerate(graph_ids)}
    local_index = []
    counts = [0] * len(graph_ids)
    for gid in indicator:
        slot = position[gid]
        local_index.append(counts[slot])
        counts[slot] += 1

    adjacency_path = candidates[0]
    edges: List[List[Tuple[int, int]]] = [[] for _ in graph_ids]
    self_loops = 0
    for number, raw in enumerate(_read_lines(adjacency_path), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = [token.strip() for token in line.split(",")]
        try:
            u, v = (int(token) - 1 for token in tokens)
        except ValueError:
            raise GraphFormatError(f"expected 'u, v', got {raw!r}", path=str(adjacency_path), line=number)
        if not (0 <= u < len(indicator) and 0 <= v < len(indicator)):
            raise GraphFormatError(
                f"node id outside the graph indicator (has {len(indicator)} nodes)",
                path=str(adjacency_path),
                line=number,
            )
        if indicator[u] != indicator[v]:
            raise GraphFormatError(
                f"edge joins graphs {indicator[u]} and {indicator[v]}",
                path=str(adjacency_path),
                line=number,
            )
        if u == v:
            self_loops += 1
            continue
        edges[position[indicator[u]]].append((local_index[u], local_index[v]))
    if self_loops:
        logger.info("%s: dropped %d self-loop(s)", adjacency_path, self_loops)

    attributes_path = _tu_file(directory, name, "node_attributes")
    attributes = None
    if attributes_path.exists():
        attributes = _parse_float_rows(attributes_path, _read_lines(attributes_path))
        if attributes.shape[0] != len(indicator):
            raise GraphFormatError(
                f"{attributes.shape[0]} attribute rows for {len(indicator)} nodes",
                path=str(attributes_path),
            )

    members: Dict[int, List[int]] = {i: [] for i in range(len(graph_ids))}
    for node, gid in enumerate(indicator):
        members[position[gid]].append(node)

    graphs = []
    for slot in range(len(graph_ids)):
        features = None if attributes is None else attributes[members[slot]]
        graphs.append(Graph.from_edges(counts[slot], edges[slot], features=features))
    logger.info("loaded %d graphs from TU dataset %s", len(graphs), name)
    return GraphSet(tuple(graphs))


def load_manifest(path: PathLike) -> GraphSet:
    """Read a JSON manifest; entry paths are resolved relative to the manifest file."""
    path = Path(path)
    if not path.is_file():
        raise DataIOError("manifest not found", path=str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = Manifest(**json.load(f))
    except json.JSONDecodeError as err:
        raise GraphFormatError(f"invalid JSON ({err.msg})", path=str(path), line=err.lineno)
    except (TypeError, PydanticValidationError) as err:
        raise GraphFormatError(f"invalid manifest ({err})", path=str(path))

    graphs = []
    for entry in manifest.graphs:
        graph = load_edge_list(path.parent / entry.edges, node_count=entry.nodes)
        if entry.features is not None:
            graph = load_feature_csv(path.parent / entry.features, graph)
        graphs.append(graph)
    try:
        return GraphSet(tuple(graphs))
    except GraphInvariantError as err:
        raise GraphFormatError(str(err), path=str(path))


def write_edge_list(g: Graph, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {g.node_count} nodes, {g.edge_count} edges\n")
        for u, v in g.edges:
            f.write(f"{u} {v}\n")
    return path


def write_feature_csv(g: Graph, path: PathLike) -> Path:
    if g.features is None:
        raise GraphInvariantError("graph has no features to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in g.features:
            f.write(",".join(repr(float(value)) for value in row) + "\n")
    return path


def write_manifest(gs: GraphSet, directory: PathLike, name: str) -> Path:
    """Write every graph of `gs` under `directory` and a `<name>.json` manifest referencing them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, g in enumerate(gs):
        edges_name = f"{name}_{i}.edges"
        write_edge_list(g, directory / edges_name)
        features_name = None
        if g.features is not None:
            features_name = f"{name}_{i}.csv"
            write_feature_csv(g, directory / features_name)
        entries.append(ManifestEntry(edges=edges_name, features=features_name, nodes=g.node_count))
    manifest_path = directory / f"{name}.json"
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(Manifest(graphs=entries).model_dump(), f, indent=4)
    return manifest_path
