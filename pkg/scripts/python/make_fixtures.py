#!/usr/bin/env python3
"""
Synthetic fixture workspace

Writes a buyer, the class-range sellers, a noise seller, a 300-node
block-model source graph and a sparse split source as manifests that every
CLI command accepts.
"""

from pathlib import Path

import numpy as np
import typer

from graphmarket.application.experiments import (
    BUYER_CLASSES,
    SELLER_CLASSES,
    block_source,
    class_scaled_features,
    noise_features,
    split_source,
)
from graphmarket.graphs.core import GraphSet
from graphmarket.graphs.loaders import write_manifest


def main(
    directory: str = typer.Argument("fixtures"),
    seed: int = typer.Option(0, "--seed"),
    graphs: int = typer.Option(12, "--graphs", help="graphs per dataset"),
    nodes: int = typer.Option(12, "--nodes", help="nodes per graph"),
) -> None:
    print("=" * 80)
    print("GRAPH MARKET FIXTURES")
    print("=" * 80)

    root = Path(directory)
    rng = np.random.default_rng(seed)

    path = write_manifest(class_scaled_features(BUYER_CLASSES, rng, graphs, nodes), root, "buyer")
    print(f"\n1. WROTE BUYER {path}")

    for i, (label, classes) in enumerate(SELLER_CLASSES, start=1):
        path = write_manifest(class_scaled_features(classes, rng, graphs, nodes), root, f"seller{i}")
        print(f"2.{i} WROTE SELLER {path} ({label})")

    path = write_manifest(noise_features(rng, 1.0, graphs, nodes), root, "noise")
    print(f"3. WROTE NOISE SELLER {path}")

    source, _ = block_source(seed)
    path = write_manifest(GraphSet([source]), root, "source")
    print(f"4. WROTE {source.node_count}-NODE SOURCE GRAPH {path}")

    sparse = split_source(seed)
    path = write_manifest(GraphSet([sparse]), root, "split_source")
    print(f"5. WROTE {sparse.node_count}-NODE SPLIT SOURCE {path}")

    print("\nTry:")
    print(f"  python scripts/python/cli.py value {root}/buyer.json {root}/seller1.json --trace trace.ndjson")
    print(f"  python scripts/python/cli.py rank {root}/buyer.json {root}/seller1.json {root}/seller5.json {root}/noise.json")
    print("  python scripts/python/cli.py verify trace.ndjson")
    print(f"  python scripts/python/cli.py proxy-check {root}/split_source.json --candidates 5")


if __name__ == "__main__":
    typer.run(main)
