import csv
import json
import tempfile
import unittest
from pathlib import Path

import networkx as nx
import numpy as np
from typer.testing import CliRunner

from graphmarket.application.experiments import class_scaled_features, has_simple_spectrum
from graphmarket.application.protocol import run_session
from graphmarket.graphs.core import Graph, GraphSet
from graphmarket.graphs.loaders import load_manifest, write_manifest
from graphmarket.utils.objects import RunConfig
from graphmarket.utils.utils import read_json, read_matrix_csv
from scripts.python.cli import app

runner = CliRunner()


def structure_only(seed, graphs, nodes):
    rng = np.random.default_rng(seed)
    members = [
        Graph.from_networkx(nx.gnp_random_graph(nodes, 0.5, seed=int(rng.integers(0, 2**31 - 1))))
        for _ in range(graphs)
    ]
    return GraphSet(members)


def connected_simple(seed, nodes):
    rng = np.random.default_rng(seed)
    while True:
        sample = nx.gnp_random_graph(nodes, 0.3, seed=int(rng.integers(0, 2**31 - 1)))
        g = Graph.from_networkx(sample)
        if nx.is_connected(sample) and has_simple_spectrum(g):
            return g


class TestCLI(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls._tmp.name)
        rng = np.random.default_rng(0)
        cls.buyer = str(write_manifest(class_scaled_features([0, 1], rng, graphs=4, nodes=8), cls.root, "buyer"))
        cls.sellers = [
            str(write_manifest(class_scaled_features(classes, rng, graphs=4, nodes=8), cls.root, f"seller{i}"))
            for i, classes in enumerate(([0, 1], [2, 3], [5, 6]), start=1)
        ]
        cls.pool = str(write_manifest(structure_only(1, graphs=6, nodes=7), cls.root, "pool"))
        cls.source = str(write_manifest(GraphSet([connected_simple(2, 20)]), cls.root, "source"))

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def path(self, name):
        return str(self.root / name)

    def invoke(self, *args):
        return runner.invoke(app, [str(arg) for arg in args])

    def test_value_matches_library(self):
        out = self.path("value.json")
        result = self.invoke("value", self.buyer, self.sellers[1], "--out", out)
        self.assertEqual(result.exit_code, 0, result.output)
        flat = read_json(out)
        expected, _ = run_session(load_manifest(self.buyer), load_manifest(self.sellers[1]), RunConfig())
        self.assertEqual(flat["S"], expected.s.s)
        self.assertEqual(flat["D"], expected.featural.diversity)
        self.assertEqual(flat["config"]["alpha"], 0.5)

    def test_value_same_dataset(self):
        out = self.path("same.json")
        result = self.invoke("value", self.buyer, self.buyer, "--alpha", 1, "--out", out)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(read_json(out)["S"], 0.0)

    def test_value_csv(self):
        out = self.path("value.csv")
        result = self.invoke("value", self.buyer, self.sellers[0], "--format", "csv", "--out", out)
        self.assertEqual(result.exit_code, 0, result.output)
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["S", "D", "R", "gwd", "epsilon_hat_max"])
        self.assertEqual(len(rows), 2)

    def test_trace_verifies(self):
        trace = self.path("trace.ndjson")
        result = self.invoke("value", self.buyer, self.sellers[2], "--trace", trace, "--out", self.path("traced.json"))
        self.assertEqual(result.exit_code, 0, result.output)
        result = self.invoke("verify", trace)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("trace verified", result.output)

    def tampered(self, name, mutate):
        trace = self.path(f"{name}.ndjson")
        self.invoke("value", self.buyer, self.sellers[2], "--trace", trace, "--out", self.path(f"{name}.json"))
        records = [json.loads(line) for line in Path(trace).read_text().splitlines()]
        for record in records:
            if record["kind"] == "BuyerEigenvalues":
                mutate(record)
        Path(trace).write_text("".join(json.dumps(record) + "\n" for record in records))
        return self.invoke("verify", trace)

    def test_tampered_spectrum_fails(self):
        result = self.tampered("spectrum", lambda r: r["payload"]["eigenvalues"].__setitem__(0, r["payload"]["eigenvalues"][0] + 10.0))
        self.assertEqual(result.exit_code, 3)

    def test_misrouted_message_fails(self):
        result = self.tampered("route", lambda r: r.__setitem__("from", "seller"))
        self.assertEqual(result.exit_code, 3)

    def test_missing_manifest(self):
        result = self.invoke("value", self.path("absent.json"), self.buyer)
        self.assertEqual(result.exit_code, 1)

    def test_invalid_alpha(self):
        result = self.invoke("value", self.buyer, self.sellers[0], "--alpha", 1.5)
        self.assertEqual(result.exit_code, 2)

    def test_byte_identical_runs(self):
        outputs = []
        for run in ("a", "b"):
            out, trace = self.path(f"run_{run}.json"), self.path(f"run_{run}.ndjson")
            result = self.invoke("value", self.buyer, self.sellers[0], "--out", out, "--trace", trace)
            self.assertEqual(result.exit_code, 0, result.output)
            outputs.append((Path(out).read_bytes(), Path(trace).read_bytes()))
        self.assertEqual(outputs[0], outputs[1])

    def test_rank(self):
        out = self.path("rank.json")
        result = self.invoke("rank", self.buyer, *self.sellers, "--out", out)
        self.assertEqual(result.exit_code, 0, result.output)
        ranking = read_json(out)
        self.assertEqual(sorted(ranking["final_order"]), ["seller1", "seller2", "seller3"])
        self.assertEqual(set(ranking["per_metric_ranks"]["seller1"]), {"d", "r", "s"})

    def test_rank_needs_two_sellers(self):
        result = self.invoke("rank", self.buyer, self.sellers[0])
        self.assertEqual(result.exit_code, 2)

    def test_unwritable_out(self):
        out = self.path("missing-dir/out.txt")
        for command in (["rank", self.buyer, *self.sellers], ["matrix", self.buyer, *self.sellers]):
            result = self.invoke(*command, "--out", out)
            self.assertEqual(result.exit_code, 1, result.output)
            self.assertIn("cannot write", result.output)

    def test_matrix(self):
        out, s_out = self.path("gwd.csv"), self.path("s.csv")
        result = self.invoke("matrix", self.buyer, *self.sellers, "--out", out, "--s-out", s_out)
        self.assertEqual(result.exit_code, 0, result.output)
        names, gwd = read_matrix_csv(out)
        self.assertEqual(names, ["buyer", "seller1", "seller2", "seller3"])
        np.testing.assert_array_equal(gwd, gwd.T)
        np.testing.assert_array_equal(np.diag(gwd), np.zeros(4))
        _, disparity = read_matrix_csv(s_out)
        self.assertTrue(np.all((disparity >= 0.0) & (disparity <= 1.0)))

    def test_featural_trend(self):
        out = self.path("noise.csv")
        result = self.invoke("featural-trend", "--experiment", "noise", "--out", out)
        self.assertEqual(result.exit_code, 0, result.output)
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["seller", "D", "R"])
        self.assertEqual(len(rows), 5)

    def test_unknown_experiment(self):
        result = self.invoke("featural-trend", "--experiment", "weather")
        self.assertEqual(result.exit_code, 2)

    def test_proxy_check_on_copies(self):
        result = self.invoke("proxy-check", self.source, "--copies", "--candidates", 3)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("spearman: 1.0", result.output)

    def test_partition(self):
        out = self.path("partition.txt")
        result = self.invoke("partition", self.pool, self.pool, "--groups", 2, "--out", out)
        self.assertEqual(result.exit_code, 0, result.output)
        text = Path(out).read_text()
        self.assertIn("set 1", text)
        self.assertIn("set 2", text)


if __name__ == "__main__":
    unittest.main()
