import csv
import json

import numpy as np
import pytest

from fsgm import io
from fsgm.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from fsgm.config import PipelineConfig
from fsgm.errors import ValidationError
from fsgm.graph import fit
from fsgm.simgen import ModelSpec, gen_model


@pytest.fixture
def small_graph():
    ds, truth = gen_model(ModelSpec("I", 20, seed=1))
    return fit(ds, PipelineConfig(rho=0.01)), truth


class TestDatasetIO:
    def test_round_trip_exact(self, tmp_path):
        ds, _ = gen_model(ModelSpec("I", 6, "unbalanced", seed=2))
        io.write_dataset(ds, tmp_path / "d.csv")
        back = io.read_dataset(tmp_path / "d.csv")
        assert back.n == ds.n and back.p == ds.p
        for a in range(ds.n):
            np.testing.assert_array_equal(back.times[a], ds.times[a])
            np.testing.assert_array_equal(back.values[a], ds.values[a])

    def test_row_order_irrelevant(self, tmp_path):
        ds, _ = gen_model(ModelSpec("I", 3, seed=2))
        io.write_dataset(ds, tmp_path / "d.csv")
        lines = (tmp_path / "d.csv").read_text().splitlines()
        (tmp_path / "r.csv").write_text("\n".join([lines[0]] + lines[1:][::-1]) + "\n")
        back = io.read_dataset(tmp_path / "r.csv")
        np.testing.assert_array_equal(back.values[2], ds.values[2])

    def test_missing_node_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "subject,node,time,value\n"
            "1,1,0.5,1.0\n1,1,1.0,2.0\n1,2,0.5,1.0\n1,2,1.0,1.0\n"
            "2,1,0.5,1.0\n2,1,1.0,2.0\n"
        )
        with pytest.raises(ValidationError, match="subject 2 has no observations for node 2"):
            io.read_dataset(path)

    @pytest.mark.parametrize(
        "body, message",
        [
            ("subject,node,t,value\n", "header"),
            ("subject,node,time,value\n1,1,x,1\n", "time must be a number"),
            ("subject,node,time,value\n1,1,0.5,1\n1,1,0.5,2\n", "duplicate time"),
            ("subject,node,time,value\n1,1,0.5\n", "expected 4 fields"),
            ("subject,node,time,value\n", "no observations"),
            ("subject,node,time,value\n2,1,0.5,1\n2,1,0.7,1\n", "missing subject 1"),
            ("subject,node,time,value\n1,1,0.5,1\n1,1,0.7,1\n1,2,0.5,1\n1,2,0.8,1\n", "differ from node 1"),
        ],
    )
    def test_malformed(self, tmp_path, body, message):
        path = tmp_path / "d.csv"
        path.write_text(body)
        with pytest.raises(ValidationError, match=message):
            io.read_dataset(path)


class TestScoresAndGraphs:
    def test_edges_round_trip(self, tmp_path):
        io.write_edges({(3, 1), (2, 4)}, tmp_path / "e.csv")
        assert io.read_edges(tmp_path / "e.csv") == {(1, 3), (2, 4)}
        assert (tmp_path / "e.csv").read_text() == "i,j\n1,3\n2,4\n"

    def test_scores_csv(self, tmp_path, small_graph):
        g, _ = small_graph
        io.write_scores(g, tmp_path / "s.csv")
        rows = list(csv.DictReader(open(tmp_path / "s.csv")))
        assert len(rows) == 10
        assert {(int(r["i"]), int(r["j"])) for r in rows if r["is_edge"] == "1"} == g.edges
        assert io.read_scores(tmp_path / "s.csv", 5) == g.score_map()

    def test_score_file_missing_pair(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("i,j,score\n1,2,0.5\n1,3,0.1\n")
        with pytest.raises(ValidationError, match=r"missing score for pair \(2, 3\)"):
            io.read_scores(path)
        with pytest.raises(ValidationError, match="missing score"):
            io.read_scores(path, 4)

    def test_duplicate_score(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("i,j,score\n1,2,0.5\n2,1,0.1\n")
        with pytest.raises(ValidationError, match="duplicate"):
            io.read_scores(path)

    def test_graph_round_trip(self, tmp_path, small_graph):
        g, _ = small_graph
        io.write_graph(g, tmp_path / "g.json")
        back = io.read_graph(tmp_path / "g.json")
        assert back.score_map() == g.score_map()
        assert back.edges == g.edges and back.threshold == g.threshold
        assert back.tuning["eta"] == g.tuning["eta"]

    def test_graph_incomplete(self, tmp_path, small_graph):
        g, _ = small_graph
        data = io.graph_to_dict(g)
        data["scores"] = data["scores"][1:]
        (tmp_path / "g.json").write_text(json.dumps(data))
        with pytest.raises(ValidationError, match="missing score"):
            io.read_graph(tmp_path / "g.json")


def run_cli(*args):
    return main([str(a) for a in args])


class TestCli:
    def test_simulate_fit_eval(self, tmp_path, capsys):
        sim = tmp_path / "sim"
        assert run_cli("simulate", "--model", "III", "--n", 30, "--seed", 4, "--out", sim) == EXIT_OK
        assert io.read_edges(sim / "truth.csv") == {(1, 3), (2, 4), (2, 5)}
        out = tmp_path / "fit"
        assert run_cli("fit", sim / "data.csv", "--out", out) == EXIT_OK
        graph = json.loads((out / "graph.json").read_text())
        assert len(graph["scores"]) == 10
        assert set(json.loads((out / "config.json").read_text())) >= {"eta_grid", "rho", "d"}
        ev = tmp_path / "eval"
        assert run_cli("eval", out / "graph.json", sim / "truth.csv", "--out", ev) == EXIT_OK
        value = json.loads((ev / "auc.json").read_text())["auc"]
        assert 0.0 <= value <= 1.0
        assert f"auc={value:.6f}" in capsys.readouterr().out
        # the score CSV gives the same curve
        ev2 = tmp_path / "eval2"
        assert run_cli("eval", out / "scores.csv", sim / "truth.csv", "--p", 5, "--out", ev2) == EXIT_OK
        assert (ev / "roc.csv").read_text() == (ev2 / "roc.csv").read_text()

    def test_rho_override(self, tmp_path):
        sim = tmp_path / "sim"
        run_cli("simulate", "--model", "I", "--n", 20, "--out", sim)
        run_cli("fit", sim / "data.csv", "--rho", "1e9", "--out", tmp_path / "fit")
        graph = json.loads((tmp_path / "fit" / "graph.json").read_text())
        assert graph["threshold"] == 1e9 and graph["edges"] == []

    def test_config_file_and_d(self, tmp_path):
        sim = tmp_path / "sim"
        run_cli("simulate", "--model", "I", "--n", 20, "--out", sim)
        (tmp_path / "cfg.json").write_text(json.dumps({"rho": 0.01, "d": 1}))
        assert run_cli("fit", sim / "data.csv", "--config", tmp_path / "cfg.json", "--d", "3", "--out", tmp_path / "f") == 0
        graph = json.loads((tmp_path / "f" / "graph.json").read_text())
        assert {s["d"] for s in graph["scores"]} == {3}

    def test_compare(self, tmp_path, small_graph):
        g, _ = small_graph
        io.write_graph(g, tmp_path / "a.json")
        io.write_graph(g.with_threshold(1e9), tmp_path / "b.json")
        assert run_cli("compare", tmp_path / "a.json", tmp_path / "b.json", "--out", tmp_path / "cmp") == EXIT_OK
        assert io.read_edges(tmp_path / "cmp" / "first_only.csv") == g.edges
        assert io.read_edges(tmp_path / "cmp" / "common.csv") == frozenset()

    def test_bench(self, tmp_path):
        plan = {"model": {"model_id": "I", "n": 20}, "replicates": 2, "reference": None}
        (tmp_path / "plan.json").write_text(json.dumps(plan))
        assert run_cli("bench", tmp_path / "plan.json", "--seed", 9, "--out", tmp_path / "b") == EXIT_OK
        report = json.loads((tmp_path / "b" / "report.json").read_text())
        assert report["seed"] == 9 and len(report["results"]) == 2

    def test_unknown_model_exit_2(self, tmp_path, capsys):
        assert run_cli("simulate", "--model", "VII", "--out", tmp_path) == EXIT_VALIDATION
        assert "unknown model" in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        assert run_cli("fit", tmp_path / "nope.csv", "--out", tmp_path) == EXIT_VALIDATION

    def test_two_nodes_exit_2(self, tmp_path):
        run_cli("simulate", "--model", "null", "--p", 2, "--n", 12, "--out", tmp_path)
        assert run_cli("fit", tmp_path / "data.csv", "--out", tmp_path) == EXIT_VALIDATION

    def test_degenerate_exit_3(self, tmp_path):
        path = tmp_path / "flat.csv"
        rows = ["subject,node,time,value"]
        for a in range(1, 13):
            for i in range(1, 4):
                for t in (0.5, 1.0):
                    rows.append(f"{a},{i},{t},{1.0 if i == 3 else a * t * i}")
        path.write_text("\n".join(rows) + "\n")
        assert run_cli("fit", path, "--out", tmp_path) == EXIT_NUMERICAL

    def test_model_III_pair_count(self, tmp_path):
        run_cli("simulate", "--model", "III", "--n", 20, "--out", tmp_path)
        run_cli("fit", tmp_path / "data.csv", "--out", tmp_path)
        lines = (tmp_path / "scores.csv").read_text().splitlines()
        assert len(lines) == 11
