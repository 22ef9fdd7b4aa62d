import csv
import json
import subprocess
import sys

import pytest

from allpairs.cli import main
from allpairs.cluster import free_ports
from allpairs.config import RunConfig
from allpairs.metrics import read_trace
from allpairs.perfmodel import StageCosts, t_min
from allpairs.runner import run


@pytest.fixture
def base_config(tmp_path):
    config = {
        "app": {"kind": "synthetic", "n": 16, "slot_size": 4096, "payload_bytes": 64},
        "mode": "sim",
        "seed": 2,
        "nodes": [{"devices": [1.0], "device_slots": 8, "host_slots": 16, "cpu_width": 2}],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestRunCommand:
    def test_run_writes_metrics_and_trace(self, base_config, tmp_path, capsys):
        metrics_path = tmp_path / "metrics.json"
        trace_path = tmp_path / "trace.jsonl"
        code = main(["run", "--config", str(base_config),
                     "--metrics", str(metrics_path), "--trace", str(trace_path)])
        assert code == 0
        doc = json.loads(metrics_path.read_text())
        assert doc["pairs"] == 120
        assert doc["R"] == 1.0
        assert doc["config"]["seed"] == 2
        events = read_trace(str(trace_path))
        assert events
        lanes = {}
        for event in events:
            lanes.setdefault((event.node, event.lane), []).append(event)
        for rows in lanes.values():
            rows.sort(key=lambda e: e.start_ns)
            for prev, cur in zip(rows, rows[1:]):
                assert prev.end_ns <= cur.start_ns
        assert "R=1" in capsys.readouterr().out

    def test_invalid_config_nonzero_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"app": {"kind": "nope"}}))
        code = main(["run", "--config", str(bad)])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_rank_without_peers_rejected(self, base_config, capsys):
        code = main(["run", "--config", str(base_config), "--rank", "0"])
        assert code == 2

    def test_nodes_override(self, base_config, tmp_path):
        metrics_path = tmp_path / "m.json"
        code = main(["run", "--config", str(base_config), "--nodes", "3",
                     "--metrics", str(metrics_path)])
        assert code == 0
        doc = json.loads(metrics_path.read_text())
        assert len(doc["per_node"]) == 3
        assert doc["pairs"] == 120


class TestConfigRoundTrip:
    def test_metrics_config_reproduces_run(self, base_config, tmp_path):
        metrics_path = tmp_path / "metrics.json"
        assert main(["run", "--config", str(base_config),
                     "--metrics", str(metrics_path)]) == 0
        doc = json.loads(metrics_path.read_text())
        config = RunConfig.from_dict(doc["config"])
        replay = run(config)
        replay_doc = replay.as_dict()
        for field in ("makespan_s", "total_loads", "R", "pairs", "cache",
                      "remote", "messages", "config"):
            assert replay_doc[field] == doc[field], field


class TestSweepCommand:
    def test_cache_size_sweep_rows(self, base_config, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--config", str(base_config), "--axis", "cache_size",
                     "--values", "16,4", "--seeds", "2", "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 4
        by_value = {}
        for row in rows:
            by_value.setdefault(int(row["value"]), []).append(float(row["R"]))
        mean = lambda xs: sum(xs) / len(xs)
        assert mean(by_value[4]) >= mean(by_value[16])
        assert mean(by_value[16]) == 1.0

    def test_node_sweep_paired_rows_with_speedup(self, base_config, tmp_path):
        out = tmp_path / "nodes.csv"
        code = main(["sweep", "--config", str(base_config), "--axis", "nodes",
                     "--values", "1,2", "--paired-dist-cache", "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 4  # 2 values x on/off
        for row in rows:
            if int(row["value"]) == 2:
                assert row["speedup"] != ""

    def test_empty_values_usage_error(self, base_config, tmp_path, capsys):
        code = main(["sweep", "--config", str(base_config), "--axis", "h",
                     "--values", "", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "values" in capsys.readouterr().err


class TestModelCommand:
    def test_model_report(self, tmp_path, capsys):
        costs_doc = {"t_parse_s": 130.8e-3, "t_preprocess_s": 20.5e-3,
                     "t_comparison_s": 1.1e-3, "t_postprocess_s": 0.0,
                     "mean_file_bytes": 19.4e9 / 4980, "io_bandwidth_Bps": 400e6}
        path = tmp_path / "costs.json"
        path.write_text(json.dumps(costs_doc))
        code = main(["model", "--costs", str(path), "--n", "4980", "--r", "1.0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        expected = t_min(4980, StageCosts(t_preprocess=20.5e-3, t_comparison=1.1e-3))
        assert doc["T_min_s"] == pytest.approx(expected)
        assert doc["T_min_s"] == pytest.approx(13739.6, abs=0.1)
        assert doc["T_io_s"] == pytest.approx(48.5, abs=0.1)


@pytest.mark.slow
class TestSocketsIntegration:
    def test_two_process_cluster_matches_sim(self, tmp_path):
        config = {
            "app": {"kind": "synthetic", "n": 10, "slot_size": 4096, "payload_bytes": 64},
            "mode": "real",
            "seed": 3,
            "nodes": [{"devices": [1.0], "device_slots": 6, "host_slots": 12, "cpu_width": 2}
                      for _ in range(2)],
        }
        config_path = tmp_path / "cluster.json"
        config_path.write_text(json.dumps(config))
        ports = free_ports(2)
        peers = ",".join(f"127.0.0.1:{p}" for p in ports)
        procs = [
            subprocess.Popen(
                [sys.executable, "-m", "allpairs.cli", "run", "--config", str(config_path),
                 "--rank", str(rank), "--peers", peers,
                 "--metrics", str(tmp_path / f"rank{rank}.json")],
                stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
            for rank in range(2)
        ]
        for proc in procs:
            out, err = proc.communicate(timeout=120)
            assert proc.returncode == 0, err
        doc = json.loads((tmp_path / "rank0.json").read_text())
        assert sum(nm["comparisons"] for nm in doc["per_node"]) == 45

        sim = dict(config, mode="sim")
        sim_metrics = run(RunConfig.from_dict(sim))
        assert sum(nm.comparisons for nm in sim_metrics.per_node) == 45
