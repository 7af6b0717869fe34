import json

import pandas as pd
import pytest
from pydantic import ValidationError

from config.settings import Settings
from src.accel.roofline import ROOFLINE_COLUMNS
from src.cli.main import main
from src.dse.sweep import DSE_COLUMNS
from src.models.serving import SchedulingPolicy, TraceMix
from src.sim.analysis import RECORD_COLUMNS, SCATTER_COLUMNS

from conftest import FIXTURES

SUPERNET = str(FIXTURES / "resnet50_like.json")
PICKS = str(FIXTURES / "resnet50_like_picks.json")
HW = str(FIXTURES / "hw_zcu104.json")


@pytest.fixture
def workspace(tmp_path):
    assert main(["gen", "--supernet", SUPERNET, "--picks", PICKS, "--out", str(tmp_path)]) == 0
    return tmp_path


def serving(workspace, *extra):
    return ["--supernet", SUPERNET, "--descriptors", str(workspace / "descriptors.json"), "--hw", HW, *extra]


def build_table(workspace, out):
    return main(["table", *serving(workspace, "--out", str(out), "--max-columns", "20", "--grid-samples", "50")])


class TestPipeline:
    def test_gen_writes_subnets_and_core(self, workspace):
        payload = json.loads((workspace / "descriptors.json").read_text())
        assert payload["supernet"] == "resnet50-like"
        assert len(payload["subnets"]) == 6
        assert payload["subgraphs"][0]["shape"] == payload["subnets"][0]["shape"]

    def test_table_sim_report(self, workspace):
        assert build_table(workspace, workspace) == 0
        for name in ("candidates.json", "table.json", "table.csv"):
            assert (workspace / name).exists()

        sim_dir = workspace / "sim"
        code = main(["sim", *serving(workspace, "--out", str(sim_dir), "--table-dir", str(workspace),
                                     "--queries", "200", "--window", "10", "4", "none")])
        assert code == 0
        for name in ("trace.csv", "trace.json", "records.csv", "records.json", "summary.json", "metrics.prom",
                     "windows.csv"):
            assert (sim_dir / name).exists(), name
        assert pd.read_csv(sim_dir / "records.csv").columns.tolist() == RECORD_COLUMNS
        assert len(pd.read_csv(sim_dir / "windows.csv")) == 3
        summary = json.loads((sim_dir / "summary.json").read_text())
        assert summary["summary"]["queries"] == 200 and summary["window"] == 10
        assert "sgs_queries_served_total 200.0" in (sim_dir / "metrics.prom").read_text()

        report_dir = workspace / "report"
        code = main(["report", *serving(workspace, "--out", str(report_dir), "--records",
                                        str(sim_dir / "records.csv"))])
        assert code == 0
        assert pd.read_csv(report_dir / "roofline.csv").columns.tolist() == ROOFLINE_COLUMNS
        assert pd.read_csv(report_dir / "scatter.csv").columns.tolist() == SCATTER_COLUMNS
        roofline = json.loads((report_dir / "roofline.json").read_text())
        assert roofline["subnet"] == "rn-sn5" and roofline["reverse_flips"] == []

    def test_sim_replays_a_given_trace(self, workspace):
        build_table(workspace, workspace)
        first, second = workspace / "first", workspace / "second"
        main(["sim", *serving(workspace, "--out", str(first), "--table-dir", str(workspace), "--queries", "50")])
        code = main(["sim", *serving(workspace, "--out", str(second), "--table-dir", str(workspace),
                                     "--trace", str(first / "trace.csv"))])
        assert code == 0
        assert (first / "records.csv").read_bytes() == (second / "records.csv").read_bytes()

    def test_dse(self, workspace):
        grid = workspace / "grid.json"
        grid.write_text(json.dumps({"pb_bytes": [0, 4194304], "bandwidth": [19.2e9], "throughput": [1.296e12]}))
        code = main(["dse", *serving(workspace, "--out", str(workspace), "--grid", str(grid), "--queries", "100")])
        assert code == 0
        frame = pd.read_csv(workspace / "dse.csv")
        assert frame.columns.tolist() == DSE_COLUMNS
        assert frame["time_save_pct"].tolist()[0] == 0.0


class TestReproducibility:
    def test_table_rebuild_is_byte_identical(self, workspace):
        build_table(workspace, workspace / "a")
        build_table(workspace, workspace / "b")
        assert (workspace / "a" / "table.json").read_bytes() == (workspace / "b" / "table.json").read_bytes()

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("SGS_OUTPUT_DIR", str(tmp_path / "from-env"))
        assert main(["gen", "--supernet", SUPERNET, "--picks", PICKS]) == 0
        assert (tmp_path / "from-env" / "descriptors.json").exists()

    def test_enum_settings_from_environment(self, monkeypatch):
        monkeypatch.setenv("SGS_POLICY", "strict_latency")
        monkeypatch.setenv("SGS_TRACE_MIX", "bursty")
        loaded = Settings()
        assert loaded.POLICY is SchedulingPolicy.STRICT_LATENCY
        assert loaded.TRACE_MIX is TraceMix.BURSTY

    def test_unknown_policy_in_environment(self, monkeypatch):
        monkeypatch.setenv("SGS_POLICY", "fastest")
        with pytest.raises(ValidationError, match="POLICY"):
            Settings()


class TestBadInput:
    def test_malformed_hardware(self, workspace):
        bad = workspace / "bad_hw.json"
        bad.write_text(json.dumps({"bandwidth": -1, "throughput": 1e12, "pb_bytes": 1024}))
        code = main(["table", "--supernet", SUPERNET, "--descriptors", str(workspace / "descriptors.json"),
                     "--hw", str(bad), "--out", str(workspace)])
        assert code == 2
        assert not (workspace / "table.json").exists()

    def test_stale_table(self, workspace):
        build_table(workspace, workspace)
        other = workspace / "u50.json"
        other.write_text((FIXTURES / "hw_u50.json").read_text())
        code = main(["sim", "--supernet", SUPERNET, "--descriptors", str(workspace / "descriptors.json"),
                     "--hw", str(other), "--out", str(workspace / "sim"), "--table-dir", str(workspace)])
        assert code == 2

    def test_picks_for_another_supernet(self, tmp_path):
        code = main(["gen", "--supernet", str(FIXTURES / "mobv3_like.json"), "--picks", PICKS,
                     "--out", str(tmp_path)])
        assert code == 2

    def test_missing_file(self, tmp_path):
        assert main(["gen", "--supernet", str(tmp_path / "nope.json"), "--picks", PICKS]) == 2

    def test_descriptor_bytes_must_match_shape(self, workspace):
        path = workspace / "descriptors.json"
        payload = json.loads(path.read_text())
        payload["subnets"][0]["weight_bytes"] += 1
        path.write_text(json.dumps(payload))
        assert build_table(workspace, workspace) == 2
        assert not (workspace / "table.json").exists()
