import json

import pytest

from cellwatch.cli import main
from cellwatch import synth


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small generated scenario plus trained artifacts, built once."""
    root = tmp_path_factory.mktemp("cli")
    spec = synth.default_spec(
        n_cells=4, days=4.0, window_len=900, seed=2024, anomaly_count=3, calls_per_window=3.0
    )
    spec_path = root / "spec.json"
    synth.save_spec(spec, spec_path)
    data = root / "data"
    assert main(["gen", "--spec", str(spec_path), "--out", str(data)]) == 0
    catalog = ["--catalog", str(data / "catalog.json")]
    assert (
        main(
            ["train", "--kqi", str(data / "kqi.csv"), "--kpi", str(data / "kpi.csv"),
             "--cdr", str(data / "cdr.csv"), "--out", str(root / "model.json"),
             "--clean-report", str(root / "clean.json"),
             "--min-samples", "6", "--tau", "4.5", *catalog]
        )
        == 0
    )
    assert (
        main(
            ["detect", "--kqi", str(data / "kqi.csv"), "--cdr", str(data / "cdr.csv"),
             "--model", str(root / "model.json"), "--out", str(root / "events.jsonl"),
             "--tau", "4.5", *catalog]
        )
        == 0
    )
    assert (
        main(
            ["mine", "--events", str(root / "events.jsonl"), "--kpi", str(data / "kpi.csv"),
             "--model", str(root / "model.json"), "--out", str(root / "db.json"),
             "--labels", str(data / "labels.json"),
             "--s-min-count", "1", "--s-max-fraction", "0.9", "--c-min", "0.5", "--lift-min", "1.0",
             "--catalog", str(data / "catalog.json")]
        )
        == 0
    )
    assert (
        main(
            ["diagnose", "--events", str(root / "events.jsonl"), "--kpi", str(data / "kpi.csv"),
             "--model", str(root / "model.json"), "--db", str(root / "db.json"),
             "--out", str(root / "diagnoses.jsonl"), "--catalog", str(data / "catalog.json")]
        )
        == 0
    )
    assert (
        main(
            ["eval", "--events", str(root / "events.jsonl"), "--diagnoses", str(root / "diagnoses.jsonl"),
             "--truth", str(data / "truth.json"), "--out", str(root / "eval.json")]
        )
        == 0
    )
    return root


class TestPipeline:
    def test_artifacts_exist(self, workspace):
        for name in ("model.json", "clean.json", "events.jsonl", "db.json", "diagnoses.jsonl", "eval.json"):
            assert (workspace / name).exists(), name

    def test_eval_report_shape(self, workspace):
        doc = json.loads((workspace / "eval.json").read_text())
        assert set(doc) == {"precision", "recall", "rca_top1_accuracy", "counts"}
        assert 0.0 <= doc["precision"] <= 1.0

    def test_events_are_json_lines(self, workspace):
        lines = (workspace / "events.jsonl").read_text().strip().splitlines()
        for line in lines:
            doc = json.loads(line)
            assert {"cell_id", "metric", "start_window", "end_window"} <= set(doc)

    def test_report_command_handles_all_artifacts(self, workspace, capsys):
        for name in ("model.json", "clean.json", "events.jsonl", "db.json", "diagnoses.jsonl", "eval.json"):
            assert main(["report", str(workspace / name)]) == 0
            out = capsys.readouterr().out
            assert out.strip(), name

    def test_rerun_is_byte_identical(self, workspace, tmp_path):
        data = workspace / "data"
        out = tmp_path / "model.json"
        rc = main(
            ["train", "--kqi", str(data / "kqi.csv"), "--kpi", str(data / "kpi.csv"),
             "--cdr", str(data / "cdr.csv"), "--catalog", str(data / "catalog.json"),
             "--out", str(out), "--min-samples", "6", "--tau", "4.5"]
        )
        assert rc == 0
        assert out.read_bytes() == (workspace / "model.json").read_bytes()

    def test_detect_rerun_is_byte_identical(self, workspace, tmp_path):
        data = workspace / "data"
        out = tmp_path / "events.jsonl"
        rc = main(
            ["detect", "--kqi", str(data / "kqi.csv"), "--cdr", str(data / "cdr.csv"),
             "--catalog", str(data / "catalog.json"), "--model", str(workspace / "model.json"),
             "--out", str(out), "--tau", "4.5"]
        )
        assert rc == 0
        assert out.read_bytes() == (workspace / "events.jsonl").read_bytes()


class TestGen:
    def test_gen_determinism(self, tmp_path):
        spec = synth.default_spec(n_cells=2, days=1.0, window_len=1800, seed=5, anomaly_count=1)
        spec_path = tmp_path / "spec.json"
        synth.save_spec(spec, spec_path)
        assert main(["gen", "--spec", str(spec_path), "--out", str(tmp_path / "a")]) == 0
        assert main(["gen", "--spec", str(spec_path), "--out", str(tmp_path / "b")]) == 0
        for name in ("cdr.csv", "kqi.csv", "kpi.csv", "catalog.json", "truth.json", "labels.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestExitCodes:
    def test_missing_file_is_io_error(self, tmp_path):
        rc = main(
            ["train", "--kqi", str(tmp_path / "nope.csv"), "--catalog", str(tmp_path / "nope.json"),
             "--out", str(tmp_path / "model.json")]
        )
        assert rc == 2

    def test_unknown_flag_is_usage_error(self):
        assert main(["train", "--in", "missing.csv"]) == 2

    def test_domain_error_is_exit_1(self, tmp_path):
        catalog = tmp_path / "catalog.json"
        catalog.write_text(
            json.dumps({"m": {"kind": "KQI", "polarity": "HIGHER_IS_WORSE", "window_len_seconds": 300}})
        )
        kqi = tmp_path / "kqi.csv"
        kqi.write_text("cell_id,metric_name,window_start,value\n" + "\n".join(
            f"c1,m,{i * 300},1.0" for i in range(10)
        ) + "\n")
        rc = main(
            ["train", "--kqi", str(kqi), "--catalog", str(catalog), "--out", str(tmp_path / "m.json")]
        )
        assert rc == 1  # too few points after cleaning

    def test_bad_config_value_is_exit_2(self, tmp_path):
        catalog = tmp_path / "catalog.json"
        catalog.write_text(
            json.dumps({"m": {"kind": "KQI", "polarity": "HIGHER_IS_WORSE", "window_len_seconds": 300}})
        )
        kqi = tmp_path / "kqi.csv"
        kqi.write_text("cell_id,metric_name,window_start,value\n" + "\n".join(
            f"c1,m,{i * 300},1.0" for i in range(50)
        ) + "\n")
        rc = main(
            ["train", "--kqi", str(kqi), "--catalog", str(catalog),
             "--out", str(tmp_path / "m.json"), "--tau", "-1"]
        )
        assert rc == 2


class TestFogsimCommand:
    def test_single_strategy_report(self, tmp_path):
        out = tmp_path / "report.json"
        assert main(["fogsim", "--strategy", "FOG", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["strategy"] == "FOG"
        assert main(["report", str(out)]) == 0

    def test_compare_writes_three_reports_and_table(self, tmp_path, capsys):
        out = tmp_path / "reports"
        assert main(["fogsim", "--compare", "--out", str(out)]) == 0
        table = capsys.readouterr().out
        for strategy in ("CENTRALIZED", "EDGE_INFERENCE", "FOG"):
            assert (out / f"{strategy.lower()}.json").exists()
            assert strategy in table
        assert "models_equal: True" in table
        assert "dbs_equal: True" in table

    def test_scenario_and_topology_files(self, tmp_path):
        from cellwatch.fogsim import default_topology_doc

        topo_path = tmp_path / "topo.json"
        topo_path.write_text(json.dumps(default_topology_doc()))
        spec = synth.default_spec(n_cells=8, days=1.0, window_len=1800, seed=3, anomaly_count=1)
        scenario_path = tmp_path / "scenario.json"
        scenario_path.write_text(
            json.dumps(
                {
                    "spec": synth.spec_to_json_dict(spec),
                    "detector": {"bin_count": 32, "tau": 3.5, "min_samples": 2},
                    "clean": {"iqr_multiplier": 6.0, "min_points": 8},
                    "z_symptom": 2.5,
                }
            )
        )
        out = tmp_path / "report.json"
        rc = main(
            ["fogsim", "--topology", str(topo_path), "--scenario", str(scenario_path),
             "--strategy", "CENTRALIZED", "--out", str(out)]
        )
        assert rc == 0
        assert json.loads(out.read_text())["strategy"] == "CENTRALIZED"


def test_config_file_overridden_by_flags(tmp_path):
    spec = synth.default_spec(n_cells=2, days=1.0, window_len=1800, seed=6, anomaly_count=0)
    spec_path = tmp_path / "spec.json"
    synth.save_spec(spec, spec_path)
    assert main(["gen", "--spec", str(spec_path), "--out", str(tmp_path / "d")]) == 0
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"detector": {"min_samples": 999}, "clean": {"min_points": 8}}))
    # config alone: min_samples 999 makes every key insufficient, still trains
    rc = main(
        ["train", "--kqi", str(tmp_path / "d" / "kqi.csv"), "--kpi", str(tmp_path / "d" / "kpi.csv"),
         "--catalog", str(tmp_path / "d" / "catalog.json"), "--out", str(tmp_path / "m1.json"),
         "--config", str(config)]
    )
    assert rc == 0
    doc = json.loads((tmp_path / "m1.json").read_text())
    assert doc["config"]["min_samples"] == 999
    # flag wins over config
    rc = main(
        ["train", "--kqi", str(tmp_path / "d" / "kqi.csv"), "--kpi", str(tmp_path / "d" / "kpi.csv"),
         "--catalog", str(tmp_path / "d" / "catalog.json"), "--out", str(tmp_path / "m2.json"),
         "--config", str(config), "--min-samples", "3"]
    )
    assert rc == 0
    doc = json.loads((tmp_path / "m2.json").read_text())
    assert doc["config"]["min_samples"] == 3
