import json
from tempfile import TemporaryDirectory
from pathlib import Path
import pytest
import statekit
from statekit import cli


def test_unknown_command_and_flag():
    assert cli.run(["frobnicate"]) == 1
    assert cli.run(["detect", "--bogus"]) == 1


def test_missing_required_path(capsys):
    assert cli.run(["detect", "--quiet"]) == 1
    assert "--data" in capsys.readouterr().err


def test_unknown_config_key(capsys):
    with TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "config.json"
        path.write_text(json.dumps({"cpd": {"penalties2": [1]}}), encoding="utf-8")
        assert cli.run(["detect", "--config", str(path), "--quiet"]) == 1
    assert "cpd.penalties2" in capsys.readouterr().err


def test_malformed_config_file(capsys):
    with TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "config.json"
        path.write_text('{"seed": 1,\n  oops}', encoding="utf-8")
        assert cli.run(["detect", "--config", str(path), "--quiet"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_RunConfig_precedence():
    config = cli.RunConfig.resolve(
        "detect", {"seed": 3, "cpd": {"penalty": 500, "cost": "rbf"}}, {"cpd": {"penalty": 1000}}
    )
    assert config.seed == 3
    assert config.cpd["penalty"] == 1000
    assert config.cpd["cost"] == "rbf"
    assert config.cpd["search"] == "bottomup"
    assert config.evaluation["taus"] == [1, 3, 5]
    with pytest.raises(KeyError):
        cli.RunConfig.resolve("detect", {"cpd": {"unknown": 1}})
    with pytest.raises(ValueError):
        cli.RunConfig.resolve("fly")


def test_RunConfig_threads(monkeypatch):
    monkeypatch.setenv(cli.THREADS_VARIABLE, "3")
    assert cli.RunConfig.resolve("detect").threads == 3
    assert cli.RunConfig.resolve("detect", overrides={"threads": 2}).threads == 2
    monkeypatch.setenv(cli.THREADS_VARIABLE, "0")
    with pytest.raises(ValueError):
        cli.RunConfig.resolve("detect")


def test_threads_do_not_change_the_config_digest():
    one = cli.RunConfig.resolve("detect", overrides={"threads": 1})
    four = cli.RunConfig.resolve("detect", overrides={"threads": 4})
    assert one.serialize() == four.serialize()
    assert "threads" in one.serialize(include_threads=True)


def test_generate_detect_evaluate_report():
    with TemporaryDirectory() as temp_dir:
        temp_dir = Path(temp_dir)
        data = temp_dir / "data"
        predictions = temp_dir / "window-l2-100.jsonl"
        assert cli.run(["generate", "--flights", "3", "--seed", "1", "--out", str(data), "--quiet"]) == 0
        dataset = statekit.io.load_dataset(data)
        assert len(dataset) == 3
        assert dataset.channel_names == list(statekit.sim.CHANNEL_NAMES)
        assert dataset.normalizer is not None

        detect = ["detect", "--data", str(data), "--out", str(predictions), "--search", "window"]
        detect += ["--cost", "l2", "--penalty", "100", "--split", "all", "--quiet"]
        assert cli.run(detect) == 0
        records = statekit.io.load_predictions(predictions)
        assert sorted(records) == dataset.ids
        assert all(r["source"]["cost"] == "l2" for r in records.values())
        assert statekit.tools.run_manifest_path(predictions).exists()
        modified = predictions.stat().st_mtime_ns
        assert cli.run(detect) == 0
        assert predictions.stat().st_mtime_ns == modified

        scores = temp_dir / "scores.json"
        evaluate = ["evaluate", "--truth", str(data), "--pred", str(predictions)]
        assert cli.run(evaluate + ["--tau", "1,3", "--out", str(scores), "--quiet"]) == 0
        evaluation = statekit.io.load(scores)[str(predictions)]
        assert evaluation["taus"] == [1, 3]
        assert evaluation["n_flights"] == 3
        assert evaluation["aggregate"]["classification"] is None

        report = temp_dir / "report"
        assert cli.run(["report", "--truth", str(data), "--pred", str(predictions), "--out", str(report), "--quiet"]) == 0
        assert (report / "cpd_table.csv").exists()
        assert (report / "cpd_table.txt").exists()
        assert (report / "scores.json").exists()
        assert not (report / "model_table.csv").exists()
