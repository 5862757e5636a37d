import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from lgbm_net.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> train -> detect -> eval, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    config = root / "config.json"
    config.write_text(json.dumps({
        "synth": {"n_videos": 12, "C": 3, "T_range": [40, 50], "D": 8,
                  "fg_snr": 1.0, "seed": 3, "segment_len_range": [6, 12]},
        "model": {"hidden": 8},
        "train": {"steps": 15, "batch_size": 4, "seed": 0},
    }))
    data = root / "data"
    ckpt = root / "ckpt"

    def run(args):
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
        return result

    run(["synth", "--config", str(config), "--out", str(data)])
    run(["train", "--config", str(config), "--data", str(data), "--out", str(ckpt)])
    run(["detect", "--ckpt", str(ckpt / "checkpoint_final.lgbc"), "--data", str(data),
         "--split", "val", "--out", str(root / "results.json")])
    run(["eval", "--results", str(root / "results.json"),
         "--gt", str(data / "annotations.json"), "--split", "val",
         "--out", str(root / "report.json")])
    return root, runner, config


def test_pipeline_outputs_exist(workspace):
    root, _, _ = workspace
    assert (root / "data" / "manifest.json").exists()
    assert (root / "ckpt" / "train_log.jsonl").exists()
    results = json.loads((root / "results.json").read_text())
    assert "results" in results
    report = json.loads((root / "report.json").read_text())
    assert 0.0 <= report["average_map"] <= 1.0


def test_pipeline_rerun_is_byte_identical(workspace):
    root, runner, config = workspace
    data2, ckpt2 = root / "data2", root / "ckpt2"
    for args in (
        ["synth", "--config", str(config), "--out", str(data2)],
        ["train", "--config", str(config), "--data", str(data2), "--out", str(ckpt2)],
        ["detect", "--ckpt", str(ckpt2 / "checkpoint_final.lgbc"), "--data", str(data2),
         "--split", "val", "--out", str(root / "results2.json")],
        ["eval", "--results", str(root / "results2.json"),
         "--gt", str(data2 / "annotations.json"), "--split", "val",
         "--out", str(root / "report2.json")],
    ):
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
    assert (root / "results.json").read_bytes() == (root / "results2.json").read_bytes()
    assert (root / "report.json").read_bytes() == (root / "report2.json").read_bytes()


def test_detect_parallel_matches_serial(workspace):
    root, runner, _ = workspace
    result = runner.invoke(main, [
        "detect", "--ckpt", str(root / "ckpt" / "checkpoint_final.lgbc"),
        "--data", str(root / "data"), "--split", "val",
        "--out", str(root / "results_par.json"), "--workers", "4"],
        catch_exceptions=False)
    assert result.exit_code == 0
    assert (root / "results_par.json").read_bytes() == (root / "results.json").read_bytes()


def test_ensemble_command(workspace):
    root, runner, _ = workspace
    result = runner.invoke(main, [
        "ensemble", "--inputs", str(root / "results.json"),
        "--inputs", str(root / "results.json"),
        "--gt", str(root / "data" / "annotations.json"),
        "--out", str(root / "fused.json")], catch_exceptions=False)
    assert result.exit_code == 0
    fused = json.loads((root / "fused.json").read_text())
    assert "results" in fused


def test_plot_cas_command(workspace):
    root, runner, _ = workspace
    manifest = json.loads((root / "data" / "manifest.json").read_text())
    vid = sorted(manifest["splits"])[0]
    out = root / "plot.png"
    result = runner.invoke(main, [
        "plot-cas", "--ckpt", str(root / "ckpt" / "checkpoint_final.lgbc"),
        "--data", str(root / "data"), "--video", vid, "--out", str(out)],
        catch_exceptions=False)
    assert result.exit_code == 0
    assert out.exists() and out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_config_error_exit_code(tmp_path):
    runner = CliRunner()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"synth": {"fg_snr": 0.0}}))
    result = runner.invoke(main, ["synth", "--config", str(bad),
                                  "--out", str(tmp_path / "d")])
    assert result.exit_code == 2
    assert "error kind=ConfigError" in result.output


def test_data_error_exit_code(tmp_path, workspace):
    root, runner, _ = workspace
    missing = tmp_path / "nodata"
    missing.mkdir()
    result = runner.invoke(main, ["train", "--data", str(missing),
                                  "--out", str(tmp_path / "ckpt")])
    assert result.exit_code == 3
    assert "error kind=DataError" in result.output


def test_unknown_video_plot_fails_cleanly(workspace):
    root, runner, _ = workspace
    result = runner.invoke(main, [
        "plot-cas", "--ckpt", str(root / "ckpt" / "checkpoint_final.lgbc"),
        "--data", str(root / "data"), "--video", "nope", "--out", str(root / "x.png")])
    assert result.exit_code == 3
