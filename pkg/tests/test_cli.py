"""Command-line interface tests, driven through run(argv)."""

import json
import os
import xml.etree.ElementTree as ET

import pytest

from causalcorrupt.cli import CliInvocation, _parse_p_corr, run
from causalcorrupt.errors import ConfigError
from causalcorrupt.predictors import write_ground_truth_predictions
from causalcorrupt.scene import SceneConfig


def test_no_arguments_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run([])
    assert exc.value.code == 2


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run(["demolish", "--scm", "iid_uniform"])
    assert exc.value.code == 2


def test_validate_shipped_model(capsys):
    assert run(["validate", "--scm", "iid_uniform"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("topological order: ")
    assert "OK: 8 nodes, 0 warnings" in out


def test_validate_reports_diagnostics(capsys):
    assert run(["validate", "--scm", "chain_uniform"]) == 0
    out = capsys.readouterr().out
    assert "OK: 7 nodes, 1 warnings" in out


def test_validate_unknown_model_fails(capsys):
    assert run(["validate", "--scm", "not_a_model"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")


def test_validate_model_file(tmp_path, capsys):
    from causalcorrupt.dsl import shipped_spec_text

    path = tmp_path / "model.scm.txt"
    path.write_text(shipped_spec_text("chain_uniform"))
    assert run(["validate", "--scm", str(path)]) == 0


def test_sample_to_stdout_is_jsonl(capsys):
    assert run(["sample", "--scm", "iid_uniform", "--n", "3", "--seed", "9", "--out", "-"]) == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln.startswith("{")]
    assert len(lines) == 3
    assert "effective seed: 9" in out
    traces = [json.loads(ln) for ln in lines]
    assert [t["scene_id"] for t in traces] == [0, 1, 2]
    assert all(t["seed"] == 9 for t in traces)
    assert all(len(t["nodes"]) == 8 for t in traces)


def test_sample_scene_offset_and_file_output(tmp_path, capsys):
    out_path = str(tmp_path / "traces.jsonl")
    code = run(
        [
            "sample",
            "--scm",
            "chain_uniform",
            "--n",
            "2",
            "--seed",
            "4",
            "--scene-offset",
            "10",
            "--out",
            out_path,
        ]
    )
    assert code == 0
    with open(out_path) as fh:
        traces = [json.loads(ln) for ln in fh.read().splitlines()]
    assert [t["scene_id"] for t in traces] == [10, 11]


def test_full_pipeline(tmp_path, capsys):
    config_path = str(tmp_path / "scene.json")
    with open(config_path, "w") as fh:
        fh.write(
            SceneConfig(width=48, height=48, n_objects=(1, 3), size_range=(6.0, 11.0)).to_json()
        )

    scenes_dir = str(tmp_path / "scenes")
    assert run(["synth", "--n", "2", "--seed", "8", "--config", config_path, "--out", scenes_dir]) == 0
    assert os.path.isfile(os.path.join(scenes_dir, "00001", "clean.png"))

    ds_dir = str(tmp_path / "ds")
    code = run(
        [
            "corrupt",
            "--scm",
            "chain_uniform",
            "--scenes",
            scenes_dir,
            "--seed",
            "8",
            "--verify",
            "--out",
            ds_dir,
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "verify: ok" in out
    assert os.path.isfile(os.path.join(ds_dir, "manifest.json"))

    preds_dir = str(tmp_path / "preds" / "oracle")
    write_ground_truth_predictions(ds_dir, preds_dir)
    report_prefix = str(tmp_path / "report")
    code = run(
        [
            "eval",
            "--dataset",
            ds_dir,
            "--pred",
            preds_dir,
            "--seed",
            "3",
            "--n-boot",
            "50",
            "--bins",
            "4",
            "--out",
            report_prefix,
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "selected prediction set: oracle" in out
    assert "mIoU 1.0000" in out
    assert os.path.isfile(report_prefix + ".json")
    assert os.path.isfile(report_prefix + ".csv")

    curves_prefix = str(tmp_path / "curves")
    code = run(
        ["curves", "--report", report_prefix + ".json", "--bins", "3", "--out", curves_prefix]
    )
    assert code == 0
    with open(curves_prefix + ".csv") as fh:
        lines = fh.read().splitlines()
    # Header plus bins x corruptions.
    assert len(lines) == 1 + 3 * 7
    with open(curves_prefix + ".svg") as fh:
        ET.fromstring(fh.read())


def test_corrupt_synthesizes_with_n(tmp_path, capsys):
    ds_dir = str(tmp_path / "ds")
    config_path = str(tmp_path / "scene.json")
    with open(config_path, "w") as fh:
        fh.write(
            SceneConfig(width=48, height=48, n_objects=(1, 2), size_range=(6.0, 10.0)).to_json()
        )
    code = run(
        [
            "corrupt",
            "--scm",
            "iid_uniform",
            "--n",
            "2",
            "--config",
            config_path,
            "--seed",
            "5",
            "--out",
            ds_dir,
        ]
    )
    assert code == 0
    assert os.path.isfile(os.path.join(ds_dir, "manifest.json"))


def test_corrupt_requires_a_scene_source(tmp_path, capsys):
    assert run(["corrupt", "--scm", "iid_uniform", "--out", str(tmp_path / "x")]) == 1
    assert "error:" in capsys.readouterr().err


def test_corrupt_longtail_regime(tmp_path, capsys):
    config_path = str(tmp_path / "scene.json")
    with open(config_path, "w") as fh:
        fh.write(
            SceneConfig(width=48, height=48, n_objects=(1, 2), size_range=(6.0, 10.0)).to_json()
        )
    ds_dir = str(tmp_path / "lt")
    code = run(
        [
            "corrupt",
            "--scm",
            "iid_uniform",
            "--n",
            "3",
            "--config",
            config_path,
            "--regime",
            "longtail",
            "--p-corr",
            "noise=0.3,blur=0.2",
            "--out",
            ds_dir,
        ]
    )
    assert code == 0
    assert os.path.isfile(os.path.join(ds_dir, "longtail.csv"))


def test_corrupt_rejects_bad_p_corr(tmp_path, capsys):
    code = run(
        [
            "corrupt",
            "--scm",
            "iid_uniform",
            "--n",
            "1",
            "--regime",
            "longtail",
            "--p-corr",
            "noise=lots",
            "--out",
            str(tmp_path / "x"),
        ]
    )
    assert code == 1


def test_eval_missing_prediction_dir_fails(tiny_dataset, tmp_path, capsys):
    code = run(
        [
            "eval",
            "--dataset",
            tiny_dataset.root,
            "--pred",
            str(tmp_path / "ghost"),
            "--out",
            str(tmp_path / "r"),
        ]
    )
    assert code == 1


def test_curves_rejects_unknown_metric(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["curves", "--report", "r.json", "--metric", "psnr", "--out", str(tmp_path / "c")])
    assert exc.value.code == 2


def test_parse_p_corr_forms():
    assert _parse_p_corr(["a=0.1,b=0.2", "c=0.3"]) == {"a": 0.1, "b": 0.2, "c": 0.3}
    with pytest.raises(ConfigError):
        _parse_p_corr(["a:0.1"])
    with pytest.raises(ConfigError):
        _parse_p_corr(["a=x"])


def test_cli_invocation_shape():
    inv = CliInvocation(subcommand="validate", flags={"scm": "iid_uniform"})
    assert inv.subcommand == "validate"
    assert inv.flags["scm"] == "iid_uniform"
