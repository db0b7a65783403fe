"""Command-line behavior: subcommands, artifacts, and exit codes."""

import json

import pytest

from trajguide import cli

RUN_FILES = ("config.json", "image.png", "mask_0.png", "metrics.json",
             "energies.csv", "manifest.json")

FAST_FLAGS = ["--steps", "8", "--guided-steps", "3", "--repeats", "2"]


def _fast_config(tmp_path, **extra):
    data = {
        "prompt": ["cat", "moon"],
        "guidance": {"total_steps": 8, "guided_steps": 3, "repeats_per_step": 2},
        "trajectories": [
            {"token_index": 0, "polylines": [[[3.0, 3.0], [12.0, 12.0]]]}
        ],
    }
    data.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def test_demo_writes_a_complete_run_directory(tmp_path, capsys):
    out = tmp_path / "demo"
    assert cli.main(["demo", "--out", str(out)] + FAST_FLAGS) == 0
    for name in RUN_FILES:
        assert (out / name).is_file()
    printed = capsys.readouterr().out
    assert "dtl=" in printed and f"run written to {out}" in printed


def test_run_executes_a_config_file(tmp_path, capsys):
    cfg = _fast_config(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert 0.0 <= metrics["dtl"] <= 1.0
    assert "token 0" in capsys.readouterr().out


def test_flag_overrides_reach_the_artifacts(tmp_path):
    cfg = _fast_config(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["run", str(cfg), "--out", str(out), "--mode", "none",
                     "--seed", "7"]) == 0
    echo = json.loads((out / "config.json").read_text())
    assert echo["guidance"]["mode"] == "none"
    assert echo["guidance"]["seed"] == 7


def test_missing_config_file_is_a_config_error(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.json")]) == 2


def test_invalid_override_is_a_config_error(tmp_path):
    assert cli.main(["demo", "--out", str(tmp_path / "x"), "--lambda", "-5"]) == 2


def test_non_finite_guidance_exits_with_the_divergence_code(tmp_path, capsys):
    code = cli.main(["demo", "--out", str(tmp_path / "d"), "--eta", "inf",
                     "--steps", "8", "--guided-steps", "2"])
    assert code == 3
    assert "diverged" in capsys.readouterr().err


def test_identical_runs_write_identical_manifests(tmp_path):
    cfg = _fast_config(tmp_path)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in RUN_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_ablation_covers_every_mode(tmp_path):
    cfg = _fast_config(tmp_path, suite={"n": 2, "seed": 450})
    out = tmp_path / "ablation"
    assert cli.main(["ablate", str(cfg), "--out", str(out)]) == 0
    rows = json.loads((out / "ablation.json").read_text())["rows"]
    assert [r["variant"] for r in rows] == list(cli.MODES)
    assert all(len(r["scene_dtls"]) == 2 for r in rows)
    csv_lines = (out / "ablation.csv").read_text().strip().split("\n")
    assert len(csv_lines) == len(cli.MODES) + 1
    assert (out / "ablation.png").is_file()


def test_sweep_writes_plot_ready_series(tmp_path):
    cfg = _fast_config(tmp_path, suite={"n": 2, "seed": 450})
    out = tmp_path / "sweep"
    assert cli.main(["sweep-lambda", str(cfg), "--values", "0", "10",
                     "--out", str(out)]) == 0
    series = json.loads((out / "sweep.json").read_text())
    assert series["lambda"] == [0.0, 10.0]
    assert len(series["mean_dtl"]) == 2
    assert set(series["per_scene"]) == {"0", "10"}
    for scene_dtls, mean in zip(series["per_scene"].values(), series["mean_dtl"]):
        assert len(scene_dtls) == 2
    assert (out / "sweep.csv").is_file() and (out / "sweep.png").is_file()


def test_sweep_rejects_negative_values(tmp_path):
    cfg = _fast_config(tmp_path, suite={"n": 2, "seed": 450})
    assert cli.main(["sweep-lambda", str(cfg), "--values", "-1"]) == 2


def test_self_checks_pass_and_corruption_is_caught(tmp_path, capsys):
    assert cli.main(["verify-edt"]) == 0
    assert "PASS" in capsys.readouterr().out

    assert cli.main(["verify-edt", "--corrupt", "--out", str(tmp_path)]) == 1
    captured = capsys.readouterr()
    assert "FAIL" in captured.out
    assert (tmp_path / "verify_edt_worst.atrc").is_file()


def test_figures_render_from_a_finished_run(tmp_path):
    out = tmp_path / "demo"
    assert cli.main(["demo", "--out", str(out)] + FAST_FLAGS) == 0
    assert cli.main(["render-plots", str(out)]) == 0
    assert (out / "energy_vs_step.png").is_file()
    assert (out / "overlay.png").is_file()


def test_rendering_a_non_run_directory_is_a_config_error(tmp_path):
    assert cli.main(["render-plots", str(tmp_path)]) == 2
