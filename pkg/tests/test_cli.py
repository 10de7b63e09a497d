import json
import os
import subprocess
import sys

import pytest

from esp_marl.cli import build_parser, main

SMOKE = os.path.join(os.path.dirname(__file__), "..", "configs", "smoke.ini")


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_train_then_evaluate(tmp_path, capsys):
    assert main(["train", "--config", SMOKE, "--seed", "0", "--out", str(tmp_path)]) == 0
    assert "800 steps" in capsys.readouterr().out
    ckpt = tmp_path / "checkpoints" / "step_800.npz"
    assert main(["evaluate", "--checkpoint", str(ckpt), "--episodes", "3"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert set(result) == {"mean_return", "stderr", "risky_rate"}


def test_multi_seed_train_uses_subdirectories(tmp_path, capsys):
    cfg = tmp_path / "two.ini"
    with open(SMOKE, encoding="utf-8") as fh:
        cfg.write_text(fh.read().replace("n_seeds = 1", "n_seeds = 2").replace("800", "400"))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "runs")]) == 0
    assert sorted(os.listdir(tmp_path / "runs")) == ["seed0", "seed1"]


def test_user_errors_exit_with_code_two(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nwarp = 9\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "run.warp" in capsys.readouterr().err
    assert main(["evaluate", "--checkpoint", str(tmp_path / "missing.npz"), "--episodes", "1"]) == 2


def test_verify_with_config(capsys):
    assert main(["verify", "--config", SMOKE, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "esp_marl.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "ablate" in out.stdout
