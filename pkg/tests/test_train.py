import csv
import json
import os

import numpy as np
import pytest

from esp_marl.config import ExperimentConfig
from esp_marl.errors import InvalidArgument, NonFiniteError
from esp_marl.envs import make_env
from esp_marl.train import METRICS_HEADER, eval_seed, evaluate_checkpoint, load_run_checkpoint, train


def tiny(**run):
    return ExperimentConfig().with_overrides(
        run={"total_steps": 400, "eval_episodes": 3, "log_wall_time": False, **run},
        trainer={"n_envs": 2, "horizon": 100, "epochs": 1, "num_minibatches": 2, "hidden": 16},
    )


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_run_directory_layout(tmp_path):
    res = train(tiny(eval_every=200), seed=0, out_dir=str(tmp_path))
    assert res.steps == 400 and res.updates == 2
    rows = _rows(tmp_path / "metrics.csv")
    assert [int(r["step"]) for r in rows] == [200, 400]
    with open(tmp_path / "metrics.csv", encoding="utf-8") as fh:
        assert fh.readline().strip() == METRICS_HEADER
    assert [int(r["step"]) for r in _rows(tmp_path / "eval.csv")] == [200, 400]
    assert sorted(os.listdir(tmp_path / "checkpoints")) == ["step_200.npz", "step_400.npz"]
    assert (tmp_path / "config.ini").exists()
    assert res.buffer_multiplier == 2.0
    assert all(float(r["ratio_max"]) > 1.0 for r in rows)


def test_baseline_logs_no_symmetry_terms(tmp_path):
    train(tiny(algorithm="mappo"), seed=0, out_dir=str(tmp_path))
    row = _rows(tmp_path / "metrics.csv")[0]
    assert float(row["sym_policy_loss"]) == 0.0 and row["ratio_max"] == "nan"


def test_same_seed_same_metrics(tmp_path):
    for name in ("a", "b"):
        train(tiny(), seed=3, out_dir=str(tmp_path / name))
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "eval.csv").read_bytes() == (tmp_path / "b" / "eval.csv").read_bytes()


def test_different_seeds_differ(tmp_path):
    train(tiny(), seed=0, out_dir=str(tmp_path / "a"))
    train(tiny(), seed=1, out_dir=str(tmp_path / "b"))
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "b" / "metrics.csv").read_bytes()


def test_checkpoint_round_trip_preserves_evaluation(tmp_path):
    res = train(tiny(), seed=2, out_dir=str(tmp_path))
    ckpt = tmp_path / "checkpoints" / "step_400.npz"
    again = evaluate_checkpoint(ckpt, 3)
    assert again["returns"] == res.final_eval["returns"]
    cfg, env, learner, meta = load_run_checkpoint(ckpt)
    assert meta["seed"] == 2 and meta["step"] == 400 and cfg.run.seed == 2
    assert learner.actor_opt.t == 2 * 1 * 2


def test_evaluate_checkpoint_rejects_other_env(tmp_path):
    train(tiny(), seed=0, out_dir=str(tmp_path))
    with pytest.raises(InvalidArgument):
        evaluate_checkpoint(tmp_path / "checkpoints" / "step_400.npz", 2, env=make_env("predator_prey"))
    with pytest.raises(InvalidArgument):
        evaluate_checkpoint(tmp_path / "checkpoints" / "step_400.npz", 0)


def test_eval_seed_is_algorithm_independent():
    assert eval_seed(4) == 1_000_007


def test_non_finite_update_leaves_error_record(tmp_path):
    cfg = tiny().with_overrides(trainer={"actor_lr": float("inf")})
    with pytest.raises(NonFiniteError):
        train(cfg, seed=0, out_dir=str(tmp_path))
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["step"] == 200 and "non-finite" in err["error"]
    assert os.listdir(tmp_path / "checkpoints") == ["failed_step_200.npz"]


def test_augmentation_only_run(tmp_path):
    cfg = tiny().with_overrides(esp={"loss_enabled": False, "augmentation_elements": ("r90", "r180", "r270")})
    res = train(cfg, seed=0, out_dir=str(tmp_path))
    assert res.buffer_multiplier == 4.0
    assert all(float(r["sym_policy_loss"]) == 0.0 for r in _rows(tmp_path / "metrics.csv"))
    assert np.isfinite(res.final_eval["mean_return"])
