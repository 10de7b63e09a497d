"""Ablation grids over the ESP components.

Families:

``count``    one, two or three rotations as augmentation, no consistency loss
``type``     D4 augmentation with two rotations vs a rotation and the x-flip,
             no consistency loss (matched element count)
``coef``     consistency coefficient c in {0, 0.1, 0.25, 0.5, 1.0}, augmentation off,
             so c = 0 is the MAPPO baseline
``modules``  the 2x2 grid of {augmentation, consistency loss}; the (off, off)
             cell runs plain MAPPO
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from esp_marl.config import ExperimentConfig
from esp_marl.errors import InvalidArgument
from esp_marl.train import train

FAMILIES = ("count", "type", "coef", "modules")
COEFFICIENTS = (0.0, 0.1, 0.25, 0.5, 1.0)
SUMMARY_FIELDS = ("family", "arm", "n_seeds", "eval_return_mean", "eval_return_stderr", "risky_rate",
                  "buffer_multiplier", "augmentation_elements", "c", "augment", "loss")


@dataclass(frozen=True)
class Arm:
    name: str
    overrides: dict  # section -> {key: value}


def family_arms(family: str) -> list:
    if family == "count":
        rots = ("r90", "r180", "r270")
        return [
            Arm(f"rot{k}", {"run": {"algorithm": "mappo_esp"},
                            "esp": {"group": "C4", "augmentation_elements": rots[:k],
                                    "augment_enabled": True, "loss_enabled": False}})
            for k in (1, 2, 3)
        ]
    if family == "type":
        arms = (("rotation", ("r90", "r180")), ("rotation_flip", ("r90", "flipx")))
        return [
            Arm(name, {"run": {"algorithm": "mappo_esp"},
                       "esp": {"group": "D4", "augmentation_elements": els, "consistency_elements": ("r90",),
                               "augment_enabled": True, "loss_enabled": False}})
            for name, els in arms
        ]
    if family == "coef":
        return [
            Arm(f"c{c:g}", {"run": {"algorithm": "mappo_esp"},
                            "esp": {"c": c, "augment_enabled": False, "loss_enabled": True}})
            for c in COEFFICIENTS
        ]
    if family == "modules":
        return [
            Arm("baseline", {"run": {"algorithm": "mappo"}}),
            Arm("augment_only", {"run": {"algorithm": "mappo_esp"},
                                 "esp": {"augment_enabled": True, "loss_enabled": False}}),
            Arm("loss_only", {"run": {"algorithm": "mappo_esp"},
                              "esp": {"augment_enabled": False, "loss_enabled": True}}),
            Arm("both", {"run": {"algorithm": "mappo_esp"},
                         "esp": {"augment_enabled": True, "loss_enabled": True}}),
        ]
    raise InvalidArgument(f"unknown ablation family {family!r}; choose from {FAMILIES}")


@dataclass
class RunRow:
    family: str
    arm: str
    seed: int
    eval_return_mean: float
    eval_return_stderr: float
    risky_rate: float
    buffer_multiplier: float
    run_dir: str


def _run_one(job):
    cfg, family, arm, seed, out_dir = job
    res = train(cfg, seed=seed, out_dir=out_dir)
    ev = res.final_eval
    return RunRow(family, arm, seed, ev["mean_return"], ev["stderr"], ev["risky_rate"], res.buffer_multiplier,
                  res.run_dir)


def _seed_stats(xs):
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size < 2:
        return float(xs.mean()), 0.0
    return float(xs.mean()), float(xs.std(ddof=1) / np.sqrt(xs.size))


@dataclass
class AblationResult:
    family: str
    rows: list
    summary: list  # one dict per arm, keys SUMMARY_FIELDS
    summary_path: str

    def arm(self, name: str) -> dict:
        return next(s for s in self.summary if s["arm"] == name)


def ablate(cfg: ExperimentConfig, family: str, out_root=None, seeds=None) -> AblationResult:
    """Run every arm of ``family`` over ``run.n_seeds`` consecutive seeds starting at ``run.seed``."""
    arms = family_arms(family)
    seeds = list(range(cfg.run.seed, cfg.run.seed + cfg.run.n_seeds)) if seeds is None else list(seeds)
    root = os.path.join(out_root or cfg.output_root(), f"ablate_{family}")
    jobs, arm_cfgs = [], {}
    for arm in arms:
        arm_cfg = cfg.with_overrides(**{k: {**v} for k, v in arm.overrides.items()})
        arm_cfgs[arm.name] = arm_cfg
        for seed in seeds:
            jobs.append((arm_cfg, family, arm.name, seed, os.path.join(root, arm.name, f"seed{seed}")))
    if cfg.run.workers > 1:
        with ProcessPoolExecutor(cfg.run.workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(job) for job in jobs]

    summary = []
    for arm in arms:
        mine = [r for r in rows if r.arm == arm.name]
        mean, se = _seed_stats([r.eval_return_mean for r in mine])
        acfg = arm_cfgs[arm.name]
        summary.append({
            "family": family,
            "arm": arm.name,
            "n_seeds": len(mine),
            "eval_return_mean": mean,
            "eval_return_stderr": se,
            "risky_rate": float(np.mean([r.risky_rate for r in mine])),
            "buffer_multiplier": float(np.mean([r.buffer_multiplier for r in mine])),
            "augmentation_elements": " ".join(acfg.esp.augmentation_elements) if acfg.augment_active else "",
            "c": acfg.esp.c if acfg.loss_active else 0.0,
            "augment": acfg.augment_active,
            "loss": acfg.loss_active,
        })
    os.makedirs(root, exist_ok=True)
    summary_path = os.path.join(root, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        writer.writerows(summary)
    with open(os.path.join(root, "runs.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(RunRow.__dataclass_fields__))
        writer.writerows([list(r.__dict__.values()) for r in rows])
    return AblationResult(family, rows, summary, summary_path)
