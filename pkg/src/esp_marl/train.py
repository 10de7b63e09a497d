"""Seeded training runs, evaluation, and checkpoint persistence.

A run directory holds::

    config.ini      resolved configuration, verbatim
    metrics.csv     one row per update (header in METRICS_HEADER)
    eval.csv        step, eval_return_mean, eval_return_stderr, risky_rate
    checkpoints/    step_<N>.npz at every evaluation point
    error.json      only if the run aborted on a numerical failure
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from esp_marl.config import ExperimentConfig
from esp_marl.envs import make_env
from esp_marl.errors import InvalidArgument, NonFiniteError
from esp_marl.esp import augment_batch, esp_update, ratio_diagnostic
from esp_marl.mappo import (
    LearnerState,
    MetricsRecord,
    RolloutCollector,
    compute_gae,
    evaluate_policy,
    flatten,
    ppo_update,
)
from esp_marl.nn.checkpoint import load_checkpoint, save_checkpoint
from esp_marl.nn.optim import AdamState
from esp_marl.nn.policy import Actor, Critic

log = logging.getLogger(__name__)

METRICS_HEADER = ",".join(MetricsRecord.CSV_FIELDS)
EVAL_HEADER = "step,eval_return_mean,eval_return_stderr,risky_rate"
EVAL_SEED_OFFSET = 1_000_003


@dataclass
class RunResult:
    run_dir: str
    steps: int
    updates: int
    final_eval: dict
    evals: list = field(default_factory=list)
    buffer_multiplier: float = 1.0


def build_learner(cfg: ExperimentConfig, env, rng: np.random.Generator) -> LearnerState:
    hidden = (cfg.trainer.hidden, cfg.trainer.hidden)
    actor = Actor(env.obs_dim, env.act_layout, hidden).init(rng)
    critic = Critic(env.state_dim, hidden).init(rng)
    return LearnerState.create(actor, critic)


def eval_seed(seed: int) -> int:
    """Evaluation episodes depend only on the run seed, never on the algorithm."""
    return EVAL_SEED_OFFSET + int(seed)


def _stats(xs):
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        return float("nan"), float("nan")
    if xs.size == 1:
        return float(xs[0]), 0.0
    return float(xs.mean()), float(xs.std(ddof=1) / np.sqrt(xs.size))


def checkpoint_arrays(learner: LearnerState) -> dict:
    return {
        "actor.params": learner.actor.params.values,
        "critic.params": learner.critic.params.values,
        "actor.adam.m": learner.actor_opt.m,
        "actor.adam.v": learner.actor_opt.v,
        "critic.adam.m": learner.critic_opt.m,
        "critic.adam.v": learner.critic_opt.v,
    }


def save_run_checkpoint(path, cfg: ExperimentConfig, learner: LearnerState, step: int, seed: int, rngs: dict):
    meta = {
        "config": cfg.to_dict(),
        "step": int(step),
        "seed": int(seed),
        "env": {"name": cfg.env.name, "n_agents": cfg.env.n_agents},
        "adam_t": {"actor": learner.actor_opt.t, "critic": learner.critic_opt.t},
        "rng": {name: r.bit_generator.state for name, r in rngs.items()},
        "param_layout": {
            "actor": {k: [s, list(shape)] for k, (s, shape) in learner.actor.params.registry.items()},
            "critic": {k: [s, list(shape)] for k, (s, shape) in learner.critic.params.registry.items()},
        },
    }
    save_checkpoint(path, checkpoint_arrays(learner), meta)


def load_run_checkpoint(path):
    """Return ``(cfg, env, learner, meta)`` rebuilt from a checkpoint file."""
    from esp_marl.config import config_from_dict

    arrays, meta = load_checkpoint(path)
    cfg = config_from_dict(meta["config"])
    env = make_env(cfg.env.name, cfg.env.n_agents)
    learner = build_learner(cfg, env, np.random.default_rng(0))
    for part, net in (("actor", learner.actor), ("critic", learner.critic)):
        values = arrays[f"{part}.params"]
        if values.shape != net.params.values.shape:
            raise InvalidArgument(f"{path}: {part} parameters do not match {cfg.env.name}")
        net.params.values = values.copy()
    learner.actor_opt = AdamState(arrays["actor.adam.m"], arrays["actor.adam.v"], meta["adam_t"]["actor"])
    learner.critic_opt = AdamState(arrays["critic.adam.m"], arrays["critic.adam.v"], meta["adam_t"]["critic"])
    return cfg, env, learner, meta


def evaluate_checkpoint(path, episodes: int, seed=None, env=None) -> dict:
    """Deterministic evaluation of a saved policy (argmax / mean action)."""
    if episodes < 1:
        raise InvalidArgument("episodes must be >= 1")
    cfg, ckpt_env, learner, meta = load_run_checkpoint(path)
    if env is not None:
        if (env.obs_dim, env.state_dim, env.act_layout.kind) != (
            ckpt_env.obs_dim, ckpt_env.state_dim, ckpt_env.act_layout.kind
        ) or env.name != ckpt_env.name:
            raise InvalidArgument(f"checkpoint was trained on {ckpt_env.name}, not compatible with {env.name}")
    else:
        env = ckpt_env
    seed = eval_seed(meta["seed"]) if seed is None else seed
    return evaluate_policy(learner.actor, env, episodes, seed)


def _spawn(seed: int):
    init, collect, update, loss = np.random.SeedSequence(seed).spawn(4)
    return {
        "init": np.random.default_rng(init),
        "collect": np.random.default_rng(collect),
        "update": np.random.default_rng(update),
        "loss": np.random.default_rng(loss),
    }


def train(cfg: ExperimentConfig, seed=None, out_dir=None) -> RunResult:
    """collect -> augment -> GAE -> update, until ``run.total_steps`` environment steps."""
    seed = cfg.run.seed if seed is None else int(seed)
    if out_dir is None:
        out_dir = os.path.join(cfg.output_root(), f"{cfg.env.name}_{cfg.run.algorithm}_seed{seed}")
    os.makedirs(out_dir, exist_ok=True)
    resolved = cfg.with_overrides(run={"seed": seed})
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(resolved.to_ini())

    env = make_env(cfg.env.name, cfg.env.n_agents)
    spec = env.symmetry_spec(cfg.esp.group)
    rngs = _spawn(seed)
    learner = build_learner(cfg, env, rngs["init"])
    collector = RolloutCollector(env, cfg.trainer.n_envs, rngs["collect"])
    aug_elements = cfg.esp.resolve(spec, cfg.esp.augmentation_elements) if cfg.augment_active else []
    if cfg.loss_active:
        cfg.esp.resolve(spec, cfg.esp.consistency_elements)  # fail fast on bad names

    ckpt_dir = os.path.join(out_dir, "checkpoints")
    metrics_path = os.path.join(out_dir, "metrics.csv")
    eval_path = os.path.join(out_dir, "eval.csv")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write(METRICS_HEADER + "\n")
    with open(eval_path, "w", encoding="utf-8") as fh:
        fh.write(EVAL_HEADER + "\n")

    def run_eval(step):
        res = evaluate_policy(learner.actor, env, cfg.run.eval_episodes, eval_seed(seed))
        with open(eval_path, "a", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerow([step, repr(res["mean_return"]), repr(res["stderr"]), repr(res["risky_rate"])])
        if cfg.run.save_checkpoints:
            os.makedirs(ckpt_dir, exist_ok=True)
            save_run_checkpoint(os.path.join(ckpt_dir, f"step_{step}.npz"), resolved, learner, step, seed, rngs)
        return {"step": step, **res}

    start = time.perf_counter()
    steps = updates = 0
    evals = []
    next_eval = cfg.run.eval_every if cfg.run.eval_every > 0 else None
    per_cycle = cfg.trainer.horizon * cfg.trainer.n_envs
    stored = real = 0
    while steps < cfg.run.total_steps:
        batch = collector.collect(learner.actor, learner.critic, cfg.trainer.horizon)
        steps += per_cycle
        batches = [batch]
        ratio_max = float("nan")
        if aug_elements:
            diag = ratio_diagnostic(learner.actor, batch.obs, batch.actions, spec, aug_elements[0],
                                    behavior_log_probs=batch.log_probs)
            ratio_max = diag["max"]
            batches += augment_batch(batch, spec, aug_elements, learner.actor, learner.critic)
        for b in batches:
            compute_gae(b, cfg.trainer.gamma, cfg.trainer.gae_lambda)
        samples = flatten(batches)
        stored += len(samples)
        real += int(samples.real.sum())
        try:
            if cfg.esp_active:
                record = esp_update(learner, samples, cfg.trainer, cfg.esp, spec, rngs["update"], rngs["loss"])
            else:
                record = ppo_update(learner, samples, cfg.trainer, rngs["update"])
        except NonFiniteError as exc:
            os.makedirs(ckpt_dir, exist_ok=True)
            save_run_checkpoint(os.path.join(ckpt_dir, f"failed_step_{steps}.npz"), resolved, learner, steps,
                                seed, rngs)
            with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as fh:
                json.dump({"step": steps, "error": str(exc)}, fh)
            raise
        updates += 1
        record.step = steps
        record.ep_reward_mean, record.ep_reward_stderr = _stats(batch.episode_returns)
        record.ratio_max = ratio_max
        record.wall_time_s = round(time.perf_counter() - start, 3) if cfg.run.log_wall_time else 0.0
        with open(metrics_path, "a", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerow(record.csv_row())
        log.info("step %d reward %.3f", steps, record.ep_reward_mean)
        if next_eval is not None and steps >= next_eval and steps < cfg.run.total_steps:
            evals.append(run_eval(steps))
            while next_eval <= steps:
                next_eval += cfg.run.eval_every
    final = run_eval(steps)
    evals.append(final)
    return RunResult(out_dir, steps, updates, final, evals, stored / real)
