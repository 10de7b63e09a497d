"""Compare the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--repeat 20]

Each row reports the best-of-``repeat`` wall time per call for both paths,
the speedup, and the largest absolute difference between their outputs.
Compilation happens once before timing. An end-to-end line times a short
training run in a subprocess with ``ESP_MARL_NUMBA`` on and off.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from esp_marl import kernels

ROLLOUT_SNIPPET = """
import time
from esp_marl.config import ExperimentConfig
from esp_marl.train import train
cfg = ExperimentConfig().with_overrides(run={"algorithm": "mappo", "total_steps": 3200,
                                             "save_checkpoints": False, "eval_episodes": 8})
train(cfg, seed=0, out_dir="{out}")
t = time.perf_counter()
train(cfg, seed=0, out_dir="{out}")
print(time.perf_counter() - t)
"""


def cases(rng):
    T, E = 200, 8
    r, v, nv = rng.normal(size=(3, T, E))
    d = (rng.random((T, E)) < 0.05).astype(float)
    tr = (rng.random((T, E)) < 0.05).astype(float)
    yield "gae (200x8)", kernels._gae_jit, kernels.gae_numpy, (r, v, nv, d, tr, 0.99, 0.95)

    E, n = 64, 8
    pos, vel, acc = rng.normal(size=(3, E, n, 2))
    ms = np.full(n, 1.0)
    yield "integrate (64 envs x 8)", kernels._integrate_jit, kernels.integrate_numpy, \
        (pos, vel, acc, 0.25, 0.1, ms, 1.5)
    yield "count_contacts (64 x 8)", kernels._count_contacts_jit, kernels.count_contacts_numpy, (pos, 0.3)
    land = rng.normal(size=(E, 3, 2))
    yield "min_distances (64, 8->3)", kernels._min_distances_jit, kernels.min_distances_numpy, (pos, land)


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def bench_rollout(flag: str) -> float:
    out = f"/tmp/esp_marl_bench_{flag}"
    code = ROLLOUT_SNIPPET.replace("{out}", out)
    env = {**os.environ, "ESP_MARL_NUMBA": flag}
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--number", type=int, default=50)
    parser.add_argument("--skip-training", action="store_true")
    args = parser.parse_args(argv)
    if kernels._gae_jit is None:
        sys.exit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numba us':>12}{'numpy us':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fast, slow, call_args in cases(rng):
        diff = _max_diff(fast(*call_args), slow(*call_args))  # also triggers compilation
        t_fast = min(timeit.repeat(lambda: fast(*call_args), number=args.number, repeat=args.repeat))
        t_slow = min(timeit.repeat(lambda: slow(*call_args), number=args.number, repeat=args.repeat))
        us_fast, us_slow = 1e6 * t_fast / args.number, 1e6 * t_slow / args.number
        print(f"{name:<28}{us_fast:>12.2f}{us_slow:>12.2f}{us_slow / us_fast:>9.1f}x{diff:>14.2e}")
    if not args.skip_training:
        on, off = bench_rollout("1"), bench_rollout("0")
        print(f"{'train 3200 steps (mappo)':<28}{on * 1e3:>10.0f}ms{off * 1e3:>10.0f}ms{off / on:>9.2f}x")


if __name__ == "__main__":
    main()
