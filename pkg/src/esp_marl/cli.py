"""Command line entry point: ``esp-marl {train,evaluate,verify,ablate}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from esp_marl.errors import ConfigError, InvalidArgument


def _cmd_train(args) -> int:
    from esp_marl.config import load_config
    from esp_marl.train import train

    cfg = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else list(range(cfg.run.seed, cfg.run.seed + cfg.run.n_seeds))
    for seed in seeds:
        out = args.out
        if out and len(seeds) > 1:
            out = os.path.join(out, f"seed{seed}")
        res = train(cfg, seed=seed, out_dir=out)
        ev = res.final_eval
        print(f"seed {seed}: {res.steps} steps, {res.updates} updates, eval return "
              f"{ev['mean_return']:.3f} +- {ev['stderr']:.3f} -> {res.run_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    from esp_marl.train import evaluate_checkpoint

    res = evaluate_checkpoint(args.checkpoint, args.episodes, seed=args.seed)
    print(json.dumps({k: v for k, v in res.items() if k != "returns"}, indent=2))
    return 0


def _cmd_verify(args) -> int:
    from esp_marl.config import load_config
    from esp_marl.verify import verify

    cfg = load_config(args.config) if args.config else None
    report = verify(cfg)
    print(report.to_json() if args.json else report.to_text())
    return 0 if report.passed else 1


def _cmd_ablate(args) -> int:
    from esp_marl.ablate import ablate
    from esp_marl.config import load_config

    cfg = load_config(args.config)
    res = ablate(cfg, args.family, out_root=args.out)
    for row in res.summary:
        print(f"{row['arm']:<14} {row['eval_return_mean']:9.3f} +- {row['eval_return_stderr']:.3f} "
              f"(x{row['buffer_multiplier']:g} buffer, {row['n_seeds']} seeds)")
    print(f"summary: {res.summary_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esp-marl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every update")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one run per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="single seed (default: run.seed .. run.seed + n_seeds - 1)")
    p.add_argument("--out", help="run directory")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="deterministic evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, help="evaluation seed (default: derived from the run seed)")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("verify", help="symmetry, oracle and gradient checks")
    p.add_argument("--config")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("ablate", help="run an ablation family")
    p.add_argument("--config", required=True)
    p.add_argument("--family", required=True, choices=("count", "type", "coef", "modules"))
    p.add_argument("--out", help="output root (default: run.output_dir or $ESP_MARL_OUTPUT_ROOT)")
    p.set_defaults(fn=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except (ConfigError, InvalidArgument, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
