"""``rola`` command line: train, eval, oracle and export.

Exit status is 0 on success, 2 for usage errors (bad flags, unknown keys or
presets) and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .numerics import NumericalError, UnsupportedConfiguration, load_checkpoint
from .oracle import INSTANCES, describe_instance
from .presets import PRESETS, get_preset
from .trainer.config import ConfigError, ExperimentConfig, build_config, load_config_file, parse_override
from .trainer.experiment import export_runs, run_experiment
from .trainer.learners import make_learner
from .trainer.loop import build_env, evaluate

OUTPUT_ROOT_ENV = "ROLA_OUTPUT_ROOT"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("rola")


class UsageError(Exception):
    pass


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / name


def resolve_config(config: str | None, preset: str | None, overrides: list[str]) -> ExperimentConfig:
    """Config file or preset first, then ``key=value`` overrides in order."""
    if (config is None) == (preset is None):
        raise UsageError("give exactly one of --config or --preset")
    if preset is not None:
        try:
            base = dict(get_preset(preset).values)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    else:
        if not Path(config).is_file():
            raise UsageError(f"config file {config} does not exist")
        base = load_config_file(config)
    parsed = dict(parse_override(o) for o in overrides)
    return build_config(base, parsed)


def cmd_train(args) -> int:
    overrides = list(args.set or [])
    if args.trials is not None:
        overrides.append(f"trials={args.trials}")
    cfg = resolve_config(args.config, args.preset, overrides)
    out = Path(args.out) if args.out else (Path(cfg.output) if cfg.output else _default_out(args.preset or "run"))
    agg = run_experiment(cfg, out, jobs=args.jobs, overwrite=args.overwrite, preset=args.preset)
    final = agg[-1]["mean"] if agg else float("nan")
    print(f"wrote {out} ({cfg.trials} trial(s), final mean eval return {final:.4f})")
    return EXIT_OK


def load_actors(path: str | Path):
    """Rebuild the environment and actors stored in a checkpoint."""
    nets, meta = load_checkpoint(path)
    cfg = ExperimentConfig(**meta["config"])
    env = build_env(cfg)
    learner = make_learner(env.spec, cfg, np.random.default_rng(0))
    for i, actor in enumerate(learner.actors):
        actor.net.load_state_dict(nets[f"actor{i}"])
    return cfg, env, learner.actors


def cmd_eval(args) -> int:
    cfg, env, actors = load_actors(args.checkpoint)
    ret = evaluate(actors, env, args.episodes, cfg.gamma, np.random.default_rng(args.seed))
    print(json.dumps({"checkpoint": str(args.checkpoint), "episodes": args.episodes,
                      "mean_discounted_return": ret}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        result = describe_instance(args.instance)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_export(args) -> int:
    out = Path(args.out) if args.out else _default_out("export.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = export_runs(args.runs, out)
    print(f"wrote {n} rows to {out}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        p = PRESETS[name]
        print(f"{name:28s} {p.source}" + (f" [{p.notes}]" if p.notes else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rola", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a multi-trial experiment")
    t.add_argument("--config", help="JSON config file")
    t.add_argument("--preset", help="preset name (see `rola presets`)")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    t.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<preset>)")
    t.add_argument("--trials", type=int)
    t.add_argument("--jobs", type=int, default=1, help="parallel trial processes")
    t.add_argument("--overwrite", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="mean discounted return of a saved policy")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("oracle", help="print exact values for a small instance")
    o.add_argument("--instance", required=True, help=", ".join(INSTANCES))
    o.set_defaults(func=cmd_oracle)

    x = sub.add_parser("export", help="merge run aggregates into one long-format CSV")
    x.add_argument("--runs", nargs="+", required=True)
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)

    p = sub.add_parser("presets", help="list shipped presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "episodes", 1) is not None and getattr(args, "episodes", 1) <= 0:
        print("error: --episodes must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileExistsError, ValueError, NumericalError, UnsupportedConfiguration, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
