"""Command-line entry point: sample-config, simulate, evaluate, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import evaluation, stepserver
from .encoding import ObservationSpec
from .policies import POLICY_USAGE, make_policy
from .scenario import (ConfigError, ScenarioConfig, config_to_dict, default_config,
                       load_scenario, sample_episode)

CONFIG_ENV_VAR = "CUAS_CONFIG"


def _load_config(path: str | None) -> ScenarioConfig:
    """Explicit flag, then $CUAS_CONFIG, then the bundled reference scenario."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return default_config()
    try:
        with open(path) as f:
            return load_scenario(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e


def _parse_seeds(raw: str) -> list[int]:
    """'5' means seeds 0..4; '1,3,9' is an explicit list."""
    if "," in raw:
        return [int(v) for v in raw.split(",") if v.strip()]
    return list(range(int(raw)))


def _cmd_sample_config(args) -> int:
    text = json.dumps(config_to_dict(default_config()), indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    policy = make_policy(args.policy, ObservationSpec.from_config(config))
    setup = sample_episode(config, args.seed)
    report = evaluation.run_episode(config, setup, policy, args.seed,
                                    replay_path=args.replay)
    summary = {
        "policy": args.policy,
        "seed": args.seed,
        "steps": report.steps,
        "damage_pct": report.damage_pct,
        "tracking_pct": report.tracking_pct,
        "utilization_pct": report.utilization_pct,
        "episode_return": report.episode_return,
    }
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    policy = make_policy(args.policy, ObservationSpec.from_config(config))
    seeds = _parse_seeds(args.seeds)
    batch = evaluation.run_batch(config, policy, args.episodes, seeds,
                                 policy_name=args.policy, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    evaluation.export_csv(batch, os.path.join(args.out, "episodes.csv"))
    evaluation.export_summary(batch, os.path.join(args.out, "summary.json"))
    print(json.dumps(evaluation.batch_summary(batch)["overall"], indent=2))
    return 0


def _cmd_serve(args) -> int:
    config = _load_config(args.config)
    if args.transport == "stdio":
        stepserver.serve_stdio(config)
    else:
        stepserver.serve_tcp(config, host=args.host, port=args.port,
                             max_connections=args.max_connections)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuas",
        description="Counter-UAS swarm defense simulator and evaluation harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-config", help="emit the bundled reference scenario as JSON")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=_cmd_sample_config)

    p = sub.add_parser("simulate", help="run a single seeded episode")
    p.add_argument("--policy", required=True, help=POLICY_USAGE)
    p.add_argument("--config", help=f"scenario JSON (default: ${CONFIG_ENV_VAR} or built-in)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replay", help="write a line-delimited JSON replay here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="run an episode batch and export metrics")
    p.add_argument("--policy", required=True, help=POLICY_USAGE)
    p.add_argument("--config", help=f"scenario JSON (default: ${CONFIG_ENV_VAR} or built-in)")
    p.add_argument("--episodes", type=int, default=100, help="episodes per seed")
    p.add_argument("--seeds", default="5", help="seed count ('5' -> 0..4) or comma list")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("serve", help="expose the environment over the step protocol")
    p.add_argument("--config", help=f"scenario JSON (default: ${CONFIG_ENV_VAR} or built-in)")
    p.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=5555)
    p.add_argument("--max-connections", type=int, default=64)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
