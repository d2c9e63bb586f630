"""Command-line harness: scenario generation, expert traces, training,
evaluation and figure-data export.

Exit codes: 0 on success, 2 for configuration/parse problems, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .case import NetworkCase, load_case, load_two_area_case
from .dqn import TrainConfig, load_checkpoint, save_checkpoint, train
from .env import EnvConfig, UvlsEnv
from .errors import (CaseValidationError, ConfigError, GridshedError,
                     PowerFlowDivergenceError, TrainingDivergedError,
                     VoltageCollapseError)
from .evaluate import evaluate_policy
from .exports import (export_learning_curve, export_trajectories,
                      write_learning_curve_csv)
from .metrics import save_report
from .relay import RelayConfig, RelayStage, generate_expert_transitions
from .replay import load_snapshot, save_snapshot
from .scenarios import (DEFAULT_APPLY_TIME, DEFAULT_DURATION_RANGE,
                        DEFAULT_LOAD_RANGE, generate_scenarios,
                        load_scenarios, save_scenarios)

log = logging.getLogger("gridshed")

MANIFEST_FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass
class RunManifest:
    case: str = "bundled"
    scenarios: str = ""
    expert_snapshot: str = ""
    out_dir: str = "runs/out"
    seed: int = 0
    relay: RelayConfig = field(default_factory=RelayConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    env: EnvConfig = field(default_factory=EnvConfig)

    def to_dict(self) -> dict:
        return {
            "format_version": MANIFEST_FORMAT_VERSION,
            "case": self.case,
            "scenarios": self.scenarios,
            "expert_snapshot": self.expert_snapshot,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "relay": {"stages": [asdict(s) for s in self.relay.stages],
                      "re_arm": self.relay.re_arm},
            "train": asdict(self.train),
            "env": asdict(self.env),
        }

    def hash(self) -> str:
        doc = self.to_dict()
        doc.pop("out_dir")  # destination is not part of the run's identity
        canon = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def provenance(self) -> str:
        return f"manifest_hash={self.hash()} seed={self.seed}"


def load_manifest(path) -> RunManifest:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    if doc.get("format_version", MANIFEST_FORMAT_VERSION) != MANIFEST_FORMAT_VERSION:
        raise ConfigError("unsupported manifest format_version")
    m = RunManifest()
    m.case = doc.get("case", m.case)
    m.scenarios = doc.get("scenarios", m.scenarios)
    m.expert_snapshot = doc.get("expert_snapshot", m.expert_snapshot)
    m.out_dir = doc.get("out_dir", m.out_dir)
    m.seed = doc.get("seed", m.seed)
    if "relay" in doc:
        stages = tuple(RelayStage(**s) for s in doc["relay"]["stages"])
        m.relay = RelayConfig(stages=stages,
                              re_arm=doc["relay"].get("re_arm", 1.0))
    if "train" in doc:
        fields = dict(doc["train"])
        if "hidden_sizes" in fields:
            fields["hidden_sizes"] = tuple(fields["hidden_sizes"])
        m.train = TrainConfig(**fields)
    if "env" in doc:
        m.env = EnvConfig(**doc["env"])
    return m


def resolve_case(path_or_bundled: str | None) -> NetworkCase:
    if not path_or_bundled or path_or_bundled == "bundled":
        return load_two_area_case()
    return load_case(path_or_bundled)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--case", default=None,
                        help="case file (default: bundled two-area case)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output file or directory")
    parser.add_argument("--config", default=None, help="run manifest (JSON)")


def _manifest_from_args(args) -> RunManifest:
    manifest = load_manifest(args.config) if args.config else RunManifest()
    if args.case is not None:
        manifest.case = args.case
    if args.seed is not None:
        manifest.seed = args.seed
    if getattr(args, "out", None):
        manifest.out_dir = args.out
    return manifest


def cmd_gen_scenarios(args) -> int:
    manifest = _manifest_from_args(args)
    case = resolve_case(manifest.case)
    scenarios = generate_scenarios(
        case, args.count, manifest.seed,
        load_range=tuple(args.load_range),
        duration_range=tuple(args.duration_range),
        apply_time=args.apply_time)
    out = args.out or manifest.scenarios or "scenarios.json"
    save_scenarios(scenarios, out, seed=manifest.seed,
                   provenance=manifest.provenance())
    print(f"wrote {len(scenarios)} scenarios to {out}")
    return EXIT_OK


def cmd_expert(args) -> int:
    manifest = _manifest_from_args(args)
    case = resolve_case(manifest.case)
    pool_path = args.scenarios or manifest.scenarios
    scenarios = load_scenarios(pool_path)
    if not scenarios:
        log.warning("empty scenario pool; writing an empty snapshot")
    env = UvlsEnv(case, manifest.env)
    transitions = generate_expert_transitions(
        case, scenarios, relay=manifest.relay, env=env,
        capacity=args.capacity)
    out = args.out or manifest.expert_snapshot or "expert_snapshot.npz"
    save_snapshot(transitions, out, seed=manifest.seed,
                  provenance=manifest.provenance())
    print(f"stored {len(transitions)} expert transitions "
          f"(capacity {args.capacity}) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = _manifest_from_args(args)
    case = resolve_case(manifest.case)
    scenarios = load_scenarios(args.scenarios or manifest.scenarios)
    snapshot_path = args.expert or manifest.expert_snapshot
    expert = []
    if snapshot_path and os.path.exists(snapshot_path):
        expert = load_snapshot(snapshot_path)
    if not expert:
        log.warning("training without expert transitions (ablation mode)")
    train_cfg = manifest.train
    if args.episodes is not None:
        train_cfg = TrainConfig(**{**asdict(train_cfg),
                                   "episodes": args.episodes})
    if args.seed is not None:
        train_cfg = TrainConfig(**{**asdict(train_cfg), "seed": args.seed})
    manifest.train = train_cfg

    out_dir = manifest.out_dir
    os.makedirs(out_dir, exist_ok=True)
    env = UvlsEnv(case, manifest.env)

    def progress(point):
        if point.episode % 50 == 0:
            log.info("episode %d: R=%.1f alpha=%d eps=%.3f", point.episode,
                     point.episode_reward, point.success, point.epsilon)

    result = train(env, scenarios, expert, train_cfg, progress=progress)
    ckpt_path = os.path.join(out_dir, "checkpoint.npz")
    save_checkpoint(result.checkpoint, ckpt_path,
                    provenance=manifest.provenance())
    curve_path = os.path.join(out_dir, "learning_curve.csv")
    write_learning_curve_csv(result.curve, curve_path,
                             provenance=manifest.provenance())
    summary = {
        "manifest_hash": manifest.hash(),
        "seed": train_cfg.seed,
        "episodes": train_cfg.episodes,
        "expert_transitions": len(expert),
        "wall_time_s": result.wall_time,
        "final_epsilon": result.checkpoint.epsilon,
    }
    with open(os.path.join(out_dir, "run_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(f"trained {train_cfg.episodes} episodes in "
          f"{result.wall_time:.1f}s; checkpoint at {ckpt_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = _manifest_from_args(args)
    case = resolve_case(manifest.case)
    scenarios = load_scenarios(args.scenarios or manifest.scenarios)
    params = None
    if args.policy == "dqn":
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required for --policy dqn")
        params = load_checkpoint(args.checkpoint).params
    out_dir = args.out or manifest.out_dir
    os.makedirs(out_dir, exist_ok=True)
    traces_dir = None if args.no_traces else os.path.join(out_dir, "traces")
    env = UvlsEnv(case, manifest.env)
    report = evaluate_policy(args.policy, case, scenarios, params=params,
                             relay_config=manifest.relay, env=env,
                             out_dir=traces_dir,
                             provenance=manifest.provenance())
    save_report(report,
                os.path.join(out_dir, f"report_{args.policy}.json"),
                csv_path=os.path.join(out_dir, f"report_{args.policy}.csv"),
                provenance=manifest.provenance())
    s = report.summary()
    print(f"{args.policy}: Q1 = {s['q1_pct']:.2f}%  "
          f"mean Q2 = {s['mean_q2_pct']:.2f}%  ({s['tests']} tests)")
    return EXIT_OK


def cmd_export_fig(args) -> int:
    manifest = _manifest_from_args(args)
    render = args.render_svg
    if args.which == "learning_curve":
        export_learning_curve(args.input, args.out or "learning_curve_fig.csv",
                              window=args.window,
                              provenance=manifest.provenance(),
                              render_svg=render)
    else:
        export_trajectories(args.input, args.out or "trajectories_fig.csv",
                            provenance=manifest.provenance(),
                            render_svg=render)
    print(f"exported {args.which} to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshed",
        description="Emergency load-shedding testbed: simulator, relay "
                    "baseline and DQN agent")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenarios", help="write a random scenario pool")
    _add_common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--load-range", nargs=2, type=float,
                   default=list(DEFAULT_LOAD_RANGE))
    p.add_argument("--duration-range", nargs=2, type=float,
                   default=list(DEFAULT_DURATION_RANGE))
    p.add_argument("--apply-time", type=float, default=DEFAULT_APPLY_TIME)
    p.set_defaults(func=cmd_gen_scenarios)

    p = sub.add_parser("expert", help="generate relay expert transitions")
    _add_common(p)
    p.add_argument("--scenarios", default=None)
    p.add_argument("--capacity", type=int, default=2000)
    p.set_defaults(func=cmd_expert)

    p = sub.add_parser("train", help="train the DQN agent")
    _add_common(p)
    p.add_argument("--scenarios", default=None)
    p.add_argument("--expert", default=None, help="expert snapshot (npz)")
    p.add_argument("--episodes", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy over a scenario pool")
    _add_common(p)
    p.add_argument("--policy", choices=("dqn", "relay", "none"), required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--scenarios", default=None)
    p.add_argument("--no-traces", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-fig", help="plot-ready CSV (optionally SVG)")
    _add_common(p)
    p.add_argument("--which", choices=("learning_curve", "trajectories"),
                   required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--render-svg", default=None,
                   help="also render a simple SVG to this path")
    p.set_defaults(func=cmd_export_fig)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CaseValidationError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (PowerFlowDivergenceError, VoltageCollapseError,
            TrainingDivergedError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except GridshedError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
