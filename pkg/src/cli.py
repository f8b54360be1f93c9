"""Command-line entry point: train, eval, plan, replay, bench-inference, plot"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from src.config import AppConfig, describe_config, get_settings, load_config
from src.errors import ConfigError, WbcError

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    epilog = "config keys (JSON, dotted names):\n  " + "\n  ".join(describe_config())
    parser = _Parser(prog="wbc", description="Whole-body control of a planar mobile manipulator",
                     epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", type=Path, help="JSON config file; defaults for anything missing")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--workers", type=int, default=None, help="rollout workers")
    parser.add_argument("--total-steps", type=int, default=None, help="training environment steps")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: WBC_DATA_DIR)")
    parser.add_argument("--log-level", default=None, help="overrides WBC_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="run PPO training with ADR")
    p.add_argument("--resume", action="store_true", help="continue from the last checkpoint in --out")

    p = sub.add_parser("eval", help="evaluate a checkpoint or the planning baseline on task scenes")
    p.add_argument("method", help="checkpoint path or 'baseline'")
    p.add_argument("--task", default="all", help="task id 1-4 or 'all'")
    p.add_argument("--runs", type=int, default=None, help="runs per task (default eval.n_runs)")
    p.add_argument("--csv", type=Path, default=None, help="metrics CSV (default <out>/eval_<method>.csv)")
    p.add_argument("--traces", action="store_true", help="record JSONL traces per run")

    p = sub.add_parser("plan", help="plan one baseline trajectory and write it as JSON")
    p.add_argument("--task", type=int, default=2)

    p = sub.add_parser("replay", help="render a JSONL episode trace to images")
    p.add_argument("trace", type=Path)
    p.add_argument("--format", default="png", choices=["png", "svg", "html", "json"])

    p = sub.add_parser("bench-inference", help="time forward + argmax on synthetic observations")
    p.add_argument("--checkpoint", type=Path, default=None, help="policy file (default: fresh init)")
    p.add_argument("--iters", type=int, default=10000)

    p = sub.add_parser("plot", help="training curves from a training CSV")
    p.add_argument("training_csv", type=Path)
    p.add_argument("--format", default="png", choices=["png", "svg", "html", "json"])
    return parser


def _config(args) -> AppConfig:
    overrides = {}
    if args.seed is not None:
        overrides["train.seed"] = args.seed
    if args.workers is not None:
        overrides["train.n_workers"] = args.workers
    if args.total_steps is not None:
        overrides["train.total_steps"] = args.total_steps
    return load_config(args.config, overrides)


def cmd_train(args, cfg: AppConfig, out: Path) -> int:
    from src.services.training import Trainer

    (out / "config.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.model_dump_json(indent=2))
    summary = Trainer(cfg, out).run(resume=args.resume)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_eval(args, cfg: AppConfig, out: Path) -> int:
    from src.analysis.evaluation import TASK_IDS, load_task, run_eval
    from src.analysis.metrics import format_summary, summarize
    from src.rl.policy import load_policy_file

    if args.task == "all":
        task_ids = list(TASK_IDS)
    else:
        try:
            task_ids = [int(args.task)]
        except ValueError as e:
            raise ConfigError(f"task must be 1-4 or 'all', got {args.task!r}", key="task") from e
    tasks = [load_task(t) for t in task_ids]
    if args.method == "baseline":
        method, params, label = "baseline", None, "baseline"
    else:
        if not Path(args.method).exists():
            raise ConfigError(f"checkpoint not found: {args.method}", key="checkpoint")
        method, params, label = "agent", load_policy_file(args.method, cfg), "agent"
    seed = cfg.train.seed if args.seed is None else args.seed
    csv_path = args.csv or out / f"eval_{label}.csv"
    rows = []
    for task in tasks:
        rows += run_eval(method, task, args.runs or cfg.eval.n_runs, seed, cfg, params, csv_path,
                         out / "traces" if args.traces else None)
    summary = summarize(rows)
    summary.to_csv(csv_path.with_name(csv_path.stem + "_summary.csv"), index=False)
    print(format_summary(summary))
    return EXIT_OK


def cmd_plan(args, cfg: AppConfig, out: Path) -> int:
    from src.analysis.evaluation import IK_TOLERANCE, load_task, sample_task_instance
    from src.planning.ik import ik_goal_configs
    from src.planning.rrt import plan_rrt_connect
    from src.planning.trajectory import time_parameterize
    from src.sim.robot import acc_limit_vector, vel_limit_vector

    task = load_task(args.task)
    world = task.world_model()
    seed = cfg.train.seed if args.seed is None else args.seed
    rng = np.random.default_rng([seed, task.task_id, 0])
    start, goal = sample_task_instance(world, cfg, rng)
    goals = ik_goal_configs(world, goal, IK_TOLERANCE, cfg.baseline.goal_configs, rng, cfg.robot, cfg.baseline.ik_attempts)
    if not goals:
        raise WbcError(f"no IK solution for setpoint {goal.tolist()}")
    plan = plan_rrt_connect(world, start.config, goals, cfg.baseline, cfg.robot, rng)
    traj = time_parameterize(plan.path, vel_limit_vector(cfg.robot), acc_limit_vector(cfg.robot))
    path = out / f"plan_task{task.task_id}_seed{seed}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"task": task.task_id, "goal": goal.tolist(), "plan": plan.to_json(),
                                "trajectory": traj.to_json()}, indent=2))
    print(f"planned in {plan.planning_time:.2f} s, {len(plan.path)} waypoints, {traj.duration:.1f} s trajectory -> {path}")
    return EXIT_OK


def cmd_replay(args, cfg: AppConfig, out: Path) -> int:
    from src.analysis.plots import replay

    frames = replay(args.trace, out / args.trace.stem, args.format, cfg)
    print(f"{len(frames)} frames -> {out / args.trace.stem}")
    return EXIT_OK


def bench_inference(cfg: AppConfig, checkpoint: Optional[Path], n_iters: int, seed: int = 0) -> dict:
    import torch

    from src.rl.policy import argmax_action, forward, init_params, load_policy_file

    torch.set_num_threads(1)
    params = load_policy_file(checkpoint, cfg) if checkpoint else init_params(cfg, seed)
    rng = np.random.default_rng(seed)
    dim = 2 * cfg.lidar_front.n_beams + cfg.network.proprio_dim
    obs = rng.uniform(-1.0, 1.0, size=(min(n_iters, 1000), dim)).astype(np.float32)
    for i in range(min(100, n_iters)):
        argmax_action(forward(params, obs[i % len(obs)])[0])
    latencies = np.empty(n_iters)
    for i in range(n_iters):
        t = time.perf_counter()
        argmax_action(forward(params, obs[i % len(obs)])[0])
        latencies[i] = time.perf_counter() - t
    return {"iters": n_iters, "hz": float(n_iters / latencies.sum()),
            "mean_ms": float(latencies.mean() * 1e3), "p99_ms": float(np.percentile(latencies, 99) * 1e3)}


def cmd_bench(args, cfg: AppConfig, out: Path) -> int:
    seed = cfg.train.seed if args.seed is None else args.seed
    result = bench_inference(cfg, args.checkpoint, args.iters, seed)
    print(f"{result['hz']:.1f} Hz (mean {result['mean_ms']:.3f} ms, p99 {result['p99_ms']:.3f} ms, {result['iters']} iters)")
    return EXIT_OK


def cmd_plot(args, cfg: AppConfig, out: Path) -> int:
    from src.analysis.plots import save_figure, training_figure

    log = pd.read_csv(args.training_csv)
    if log.empty:
        raise WbcError(f"{args.training_csv} has no rows")
    path = save_figure(training_figure(log), out / f"training.{args.format}")
    print(f"figure -> {path}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "plan": cmd_plan, "replay": cmd_replay,
            "bench-inference": cmd_bench, "plot": cmd_plot}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    logging.basicConfig(level=(args.log_level or settings.log_level).upper(),
                        format="%(asctime)s - %(levelname)s - %(message)s", force=True)
    out = args.out or settings.data_dir
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except WbcError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.warning("interrupted")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"unexpected {type(e).__name__}: {e}", exc_info=True)
        return EXIT_FAILURE
