"""Command-line entry points: train, evaluate, sweep.

Every command writes plain CSV (numbers at 17 significant digits) plus a
``manifest.json`` recording the config, seeds, version, timings and outputs.
CSVs carry nothing time-dependent, so reruns with the same manifest are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, SimConfig, desk_config, load_config, validate_config
from .mural import POLICIES, EpisodeMetrics, evaluate_policy
from .rl.nets import PolicyNets
from .rl.spaces import build_action_space, obs_dim
from .rl.training import EpisodeLog, Trainer

TRAIN_COLUMNS = ("episode", "reward", "loss_task_mean", "loss_shared")
EVAL_COLUMNS = ("episode", "avg_efficiency", "avg_bits", "avg_energy")
SWEEP_COLUMNS = ("axis", "value", "policy", "metric", "metric_value")
SWEEP_METRICS = ("avg_efficiency", "avg_bits", "avg_energy")
EXTRA_METRICS = ("avg_device_harvest",)
SWEEP_AXES = {"devices": "num_devices", "aps": "num_aps", "uavs": "num_uavs"}
PLATEAU_WINDOW = 50
PLATEAU_TOL = 0.05


class CliError(Exception):
    pass


# formatting ---------------------------------------------------------------

def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def episodes_to_plateau(rewards: Sequence[float], window: int = PLATEAU_WINDOW,
                        tol: float = PLATEAU_TOL) -> int | None:
    """First episode whose trailing ``window`` mean is within ``tol`` of the final one."""
    r = np.asarray(rewards, dtype=float)
    if len(r) < window:
        return None
    trailing = np.convolve(r, np.ones(window) / window, mode="valid")
    final = trailing[-1]
    close = np.abs(trailing - final) <= tol * abs(final)
    return int(np.argmax(close)) + window - 1


# config / manifest ----------------------------------------------------------

def resolve_config(path: str | None, preset: str) -> SimConfig:
    if path is None:
        return desk_config() if preset == "desk" else validate_config(SimConfig())
    try:
        return load_config(path)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc


def config_digest(cfg: SimConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


def out_dir(path: str) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc.strerror or exc}") from exc
    return p


def write_manifest(out: Path, command: str, cfg: SimConfig, seeds: list[int], started: float,
                   outputs: list[str], extra: dict | None = None) -> None:
    finished = time.time()
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "version": f"wpmec-{__version__}",
        "config": cfg.to_dict(),
        "config_sha256": config_digest(cfg),
        "seeds": seeds,
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.fromtimestamp(finished, timezone.utc).isoformat(),
        "wall_clock_seconds": finished - started,
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def seed_list(seed: int, parallel: int) -> list[int]:
    if parallel < 1:
        raise CliError(f"--parallel-seeds must be ≥ 1 (got {parallel})")
    return [seed + i for i in range(parallel)]


def map_seeds(fn: Callable, jobs: list[tuple], parallel: int) -> list:
    """Run ``fn(*job)`` for each job, in worker processes when ``parallel > 1``; results keep job order."""
    if parallel <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(parallel, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# train ----------------------------------------------------------------------

def _train_one(cfg: SimConfig, seed: int, episodes: int | None, ckpt: str) -> tuple[list[EpisodeLog], float]:
    t0 = time.perf_counter()
    tr = Trainer(cfg, seed=seed)
    tr.train(episodes)
    tr.save(ckpt)
    return tr.logs, time.perf_counter() - t0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    cfg = resolve_config(args.config, args.preset)
    if args.episodes is not None:
        cfg = cfg.replace(episodes=args.episodes)
    out = out_dir(args.out)
    seeds = seed_list(args.seed, args.parallel_seeds)
    multi = len(seeds) > 1
    ckpts = [out / (f"checkpoint_seed{s}.npz" if multi else "checkpoint.npz") for s in seeds]
    results = map_seeds(_train_one, [(cfg, s, None, str(c)) for s, c in zip(seeds, ckpts)], args.parallel_seeds)

    rows = []
    for s, (logs, _) in zip(seeds, results):
        for log in logs:
            row = [log.episode, log.reward, log.loss_task_mean, log.loss_shared]
            rows.append([s, *row] if multi else row)
    header = ("seed", *TRAIN_COLUMNS) if multi else TRAIN_COLUMNS
    write_text(out / "rewards.csv", csv_text(header, rows))
    runs = [{"seed": s, "checkpoint": c.name, "train_seconds": secs,
             "episodes_to_plateau": episodes_to_plateau([log.reward for log in logs])}
            for s, c, (logs, secs) in zip(seeds, ckpts, results)]
    write_manifest(out, "train", cfg, seeds, started, ["rewards.csv", *[c.name for c in ckpts]], {"runs": runs})
    print(f"wrote {out / 'rewards.csv'} ({len(rows)} rows)")
    return 0


# evaluate -------------------------------------------------------------------

def load_checkpoint(path: str | None, cfg: SimConfig | None) -> tuple[SimConfig, PolicyNets | None]:
    """Networks from a checkpoint, checked against ``cfg`` (the checkpoint's own config if None)."""
    if path is None:
        if cfg is None:
            raise CliError("need --config or --checkpoint")
        return cfg, None
    try:
        tr = Trainer.load(path)
    except FileNotFoundError as exc:
        raise CliError(f"checkpoint not found: {path}") from exc
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load checkpoint {path}: {exc}") from exc
    if cfg is None:
        return tr.cfg, tr.nets
    check_compatible(cfg, tr.nets)
    return cfg, tr.nets


def check_compatible(cfg: SimConfig, nets: PolicyNets) -> None:
    n_actions = len(build_action_space(cfg))
    if n_actions != nets.n_actions:
        raise CliError(f"config has {n_actions} actions but the checkpoint has {nets.n_actions}")
    if cfg.num_uavs != nets.num_uavs:
        raise CliError(f"config has {cfg.num_uavs} UAVs but the checkpoint has {nets.num_uavs}")
    if obs_dim(cfg) != nets.obs_dim:
        raise CliError(f"config observation length {obs_dim(cfg)} does not match the checkpoint "
                       f"({nets.obs_dim}); num_devices or joint_obs differs")


def _eval_rows(metrics: list[EpisodeMetrics]) -> list[list]:
    return [[i, m.mean_efficiency, m.avg_bits, m.avg_energy] for i, m in enumerate(metrics)]


def _evaluate_one(policy: str, cfg: SimConfig, nets: PolicyNets | None, episodes: int, seed: int) -> list[EpisodeMetrics]:
    return evaluate_policy(policy, cfg, nets, episodes=episodes, seed=seed)


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.time()
    policy = args.policy.lower()
    if policy not in POLICIES:
        raise CliError(f"unknown policy {args.policy!r}; choose from {', '.join(POLICIES)}")
    cfg = resolve_config(args.config, args.preset) if (args.config or args.checkpoint is None) else None
    cfg, nets = load_checkpoint(args.checkpoint, cfg)
    if policy != "greedy" and nets is None:
        raise CliError(f"policy {policy!r} needs --checkpoint")
    episodes = args.episodes if args.episodes is not None else 1
    if episodes < 1:
        raise CliError(f"--episodes must be ≥ 1 (got {episodes})")
    out = out_dir(args.out)
    seeds = seed_list(args.seed, args.parallel_seeds)
    results = map_seeds(_evaluate_one, [(policy, cfg, nets, episodes, s) for s in seeds], args.parallel_seeds)
    multi = len(seeds) > 1
    rows = []
    for s, ms in zip(seeds, results):
        rows.extend([s, *r] if multi else r for r in _eval_rows(ms))
    header = ("seed", *EVAL_COLUMNS) if multi else EVAL_COLUMNS
    write_text(out / "metrics.csv", csv_text(header, rows))
    write_manifest(out, "evaluate", cfg, seeds, started, ["metrics.csv"],
                   {"policy": policy, "checkpoint": args.checkpoint, "episodes": episodes})
    print(f"wrote {out / 'metrics.csv'} ({len(rows)} rows)")
    return 0


# sweep ----------------------------------------------------------------------

def parse_values(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise CliError(f"--values must be a comma-separated list of integers (got {text!r})") from exc
    if not values:
        raise CliError("--values is empty")
    return values


def sweep_point(cfg: SimConfig, policies: list[str], episodes: int, seed: int,
                nets: PolicyNets | None) -> dict[str, dict[str, float]]:
    """Mean metrics of each policy on one configuration; trains networks first if needed."""
    if nets is None and any(p != "greedy" for p in policies):
        tr = Trainer(cfg, seed=seed)
        tr.train()
        nets = tr.nets
    out = {}
    for p in policies:
        ms = evaluate_policy(p, cfg, nets, episodes=episodes, seed=seed)
        out[p] = {
            "avg_efficiency": float(np.mean([m.mean_efficiency for m in ms])),
            "avg_bits": float(np.mean([m.avg_bits for m in ms])),
            "avg_energy": float(np.mean([m.avg_energy for m in ms])),
            "avg_device_harvest": float(np.mean([m.mean_device_harvest for m in ms])),
        }
    return out


def _reusable(cfg: SimConfig, nets: PolicyNets | None) -> PolicyNets | None:
    if nets is None:
        return None
    try:
        check_compatible(cfg, nets)
    except CliError:
        return None
    return nets


def cmd_sweep(args: argparse.Namespace) -> int:
    started = time.time()
    if args.axis not in SWEEP_AXES:
        raise CliError(f"unknown axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = parse_values(args.values)
    policies = [p.strip().lower() for p in args.policy.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICIES]
    if bad or not policies:
        raise CliError(f"unknown policy {', '.join(bad) or '(none)'}; choose from {', '.join(POLICIES)}")
    metrics = list(SWEEP_METRICS) + (list(EXTRA_METRICS) if args.harvest else [])
    base = resolve_config(args.config, args.preset)
    _, nets = load_checkpoint(args.checkpoint, base) if args.checkpoint else (base, None)
    episodes = args.episodes if args.episodes is not None else 1
    out = out_dir(args.out)
    seeds = seed_list(args.seed, args.parallel_seeds)
    multi = len(seeds) > 1

    jobs = []
    for v in values:
        try:
            cfg = base.replace(**{SWEEP_AXES[args.axis]: v})
        except ConfigError as exc:
            raise CliError(f"{args.axis}={v}: {exc}") from exc
        for s in seeds:
            jobs.append((cfg, policies, episodes, s, _reusable(cfg, nets)))
    results = map_seeds(sweep_point, jobs, args.parallel_seeds)

    rows = []
    it = iter(results)
    for v in values:
        for s in seeds:
            res = next(it)
            for p in policies:
                for m in metrics:
                    row = [args.axis, v, p, m, res[p][m]]
                    rows.append([s, *row] if multi else row)
    header = ("seed", *SWEEP_COLUMNS) if multi else SWEEP_COLUMNS
    write_text(out / "sweep.csv", csv_text(header, rows))
    write_manifest(out, "sweep", base, seeds, started, ["sweep.csv"],
                   {"axis": args.axis, "values": values, "policies": policies, "episodes": episodes,
                    "checkpoint": args.checkpoint})
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


# entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wpmec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wpmec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file (unknown keys are rejected)")
        p.add_argument("--preset", choices=("default", "desk"), default="default",
                       help="built-in config used when --config is absent")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--episodes", type=int)
        p.add_argument("--parallel-seeds", type=int, default=1,
                       help="run seeds seed..seed+N-1 in separate processes")

    p = sub.add_parser("train", help="train the learning agent; writes rewards.csv and a checkpoint")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a policy; writes metrics.csv")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint from `train` (needed for mural, oo, nsd)")
    p.add_argument("--policy", default="mural", help=f"one of {', '.join(POLICIES)}")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="sweep one parameter; writes long-format sweep.csv")
    common(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.add_argument("--policy", default=",".join(POLICIES), help="comma-separated policies")
    p.add_argument("--checkpoint", help="reuse these networks wherever shapes allow")
    p.add_argument("--harvest", action="store_true", help="also report mean per-device harvested energy")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.episodes is not None and args.episodes < 1:
        print(f"wpmec: error: --episodes must be ≥ 1 (got {args.episodes})", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CliError, ConfigError) as exc:
        print(f"wpmec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
