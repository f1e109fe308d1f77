"""Command-line front end: run, sweep, select, validate.

Exit codes: 0 on success, 2 on config errors, 3 on runtime errors.
"""
from __future__ import annotations

import argparse
import functools
import json
import os
import sys

import numpy as np

from . import __version__
from .agents import AgentConfig
from .confidence import BoundParams
from .config import (
    ConfigError,
    EnvSpec,
    ExperimentConfig,
    parse_config,
    serialize_config,
)
from .environments import (
    BERNOULLI_SIGMA,
    BanditModel,
    gen_bernoulli_model,
    gen_linear_model,
    load_dataset_model,
    read_dataset_file,
)
from .harness import (
    checkpoint_sweep,
    downsample_grid,
    log_spaced_checkpoints,
    replicate,
    resolve_workers,
)

CURVES_COLUMNS = ("step", "agent", "model", "seed", "regret", "budget")
SWEEP_COLUMNS = ("t", "mean_regret_delta", "stderr")

# Above this many total agent-steps, warn that the run will take a while.
LONG_RUN_STEPS = 2 * 10**8

# Seed-stream tags so model generation, user draws, and runs never collide.
_SEED_MODEL = 2
_SEED_USERS = 3


def _fmt(value) -> str:
    """Serialize one scalar: floats at 17 significant digits (round-trippable)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    raise TypeError(f"cannot format {type(value).__name__}")


def dumps_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with %.17g floats and insertion-ordered keys."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{inner}{json.dumps(str(k))}: {dumps_json(v, indent + 2)}" for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in seq):
            return "[" + ", ".join(_fmt(float(v) if isinstance(v, (float, np.floating)) else v) for v in seq) + "]"
        items = (f"{inner}{dumps_json(v, indent + 2)}" for v in seq)
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (np.floating,)):
        return _fmt(float(obj))
    return _fmt(obj)


def build_model(env: EnvSpec, baseline_rank: int, root_seed: int, model_idx: int) -> BanditModel:
    """Deterministic model for one model index; picklable via functools.partial."""
    if env.kind == "bernoulli":
        return gen_bernoulli_model(
            (root_seed, _SEED_MODEL, model_idx),
            env.k, env.mean_low, env.mean_high, baseline_rank,
        )
    if env.kind == "linear":
        return gen_linear_model(
            (root_seed, _SEED_MODEL, model_idx), env.k, env.dim, env.noise_sd, baseline_rank
        )
    items, users = read_dataset_file(env.path)
    # Users drawn without replacement across model indices.
    perm = np.random.default_rng((root_seed, _SEED_USERS)).permutation(users.shape[0])
    return load_dataset_model(env.path, int(perm[model_idx]), env.noise_sd, baseline_rank)


def _env_bound_params(cfg: ExperimentConfig) -> BoundParams:
    env = cfg.env
    if env.kind == "bernoulli":
        sigma, b_norm, d_norm, dim = BERNOULLI_SIGMA, 1.0, 1.0, env.k
    elif env.kind == "linear":
        sigma, b_norm, d_norm, dim = env.noise_sd, 1.0, 1.0, env.dim
    else:
        items, users = read_dataset_file(env.path)
        if cfg.n_models > users.shape[0]:
            raise ConfigError(
                f"n_models: dataset has only {users.shape[0]} users, need {cfg.n_models}"
            )
        if cfg.baseline_rank > items.shape[0]:
            raise ConfigError(
                f"baseline_rank: dataset has only {items.shape[0]} items, got {cfg.baseline_rank}"
            )
        sigma = env.noise_sd
        b_norm = float(np.max(np.linalg.norm(users, axis=1)))
        d_norm = float(np.max(np.linalg.norm(items, axis=1)))
        dim = items.shape[1]
    return BoundParams(
        sigma=sigma, b_norm=b_norm, d_norm=d_norm, lam=cfg.lam, delta=cfg.delta, dim=dim
    )


def agent_configs_from(cfg: ExperimentConfig) -> dict:
    """Per-label AgentConfig map, applying per-agent overrides."""
    bp = _env_bound_params(cfg)
    configs = {}
    for spec in cfg.agents:
        checkpoints = spec.checkpoints
        if spec.variant == "clucb2t" and checkpoints is None:
            checkpoints = cfg.checkpoints
        configs[spec.label] = AgentConfig(
            variant=spec.variant,
            bound_params=bp,
            alpha=spec.alpha if spec.alpha is not None else cfg.alpha,
            delta=spec.delta if spec.delta is not None else cfg.delta,
            checkpoints=checkpoints,
        )
    return configs


class _ArtifactWriter:
    """Writes output files, removing everything written if any step fails."""

    def __init__(self, directory: str):
        self.directory = directory
        self.written = []

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    def __enter__(self):
        os.makedirs(self.directory, exist_ok=True)
        return self

    def write_text(self, name: str, text: str) -> None:
        target = self.path(name)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.written.append(target)

    def open_stream(self, name: str):
        target = self.path(name)
        self.written.append(target)
        return open(target, "w", encoding="utf-8", newline="")

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            for target in self.written:
                try:
                    os.unlink(target)
                except OSError:
                    pass
        return False


def _manifest(cfg: ExperimentConfig, artifacts: dict) -> dict:
    return {
        "schema_version": 1,
        "tool": "conbandit",
        "code_version": __version__,
        "root_seed": cfg.root_seed,
        "config": serialize_config(cfg),
        "artifacts": artifacts,
    }


def _warn_if_long(cfg: ExperimentConfig, n_agents: int) -> None:
    total = cfg.n_models * cfg.n_seeds * cfg.horizon * n_agents
    if total > LONG_RUN_STEPS:
        print(
            f"note: {total:.2e} total agent-steps; this will take a long time",
            file=sys.stderr,
        )


def cmd_run(cfg: ExperimentConfig, out_dir: str, workers: int) -> None:
    configs = agent_configs_from(cfg)
    if cfg.sweep is not None:
        raise ConfigError("checkpoints: this config holds a sweep spec; use the sweep command")
    _warn_if_long(cfg, len(configs))
    grid = downsample_grid(cfg.horizon, cfg.output.dense_until, cfg.output.curve_points)
    model_gen = functools.partial(build_model, cfg.env, cfg.baseline_rank, cfg.root_seed)
    summary = replicate(
        model_gen, cfg.n_models, cfg.n_seeds, configs, cfg.horizon,
        root_seed=cfg.root_seed, workers=workers, grid=grid,
    )
    with _ArtifactWriter(out_dir) as out:
        with out.open_stream("curves.csv") as fh:
            fh.write(",".join(CURVES_COLUMNS) + "\n")
            for label in summary.labels:
                regret = summary.regret_curves[label]
                budget = summary.budget_curves[label]
                for m in range(cfg.n_models):
                    for s in range(cfg.n_seeds):
                        reg, bud = regret[m, s], budget[m, s]
                        for j, step in enumerate(grid):
                            fh.write(
                                f"{step},{label},{m},{s},{reg[j]:.17g},{bud[j]:.17g}\n"
                            )
        summary_doc = {
            "schema_version": 1,
            "horizon": cfg.horizon,
            "n_models": cfg.n_models,
            "n_seeds": cfg.n_seeds,
            "agents": list(summary.labels),
            "final_regret": {
                lb: summary.final_regret[lb].tolist() for lb in summary.labels
            },
            "event_counts": {
                lb: summary.event_counts[lb].tolist() for lb in summary.labels
            },
            "baseline_pulls": {
                lb: summary.baseline_pulls[lb].tolist() for lb in summary.labels
            },
            "violation_steps": {
                lb: [
                    [steps.tolist() for steps in per_model]
                    for per_model in summary.violation_steps[lb]
                ]
                for lb in summary.labels
            },
            "checkpoint_violation_steps": {
                lb: [
                    [None if steps is None else steps.tolist() for steps in per_model]
                    for per_model in summary.checkpoint_violation_steps[lb]
                ]
                for lb in summary.labels
            },
        }
        out.write_text("summary.json", dumps_json(summary_doc) + "\n")
        manifest = _manifest(
            cfg,
            {
                "curves.csv": {"version": 1, "columns": list(CURVES_COLUMNS)},
                "summary.json": {"version": 1},
            },
        )
        out.write_text("manifest.json", dumps_json(manifest) + "\n")
    print(f"wrote {out_dir}/curves.csv, summary.json, manifest.json")


def cmd_sweep(cfg: ExperimentConfig, out_dir: str, workers: int) -> None:
    if cfg.sweep is None:
        raise ConfigError("checkpoints: sweep command needs a sweep spec (count/min/max)")
    t_values = log_spaced_checkpoints(cfg.sweep.count, cfg.sweep.t_min, cfg.sweep.t_max)
    _warn_if_long(cfg, len(t_values) + 1)
    bp = _env_bound_params(cfg)
    base = AgentConfig(
        variant="clucb2t", bound_params=bp, alpha=cfg.alpha, delta=cfg.delta,
        checkpoints=t_values[0],
    )
    model_gen = functools.partial(build_model, cfg.env, cfg.baseline_rank, cfg.root_seed)
    grid = downsample_grid(cfg.horizon, cfg.output.dense_until, cfg.output.curve_points)
    points = checkpoint_sweep(
        model_gen, t_values, base, cfg.horizon,
        n_models=cfg.n_models, n_seeds=cfg.n_seeds,
        root_seed=cfg.root_seed, workers=workers, grid=grid,
    )
    with _ArtifactWriter(out_dir) as out:
        lines = [",".join(SWEEP_COLUMNS)]
        for p in points:
            lines.append(f"{p.t},{p.mean_delta:.17g},{p.stderr:.17g}")
        out.write_text("sweep.csv", "\n".join(lines) + "\n")
        manifest = _manifest(
            cfg, {"sweep.csv": {"version": 1, "columns": list(SWEEP_COLUMNS)}}
        )
        out.write_text("manifest.json", dumps_json(manifest) + "\n")
    print(f"wrote {out_dir}/sweep.csv, manifest.json")


def cmd_select(artifacts_dir: str, agent_a: str, agent_b: str, mode: str) -> None:
    summary_path = os.path.join(artifacts_dir, "summary.json")
    with open(summary_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    finals = doc["final_regret"]
    for label in (agent_a, agent_b):
        if label not in finals:
            raise KeyError(f"agent {label!r} not in {summary_path}; have {sorted(finals)}")
    ra = np.asarray(finals[agent_a]).mean(axis=1)
    rb = np.asarray(finals[agent_b]).mean(axis=1)
    print(f"model  R[{agent_a}]  R[{agent_b}]  improvement")
    best_idx, best_val = None, None
    for m in range(len(ra)):
        if rb[m] == 0.0:
            print(f"{m:5d}  {ra[m]:.6g}  {rb[m]:.6g}  (excluded: zero reference regret)")
            continue
        ratio = 1.0 - ra[m] / rb[m]
        print(f"{m:5d}  {ra[m]:.6g}  {rb[m]:.6g}  {ratio:.6g}")
        better = best_val is None or (ratio < best_val if mode == "worst" else ratio > best_val)
        if better:
            best_idx, best_val = m, ratio
    if best_idx is None:
        raise ValueError(f"no model with nonzero {agent_b} regret")
    print(f"selected model: {best_idx}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="conbandit",
        description="Conservative bandit experiment runner",
    )
    parser.add_argument("--version", action="version", version=f"conbandit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config and write artifacts")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (default: config output.directory)")
    p_run.add_argument("--workers", type=int, help="parallel workers (default: $CONBANDIT_WORKERS or all cores)")

    p_sweep = sub.add_parser("sweep", help="sweep checkpoint periods against plain optimism")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--workers", type=int)

    p_sel = sub.add_parser("select", help="pick the worst/best model for an agent pair")
    p_sel.add_argument("artifacts_dir")
    p_sel.add_argument("--a", required=True, help="improved agent label")
    p_sel.add_argument("--b", required=True, help="reference agent label")
    p_sel.add_argument("--mode", choices=("worst", "best"), default="worst")

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            parse_config(args.config)
            print("config OK")
        elif args.command in ("run", "sweep"):
            cfg = parse_config(args.config)
            out_dir = args.out or cfg.output.directory
            workers = resolve_workers(args.workers)
            if args.command == "run":
                cmd_run(cfg, out_dir, workers)
            else:
                cmd_sweep(cfg, out_dir, workers)
        else:
            cmd_select(args.artifacts_dir, args.a, args.b, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map any failure to exit code 3
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
