"""Experiment execution: seeded runs, replication, metrics, and sweeps.

Parallelism is at the run level: one (model, seed, agent) run per task, with
each task's random stream derived from (root seed, model index, seed index)
so results never depend on scheduling order or worker count.
"""
from __future__ import annotations

import os
import warnings
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .agents import Agent, AgentConfig, Event
from .environments import BanditModel, baseline_info, pull

DEFAULT_CURVE_POINTS = 500
DEFAULT_DENSE_UNTIL = 100


@dataclass(frozen=True)
class RunRecord:
    """One step of a trace; ``budget`` is cumulative through this step."""

    step: int
    arm: int
    reward: float
    regret_increment: float
    budget: float
    event: Event


class RunTrace(Sequence):
    """Full per-step trace stored as column arrays, viewable as RunRecords."""

    def __init__(self, arms, rewards, regret_increments, budget, events, realized_budget):
        self.arms = arms
        self.rewards = rewards
        self.regret_increments = regret_increments
        self.budget = budget
        self.events = events
        self.realized_budget = realized_budget
        self.cum_regret = np.cumsum(regret_increments)

    def __len__(self) -> int:
        return len(self.arms)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return RunRecord(
            step=i + 1,
            arm=int(self.arms[i]),
            reward=float(self.rewards[i]),
            regret_increment=float(self.regret_increments[i]),
            budget=float(self.budget[i]),
            event=Event(int(self.events[i])),
        )


def run_one(model: BanditModel, agent_config: AgentConfig, horizon: int, seed) -> RunTrace:
    """One deterministic run; ``seed`` feeds the environment's reward stream."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    rng = np.random.default_rng(seed)
    base = baseline_info(model)
    agent = Agent(agent_config, base, model.dim, true_means=model.means)
    features = model.features
    arms = np.empty(horizon, dtype=np.int32)
    rewards = np.empty(horizon)
    events = np.empty(horizon, dtype=np.int8)
    cell = [0.0]

    def observe(arm: int) -> float:
        cell[0] = pull(model, arm, rng)
        return cell[0]

    for i in range(horizon):
        decision = agent.step(features, observe)
        arms[i] = decision.arm
        rewards[i] = cell[0]
        events[i] = int(decision.event)

    played_means = model.means[arms]
    floor = (1.0 - agent_config.alpha) * base.mu_b
    return RunTrace(
        arms=arms,
        rewards=rewards,
        regret_increments=float(model.means.max()) - played_means,
        budget=np.cumsum(played_means - floor),
        events=events,
        realized_budget=np.cumsum(rewards - floor),
    )


def downsample_grid(
    horizon: int, dense_until: int = DEFAULT_DENSE_UNTIL, points: int = DEFAULT_CURVE_POINTS
) -> np.ndarray:
    """Ascending step grid: every step early on, then geometric spacing.

    Always contains 1 and ``horizon``; at most ~``points`` entries.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if dense_until < 1 or points <= dense_until:
        raise ValueError("need 1 <= dense_until < points")
    if horizon <= points:
        return np.arange(1, horizon + 1)
    dense = np.arange(1, dense_until + 1)
    tail = np.round(np.geomspace(dense_until, horizon, points - dense_until)).astype(np.int64)
    return np.unique(np.concatenate([dense, tail]))


def checkpoint_steps(checkpoints, horizon: int):
    """Concrete checkpoint steps within the horizon, or None if unconstrained."""
    if checkpoints is None:
        return None
    if isinstance(checkpoints, int):
        return np.arange(checkpoints, horizon + 1, checkpoints, dtype=np.int64)
    return np.array([c for c in checkpoints if c <= horizon], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class _TaskResult:
    label: str
    model_idx: int
    seed_idx: int
    regret_curve: np.ndarray
    budget_curve: np.ndarray
    final_regret: float
    event_counts: np.ndarray
    baseline_pulls: int
    violation_steps: np.ndarray
    checkpoint_violation_steps: object  # ndarray or None


def _run_task(args) -> _TaskResult:
    model_gen, m, s, label, cfg, horizon, root_seed, grid = args
    model = model_gen(m)
    # Stream tag 1 = run noise; model generators use their own tags.
    trace = run_one(model, cfg, horizon, (root_seed, 1, m, s))
    idx = grid - 1
    cp = checkpoint_steps(cfg.checkpoints, horizon)
    return _TaskResult(
        label=label,
        model_idx=m,
        seed_idx=s,
        regret_curve=trace.cum_regret[idx],
        budget_curve=trace.budget[idx],
        final_regret=float(trace.cum_regret[-1]),
        event_counts=np.bincount(trace.events, minlength=4)[1:4],
        baseline_pulls=int(np.sum(trace.events == int(Event.E3_BASELINE))),
        violation_steps=np.flatnonzero(trace.budget < 0).astype(np.int64) + 1,
        checkpoint_violation_steps=None if cp is None else cp[trace.budget[cp - 1] < 0],
    )


@dataclass(eq=False)
class ExperimentSummary:
    """Aggregated replication results, indexed by agent label."""

    horizon: int
    grid: np.ndarray
    labels: tuple
    n_models: int
    n_seeds: int
    regret_curves: dict      # label -> (n_models, n_seeds, len(grid))
    budget_curves: dict      # label -> (n_models, n_seeds, len(grid))
    final_regret: dict       # label -> (n_models, n_seeds)
    event_counts: dict       # label -> (n_models, n_seeds, 3), E1/E2/E3
    baseline_pulls: dict     # label -> (n_models, n_seeds)
    violation_steps: dict    # label -> [model][seed] -> ndarray of steps
    checkpoint_violation_steps: dict  # label -> [model][seed] -> ndarray, or None

    def mean_curve(self, label: str) -> np.ndarray:
        """Cumulative-regret curve averaged over all models and seeds."""
        return self.regret_curves[label].mean(axis=(0, 1))

    def model_mean_curves(self, label: str) -> np.ndarray:
        """Per-model cumulative-regret curves averaged over seeds."""
        return self.regret_curves[label].mean(axis=1)

    def mean_final_regret(self, label: str) -> np.ndarray:
        """Per-model final regret averaged over seeds."""
        return self.final_regret[label].mean(axis=1)


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get("CONBANDIT_WORKERS")
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def replicate(
    model_gen,
    n_models: int,
    n_seeds: int,
    agent_configs: dict,
    horizon: int,
    *,
    root_seed: int = 0,
    workers=None,
    grid=None,
) -> ExperimentSummary:
    """Run every (model, seed, agent) combination and aggregate.

    ``model_gen`` maps a model index to a BanditModel and must be picklable
    (a functools.partial of a module-level function works) when workers > 1.
    """
    if n_models < 1 or n_seeds < 1:
        raise ValueError("n_models and n_seeds must be >= 1")
    if not agent_configs:
        raise ValueError("need at least one agent config")
    workers = resolve_workers(workers)
    if grid is None:
        grid = downsample_grid(horizon)
    labels = tuple(agent_configs)
    tasks = [
        (model_gen, m, s, label, agent_configs[label], horizon, root_seed, grid)
        for label in labels
        for m in range(n_models)
        for s in range(n_seeds)
    ]
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
    else:
        results = [_run_task(t) for t in tasks]

    p = len(grid)
    summary = ExperimentSummary(
        horizon=horizon,
        grid=grid,
        labels=labels,
        n_models=n_models,
        n_seeds=n_seeds,
        regret_curves={lb: np.empty((n_models, n_seeds, p)) for lb in labels},
        budget_curves={lb: np.empty((n_models, n_seeds, p)) for lb in labels},
        final_regret={lb: np.empty((n_models, n_seeds)) for lb in labels},
        event_counts={lb: np.empty((n_models, n_seeds, 3), dtype=np.int64) for lb in labels},
        baseline_pulls={lb: np.empty((n_models, n_seeds), dtype=np.int64) for lb in labels},
        violation_steps={lb: [[None] * n_seeds for _ in range(n_models)] for lb in labels},
        checkpoint_violation_steps={
            lb: [[None] * n_seeds for _ in range(n_models)] for lb in labels
        },
    )
    for r in results:
        lb, m, s = r.label, r.model_idx, r.seed_idx
        summary.regret_curves[lb][m, s] = r.regret_curve
        summary.budget_curves[lb][m, s] = r.budget_curve
        summary.final_regret[lb][m, s] = r.final_regret
        summary.event_counts[lb][m, s] = r.event_counts
        summary.baseline_pulls[lb][m, s] = r.baseline_pulls
        summary.violation_steps[lb][m][s] = r.violation_steps
        summary.checkpoint_violation_steps[lb][m][s] = r.checkpoint_violation_steps
    return summary


def _require_agent(summary: ExperimentSummary, label: str) -> None:
    if label not in summary.final_regret:
        raise KeyError(f"agent {label!r} not in summary; have {list(summary.labels)}")


def improvement_ratios(
    summary: ExperimentSummary, agent_a: str, agent_b: str
) -> tuple[np.ndarray, np.ndarray]:
    """Per-model relative improvement 1 - R_a/R_b, and the valid-model mask.

    Models where the reference agent_b has exactly zero regret are excluded
    (ratio undefined) with a warning; their entries are NaN.
    """
    _require_agent(summary, agent_a)
    _require_agent(summary, agent_b)
    ra = summary.mean_final_regret(agent_a)
    rb = summary.mean_final_regret(agent_b)
    valid = rb != 0.0
    if not valid.all():
        warnings.warn(
            f"excluding models with zero {agent_b} regret: {np.flatnonzero(~valid).tolist()}",
            stacklevel=2,
        )
    ratios = np.full(ra.shape, np.nan)
    ratios[valid] = 1.0 - ra[valid] / rb[valid]
    return ratios, valid


def select_model(summary: ExperimentSummary, agent_a: str, agent_b: str, mode: str) -> int:
    """Model index with extreme relative improvement of agent_a over agent_b.

    ``worst`` minimizes 1 - R_a/R_b, ``best`` maximizes it; ties go to the
    lowest model index.
    """
    if mode not in ("worst", "best"):
        raise ValueError(f"mode must be 'worst' or 'best', got {mode!r}")
    ratios, valid = improvement_ratios(summary, agent_a, agent_b)
    candidates = np.flatnonzero(valid)
    if candidates.size == 0:
        raise ValueError(f"no model with nonzero {agent_b} regret")
    vals = ratios[candidates]
    pick = np.argmin(vals) if mode == "worst" else np.argmax(vals)
    return int(candidates[pick])


@dataclass(frozen=True)
class SweepPoint:
    """Mean final-regret excess of the checkpointed agent over plain optimism."""

    t: int
    mean_delta: float
    stderr: float


def log_spaced_checkpoints(count: int, lo: int, hi: int) -> list:
    """Unique ascending integers from a geometric grid on [lo, hi]."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not 1 <= lo <= hi:
        raise ValueError(f"need 1 <= lo <= hi, got [{lo}, {hi}]")
    vals = np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))
    return [int(v) for v in vals]


def checkpoint_sweep(
    model_gen,
    t_values,
    base_config: AgentConfig,
    horizon: int,
    *,
    n_models: int = 1,
    n_seeds: int = 1,
    root_seed: int = 0,
    workers=None,
    grid=None,
) -> list:
    """Regret deltas vs the unconstrained policy for each checkpoint period."""
    t_values = [int(t) for t in t_values]
    if not t_values or any(b <= a for a, b in zip(t_values, t_values[1:])):
        raise ValueError("t_values must be non-empty and strictly ascending")
    if t_values[0] < 1 or t_values[-1] > horizon:
        raise ValueError(f"t_values must lie in [1, {horizon}]")
    configs = {"linucb": replace(base_config, variant="linucb", checkpoints=None)}
    for t in t_values:
        configs[f"clucb2t_T{t}"] = replace(base_config, variant="clucb2t", checkpoints=t)
    summary = replicate(
        model_gen, n_models, n_seeds, configs, horizon,
        root_seed=root_seed, workers=workers, grid=grid,
    )
    reference = summary.final_regret["linucb"]
    points = []
    for t in t_values:
        delta = summary.final_regret[f"clucb2t_T{t}"] - reference
        stderr = float(delta.std(ddof=1) / np.sqrt(delta.size)) if delta.size > 1 else 0.0
        points.append(SweepPoint(t=t, mean_delta=float(delta.mean()), stderr=stderr))
    return points


def event_frequency(records, window, event: Event) -> float:
    """Fraction of steps in [start, stop] (1-based, inclusive) with the event."""
    start, stop = window
    n = len(records)
    if not 1 <= start <= stop <= n:
        raise ValueError(f"window [{start}, {stop}] invalid for a {n}-step trace")
    if isinstance(records, RunTrace):
        return float(np.mean(records.events[start - 1 : stop] == int(event)))
    hits = sum(1 for r in records[start - 1 : stop] if r.event == event)
    return hits / (stop - start + 1)
