"""Experiment configuration: JSON schema, validation, and round-trip serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

from .agents import VARIANTS

SCHEMA_VERSION = 1

ENV_KINDS = ("bernoulli", "linear", "dataset")

DEFAULT_ALPHA = 0.05
DEFAULT_DELTA = 0.01
DEFAULT_LAMBDA = 0.5
DEFAULT_MEAN_RANGE = (0.25, 0.75)
DEFAULT_NOISE_SD = 0.1
# Stock baseline ranks per environment kind.
DEFAULT_BASELINE_RANK = {"bernoulli": 4, "linear": 6, "dataset": 10}
DEFAULT_AGENTS = ("linucb", "clucb", "clucb2")


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


@dataclass(frozen=True)
class EnvSpec:
    kind: str
    k: Optional[int] = None
    dim: Optional[int] = None
    mean_low: float = DEFAULT_MEAN_RANGE[0]
    mean_high: float = DEFAULT_MEAN_RANGE[1]
    noise_sd: float = DEFAULT_NOISE_SD
    path: Optional[str] = None


@dataclass(frozen=True)
class AgentSpec:
    variant: str
    label: str
    alpha: Optional[float] = None        # None: use the experiment-level value
    delta: Optional[float] = None
    checkpoints: Union[int, tuple, None] = None


@dataclass(frozen=True)
class SweepSpec:
    count: int
    t_min: int
    t_max: int


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "results"
    dense_until: int = 100
    curve_points: int = 500


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int
    env: EnvSpec
    horizon: int
    alpha: float
    delta: float
    lam: float
    baseline_rank: int
    agents: tuple  # of AgentSpec
    n_models: int
    n_seeds: int
    root_seed: int
    checkpoints: Union[int, tuple, None]
    sweep: Optional[SweepSpec]
    output: OutputSpec


class _Fields:
    """Tracks consumed keys of one mapping so unknown keys can be rejected."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected an object")
        self.data = data
        self.path = path
        self.seen = set()

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, default=None, required: bool = False):
        self.seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{self._at(key)}: required field missing")
            return default
        return self.data[key]

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            where = self.path or "config"
            raise ConfigError(f"{where}: unknown field(s): {', '.join(unknown)}")


def _as_int(value, path: str, minimum=None, maximum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {value}")
    return value


def _as_float(value, path: str, low=None, high=None, low_open=False, high_open=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if low is not None and (v <= low if low_open else v < low):
        op = ">" if low_open else ">="
        raise ConfigError(f"{path}: must be {op} {low}, got {v}")
    if high is not None and (v >= high if high_open else v > high):
        op = "<" if high_open else "<="
        raise ConfigError(f"{path}: must be {op} {high}, got {v}")
    return v


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _parse_env(data) -> EnvSpec:
    f = _Fields(data, "env")
    kind = _as_str(f.take("kind", required=True), "env.kind")
    if kind not in ENV_KINDS:
        raise ConfigError(f"env.kind: unknown kind {kind!r}; valid: {', '.join(ENV_KINDS)}")
    k = dim = None
    mean_low, mean_high = DEFAULT_MEAN_RANGE
    noise_sd = DEFAULT_NOISE_SD
    path = None
    if kind == "bernoulli":
        k = _as_int(f.take("k", required=True), "env.k", minimum=1)
        mean_low = _as_float(f.take("mean_low", mean_low), "env.mean_low", low=0.0, high=1.0)
        mean_high = _as_float(f.take("mean_high", mean_high), "env.mean_high", low=0.0, high=1.0)
        if mean_low > mean_high:
            raise ConfigError("env.mean_low: must not exceed env.mean_high")
    elif kind == "linear":
        k = _as_int(f.take("k", required=True), "env.k", minimum=2)
        dim = _as_int(f.take("dim", required=True), "env.dim", minimum=1)
        noise_sd = _as_float(f.take("noise_sd", noise_sd), "env.noise_sd", low=0.0)
    else:  # dataset
        path = _as_str(f.take("path", required=True), "env.path")
        noise_sd = _as_float(f.take("noise_sd", noise_sd), "env.noise_sd", low=0.0)
    f.finish()
    return EnvSpec(
        kind=kind, k=k, dim=dim, mean_low=mean_low, mean_high=mean_high,
        noise_sd=noise_sd, path=path,
    )


def _parse_checkpoints(value, path: str, horizon: int):
    """Fixed period, explicit ascending schedule, or a sweep spec."""
    if value is None:
        return None, None
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected integer, list, or sweep object")
    if isinstance(value, int):
        return _as_int(value, path, minimum=1, maximum=horizon), None
    if isinstance(value, list):
        if not value:
            raise ConfigError(f"{path}: schedule must be non-empty")
        sched = tuple(
            _as_int(v, f"{path}[{i}]", minimum=1, maximum=horizon) for i, v in enumerate(value)
        )
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError(f"{path}: schedule must be strictly increasing")
        return sched, None
    if isinstance(value, dict):
        f = _Fields(value, path)
        count = _as_int(f.take("count", required=True), f"{path}.count", minimum=1)
        t_min = _as_int(f.take("min", 1), f"{path}.min", minimum=1, maximum=horizon)
        t_max = _as_int(f.take("max", horizon), f"{path}.max", minimum=t_min, maximum=horizon)
        f.finish()
        return None, SweepSpec(count=count, t_min=t_min, t_max=t_max)
    raise ConfigError(f"{path}: expected integer, list, or sweep object")


def _parse_agent(entry, idx: int, horizon: int, labels_seen: set) -> AgentSpec:
    path = f"agents[{idx}]"
    if isinstance(entry, str):
        entry = {"variant": entry}
    f = _Fields(entry, path)
    variant = _as_str(f.take("variant", required=True), f"{path}.variant")
    if variant not in VARIANTS:
        raise ConfigError(
            f"{path}.variant: unknown agent {variant!r}; valid: {', '.join(VARIANTS)}"
        )
    alpha = f.take("alpha")
    if alpha is not None:
        alpha = _as_float(alpha, f"{path}.alpha", low=0.0, high=1.0, low_open=True)
    delta = f.take("delta")
    if delta is not None:
        delta = _as_float(delta, f"{path}.delta", low=0.0, high=1.0, low_open=True, high_open=True)
    checkpoints, sweep = _parse_checkpoints(f.take("checkpoints"), f"{path}.checkpoints", horizon)
    if sweep is not None:
        raise ConfigError(f"{path}.checkpoints: sweep specs are only valid at the top level")
    if checkpoints is not None and variant != "clucb2t":
        raise ConfigError(f"{path}.checkpoints: only valid for clucb2t")
    default_label = variant
    if variant == "clucb2t" and isinstance(checkpoints, int):
        default_label = f"clucb2t_T{checkpoints}"
    label = _as_str(f.take("label", default_label), f"{path}.label")
    if label in labels_seen:
        raise ConfigError(f"{path}.label: duplicate agent label {label!r}; set explicit labels")
    labels_seen.add(label)
    f.finish()
    return AgentSpec(variant=variant, label=label, alpha=alpha, delta=delta, checkpoints=checkpoints)


def parse_config_dict(data: dict) -> ExperimentConfig:
    f = _Fields(data, "")
    version = _as_int(f.take("schema_version", SCHEMA_VERSION), "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version}; expected {SCHEMA_VERSION}")
    env = _parse_env(f.take("env", required=True))
    horizon = _as_int(f.take("horizon", required=True), "horizon", minimum=1)
    alpha = _as_float(f.take("alpha", DEFAULT_ALPHA), "alpha", low=0.0, high=1.0, low_open=True)
    delta = _as_float(
        f.take("delta", DEFAULT_DELTA), "delta", low=0.0, high=1.0, low_open=True, high_open=True
    )
    lam = _as_float(f.take("lambda", DEFAULT_LAMBDA), "lambda", low=0.0, low_open=True)
    baseline_rank = _as_int(
        f.take("baseline_rank", DEFAULT_BASELINE_RANK[env.kind]), "baseline_rank", minimum=1
    )
    if env.k is not None and baseline_rank > env.k:
        raise ConfigError(f"baseline_rank: must be <= env.k = {env.k}, got {baseline_rank}")
    agents_raw = f.take("agents", list(DEFAULT_AGENTS))
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ConfigError("agents: expected a non-empty list")
    labels_seen: set = set()
    agents = tuple(
        _parse_agent(entry, i, horizon, labels_seen) for i, entry in enumerate(agents_raw)
    )
    n_models = _as_int(f.take("n_models", 1), "n_models", minimum=1)
    n_seeds = _as_int(f.take("n_seeds", 1), "n_seeds", minimum=1)
    root_seed = _as_int(f.take("root_seed", 0), "root_seed", minimum=0)
    checkpoints, sweep = _parse_checkpoints(f.take("checkpoints"), "checkpoints", horizon)

    out_raw = f.take("output", {})
    fo = _Fields(out_raw, "output")
    output = OutputSpec(
        directory=_as_str(fo.take("directory", OutputSpec.directory), "output.directory"),
        dense_until=_as_int(fo.take("dense_until", OutputSpec.dense_until), "output.dense_until", minimum=1),
        curve_points=_as_int(fo.take("curve_points", OutputSpec.curve_points), "output.curve_points", minimum=2),
    )
    fo.finish()
    if output.dense_until >= output.curve_points:
        raise ConfigError("output.dense_until: must be < output.curve_points")
    f.finish()

    for i, spec in enumerate(agents):
        if spec.variant == "clucb2t" and spec.checkpoints is None and checkpoints is None:
            raise ConfigError(
                f"agents[{i}]: clucb2t needs checkpoints (per-agent or top-level)"
            )
    return ExperimentConfig(
        schema_version=version,
        env=env,
        horizon=horizon,
        alpha=alpha,
        delta=delta,
        lam=lam,
        baseline_rank=baseline_rank,
        agents=agents,
        n_models=n_models,
        n_seeds=n_seeds,
        root_seed=root_seed,
        checkpoints=checkpoints,
        sweep=sweep,
        output=output,
    )


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return parse_config_dict(data)


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Canonical dict form with every default materialized; round-trips exactly."""
    env: dict = {"kind": cfg.env.kind}
    if cfg.env.kind == "bernoulli":
        env.update(k=cfg.env.k, mean_low=cfg.env.mean_low, mean_high=cfg.env.mean_high)
    elif cfg.env.kind == "linear":
        env.update(k=cfg.env.k, dim=cfg.env.dim, noise_sd=cfg.env.noise_sd)
    else:
        env.update(path=cfg.env.path, noise_sd=cfg.env.noise_sd)
    agents = []
    for spec in cfg.agents:
        entry: dict = {"variant": spec.variant, "label": spec.label}
        if spec.alpha is not None:
            entry["alpha"] = spec.alpha
        if spec.delta is not None:
            entry["delta"] = spec.delta
        if spec.checkpoints is not None:
            entry["checkpoints"] = _checkpoints_json(spec.checkpoints)
        agents.append(entry)
    data = {
        "schema_version": cfg.schema_version,
        "env": env,
        "horizon": cfg.horizon,
        "alpha": cfg.alpha,
        "delta": cfg.delta,
        "lambda": cfg.lam,
        "baseline_rank": cfg.baseline_rank,
        "agents": agents,
        "n_models": cfg.n_models,
        "n_seeds": cfg.n_seeds,
        "root_seed": cfg.root_seed,
        "output": {
            "directory": cfg.output.directory,
            "dense_until": cfg.output.dense_until,
            "curve_points": cfg.output.curve_points,
        },
    }
    if cfg.sweep is not None:
        data["checkpoints"] = {"count": cfg.sweep.count, "min": cfg.sweep.t_min, "max": cfg.sweep.t_max}
    elif cfg.checkpoints is not None:
        data["checkpoints"] = _checkpoints_json(cfg.checkpoints)
    return data


def _checkpoints_json(value):
    return list(value) if isinstance(value, tuple) else value
