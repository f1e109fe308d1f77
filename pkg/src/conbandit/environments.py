"""Bandit environments: Bernoulli arms, synthetic linear models, dataset features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_BERNOULLI = "bernoulli_mab"
KIND_LINEAR = "linear"
KIND_DATASET = "dataset"
KINDS = (KIND_BERNOULLI, KIND_LINEAR, KIND_DATASET)

# Subgaussian scale valid for any reward supported on [0, 1].
BERNOULLI_SIGMA = 0.5

# Rejection-sampling budget per arm when generating linear models.
MAX_REJECTION_TRIES = 10**6


class ModelGenerationError(RuntimeError):
    """Raised when random model generation cannot satisfy its constraints."""


class DatasetFormatError(ValueError):
    """Raised on malformed dataset files; message carries the line number."""


@dataclass(frozen=True, eq=False)
class BanditModel:
    """Immutable environment description.

    ``means`` holds the true per-arm expected rewards. For ``bernoulli_mab``
    and ``linear`` models it equals ``features @ theta_star`` exactly; for
    ``dataset`` models it is the min-max normalized rating vector, so the
    linear relation is only approximate there.
    """

    kind: str
    features: np.ndarray  # K x d
    theta_star: np.ndarray
    sigma: float
    baseline_rank: int
    means: np.ndarray

    @property
    def n_arms(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class BaselineInfo:
    """Known performance of the fixed baseline arm.

    Non-contextual, so the mean bounds coincide (mu_l = mu_h = mu_b) and the
    gap bounds coincide (delta_l = delta_h = best mean - mu_b).
    """

    baseline_arm: int
    mu_b: float
    mu_l: float
    mu_h: float
    delta_l: float
    delta_h: float


def rank_order(means: np.ndarray) -> np.ndarray:
    """Arm indices sorted by decreasing mean, ties broken by lowest index."""
    return np.argsort(-np.asarray(means, dtype=float), kind="stable")


def _check_rank(baseline_rank: int, k: int) -> None:
    if not 1 <= baseline_rank <= k:
        raise ValueError(f"baseline_rank must be in [1, {k}], got {baseline_rank}")


def gen_bernoulli_model(
    rng_seed, k: int, mean_low: float, mean_high: float, baseline_rank: int
) -> BanditModel:
    """K Bernoulli arms with means drawn i.i.d. uniform on [mean_low, mean_high].

    Features are the canonical basis (d = K), so the linear machinery reduces
    to the multi-armed case.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 <= mean_low <= mean_high <= 1.0:
        raise ValueError(f"need 0 <= mean_low <= mean_high <= 1, got [{mean_low}, {mean_high}]")
    _check_rank(baseline_rank, k)
    rng = np.random.default_rng(rng_seed)
    means = rng.uniform(mean_low, mean_high, size=k)
    return BanditModel(
        kind=KIND_BERNOULLI,
        features=np.eye(k),
        theta_star=means.copy(),
        sigma=BERNOULLI_SIGMA,
        baseline_rank=int(baseline_rank),
        means=means,
    )


def _uniform_ball(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Uniform sample from the closed unit ball."""
    while True:
        x = rng.standard_normal(dim)
        norm = float(np.linalg.norm(x))
        if norm > 0.0:
            return (rng.random() ** (1.0 / dim) / norm) * x


def gen_linear_model(
    rng_seed, k: int, dim: int, noise_sd: float, baseline_rank: int,
    max_tries: int = MAX_REJECTION_TRIES,
) -> BanditModel:
    """Linear model with theta_star and arm features uniform in the unit ball.

    Each arm feature is rejection-resampled until its true mean lands in
    [0, 1]; Gaussian reward noise with sd ``noise_sd``.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    _check_rank(baseline_rank, k)
    rng = np.random.default_rng(rng_seed)
    theta = _uniform_ball(rng, dim)
    features = np.empty((k, dim))
    for arm in range(k):
        for _ in range(max_tries):
            phi = _uniform_ball(rng, dim)
            if 0.0 <= float(phi @ theta) <= 1.0:
                features[arm] = phi
                break
        else:
            raise ModelGenerationError(
                f"no feature with mean in [0, 1] for arm {arm} after {max_tries} tries"
            )
    return BanditModel(
        kind=KIND_LINEAR,
        features=features,
        theta_star=theta,
        sigma=float(noise_sd),
        baseline_rank=int(baseline_rank),
        means=features @ theta,
    )


def _parse_block(lines: list[str], start: int, tag: str) -> tuple[np.ndarray, int]:
    """Parse one `TAG <rows> <cols>` block; returns (matrix, next line index)."""
    if start >= len(lines):
        raise DatasetFormatError(f"line {start + 1}: expected '{tag} <rows> <cols>' header")
    head = lines[start].split()
    if len(head) != 3 or head[0] != tag:
        raise DatasetFormatError(f"line {start + 1}: expected '{tag} <rows> <cols>' header")
    try:
        rows, cols = int(head[1]), int(head[2])
    except ValueError:
        raise DatasetFormatError(f"line {start + 1}: non-integer block dimensions") from None
    if rows < 1 or cols < 1:
        raise DatasetFormatError(f"line {start + 1}: block dimensions must be positive")
    data = np.empty((rows, cols))
    for i in range(rows):
        ln = start + 1 + i
        if ln >= len(lines):
            raise DatasetFormatError(f"line {ln + 1}: missing row {i + 1} of {tag} block")
        fields = lines[ln].split()
        if len(fields) != cols:
            raise DatasetFormatError(
                f"line {ln + 1}: expected {cols} values, got {len(fields)}"
            )
        try:
            data[i] = [float(f) for f in fields]
        except ValueError:
            raise DatasetFormatError(f"line {ln + 1}: non-numeric value") from None
    return data, start + 1 + rows


def read_dataset_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an ITEMS/USERS feature file; returns (items K x d, users M x d)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    # Ignore trailing blank lines; blanks elsewhere are format errors.
    while lines and not lines[-1].strip():
        lines.pop()
    items, nxt = _parse_block(lines, 0, "ITEMS")
    users, nxt = _parse_block(lines, nxt, "USERS")
    if nxt != len(lines):
        raise DatasetFormatError(f"line {nxt + 1}: unexpected trailing content")
    if items.shape[1] != users.shape[1]:
        raise DatasetFormatError(
            f"line 1: ITEMS dim {items.shape[1]} != USERS dim {users.shape[1]}"
        )
    return items, users


def load_dataset_model(path, user_row: int, noise_sd: float, baseline_rank: int) -> BanditModel:
    """Model whose arms are item feature rows and whose user picks the means.

    The raw item/user dot products are affinely normalized so the arm means
    span exactly [0, 1].
    """
    items, users = read_dataset_file(path)
    k = items.shape[0]
    if k < 2:
        raise DatasetFormatError("need at least 2 items")
    if not 0 <= user_row < users.shape[0]:
        raise ValueError(f"user_row must be in [0, {users.shape[0] - 1}], got {user_row}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    _check_rank(baseline_rank, k)
    theta = users[user_row]
    raw = items @ theta
    span = float(raw.max() - raw.min())
    if span <= 0.0:
        raise ModelGenerationError(f"user {user_row} rates all items identically")
    return BanditModel(
        kind=KIND_DATASET,
        features=items,
        theta_star=theta,
        sigma=float(noise_sd),
        baseline_rank=int(baseline_rank),
        means=(raw - raw.min()) / span,
    )


def write_synthetic_dataset(path, n_items: int, n_users: int, dim: int, rng_seed) -> None:
    """Write a random stand-in feature file in the ITEMS/USERS format."""
    if n_items < 2 or n_users < 1 or dim < 1:
        raise ValueError("need n_items >= 2, n_users >= 1, dim >= 1")
    rng = np.random.default_rng(rng_seed)
    items = np.stack([_uniform_ball(rng, dim) for _ in range(n_items)])
    users = np.stack([10.0 * _uniform_ball(rng, dim) for _ in range(n_users)])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ITEMS {n_items} {dim}\n")
        for row in items:
            fh.write(" ".join(repr(v) for v in row) + "\n")
        fh.write(f"USERS {n_users} {dim}\n")
        for row in users:
            fh.write(" ".join(repr(v) for v in row) + "\n")


def pull(model: BanditModel, arm: int, rng: np.random.Generator) -> float:
    """Sample one reward: Bernoulli(mean) or mean + Gaussian(0, sigma^2)."""
    if not 0 <= arm < model.n_arms:
        raise IndexError(f"arm {arm} out of range [0, {model.n_arms - 1}]")
    mu = float(model.means[arm])
    if model.kind == KIND_BERNOULLI:
        return 1.0 if rng.random() < mu else 0.0
    return mu + rng.normal(0.0, model.sigma)


def baseline_info(model: BanditModel) -> BaselineInfo:
    """Exact baseline data for the model's rank-based baseline arm."""
    order = rank_order(model.means)
    arm = int(order[model.baseline_rank - 1])
    mu_b = float(model.means[arm])
    gap = float(model.means[order[0]]) - mu_b
    return BaselineInfo(
        baseline_arm=arm, mu_b=mu_b, mu_l=mu_b, mu_h=mu_b, delta_l=gap, delta_h=gap
    )


def norm_bounds(model: BanditModel) -> tuple[float, float]:
    """(B, D) norm bounds for the model's parameter and features."""
    if model.kind == KIND_DATASET:
        return (
            float(np.linalg.norm(model.theta_star)),
            float(np.max(np.linalg.norm(model.features, axis=1))),
        )
    return 1.0, 1.0
