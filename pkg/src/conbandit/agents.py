"""Decision policies: optimistic, conservative, checkpoint-based, and oracles.

All variants share one machinery: a ridge estimate over the non-baseline
observation stream, a confidence ellipsoid around it, and a per-step safety
test comparing accumulated reward (suitably lower-bounded) against a fraction
of the baseline's cumulative mean. The variants differ in which lower bound
they use and in how they pick among arms that pass the test.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .confidence import BoundParams, ConfidenceEllipsoid, beta, martingale_bound
from .environments import BaselineInfo
from .rls import RlsState

VARIANTS = (
    "linucb",
    "clucb",
    "clucb_m",
    "clucb_s",
    "clucb_l",
    "clucb2",
    "clucb2t",
    "oracle",
    "baseline",
)


class Event(enum.IntEnum):
    """Step classification: which kind of arm the policy ended up playing."""

    E1_UCB_SAFE = 1      # unconstrained optimistic arm, and it passed the safety test
    E2_OTHER_SAFE = 2    # a safe non-optimistic, non-baseline arm
    E3_BASELINE = 3      # the baseline arm

    @property
    def label(self) -> str:
        return f"E{int(self)}"


@dataclass
class HistoryLedger:
    """Bookkeeping of baseline vs exploratory steps and their reward sums.

    ``total_baseline_mean_sum`` accumulates the baseline mean over *every*
    step (the right-hand side of the conservative constraint) and, by
    convention, already includes the current step at decision time.
    """

    explore_steps: list = field(default_factory=list)
    baseline_steps: list = field(default_factory=list)
    explore_reward_sum: float = 0.0
    explore_mean_sum: float = 0.0
    baseline_mean_sum: float = 0.0
    total_baseline_mean_sum: float = 0.0

    @property
    def n_explore(self) -> int:
        return len(self.explore_steps)


Checkpoints = Union[int, Sequence[int], None]


@dataclass(frozen=True)
class AgentConfig:
    """Variant selection plus the constants every variant shares.

    ``delta`` is the total failure probability; it is split evenly between
    the confidence-ellipsoid stream and the martingale bound so the joint
    guarantee holds at level delta. ``checkpoints`` is required for (and only
    valid for) the ``clucb2t`` variant: a fixed period or an explicit
    strictly-increasing schedule of steps at which the constraint must hold.
    """

    variant: str
    bound_params: BoundParams
    alpha: float = 0.05
    delta: float = 0.01
    checkpoints: Checkpoints = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; valid: {', '.join(VARIANTS)}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.variant == "clucb2t":
            if self.checkpoints is None:
                raise ValueError("clucb2t requires checkpoints (period or schedule)")
            if isinstance(self.checkpoints, int):
                if self.checkpoints < 1:
                    raise ValueError(f"checkpoint period must be >= 1, got {self.checkpoints}")
            else:
                sched = tuple(int(c) for c in self.checkpoints)
                if not sched:
                    raise ValueError("checkpoint schedule must be non-empty")
                if sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
                    raise ValueError("checkpoint schedule must be strictly increasing and >= 1")
                object.__setattr__(self, "checkpoints", sched)
        elif self.checkpoints is not None:
            raise ValueError(f"checkpoints only apply to clucb2t, not {self.variant!r}")


@dataclass(frozen=True, eq=False)
class AgentDecision:
    """One step's outcome: the arm, its event class, and diagnostics."""

    arm: int
    event: Event
    safe_set: frozenset
    ucb_values: np.ndarray
    lcb_values: np.ndarray


def arm_bounds(
    ell: ConfidenceEllipsoid, features: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-arm (upper, lower) closed-form bounds of <theta, phi_a> over the set."""
    proj = features @ ell.shape_inv
    width = np.sqrt(np.clip(np.einsum("ij,ij->i", proj, features), 0.0, None))
    mean = features @ ell.center
    return mean + ell.radius * width, mean - ell.radius * width


def ucb_select(
    ell: ConfidenceEllipsoid,
    features: np.ndarray,
    baseline_arm: Optional[int] = None,
    ucb_values: Optional[np.ndarray] = None,
) -> AgentDecision:
    """Unconstrained optimistic argmax; ties broken by lowest arm index."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be a non-empty K x d matrix")
    if ucb_values is None:
        ucb_values, lcb_values = arm_bounds(ell, features)
    else:
        ucb_values = np.asarray(ucb_values, dtype=float)
        lcb_values = 2.0 * features @ ell.center - ucb_values
    arm = int(np.argmax(ucb_values))
    safe = frozenset(a for a in range(features.shape[0]) if a != baseline_arm)
    event = Event.E3_BASELINE if arm == baseline_arm else Event.E1_UCB_SAFE
    return AgentDecision(arm, event, safe, np.array(ucb_values), np.array(lcb_values))


def clucb_condition(
    ledger: HistoryLedger,
    ell: ConfidenceEllipsoid,
    candidate_phi: np.ndarray,
    aggregate_phi: np.ndarray,
    alpha: float,
) -> bool:
    """Self-normalized safety test on the summed feature vector.

    Lower-bounds the cumulative mean of all exploratory pulls so far plus the
    candidate via one ellipsoid minimization over their feature sum.
    """
    x = np.asarray(candidate_phi, dtype=float) + np.asarray(aggregate_phi, dtype=float)
    lhs = ledger.baseline_mean_sum + ell.linear_min(x)
    return lhs >= (1.0 - alpha) * ledger.total_baseline_mean_sum


def _safe_mask(
    ledger: HistoryLedger,
    lows: np.ndarray,
    alpha: float,
    psi: float,
    slack_steps: int,
    mu_l: float,
    baseline_arm: Optional[int],
) -> np.ndarray:
    """Vectorized membership test behind ``safe_set``; ``psi`` precomputed."""
    lhs_base = (
        max(ledger.explore_reward_sum - psi, 0.0)
        + ledger.baseline_mean_sum
        + alpha * slack_steps * mu_l
    )
    threshold = (1.0 - alpha) * ledger.total_baseline_mean_sum - lhs_base
    mask = np.maximum(lows, 0.0) >= threshold
    if baseline_arm is not None:
        mask[baseline_arm] = False
    return mask


def safe_set(
    ledger: HistoryLedger,
    ell: ConfidenceEllipsoid,
    features: np.ndarray,
    alpha: float,
    sigma: float,
    delta: float,
    slack_steps: int = 0,
    mu_l: float = 0.0,
    *,
    baseline_arm: Optional[int] = None,
    lows: Optional[np.ndarray] = None,
) -> set:
    """Arms whose selection provably keeps the conservative constraint alive.

    Uses the martingale bound on realized exploratory reward (truncated at 0)
    plus the per-arm ellipsoid lower bound (truncated at 0). With
    ``slack_steps`` > 0 the test is relaxed by alpha * slack_steps * mu_l,
    the credit for baseline plays that could still happen before the next
    checkpoint. The baseline arm is excluded by construction.
    """
    if lows is None:
        _, lows = arm_bounds(ell, np.asarray(features, dtype=float))
    else:
        lows = np.asarray(lows, dtype=float)
    psi = martingale_bound(sigma, ledger.n_explore, delta)
    mask = _safe_mask(ledger, lows, alpha, psi, slack_steps, mu_l, baseline_arm)
    return set(np.flatnonzero(mask).tolist())


def _select_from_safe(
    ucb: np.ndarray, mask: np.ndarray, baseline_arm: int, baseline_score: float, ucb_max: float
) -> tuple[int, Event]:
    """Constrained argmax: best safe arm if it beats the baseline score.

    Ties between the baseline score and the best safe upper bound go to the
    baseline; ties among safe arms go to the lowest index.
    """
    if not mask.any():
        return baseline_arm, Event.E3_BASELINE
    best = int(np.argmax(np.where(mask, ucb, -np.inf)))
    if ucb[best] > baseline_score:
        event = Event.E1_UCB_SAFE if ucb[best] == ucb_max else Event.E2_OTHER_SAFE
        return best, event
    return baseline_arm, Event.E3_BASELINE


def constrained_select(
    ell: ConfidenceEllipsoid,
    features: np.ndarray,
    safe: set,
    baseline_arm: int,
    baseline_score: float,
    ucb_values: Optional[np.ndarray] = None,
) -> AgentDecision:
    """Play the most optimistic safe arm, falling back to the baseline."""
    features = np.asarray(features, dtype=float)
    if ucb_values is None:
        ucb_values, lcb_values = arm_bounds(ell, features)
    else:
        ucb_values = np.asarray(ucb_values, dtype=float)
        lcb_values = 2.0 * features @ ell.center - ucb_values
    mask = np.zeros(features.shape[0], dtype=bool)
    mask[list(safe)] = True
    mask[baseline_arm] = False
    arm, event = _select_from_safe(
        ucb_values, mask, baseline_arm, baseline_score, float(ucb_values.max())
    )
    return AgentDecision(
        arm, event, frozenset(safe), np.array(ucb_values), np.array(lcb_values)
    )


class Agent:
    """One decision policy instance, stepped once per round.

    Not thread-safe: one agent per run. The per-arm bound arrays are cached
    between steps and recomputed only when the estimator absorbed a new
    observation or a different features matrix is passed.
    """

    def __init__(
        self,
        config: AgentConfig,
        baseline: BaselineInfo,
        dim: int,
        true_means: Optional[np.ndarray] = None,
    ) -> None:
        self.config = config
        self.baseline = baseline
        self.ledger = HistoryLedger()
        self.rls = RlsState.init(dim, config.bound_params.lam)
        # Half the failure budget to the ellipsoid, half to the martingale bound.
        self._bp = replace(config.bound_params, delta=config.delta / 2.0)
        self._mart_delta = config.delta / 2.0
        self._agg_phi = np.zeros(dim)
        self._t = 0
        if true_means is not None:
            self._true_means = np.asarray(true_means, dtype=float)
        elif config.variant == "oracle":
            raise ValueError("oracle variant requires true_means")
        else:
            self._true_means = None
        if config.variant == "clucb2t":
            if isinstance(config.checkpoints, int):
                self._cp_period: Optional[int] = config.checkpoints
                self._cp_schedule: tuple = ()
            else:
                self._cp_period = None
                self._cp_schedule = tuple(config.checkpoints)
            self._cp_idx = 0
        # Per-arm bound caches, invalidated when the estimator changes.
        self._cached_F: Optional[np.ndarray] = None
        self._cached_count = -1
        self._ucb: Optional[np.ndarray] = None
        self._lcb: Optional[np.ndarray] = None
        self._ucb_max = 0.0
        self._radius = 0.0
        self._psi = 0.0
        self._ell: Optional[ConfidenceEllipsoid] = None
        self._ell_count = -1
        self._agg_lows: Optional[np.ndarray] = None

    @property
    def t(self) -> int:
        """Number of completed steps."""
        return self._t

    def ellipsoid(self) -> ConfidenceEllipsoid:
        """Snapshot of the current confidence set (built on demand)."""
        if self._ell is None or self._ell_count != self.rls.count:
            self._ell = ConfidenceEllipsoid(
                self.rls.theta_hat.copy(),
                self.rls.v_inv.copy(),
                beta(self._bp, self.rls.count),
            )
            self._ell_count = self.rls.count
        return self._ell

    def step(self, features: np.ndarray, pull: Callable[[int], float]) -> AgentDecision:
        """Choose an arm for the next round, pull it, and absorb the reward."""
        F = np.asarray(features, dtype=float)
        if F.ndim != 2 or F.shape[0] < 1:
            raise ValueError("features must be a non-empty K x d matrix")
        if F.shape[1] != self.rls.dim:
            raise ValueError(f"feature dim {F.shape[1]} != agent dim {self.rls.dim}")
        t = self._t + 1
        led = self.ledger
        led.total_baseline_mean_sum += self.baseline.mu_b

        ucb, lcb = self._bounds(F)
        arm, event, safe = self._choose(t, F, ucb, lcb)

        reward = float(pull(arm))
        # The unconstrained variant has no baseline notion: every pull feeds
        # the estimator. Conservative variants learn only from non-baseline
        # pulls; baseline steps contribute their known mean instead.
        if arm != self.baseline.baseline_arm or self.config.variant == "linucb":
            led.explore_steps.append(t)
            led.explore_reward_sum += reward
            if self._true_means is not None:
                led.explore_mean_sum += float(self._true_means[arm])
            self._agg_phi += F[arm]
            self.rls.update(F[arm], reward)
        else:
            led.baseline_steps.append(t)
            led.baseline_mean_sum += self.baseline.mu_b
        self._t = t
        if isinstance(safe, np.ndarray):
            safe = frozenset(np.flatnonzero(safe).tolist())
        else:
            safe = frozenset(safe)
        return AgentDecision(arm, event, safe, ucb.copy(), lcb.copy())

    # -- internals ---------------------------------------------------------

    def _bounds(self, F: np.ndarray):
        if self._cached_F is F and self._cached_count == self.rls.count:
            return self._ucb, self._lcb
        rad = beta(self._bp, self.rls.count)
        rls = self.rls
        proj = F @ rls.v_inv
        width = np.sqrt(np.clip(np.einsum("ij,ij->i", proj, F), 0.0, None))
        mean = F @ rls.theta_hat
        ucb = mean + rad * width
        lcb = mean - rad * width
        if self.config.variant != "linucb":
            # The baseline's mean is known exactly, so its optimistic and
            # pessimistic scores carry no uncertainty. Conservative variants
            # never feed baseline pulls to the estimator, and an
            # ellipsoid-scored baseline arm would otherwise stay the
            # optimistic argmax forever.
            b = self.baseline.baseline_arm
            ucb[b] = self.baseline.mu_b
            lcb[b] = self.baseline.mu_b
        self._ucb = ucb
        self._lcb = lcb
        self._ucb_max = float(ucb.max())
        self._radius = rad
        self._psi = martingale_bound(self._bp.sigma, self.ledger.n_explore, self._mart_delta)
        self._cached_F = F
        self._cached_count = rls.count
        self._agg_lows = None
        return ucb, lcb

    def _aggregate_lows(self, F: np.ndarray) -> np.ndarray:
        # Per-arm lower bound on <theta, phi_a + sum of past exploratory phis>.
        if self._agg_lows is None:
            x = F + self._agg_phi
            proj = x @ self.rls.v_inv
            width = np.sqrt(np.clip(np.einsum("ij,ij->i", proj, x), 0.0, None))
            self._agg_lows = x @ self.rls.theta_hat - self._radius * width
        return self._agg_lows

    def _slack_steps(self, t: int) -> Optional[int]:
        # Steps remaining until the next checkpoint >= t; None once past an
        # explicit schedule (no future checkpoint constrains the agent).
        if self._cp_period is not None:
            return ((t - 1) // self._cp_period + 1) * self._cp_period - t
        sched = self._cp_schedule
        i = self._cp_idx
        while i < len(sched) and sched[i] < t:
            i += 1
        self._cp_idx = i
        if i == len(sched):
            return None
        return sched[i] - t

    def _choose(self, t, F, ucb, lcb):
        cfg = self.config
        led = self.ledger
        b = self.baseline.baseline_arm
        variant = cfg.variant

        if variant == "baseline":
            return b, Event.E3_BASELINE, ()

        if variant == "linucb":
            arm = int(np.argmax(ucb))
            safe = [a for a in range(F.shape[0]) if a != b]
            event = Event.E3_BASELINE if arm == b else Event.E1_UCB_SAFE
            return arm, event, safe

        if variant in ("clucb", "clucb_m", "oracle"):
            arm = int(np.argmax(ucb))
            if arm == b:
                return b, Event.E3_BASELINE, ()
            if variant == "clucb":
                ok = clucb_condition(led, self.ellipsoid(), F[arm], self._agg_phi, cfg.alpha)
            elif variant == "clucb_m":
                lhs = (
                    max(led.explore_reward_sum - self._psi, 0.0)
                    + led.baseline_mean_sum
                    + max(float(lcb[arm]), 0.0)
                )
                ok = lhs >= (1.0 - cfg.alpha) * led.total_baseline_mean_sum
            else:  # oracle: the exact constraint with true means
                lhs = led.explore_mean_sum + led.baseline_mean_sum + float(self._true_means[arm])
                ok = lhs >= (1.0 - cfg.alpha) * led.total_baseline_mean_sum
            if ok:
                return arm, Event.E1_UCB_SAFE, (arm,)
            return b, Event.E3_BASELINE, ()

        if variant in ("clucb2", "clucb2t"):
            if variant == "clucb2t":
                slack = self._slack_steps(t)
                if slack is None:
                    mask = np.ones(F.shape[0], dtype=bool)
                    mask[b] = False
                else:
                    mask = _safe_mask(led, lcb, cfg.alpha, self._psi, slack, self.baseline.mu_l, b)
            else:
                mask = _safe_mask(led, lcb, cfg.alpha, self._psi, 0, 0.0, b)
            arm, event = _select_from_safe(ucb, mask, b, self.baseline.mu_b, self._ucb_max)
            return arm, event, mask

        # clucb_s / clucb_l: per-arm self-normalized aggregate test.
        agg_lows = self._aggregate_lows(F)
        rhs = (1.0 - cfg.alpha) * led.total_baseline_mean_sum
        mask = led.baseline_mean_sum + agg_lows >= rhs
        mask[b] = False
        if variant == "clucb_s":
            arm, event = _select_from_safe(ucb, mask, b, self.baseline.mu_b, self._ucb_max)
            return arm, event, mask
        # clucb_l: among passing arms, the one with the largest lower bound.
        if not mask.any():
            return b, Event.E3_BASELINE, mask
        arm = int(np.argmax(np.where(mask, lcb, -np.inf)))
        event = Event.E1_UCB_SAFE if ucb[arm] == self._ucb_max else Event.E2_OTHER_SAFE
        return arm, event, mask
