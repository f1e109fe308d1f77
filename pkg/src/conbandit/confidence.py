"""Confidence ellipsoids, their closed-form linear optima, and deviation bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absolute slack for ellipsoid membership; absorbs floating-point error at
# the boundary.
MEMBERSHIP_SLACK = 1e-12


@dataclass(frozen=True)
class BoundParams:
    """Problem constants the confidence radius depends on.

    sigma and b_norm may be zero (disabling the corresponding radius term);
    all other fields are strictly constrained.
    """

    sigma: float
    b_norm: float
    d_norm: float
    lam: float
    delta: float
    dim: int

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.b_norm < 0:
            raise ValueError(f"b_norm must be >= 0, got {self.b_norm}")
        if self.d_norm < 0:
            raise ValueError(f"d_norm must be >= 0, got {self.d_norm}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


def beta(params: BoundParams, n_obs: int) -> float:
    """Confidence radius after ``n_obs`` absorbed observations.

    sigma * sqrt(d * log((1 + D^2 (1 + n) / lam) / delta)) + B * sqrt(lam),
    natural logarithm throughout.
    """
    if n_obs < 0:
        raise ValueError(f"n_obs must be >= 0, got {n_obs}")
    inner = (1.0 + params.d_norm**2 * (1 + n_obs) / params.lam) / params.delta
    return params.sigma * math.sqrt(params.dim * math.log(inner)) + params.b_norm * math.sqrt(
        params.lam
    )


def martingale_bound(sigma: float, n_obs: int, delta: float) -> float:
    """Freedman-style deviation bound on a sum of ``n_obs`` centered rewards.

    With L = log(3 * max(n_obs, 1)^2 / delta), returns
    sigma * sqrt(2 * n_obs * L) + (2/3) * L.
    """
    if n_obs < 0:
        raise ValueError(f"n_obs must be >= 0, got {n_obs}")
    big_l = math.log(3.0 * max(n_obs, 1) ** 2 / delta)
    return sigma * math.sqrt(2.0 * n_obs * big_l) + (2.0 / 3.0) * big_l


@dataclass(frozen=True, eq=False)
class ConfidenceEllipsoid:
    """Parameter set {theta : (theta - center)^T V (theta - center) <= radius^2}.

    ``shape_inv`` stores V^{-1}, the matrix appearing in the closed-form
    support values: the linear functional <theta, x> over the set attains
    min/max at <center, x> -/+ radius * sqrt(x^T shape_inv x).
    """

    center: np.ndarray
    shape_inv: np.ndarray
    radius: float

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.center.shape[0]:
            raise ValueError(f"vector dim {x.shape[0]} != ellipsoid dim {self.center.shape[0]}")
        return x

    def dual_norm(self, x: np.ndarray) -> float:
        """sqrt(x^T shape_inv x); scales the confidence width along x."""
        x = self._check(x)
        return float(np.sqrt(max(float(x @ self.shape_inv @ x), 0.0)))

    def linear_min(self, x: np.ndarray) -> float:
        """Exact minimum of <theta, x> over the ellipsoid."""
        x = self._check(x)
        return float(self.center @ x) - self.radius * self.dual_norm(x)

    def linear_max(self, x: np.ndarray) -> float:
        """Exact maximum of <theta, x> over the ellipsoid."""
        x = self._check(x)
        return float(self.center @ x) + self.radius * self.dual_norm(x)

    def minimizer(self, x: np.ndarray) -> np.ndarray:
        """Boundary point attaining linear_min(x); the center when x = 0."""
        x = self._check(x)
        w = self.dual_norm(x)
        if w == 0.0:
            return self.center.copy()
        return self.center - self.radius * (self.shape_inv @ x) / w

    def maximizer(self, x: np.ndarray) -> np.ndarray:
        """Boundary point attaining linear_max(x); the center when x = 0."""
        x = self._check(x)
        w = self.dual_norm(x)
        if w == 0.0:
            return self.center.copy()
        return self.center + self.radius * (self.shape_inv @ x) / w

    def contains(self, theta: np.ndarray, slack: float = MEMBERSHIP_SLACK) -> bool:
        """Membership test in the design metric: ||theta - center||_V <= radius."""
        theta = self._check(theta)
        z = theta - self.center
        quad = float(z @ np.linalg.solve(self.shape_inv, z))
        return quad <= self.radius**2 + slack
