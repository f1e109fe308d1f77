"""Incremental regularized least squares with rank-one inverse updates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Full re-factorization cadence for the maintained inverse; caps the
# accumulated drift of the rank-one updates.
REFRESH_INTERVAL = 10_000


@dataclass(eq=False)
class RlsState:
    """Ridge-regression state over a stream of (feature, reward) observations.

    Maintains the design matrix ``v = lam * I + sum(phi phi^T)``, its inverse
    (Sherman-Morrison rank-one updates, re-factorized from scratch every
    ``REFRESH_INTERVAL`` observations), the response accumulator ``xty`` and
    the ridge estimate ``theta_hat = v_inv @ xty``.

    Single-writer: a state may be handed between threads but must not be
    updated concurrently.
    """

    dim: int
    lam: float
    v: np.ndarray
    v_inv: np.ndarray
    xty: np.ndarray
    theta_hat: np.ndarray
    count: int = 0

    @classmethod
    def init(cls, dim: int, lam: float) -> "RlsState":
        """Fresh state with no observations: v = lam*I, theta_hat = 0."""
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if lam <= 0:
            raise ValueError(f"lambda must be > 0, got {lam}")
        return cls(
            dim=int(dim),
            lam=float(lam),
            v=float(lam) * np.eye(dim),
            v_inv=(1.0 / float(lam)) * np.eye(dim),
            xty=np.zeros(dim),
            theta_hat=np.zeros(dim),
        )

    def update(self, phi: np.ndarray, reward: float) -> None:
        """Absorb one observation: v += phi phi^T, xty += reward * phi.

        The inverse is updated with the Sherman-Morrison identity in O(d^2).
        """
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.shape[0] != self.dim:
            raise ValueError(f"feature dim {phi.shape[0]} != state dim {self.dim}")
        self.v += phi[:, None] * phi
        u = self.v_inv @ phi
        self.v_inv -= (u[:, None] * u) / (1.0 + float(phi @ u))
        self.xty += float(reward) * phi
        self.count += 1
        if self.count % REFRESH_INTERVAL == 0:
            self.refresh()
        self.theta_hat = self.v_inv @ self.xty

    def refresh(self) -> None:
        """Recompute v_inv and theta_hat from v by a fresh factorization."""
        self.v_inv = np.linalg.inv(self.v)
        self.theta_hat = self.v_inv @ self.xty

    def weighted_norm(self, x: np.ndarray) -> float:
        """sqrt(x^T v_inv x), the v_inv-weighted norm of x."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ValueError(f"vector dim {x.shape[0]} != state dim {self.dim}")
        # Clamp tiny negative round-off for near-null x.
        return float(np.sqrt(max(float(x @ self.v_inv @ x), 0.0)))
