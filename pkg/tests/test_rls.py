import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conbandit.rls import RlsState


def random_unit_ball(rng, dim):
    x = rng.standard_normal(dim)
    return x / max(np.linalg.norm(x), 1e-12) * rng.random() ** (1.0 / dim)


class TestInit:
    def test_identity_case(self):
        s = RlsState.init(2, 1.0)
        assert np.array_equal(s.v, np.eye(2))
        assert np.array_equal(s.v_inv, np.eye(2))
        assert np.array_equal(s.theta_hat, np.zeros(2))
        assert s.count == 0

    def test_scalar_multiple_of_identity(self):
        s = RlsState.init(3, 0.5)
        assert np.allclose(s.v, np.diag([0.5, 0.5, 0.5]))
        assert np.allclose(s.v_inv, np.diag([2.0, 2.0, 2.0]))

    def test_zero_estimate_with_no_data(self):
        assert np.array_equal(RlsState.init(1, 2.0).theta_hat, [0.0])

    @pytest.mark.parametrize("dim,lam", [(0, 1.0), (-1, 1.0), (2, 0.0), (2, -0.5)])
    def test_rejects_bad_config(self, dim, lam):
        with pytest.raises(ValueError):
            RlsState.init(dim, lam)


class TestUpdate:
    def test_single_update_direct_solve(self):
        # Oracle: direct solve of (I + e1 e1^T) theta = (1, 0).
        s = RlsState.init(2, 1.0)
        s.update(np.array([1.0, 0.0]), 1.0)
        assert np.allclose(s.v, np.diag([2.0, 1.0]))
        assert np.allclose(s.v_inv, np.diag([0.5, 1.0]))
        assert np.allclose(s.theta_hat, [0.5, 0.0])
        assert s.count == 1

    def test_zero_feature_changes_nothing_but_count(self):
        s = RlsState.init(1, 1.0)
        s.update(np.zeros(1), 7.5)
        assert np.array_equal(s.v, np.eye(1))
        assert np.array_equal(s.v_inv, np.eye(1))
        assert np.array_equal(s.xty, [0.0])
        assert s.count == 1

    def test_incremental_inverse_matches_fresh_inversion(self):
        # Oracle: dense matrix inversion from scratch after 100 updates.
        rng = np.random.default_rng(0)
        s = RlsState.init(5, 1.0)
        for _ in range(100):
            s.update(random_unit_ball(rng, 5), rng.normal())
        assert np.max(np.abs(s.v_inv - np.linalg.inv(s.v))) <= 1e-8

    def test_dimension_mismatch(self):
        s = RlsState.init(3, 1.0)
        with pytest.raises(ValueError):
            s.update(np.ones(2), 1.0)

    def test_theta_residual_small(self):
        rng = np.random.default_rng(1)
        s = RlsState.init(4, 0.5)
        for _ in range(500):
            s.update(random_unit_ball(rng, 4), rng.normal())
        residual = np.linalg.norm(s.v @ s.theta_hat - s.xty)
        assert residual <= 1e-10 * max(np.linalg.norm(s.xty), 1.0)

    def test_long_run_drift_with_refresh(self):
        # Drift check right before and after the periodic re-factorization.
        rng = np.random.default_rng(2)
        s = RlsState.init(8, 0.5)
        for i in range(10_000):
            s.update(random_unit_ball(rng, 8), rng.normal())
            if i == 9_998:
                pre = np.max(np.abs(s.v_inv - np.linalg.inv(s.v)))
        assert pre <= 1e-8
        assert np.max(np.abs(s.v_inv - np.linalg.inv(s.v))) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=2, max_size=8), st.randoms(use_true_random=False))
def test_v_is_permutation_invariant(seeds, pyrandom):
    rng = np.random.default_rng(123)
    obs = [(random_unit_ball(rng, 3), float(rng.normal())) for _ in seeds]
    a = RlsState.init(3, 1.0)
    for phi, r in obs:
        a.update(phi, r)
    shuffled = list(obs)
    pyrandom.shuffle(shuffled)
    b = RlsState.init(3, 1.0)
    for phi, r in shuffled:
        b.update(phi, r)
    assert np.max(np.abs(a.v - b.v)) <= 1e-10


class TestWeightedNorm:
    def test_euclidean_when_identity(self):
        assert RlsState.init(2, 1.0).weighted_norm([3.0, 4.0]) == pytest.approx(5.0)

    def test_scaled_identity(self):
        # sqrt(4 * 1/4) with v = 4I.
        assert RlsState.init(2, 4.0).weighted_norm([2.0, 0.0]) == pytest.approx(1.0)

    def test_zero_vector(self):
        assert RlsState.init(3, 2.0).weighted_norm(np.zeros(3)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            RlsState.init(3, 1.0).weighted_norm(np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 30))
def test_weighted_norm_spectral_bound(seed, n_updates):
    # All eigenvalues of v are >= lam, so x^T v_inv x <= |x|^2 / lam.
    rng = np.random.default_rng(seed)
    lam = 0.5 + rng.random()
    s = RlsState.init(4, lam)
    for _ in range(n_updates):
        s.update(random_unit_ball(rng, 4), rng.normal())
    x = rng.standard_normal(4)
    assert s.weighted_norm(x) ** 2 <= np.dot(x, x) / lam + 1e-9
