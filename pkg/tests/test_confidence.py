import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conbandit.confidence import BoundParams, ConfidenceEllipsoid, beta, martingale_bound

UNIT_PARAMS = BoundParams(sigma=1.0, b_norm=1.0, d_norm=1.0, lam=1.0, delta=0.1, dim=1)


def make_ellipsoid(rng, dim, radius=None):
    a = rng.standard_normal((dim, dim))
    shape = a @ a.T + dim * np.eye(dim)  # SPD design matrix
    return ConfidenceEllipsoid(
        center=rng.standard_normal(dim),
        shape_inv=np.linalg.inv(shape),
        radius=float(rng.random() * 2 + 0.1) if radius is None else radius,
    )


class TestBeta:
    def test_frozen_scalar_case(self):
        # sqrt(ln 20) + 1, evaluated independently.
        assert beta(UNIT_PARAMS, 0) == pytest.approx(2.730818382602285, abs=1e-12)

    def test_vanishes_without_noise_and_norm_bound(self):
        p = BoundParams(sigma=0.0, b_norm=0.0, d_norm=1.0, lam=1.0, delta=0.1, dim=3)
        assert beta(p, 0) == 0.0
        assert beta(p, 1000) == 0.0

    def test_nondecreasing_in_observations(self):
        assert beta(UNIT_PARAMS, 10) <= beta(UNIT_PARAMS, 100)

    def test_rejects_negative_count(self):
        with pytest.raises(ValueError):
            beta(UNIT_PARAMS, -1)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"sigma": -1.0},
            {"b_norm": -0.1},
            {"lam": 0.0},
            {"delta": 0.0},
            {"delta": 1.0},
            {"dim": 0},
        ],
    )
    def test_bound_params_validation(self, kwargs):
        base = dict(sigma=1.0, b_norm=1.0, d_norm=1.0, lam=1.0, delta=0.1, dim=1)
        base.update(kwargs)
        with pytest.raises(ValueError):
            BoundParams(**base)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**5), st.integers(0, 10**4))
def test_beta_monotone_property(n, extra):
    assert beta(UNIT_PARAMS, n) <= beta(UNIT_PARAMS, n + extra) + 1e-12


class TestMartingaleBound:
    def test_no_observations_independent_of_sigma(self):
        # (2/3) * ln 300, evaluated independently.
        expected = 3.8025216497708003
        assert martingale_bound(1.0, 0, 0.01) == pytest.approx(expected, abs=1e-12)
        assert martingale_bound(0.25, 0, 0.01) == pytest.approx(expected, abs=1e-12)

    def test_frozen_small_case(self):
        # 0.5 * sqrt(8 ln 4800) + (2/3) ln 4800, evaluated independently.
        assert martingale_bound(0.5, 4, 0.01) == pytest.approx(9.768284942083918, abs=1e-12)

    def test_monte_carlo_coverage_quick(self):
        # Full-trajectory coverage of subgaussian partial sums (small version;
        # the acceptance suite runs the full-size check).
        rng = np.random.default_rng(7)
        sigma, delta, n, trials = 0.5, 0.01, 1_000, 2_000
        bound = np.array([martingale_bound(sigma, m, delta) for m in range(1, n + 1)])
        ok = 0
        for start in range(0, trials, 500):
            batch = min(500, trials - start)
            sums = np.cumsum(rng.normal(0.0, sigma, size=(batch, n)), axis=1)
            ok += int(np.sum(np.all(np.abs(sums) <= bound, axis=1)))
        assert ok / trials >= 1 - delta


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.0, 3.0),
    st.integers(0, 10**4),
    st.integers(1, 10**3),
    st.floats(1e-4, 0.5),
)
def test_martingale_bound_monotonicity(sigma, n, extra, delta):
    assert martingale_bound(sigma, n, delta) <= martingale_bound(sigma, n + extra, delta) + 1e-9
    assert martingale_bound(sigma, n, delta) <= martingale_bound(sigma + 0.5, n, delta) + 1e-12
    assert martingale_bound(sigma, n, delta / 2) > martingale_bound(sigma, n, delta)


class TestEllipsoidClosedForm:
    def test_unit_ball_coordinate_directions(self):
        ball = ConfidenceEllipsoid(np.zeros(2), np.eye(2), 1.0)
        assert ball.linear_min([1.0, 0.0]) == pytest.approx(-1.0)
        assert ball.linear_max([0.0, 1.0]) == pytest.approx(1.0)

    def test_zero_vector(self):
        ball = ConfidenceEllipsoid(np.array([0.3, -0.2]), np.eye(2), 1.0)
        assert ball.linear_min(np.zeros(2)) == 0.0
        assert ball.linear_max(np.zeros(2)) == 0.0

    def test_min_max_symmetry_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            ell = make_ellipsoid(rng, 4)
            x = rng.standard_normal(4)
            assert ell.linear_min(-x) == -ell.linear_max(x)

    def test_width_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            ell = make_ellipsoid(rng, 3)
            x = rng.standard_normal(3)
            gap = ell.linear_max(x) - ell.linear_min(x)
            assert gap == pytest.approx(2.0 * ell.radius * ell.dual_norm(x), abs=1e-12)

    def test_center_value_between_bounds(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            ell = make_ellipsoid(rng, 5)
            x = rng.standard_normal(5)
            mid = float(ell.center @ x)
            assert ell.linear_min(x) <= mid <= ell.linear_max(x)

    def test_matches_numeric_constrained_optimizer(self):
        # Oracle: scipy SLSQP minimization over the same quadratic constraint.
        from scipy.optimize import NonlinearConstraint, minimize

        rng = np.random.default_rng(6)
        for _ in range(20):
            dim = int(rng.integers(2, 6))
            ell = make_ellipsoid(rng, dim)
            x = rng.standard_normal(dim)
            shape = np.linalg.inv(ell.shape_inv)
            constraint = NonlinearConstraint(
                lambda th, shape=shape, c=ell.center: float((th - c) @ shape @ (th - c)),
                -np.inf,
                ell.radius**2,
            )
            for sign, closed in ((1.0, ell.linear_min(x)), (-1.0, ell.linear_max(x))):
                res = minimize(
                    lambda th, s=sign: s * float(th @ x),
                    ell.center,
                    method="SLSQP",
                    constraints=[constraint],
                    options={"maxiter": 200, "ftol": 1e-12},
                )
                assert sign * res.fun == pytest.approx(closed, abs=1e-6)

    def test_dimension_mismatch(self):
        ball = ConfidenceEllipsoid(np.zeros(2), np.eye(2), 1.0)
        with pytest.raises(ValueError):
            ball.linear_min(np.ones(3))


class TestMembership:
    def test_center_inside_unit_ball(self):
        ball = ConfidenceEllipsoid(np.zeros(2), np.eye(2), 1.0)
        assert ball.contains(np.zeros(2))

    def test_far_point_outside(self):
        ball = ConfidenceEllipsoid(np.zeros(2), np.eye(2), 1.0)
        assert not ball.contains(np.array([2.0, 0.0]))

    def test_optimizer_witnesses_on_boundary(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            ell = make_ellipsoid(rng, 4)
            x = rng.standard_normal(4)
            lo, hi = ell.minimizer(x), ell.maximizer(x)
            assert ell.contains(lo, slack=1e-9)
            assert ell.contains(hi, slack=1e-9)
            assert float(lo @ x) == pytest.approx(ell.linear_min(x), abs=1e-9)
            assert float(hi @ x) == pytest.approx(ell.linear_max(x), abs=1e-9)

    def test_zero_direction_witness_is_center(self):
        ell = ConfidenceEllipsoid(np.array([1.0, 2.0]), np.eye(2), 0.5)
        assert np.array_equal(ell.minimizer(np.zeros(2)), ell.center)
