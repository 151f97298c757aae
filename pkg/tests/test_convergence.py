import numpy as np
import pytest

from supermarket.convergence import (
    WeightSequence,
    fit_decay,
    lipschitz_estimate,
    phi_series,
    potential,
    ratios,
    weights,
)
from supermarket.errors import (
    DegenerateRatio,
    InsufficientPoints,
    NegativeGap,
    ValidationError,
    ZeroGap,
)
from supermarket.meanfield import MeanFieldConfig, classical_fixed_point, drift_exponential, integrate_meanfield
from supermarket.numerics import Trajectory

LAM, MU, D = 1.0, 2.0, 2
RHO = 0.5


@pytest.fixture(scope="module")
def empty_start_trajectory():
    config = MeanFieldConfig(system="exp", lam=LAM, d=D, K=8, t_end=45.0, step=0.01, mu=MU)
    return integrate_meanfield(config)


@pytest.fixture(scope="module")
def fixed_point_vector():
    return classical_fixed_point(RHO, D, 8)


class TestRatios:
    def test_worked_example(self, fixed_point_vector):
        # pi_1 = 0.5, state 0.25: c_1 = 0.25^2/0.25, d_1 = 2*0.25/0.25
        u = np.zeros(9)
        u[0], u[1] = 1.0, 0.25
        c, dk = ratios(u, fixed_point_vector, MU, D)
        assert c[0] == pytest.approx(0.25)
        assert dk[0] == pytest.approx(2.0)

    def test_empty_state_all_zero(self, fixed_point_vector):
        u = np.zeros(9)
        u[0] = 1.0
        c, dk = ratios(u, fixed_point_vector, MU, D)
        assert np.all(c == 0.0)
        assert np.all(dk == 0.0)

    def test_zero_gap_raises(self, fixed_point_vector):
        with pytest.raises(ZeroGap):
            ratios(fixed_point_vector, fixed_point_vector, MU, D)


class TestWeights:
    def test_first_weight_is_one(self):
        w = weights(0.1, 1.0, [0.5, 0.4], [0.1, 0.3])
        assert w.weights[0] == 1.0

    def test_worked_examples(self):
        w = weights(0.1, 1.0, [0.5, 0.4], [0.0, 0.3])
        assert w.weights[1] == pytest.approx(1.2)
        assert w.weights[2] == pytest.approx(1.65)

    def test_strictly_increasing(self):
        rng = np.random.default_rng(5)
        c = rng.uniform(0.1, 1.0, 10)
        dk = rng.uniform(0.0, 2.0, 10)
        w = weights(0.05, 0.8, c, dk)
        assert np.all(np.diff(w.weights) > 0.0)

    def test_degenerate_ratio(self):
        with pytest.raises(DegenerateRatio):
            weights(0.1, 1.0, [0.0, 0.4], [0.1, 0.3])

    def test_validation(self):
        with pytest.raises(ValidationError):
            weights(-0.1, 1.0, [0.5], [0.1])
        with pytest.raises(ValidationError):
            WeightSequence(0.1, np.array([1.0, 0.9]))
        with pytest.raises(ValidationError):
            WeightSequence(0.1, np.array([2.0]))


class TestPotential:
    def test_zero_at_fixed_point(self, fixed_point_vector):
        assert potential(fixed_point_vector, fixed_point_vector) == 0.0

    def test_empty_state_sums_the_tails(self, fixed_point_vector):
        u = np.zeros(9)
        u[0] = 1.0
        # frozen partial sum of rho^(2^k - 1) at rho = 1/2
        assert potential(u, fixed_point_vector) == pytest.approx(0.6328430180437863, rel=1e-12)

    def test_negative_gap_raises(self, fixed_point_vector):
        u = fixed_point_vector.copy()
        u[2] += 1e-4
        with pytest.raises(NegativeGap):
            potential(u, fixed_point_vector)

    def test_custom_weights(self, fixed_point_vector):
        u = np.zeros(9)
        u[0] = 1.0
        w = np.full(8, 2.0)
        assert potential(u, fixed_point_vector, w) == pytest.approx(2 * 0.6328430180437863, rel=1e-12)

    def test_monotone_along_empty_start(self, empty_start_trajectory, fixed_point_vector):
        phi = phi_series(empty_start_trajectory, fixed_point_vector)
        assert np.all(np.diff(phi) <= 1e-12)

    def test_trajectory_stays_below_fixed_point(self, empty_start_trajectory, fixed_point_vector):
        gaps = fixed_point_vector[None, :] - empty_start_trajectory.states
        assert gaps.min() > -1e-9


class TestFitDecay:
    def test_exact_exponential_input(self):
        # three equal levels holding gaps (2/3) e^(-0.3 t): Phi = 2 e^(-0.3 t)
        times = np.linspace(0.0, 20.0, 101)
        pi = np.array([1.0, 0.7, 0.7, 0.7])
        states = np.empty((times.size, 4))
        states[:, 0] = 1.0
        for j in range(1, 4):
            states[:, j] = 0.7 - (2.0 / 3.0) * np.exp(-0.3 * times)
        traj = Trajectory(times, states)
        c0, delta, r2 = fit_decay(traj, pi, (0.0, 20.0))
        assert c0 == pytest.approx(2.0, abs=1e-9)
        assert delta == pytest.approx(0.3, abs=1e-9)
        assert r2 == pytest.approx(1.0, abs=1e-9)

    def test_constant_potential(self):
        times = np.linspace(0.0, 5.0, 30)
        pi = np.array([1.0, 0.8])
        states = np.column_stack([np.ones_like(times), np.full_like(times, 0.3)])
        traj = Trajectory(times, states)
        _, delta, _ = fit_decay(traj, pi, (0.0, 5.0))
        assert delta == pytest.approx(0.0, abs=1e-12)

    def test_supermarket_flow_decays(self, empty_start_trajectory, fixed_point_vector):
        c0, delta, r2 = fit_decay(empty_start_trajectory, fixed_point_vector, (5.0, 40.0))
        assert delta > 0.0
        assert r2 > 0.98

    def test_insufficient_points(self, empty_start_trajectory, fixed_point_vector):
        with pytest.raises(InsufficientPoints):
            fit_decay(empty_start_trajectory, fixed_point_vector, (44.96, 45.0))


class TestLipschitz:
    def test_identical_pairs_skipped(self):
        drift = lambda u: drift_exponential(u, LAM, MU, 1)
        y = np.array([1.0, 0.5, 0.2])
        assert lipschitz_estimate(drift, [(y, y)]) == 0.0

    def test_d_one_linear_bound(self):
        drift = lambda u: drift_exponential(u, LAM, MU, 1)
        rng = np.random.default_rng(13)
        pairs = []
        for _ in range(200):
            a = np.sort(rng.uniform(0.0, 1.0, 6))[::-1].copy()
            b = np.sort(rng.uniform(0.0, 1.0, 6))[::-1].copy()
            a[0] = b[0] = 1.0
            pairs.append((a, b))
        est = lipschitz_estimate(drift, pairs)
        assert 0.0 < est <= LAM + 2 * MU + 1e-9

    def test_power_d_bound_and_no_divergence(self):
        drift = lambda u: drift_exponential(u, LAM, MU, D)
        rng = np.random.default_rng(29)
        pairs = []
        for _ in range(2000):
            a = np.sort(rng.uniform(0.0, 1.0, 6))[::-1].copy()
            a[0] = 1.0
            eps = rng.uniform(-1e-9, 1e-9, 6)
            b = np.clip(a + eps, 0.0, 1.0)
            b[0] = 1.0
            pairs.append((a, b))
            b2 = np.sort(rng.uniform(0.0, 1.0, 6))[::-1].copy()
            b2[0] = 1.0
            pairs.append((a, b2))
        est = lipschitz_estimate(drift, pairs)
        # each component sees two arrival powers (levels k-1 and k) and two
        # service flows, so the sup-norm operator bound is 2 d lam + 2 mu
        assert 0.0 < est <= 2 * D * LAM + 2 * MU + 1e-9
