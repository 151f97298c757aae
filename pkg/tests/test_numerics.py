import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate
from scipy.linalg import expm as sci_expm

from supermarket.errors import DomainError, Instability, NonConvergence, SingularSystem
from supermarket.numerics import (
    QuadratureSpec,
    Trajectory,
    expm_action,
    integrate,
    solve_ode,
    stationary_vector,
    survival_ph,
)


class TestIntegrate:
    def test_exponential_integral(self):
        assert integrate(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, rel=1e-10)

    def test_weibull_theta_integrand(self):
        # exp(-2 sqrt(5x)) * 25/4 integrates to 0.625: substitute t = sqrt(5x)
        f = lambda x: math.exp(-2.0 * (5.0 * x) ** 0.5) * 25.0 / 4.0
        assert integrate(f, 0.0, math.inf) == pytest.approx(0.625, rel=1e-9)

    def test_split_singular_integrand(self):
        # both one-sided limits vanish at x=1 but derivatives blow up
        def f(x):
            if x <= 0.0 or x == 1.0:
                return 0.0
            return math.exp(-2.0 * x * math.log(x) ** -2.0)

        spec = QuadratureSpec(split_points=(1.0,), tail_initial_width=4.0)
        ours = integrate(f, 0.0, math.inf, spec)
        oracle = (sci_integrate.quad(f, 0, 1, limit=400)[0]
                  + sci_integrate.quad(f, 1, np.inf, limit=400)[0])
        assert ours == pytest.approx(oracle, rel=1e-8)

    def test_finite_domain(self):
        assert integrate(lambda x: x * x, 0.0, 3.0) == pytest.approx(9.0, rel=1e-12)

    def test_empty_domain_rejected(self):
        with pytest.raises(DomainError):
            integrate(lambda x: x, 1.0, 1.0)
        with pytest.raises(DomainError):
            integrate(lambda x: x, 2.0, 1.0)

    def test_budget_exhaustion(self):
        spec = QuadratureSpec(max_panels=4)
        with pytest.raises(NonConvergence):
            integrate(lambda x: math.sin(1e4 * x), 0.0, 1.0, spec)

    @pytest.mark.parametrize("coeffs", [(1.0,), (0.5, 2.0), (0.1, 0.0, 3.0)])
    def test_nonnegative_integrand_nonnegative_result(self, coeffs):
        f = lambda x: sum(c * x ** i for i, c in enumerate(coeffs)) * math.exp(-x)
        assert integrate(f, 0.0, math.inf) >= 0.0

    def test_split_points_validation(self):
        with pytest.raises(DomainError):
            QuadratureSpec(split_points=(2.0, 1.0))
        with pytest.raises(DomainError):
            QuadratureSpec(relative_tolerance=0.0)


class TestSolveOde:
    def test_zero_field_constant(self):
        traj = solve_ode(lambda y: np.zeros_like(y), [0.3, 0.7], 2.0, 0.1)
        assert np.allclose(traj.states, [0.3, 0.7])

    def test_linear_decay(self):
        traj = solve_ode(lambda y: -y, [1.0], 1.0, 1e-3)
        assert traj.states[-1][0] == pytest.approx(math.exp(-1.0), abs=1e-8)

    def test_fourth_order_scaling(self):
        errs = []
        for step in (0.1, 0.05):
            traj = solve_ode(lambda y: -y, [1.0], 1.0, step)
            errs.append(abs(traj.states[-1][0] - math.exp(-1.0)))
        ratio = errs[0] / errs[1]
        assert 12.0 < ratio < 20.0

    def test_instability_detected(self):
        with pytest.raises(Instability):
            solve_ode(lambda y: np.ones_like(y), [0.5], 2.0, 1.0)

    def test_tiny_overshoot_clamped(self):
        traj = solve_ode(lambda y: np.full_like(y, -1e-12), [0.0], 1.0, 0.1)
        assert np.all(traj.states >= 0.0)

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0, 1.0]), np.array([[0.5]]))
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0, 0.0]), np.array([[0.5], [0.6]]))
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0]), np.array([[1.5]]))


class TestStationaryVector:
    def test_cyclic_erlang_chain_uniform(self):
        m = 4
        Q = -np.eye(m)
        for i in range(m):
            Q[i, (i + 1) % m] = 1.0
        omega = stationary_vector(Q)
        assert np.allclose(omega, 1.0 / m, atol=1e-14)

    def test_single_state(self):
        assert stationary_vector(np.array([[0.0]])) == pytest.approx([1.0])

    def test_random_irreducible_residual(self):
        rng = np.random.default_rng(7)
        Q = rng.uniform(0.1, 2.0, size=(3, 3))
        np.fill_diagonal(Q, 0.0)
        np.fill_diagonal(Q, -Q.sum(axis=1))
        omega = stationary_vector(Q)
        assert np.max(np.abs(omega @ Q)) < 1e-12
        assert abs(omega.sum() - 1.0) < 1e-14
        assert np.all(omega > 0.0)

    def test_reducible_rejected(self):
        Q = np.array([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(SingularSystem):
            stationary_vector(Q)

    def test_malformed_rejected(self):
        with pytest.raises(SingularSystem):
            stationary_vector(np.array([[-1.0, 2.0], [0.0, -1.0]]))  # bad row sums
        with pytest.raises(SingularSystem):
            stationary_vector(np.array([[1.0, -1.0], [-1.0, 1.0]]))  # negative off-diag


def _erlang2():
    alpha = np.array([1.0, 0.0])
    T = np.array([[-1.0, 1.0], [0.0, -1.0]])
    return alpha, T


class TestSurvivalPh:
    def test_at_zero(self):
        alpha, T = _erlang2()
        assert survival_ph(alpha, T, 0.0) == 1.0

    def test_single_phase_is_exponential(self):
        for eta in (0.5, 1.0, 3.0):
            for x in (0.0, 0.2, 1.0, 5.0):
                got = survival_ph(np.array([1.0]), np.array([[-eta]]), x)
                assert got == pytest.approx(math.exp(-eta * x), abs=1e-12)

    def test_erlang2_closed_form(self):
        # survival of the two-phase chain is e^-x (1 + x)
        alpha, T = _erlang2()
        assert survival_ph(alpha, T, 1.0) == pytest.approx(2.0 * math.exp(-1.0), abs=1e-12)
        for x in (0.3, 2.5, 7.0):
            assert survival_ph(alpha, T, x) == pytest.approx(math.exp(-x) * (1 + x), abs=1e-12)

    def test_against_matrix_exponential_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            m = 3
            T = rng.uniform(0.1, 1.0, size=(m, m))
            np.fill_diagonal(T, 0.0)
            np.fill_diagonal(T, -(T.sum(axis=1) + rng.uniform(0.2, 1.0, m)))
            alpha = rng.dirichlet(np.ones(m))
            for x in (0.1, 1.0, 4.0):
                oracle = float(alpha @ sci_expm(T * x) @ np.ones(m))
                assert survival_ph(alpha, T, x) == pytest.approx(oracle, abs=1e-10)

    def test_monotone_and_bounded(self):
        alpha, T = _erlang2()
        xs = np.linspace(0.0, 20.0, 200)
        vals = [survival_ph(alpha, T, x) for x in xs]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_deep_tail_underflows_to_zero(self):
        alpha, T = _erlang2()
        assert survival_ph(alpha, T, 2000.0) == 0.0

    def test_squaring_path_matches_oracle(self):
        # uniformization rate * x over the squaring threshold
        alpha, T = _erlang2()
        x = 150.0
        oracle = float(alpha @ sci_expm(T * x) @ np.ones(2))
        assert survival_ph(alpha, T, x) == pytest.approx(oracle, abs=1e-12)

    def test_expm_action_row_vector(self):
        alpha, T = _erlang2()
        v = expm_action(alpha, T, 0.7)
        oracle = alpha @ sci_expm(T * 0.7)
        assert np.allclose(v, oracle, atol=1e-12)
