import numpy as np
import pytest

from tcmv import (
    MarketParams,
    ObjectiveSpec,
    SingularMarketError,
    diagnose_one_factor,
    solve_model1,
)
from tcmv.model1 import ARBITRAGE, SHARED_RISK_CONSTRAINT


class TestClosedForm:
    def test_zero_excess_return(self):
        p = MarketParams([0.04, 0.04], [[0.3, 0.0], [0.0, 0.2]], 0.04)
        sol = solve_model1(p, ObjectiveSpec(2.0, 1.0))
        assert np.allclose(sol.control(0.0), 0.0)
        assert sol.value(0.3, 1.7) == pytest.approx(np.exp(0.04 * 0.7) * 1.7)

    def test_terminal_control(self, diagonal_params, objective):
        sol = solve_model1(diagonal_params, objective)
        assert np.allclose(sol.control(1.0), [0.16 / 0.27, 0.08 / 0.12], atol=1e-12)
        assert sol.control(1.0) == pytest.approx([0.59259, 0.66667], abs=1e-5)

    def test_control_at_time_zero(self, diagonal_params, objective):
        sol = solve_model1(diagonal_params, objective)
        assert sol.control(0.0) == pytest.approx([0.56936, 0.64052], abs=1e-5)

    def test_theta_sq_and_value(self, diagonal_params, objective):
        sol = solve_model1(diagonal_params, objective)
        assert sol.theta_sq == pytest.approx(0.16**2 / 0.09 + 0.08**2 / 0.04)
        assert sol.value(0.0, 1.0) == pytest.approx(np.exp(0.04) + 0.44444 / 6, abs=1e-5)
        assert sol.expected_wealth(0.0, 1.0) == pytest.approx(
            np.exp(0.04) + 0.44444 / 3, abs=1e-5
        )

    def test_first_order_condition_residual(self, diagonal_params, objective):
        # at the optimum: (alpha - r 1) = gamma e^{r(T-t)} sigma sigma^T u
        sol = solve_model1(diagonal_params, objective)
        for t in (0.0, 0.4, 1.0):
            u = sol.control(t)
            lhs = diagonal_params.alpha - diagonal_params.r
            cov = diagonal_params.sigma @ diagonal_params.sigma.T
            rhs = objective.gamma * np.exp(0.04 * (1.0 - t)) * (cov @ u)
            assert np.allclose(lhs, rhs, atol=1e-12)

    def test_control_independent_of_wealth_and_exponential_shape(
        self, diagonal_params, objective
    ):
        sol = solve_model1(diagonal_params, objective)
        assert np.allclose(sol.control(0.3), sol.control(1.0) * np.exp(-0.04 * 0.7))

    def test_gamma_scaling(self, diagonal_params):
        u1 = solve_model1(diagonal_params, ObjectiveSpec(1.0, 1.0)).control(0.2)
        u2 = solve_model1(diagonal_params, ObjectiveSpec(2.0, 1.0)).control(0.2)
        assert np.allclose(u1, 2.0 * u2)

    def test_variance_penalty_nonnegative(self, diagonal_params, objective):
        sol = solve_model1(diagonal_params, objective)
        for t in np.linspace(0.0, 1.0, 7):
            gap = sol.expected_wealth(t, 1.3) - sol.value(t, 1.3)
            assert gap == pytest.approx(sol.theta_sq * (1.0 - t) / 6)
            assert gap >= 0.0
            assert sol.terminal_variance(t) >= 0.0

    def test_general_dimension(self):
        rng = np.random.default_rng(4)
        sigma = rng.uniform(0.1, 0.4, size=(4, 4)) + np.eye(4)
        p = MarketParams(rng.uniform(0.0, 0.3, size=4), sigma, 0.03)
        sol = solve_model1(p, ObjectiveSpec(2.0, 2.0))
        cov = sigma @ sigma.T
        assert np.allclose(cov @ sol.weights, p.alpha - p.r)


class TestSingularCovariance:
    def test_routes_to_diagnosis(self):
        p = MarketParams([0.2, 0.2], [[0.3, 0.0], [0.3, 0.0]], 0.04)
        with pytest.raises(SingularMarketError) as err:
            solve_model1(p, ObjectiveSpec(1.0, 1.0))
        assert err.value.diagnosis is not None
        assert err.value.diagnosis.classification == SHARED_RISK_CONSTRAINT

    def test_equal_price_of_risk_constraint_value(self):
        p = MarketParams([0.2, 0.2], [[0.3, 0.0], [0.3, 0.0]], 0.04)
        diag = diagnose_one_factor(p, ObjectiveSpec(1.0, 1.0))
        assert diag.equal_price_of_risk
        assert diag.constraint_value(1.0) == pytest.approx(0.16 / 0.3)
        # V and g keep the closed-form shape with theta = 0.5333...
        assert diag.value(0.0, 1.0) == pytest.approx(
            np.exp(0.04) + 0.5 * (0.16 / 0.3) ** 2
        )

    def test_unequal_price_of_risk_is_arbitrage(self):
        p = MarketParams([0.2, 0.12], [[0.3, 0.0], [0.3, 0.0]], 0.04)
        diag = diagnose_one_factor(p, ObjectiveSpec(1.0, 1.0))
        assert diag.classification == ARBITRAGE
        with pytest.raises(ValueError):
            diag.constraint_value(0.5)

    def test_two_factor_symmetric_stocks_not_singular(self):
        # independent factors with equal entries: regular problem, equal splits
        p = MarketParams([0.2, 0.2], [[0.3, 0.0], [0.0, 0.3]], 0.04)
        sol = solve_model1(p, ObjectiveSpec(2.0, 1.0))
        u = sol.control(1.0)
        assert u[0] == pytest.approx(u[1])
        assert u[0] == pytest.approx(0.16 / (2.0 * 0.09))
