import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszmatch import (
    ObservationalDataset,
    RieszRepresenter,
    WeightModel,
    constant_basis,
    catchment_indicator,
    dr_score,
    evaluate_representer,
    fit_weight_arm,
    nn_representer_values,
    nn_weight,
    nn_weights,
    polynomial_basis,
    riesz_fit,
)
from rieszmatch.equivalence import random_observational_instance
from rieszmatch.riesz import arm_objective_gradient, arm_objective_value


def balanced_dataset(n=20, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    treat = np.array([1, 0] * (n // 2))
    return ObservationalDataset(covariates=x, treatment=treat, outcome=rng.normal(size=n))


class TestFitWeightArm:
    def test_constant_basis_marginal_inverse(self):
        rng = np.random.default_rng(1)
        treat = np.array([1] * 7 + [0] * 13)
        data = ObservationalDataset(
            covariates=rng.normal(size=(20, 1)), treatment=treat, outcome=np.zeros(20)
        )
        theta = fit_weight_arm(data, 1, constant_basis(1), lam=0.0)
        np.testing.assert_allclose(theta, [20 / 7], rtol=1e-14)
        theta0 = fit_weight_arm(data, 0, constant_basis(1), lam=0.0)
        np.testing.assert_allclose(theta0, [20 / 13], rtol=1e-14)

    def test_balanced_constant_gives_two(self):
        data = balanced_dataset()
        np.testing.assert_allclose(fit_weight_arm(data, 1, constant_basis(2), 0.0), [2.0])

    def test_indicator_at_unit_equals_matching_weight(self, euclidean):
        rng = np.random.default_rng(5)
        for _ in range(5):
            data, metric, m = random_observational_instance(rng, max_n=60)
            weights = nn_weights(data, metric, m)
            for i in range(0, data.n, 5):
                arm = int(data.treatment[i])
                reference = data.covariates[data.treatment == arm]
                basis = catchment_indicator(reference, metric, m, data.covariates[i])
                theta = fit_weight_arm(data, arm, basis, lam=0.0)
                assert abs(theta[0] - weights[i]) <= 1e-12

    def test_first_order_condition(self):
        data = balanced_dataset(seed=3)
        basis = polynomial_basis(2, 2)
        for arm in (0, 1):
            theta = fit_weight_arm(data, arm, basis, lam=1e-3)
            grad = arm_objective_gradient(data, arm, basis, 1e-3, theta)
            assert np.abs(grad).max() <= 1e-10

    def test_invalid_arm(self):
        data = balanced_dataset()
        with pytest.raises(ValueError, match="arm"):
            fit_weight_arm(data, 2, constant_basis(2), 0.0)


class TestNnWeight:
    def test_unmatched_unit_weight_one(self, euclidean):
        data = ObservationalDataset(
            covariates=np.array([[0.0], [0.1], [50.0]]),
            treatment=np.array([1, 0, 0]),
            outcome=np.zeros(3),
        )
        # the far control is never used as a match
        assert nn_weight(data, euclidean, 1, 2) == 1.0

    def test_four_unit_instance(self, four_unit_dataset, euclidean):
        for i in range(4):
            assert nn_weight(four_unit_dataset, euclidean, 1, i) == 2.0

    def test_k_equals_m_gives_two(self, euclidean):
        data = ObservationalDataset(
            covariates=np.array([[0.0], [1.0], [0.4], [0.6]]),
            treatment=np.array([1, 1, 0, 0]),
            outcome=np.zeros(4),
        )
        weights = nn_weights(data, euclidean, 2)
        np.testing.assert_allclose(weights, 2.0)

    def test_weights_at_least_one(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            data, metric, m = random_observational_instance(rng, max_n=80)
            assert nn_weights(data, metric, m).min() >= 1.0


class TestRieszFit:
    def test_constant_balanced(self):
        data = balanced_dataset(seed=7)
        rep = riesz_fit(data, constant_basis(2), lam=0.0)
        x = data.covariates[0]
        assert rep.weight_model.weight(1, x) == pytest.approx(2.0)
        assert rep.weight_model.weight(0, x) == pytest.approx(2.0)
        assert evaluate_representer(rep, 1, x) == pytest.approx(2.0)
        assert evaluate_representer(rep, 0, x) == pytest.approx(-2.0)

    def test_separability_exact(self):
        from rieszmatch.equivalence import well_posed_degree

        rng = np.random.default_rng(19)
        for _ in range(20):
            data, _, _ = random_observational_instance(rng, max_n=120)
            basis = polynomial_basis(data.d, well_posed_degree(data))
            lam = float(rng.uniform(1e-4, 1e-1))
            rep = riesz_fit(data, basis, lam)
            np.testing.assert_allclose(
                rep.weight_model.theta_treated,
                fit_weight_arm(data, 1, basis, lam),
                rtol=0,
                atol=1e-12,
            )
            np.testing.assert_allclose(
                rep.weight_model.theta_control,
                fit_weight_arm(data, 0, basis, lam),
                rtol=0,
                atol=1e-12,
            )

    def test_objective_no_worse_than_zero_coefficients(self):
        rng = np.random.default_rng(23)
        data, _, _ = random_observational_instance(rng, max_n=100)
        basis = polynomial_basis(data.d, 1)
        lam = 1e-4
        rep = riesz_fit(data, basis, lam)
        zeros = np.zeros(basis.dimension)
        for arm, theta in ((1, rep.weight_model.theta_treated), (0, rep.weight_model.theta_control)):
            assert arm_objective_value(data, arm, basis, lam, theta) <= arm_objective_value(
                data, arm, basis, lam, zeros
            )

    def test_nn_representer_matches_per_point_fits(self, euclidean):
        rng = np.random.default_rng(29)
        data, metric, m = random_observational_instance(rng, max_n=50)
        alpha = nn_representer_values(data, metric, m)
        for i in range(0, data.n, 7):
            arm = int(data.treatment[i])
            reference = data.covariates[data.treatment == arm]
            basis = catchment_indicator(reference, metric, m, data.covariates[i])
            theta = fit_weight_arm(data, arm, basis, lam=0.0)
            model = WeightModel(
                basis_treated=basis,
                theta_treated=theta,
                basis_control=basis,
                theta_control=theta,
                lam=0.0,
            )
            value = evaluate_representer(RieszRepresenter(model), arm, data.covariates[i])
            assert abs(value - alpha[i]) <= 1e-12

    def test_sign_convention(self):
        rng = np.random.default_rng(31)
        data, metric, m = random_observational_instance(rng, max_n=60)
        alpha = nn_representer_values(data, metric, m)
        signs = np.sign(alpha)
        np.testing.assert_array_equal(signs, 2.0 * data.treatment - 1.0)


class TestDrScore:
    def test_perfect_regression(self):
        assert dr_score(m_value=1.5, gamma_value=2.0, alpha_value=3.0, y=2.0, tau=0.4) == pytest.approx(1.1)

    def test_zero_when_tau_matches(self):
        assert dr_score(2.0, 1.0, -2.0, 1.0, 2.0) == 0.0

    def test_arithmetic_example(self):
        assert dr_score(2.0, 1.0, -2.0, 0.0, 1.0) == 3.0

    def test_vectorized(self):
        out = dr_score(np.array([1.0, 2.0]), 0.0, 1.0, np.array([0.5, 0.5]), 1.0)
        np.testing.assert_allclose(out, [0.5, 1.5])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            dr_score(np.inf, 0.0, 0.0, 0.0, 0.0)

    @given(
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
    )
    @settings(max_examples=60, deadline=None)
    def test_linear_in_tau_with_slope_minus_one(self, m, g, a, y, tau1, tau2):
        lhs = dr_score(m, g, a, y, tau1) - dr_score(m, g, a, y, tau2)
        assert lhs == pytest.approx(tau2 - tau1, abs=1e-9)
