import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saferule import oracle
from saferule.encoding import (
    ModelState,
    ProblemEncoding,
    Task,
    dual_point,
    dual_value,
    evaluate_state,
    is_dual_feasible,
    loss,
    loss_grad,
    predictions,
    primal_value,
    rule_corr_max,
)

from .helpers import small_instance


def one_feature(task, X, y, lam=1.0):
    X = np.asarray(X, float).reshape(-1, 1)
    xbar = np.zeros(X.shape, int)
    return ProblemEncoding(task, X, xbar, (1,), np.asarray(y, float), rho=lam, lam=lam)


class TestConstants:
    def test_regression(self):
        enc = one_feature("regression", [1, 2], [0.5, -1.0])
        assert enc.beta.tolist() == [1, 1]
        assert enc.gamma.tolist() == [-0.5, 1.0]
        assert enc.delta.tolist() == [0.5, -1.0]
        assert enc.epsilon == -np.inf

    def test_classification(self):
        enc = one_feature("classification", [1, 2], [1, -1])
        assert enc.beta.tolist() == [1, -1]
        assert enc.gamma.tolist() == [0, 0]
        assert enc.delta.tolist() == [1, 1]
        assert enc.epsilon == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            one_feature("classification", [1, 2], [1, 0])
        with pytest.raises(ValueError):
            one_feature("regression", [1, 2], [1])
        with pytest.raises(ValueError):
            ProblemEncoding("regression", np.ones((2, 1)), np.array([[0], [3]]), (2,), [0.0, 1.0])


class TestLoss:
    def test_values(self):
        assert loss([0.0, 2.0, -1.0], Task.REGRESSION).tolist() == [0.0, 2.0, 0.5]
        assert loss([0.0, 1.0, 3.0, -1.0], Task.CLASSIFICATION).tolist() == [0.5, 0.0, 0.0, 2.0]

    @pytest.mark.parametrize("task", list(Task))
    def test_gradient_matches_central_differences(self, task):
        u = np.linspace(-3, 3, 61)
        u = u[np.abs(u - 1.0) > 1e-3]  # skip the hinge kink
        h = 1e-6
        fd = (loss(u + h, task) - loss(u - h, task)) / (2 * h)
        g = loss_grad(u, task)
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-8)

    def test_hinge_kink_one_sided(self):
        h = 1e-7
        left = (loss(1.0, Task.CLASSIFICATION) - loss(1.0 - h, Task.CLASSIFICATION)) / h
        right = (loss(1.0 + h, Task.CLASSIFICATION) - loss(1.0, Task.CLASSIFICATION)) / h
        assert abs(left) < 1e-6 and right == 0.0
        assert loss_grad(1.0, Task.CLASSIFICATION) == 0.0


class TestObjectives:
    def test_zero_model_primal(self):
        y = np.array([1.0, -2.0, 0.5])
        enc = one_feature("regression", [0, 1, 2], y)
        assert primal_value(ModelState.zero(1), enc) == pytest.approx(0.5 * (y @ y))
        enc = one_feature("classification", [0, 1, 2], [1, -1, 1])
        assert primal_value(ModelState.zero(1), enc) == pytest.approx(1.5)

    def test_dual_values(self):
        enc = one_feature("regression", [0, 1, 2], [1.0, -2.0, 0.5])
        delta = enc.delta
        assert dual_value(np.zeros(3), enc) == 0.0
        assert dual_value(delta, enc) == pytest.approx(0.5 * delta @ delta)
        assert dual_value(delta / 2, enc) == pytest.approx(3 / 8 * delta @ delta)

    def test_two_sample_lasso_closed_form(self):
        # x = (1, -1), y = (3, -1): centred fit has slope soft(4, lam)/2, intercept 1
        lam = 1.0
        enc = one_feature("regression", [1, -1], [3, -1], lam)
        slope = (4 - lam) / 2
        st = ModelState(np.array([slope]), {}, 1.0)
        expected = 0.5 * ((3 - 1 - slope) ** 2 + (-1 - 1 + slope) ** 2) + lam * slope
        assert primal_value(st, enc) == pytest.approx(expected)
        assert evaluate_state(st, enc).gap == pytest.approx(0.0, abs=1e-12)


class TestDualPoint:
    def test_classification_all_margins_satisfied(self):
        enc = one_feature("classification", [0, 1, 2, 3], [1, -1, 1, -1])
        f = enc.y * 2.0
        theta, _ = dual_point(f, enc)
        assert np.all(theta == 0.0)

    def test_zero_model_scale_is_one_at_lambda_max(self):
        from saferule.path import lambda_max

        enc = small_instance(3, "regression")
        lm = lambda_max(enc)
        enc = enc.with_regularization(lm)
        theta, info = dual_point(predictions(ModelState.zero(enc.d, enc.y.mean()), enc), enc)
        assert info["scale"] == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(theta, enc.y - enc.y.mean())

    @given(st.integers(0, 10_000), st.sampled_from(list(Task)), st.floats(0.05, 2.0))
    def test_feasible_and_weakly_dual(self, seed, task, lam_scale):
        rng = np.random.default_rng(seed)
        enc = oracle.random_instance(rng, task, n_range=(5, 25), s_max=3)
        enc = enc.with_regularization(lam_scale * enc.n ** 0.5)
        state = ModelState(rng.normal(size=enc.d), {}, float(rng.normal()))
        inst = oracle.build_instance(enc)
        theta, _ = dual_point(predictions(state, enc), enc)
        w = enc.beta * theta
        assert abs(enc.beta @ theta) <= 1e-10 * max(1.0, np.linalg.norm(theta))
        if task is Task.CLASSIFICATION:
            assert theta.min() >= 0
        assert np.abs(enc.X.T @ w).max() <= enc.rho * (1 + 1e-12)
        assert oracle.brute_rule_max(inst, w) <= enc.lam * (1 + 1e-12)
        assert is_dual_feasible(theta, enc)
        assert dual_value(theta, enc) <= primal_value(state, enc) + 1e-9


@given(st.integers(0, 10_000), st.sampled_from(list(Task)))
def test_rule_corr_max_matches_brute_force(seed, task):
    rng = np.random.default_rng(seed)
    enc = oracle.random_instance(rng, task, n_range=(1, 30))
    w = rng.normal(size=enc.n)
    got, _ = rule_corr_max(enc, w)
    assert got == pytest.approx(oracle.brute_rule_max(oracle.build_instance(enc), w), rel=1e-12, abs=1e-12)


def test_rule_corr_max_trivial_cases():
    enc = small_instance(1)
    assert rule_corr_max(enc, np.zeros(enc.n))[0] == 0.0
    single = ProblemEncoding("regression", [[0.3, 1.0]], [[1, 0]], (3, 2), [2.0])
    assert rule_corr_max(single, np.array([-0.7]))[0] == pytest.approx(0.7)
