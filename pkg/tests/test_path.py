import io
import json

import numpy as np
import pytest

from saferule import oracle
from saferule.discretize import discretize_quantile
from saferule.encoding import ProblemEncoding, Task
from saferule.path import (
    ActiveRuleCount,
    CrossValidation,
    FixedLambda,
    PathConfig,
    cross_validate,
    fit,
    lambda_grid,
    lambda_max,
    parse_criterion,
    run_path,
    score,
    select_model,
)
from saferule.rules import count_all_rules
from saferule.solver import SolverConfig, solve_restricted

from .helpers import small_instance


def test_constant_labels_give_zero_lambda_max():
    X = np.random.default_rng(0).normal(size=(10, 2))
    ds = discretize_quantile(X, 3)
    enc = ProblemEncoding("regression", X, ds.xbar, ds.s, np.full(10, 2.0))
    assert lambda_max(enc) == 0.0
    res = run_path(enc, PathConfig(n_steps=5))
    assert len(res.steps) == 1 and not res.steps[0].state.eta.any()


def test_tiny_lambda_max_by_hand():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(6, 2))
    ds = discretize_quantile(X, 2)
    assert ds.s == (2, 2)
    y = rng.normal(size=6)
    enc = ProblemEncoding("regression", X, ds.xbar, ds.s, y)
    r = y - y.mean()
    cols = [X[:, 0], X[:, 1]]
    for a0, b0 in [(0, 0), (0, 1), (1, 1)]:
        for a1, b1 in [(0, 0), (0, 1), (1, 1)]:
            if (a0, b0, a1, b1) != (0, 1, 0, 1):
                cols.append(((ds.xbar[:, 0] >= a0) & (ds.xbar[:, 0] <= b0)
                             & (ds.xbar[:, 1] >= a1) & (ds.xbar[:, 1] <= b1)).astype(float))
    assert len(cols) == 2 + 8
    assert lambda_max(enc) == pytest.approx(max(abs(c @ r) for c in cols), rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_lambda_max_matches_brute_force(task, seed):
    enc = small_instance(seed + 300, task)
    assert lambda_max(enc) == pytest.approx(oracle.brute_lambda_max(oracle.build_instance(enc)), rel=1e-10, abs=1e-12)


def test_lambda_max_certificate(task):
    for seed in range(5):
        enc = small_instance(seed + 500, task)
        lm = lambda_max(enc)
        at = fit(enc, lm).state
        assert not at.eta.any() and at.n_active_rules == 0
        half = fit(enc, lm / 2).state
        assert np.count_nonzero(half.eta) + half.n_active_rules >= 1


def test_single_step_matches_cold_start(task):
    enc = small_instance(77, task)
    lm = lambda_max(enc)
    tol = SolverConfig(gap_tol=1e-11)
    warm = run_path(enc, PathConfig(lambdas=[lm / 2]), tol).steps[-1].state
    enc_t = enc.with_regularization(lm / 2)
    cold = solve_restricted(enc_t, range(enc.d), oracle.all_segments(enc.s), cfg=tol)
    assert warm.primal == pytest.approx(cold.primal, rel=1e-9, abs=1e-9)
    inst = oracle.build_instance(enc_t)
    ref, _ = oracle.brute_solve(inst, lm / 2, lm / 2, tol=1e-11)
    if oracle.unique_optimum(inst, ref):
        for g in set(warm.zeta) | set(cold.zeta):
            assert warm.zeta.get(g, 0.0) == pytest.approx(cold.zeta.get(g, 0.0), abs=1e-5)


def test_path_objectives_match_brute_force(task):
    enc = small_instance(91, task)
    res = run_path(enc, PathConfig(n_steps=6, lambda_min_ratio=0.05), SolverConfig(gap_tol=1e-10))
    inst = oracle.build_instance(enc)
    for step in res.steps:
        ref, _ = oracle.brute_solve(inst, step.lam, step.lam, tol=1e-10)
        assert step.state.primal == pytest.approx(ref.primal, rel=1e-6, abs=1e-6)


def test_visit_counter_bounded_by_tree():
    enc = small_instance(13)
    res = run_path(enc, PathConfig(n_steps=8, lambda_min_ratio=0.05))
    total = count_all_rules(enc.s) + 1
    assert res.tree_size == total
    for step in res.steps[1:]:
        assert step.nodes_visited <= total
        if step.nodes_pruned:
            assert step.nodes_visited < total


def test_fixed_rho_path(task):
    enc = small_instance(17, task)
    rho = 0.5 * lambda_max(enc)
    lm = lambda_max(enc, rho=rho)
    res = run_path(enc, PathConfig(n_steps=4, lambda_min_ratio=0.2, rho=rho), SolverConfig(gap_tol=1e-10))
    assert res.lambda_max == pytest.approx(lm)
    assert res.steps[0].state.n_active_rules == 0
    inst = oracle.build_instance(enc)
    for step in res.steps:
        assert step.rho == rho
        ref, _ = oracle.brute_solve(inst, rho, step.lam, tol=1e-10)
        assert step.state.primal == pytest.approx(ref.primal, rel=1e-6, abs=1e-6)


def test_stop_at_rules():
    enc = small_instance(13)
    res = run_path(enc, PathConfig(n_steps=30, lambda_min_ratio=0.01, stop_at_rules=2))
    assert res.steps[-1].state.n_active_rules >= 2
    assert all(st.state.n_active_rules < 2 for st in res.steps[:-1])


def test_grid_validation():
    assert lambda_grid(10.0, PathConfig(n_steps=2, lambda_min_ratio=0.25)) == pytest.approx([10.0, 5.0, 2.5])
    with pytest.raises(ValueError):
        lambda_grid(1.0, PathConfig(lambdas=[1.0, 2.0]))
    with pytest.raises(ValueError):
        PathConfig(lambda_min_ratio=1.5)


def test_jsonl_log():
    enc = small_instance(13)
    res = run_path(enc, PathConfig(n_steps=3))
    buf = io.StringIO()
    res.write_jsonl(buf)
    lines = [json.loads(s) for s in buf.getvalue().splitlines()]
    assert [ln["step"] for ln in lines] == [0, 1, 2, 3]
    assert {"lambda", "survivors", "nodes_visited", "gap", "converged"} <= set(lines[0])


class TestSelection:
    enc = small_instance(13)
    res = run_path(enc, PathConfig(n_steps=6, lambda_min_ratio=0.05))

    def test_parse(self):
        assert parse_criterion("cv:3") == CrossValidation(3)
        assert parse_criterion("count:4") == ActiveRuleCount(4)
        assert parse_criterion("lambda:0.5") == FixedLambda(0.5)
        with pytest.raises(ValueError):
            parse_criterion("best")

    def test_count_zero_is_first_step(self):
        assert select_model(self.res, ActiveRuleCount(0)) is self.res.steps[0]

    def test_fixed_lambda_nearest(self):
        target = self.res.steps[3].lam * 1.01
        assert select_model(self.res, FixedLambda(target)) is self.res.steps[3]

    def test_single_step_path(self):
        one = run_path(self.enc, PathConfig(lambdas=[1.0]))
        for crit in (ActiveRuleCount(5), FixedLambda(100.0), CrossValidation(2)):
            assert select_model(one, crit, self.enc) is one.steps[0]

    def test_cross_validation_picks_best_score(self):
        cv = cross_validate(self.enc, self.res.lambdas, folds=3, seed=1)
        chosen = select_model(self.res, CrossValidation(3, 1), self.enc)
        assert chosen is self.res.steps[int(np.nanargmin(cv))]


def test_score():
    assert score(Task.REGRESSION, np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 2.0
    assert score(Task.CLASSIFICATION, np.array([1.0, -1.0]), np.array([0.0, 0.3])) == 0.5
