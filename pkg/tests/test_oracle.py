import numpy as np
import pytest

from saferule import oracle
from saferule.encoding import ProblemEncoding, Task
from saferule.path import lambda_max
from saferule.rules import count_all_rules, matches

from .helpers import small_instance


def test_columns_equal_rule_evaluation():
    enc = small_instance(4)
    inst = oracle.build_instance(enc)
    assert len(inst.segments) == count_all_rules(enc.s)
    for k, seg in enumerate(inst.segments):
        assert np.array_equal(inst.R[:, k], matches(seg, enc.xbar))


def test_feature_cap_filter():
    segs = oracle.all_segments((3, 3), max_features=1)
    assert len(segs) == 10


def test_cap():
    enc = ProblemEncoding("regression", np.zeros((2, 5)), np.zeros((2, 5), int), (6,) * 5, [0.0, 1.0])
    with pytest.raises(oracle.OracleCapExceeded):
        oracle.build_instance(enc)


def test_rule_max_trivial():
    enc = small_instance(4)
    inst = oracle.build_instance(enc)
    assert oracle.brute_rule_max(inst, np.zeros(enc.n)) == 0.0
    one = ProblemEncoding("regression", [[0.0]], [[1]], (3,), [1.0])
    assert oracle.brute_rule_max(oracle.build_instance(one), np.array([-2.5])) == 2.5


def test_deterministic():
    a, b = small_instance(9, "classification"), small_instance(9, "classification")
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    ia, ib = oracle.build_instance(a), oracle.build_instance(b)
    sa, _ = oracle.brute_solve(ia, 1.0, 1.0)
    sb, _ = oracle.brute_solve(ib, 1.0, 1.0)
    assert sa.primal == sb.primal and sa.zeta == sb.zeta


def test_planted_rule_is_recovered():
    rng = np.random.default_rng(0)
    xbar = rng.integers(0, 3, size=(30, 2))
    X = rng.normal(size=(30, 2))
    planted = (xbar[:, 0] == 1) & (xbar[:, 1] >= 1)
    y = np.where(planted, 2.0, 0.0)
    enc = ProblemEncoding("regression", X, xbar, (3, 3), y)
    inst = oracle.build_instance(enc)
    lam = oracle.brute_lambda_max(inst) * 0.05
    _, active = oracle.brute_solve(inst, lam, lam)
    from saferule.rules import RuleSegment

    assert RuleSegment((1, 1), (1, 2)) in active


def test_above_lambda_max_all_zero(task):
    enc = small_instance(12, task)
    inst = oracle.build_instance(enc)
    lm = oracle.brute_lambda_max(inst)
    st, active = oracle.brute_solve(inst, lm * 1.001, lm * 1.001)
    assert not active and not st.eta.any()
    assert lm == pytest.approx(lambda_max(enc), rel=1e-10)


def test_verify_suite_passes():
    recs = list(oracle.verify_suite(6, seed=3))
    assert all(r.passed for r in recs)
    assert {r.task for r in recs} == {"regression", "classification"}


def test_unique_optimum_detects_complementary_rules():
    # with one binary feature the two point rules sum to the intercept column
    xbar = np.array([[0], [0], [1], [1], [1]])
    enc = ProblemEncoding("regression", np.zeros((5, 0)), xbar, (2,), [1.0, 1.2, -1.0, -0.8, -1.1])
    inst = oracle.build_instance(enc)
    st, active = oracle.brute_solve(inst, 0.0, 0.01, tol=1e-12)
    assert len(inst.segments) == 2
    # both columns are always equicorrelated here, so uniqueness cannot be certified
    assert not oracle.unique_optimum(inst, st)
