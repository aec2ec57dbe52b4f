import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saferule.discretize import discretize_quantile
from saferule.rules import RuleSegment, count_all_rules, matches
from saferule.tree import children, enumerate_all, enumerate_segments, root, walk

from .helpers import alphabets


class Data:
    def __init__(self, xbar, s):
        self.xbar = np.asarray(xbar)
        self.s = s


def brute_segments(s):
    ranges = [[(a, b) for a in range(k) for b in range(a, k)] for k in s]
    return {RuleSegment(tuple(a for a, _ in c), tuple(b for _, b in c)) for c in itertools.product(*ranges)}


def test_root_matches_all_samples():
    ds = discretize_quantile(np.random.default_rng(0).normal(size=(9, 2)), 3)
    r = root(ds)
    assert r.seg == RuleSegment.full(ds.s)
    assert r.matched.tolist() == list(range(9))
    assert r.is_root


def test_root_children_order_for_3x3():
    kids = children(root(Data(np.zeros((1, 2), int), (3, 3))))
    assert [(k.lo, k.hi) for k in kids] == [
        ((0, 0), (1, 2)),
        ((1, 0), (2, 2)),
        ((0, 0), (2, 1)),
        ((0, 1), (2, 2)),
    ]
    assert [k.tau for k in kids] == [0, 0, 1, 1]


def test_point_segment_is_a_leaf():
    node = root(Data(np.zeros((1, 2), int), (1, 1)))
    assert children(node) == []


def test_node_counts_3x3():
    segs = list(enumerate_segments((3, 3)))
    assert len(segs) == 36
    assert len(list(enumerate_segments((3, 3), max_features=1))) == 1 + 5 + 5


def test_two_level_alphabet():
    assert [(r.lo, r.hi) for r in enumerate_segments((2,))] == [((0,), (1,)), ((0,), (0,)), ((1,), (1,))]


def test_bad_cap():
    with pytest.raises(ValueError):
        root(Data(np.zeros((1, 1), int), (2,)), max_features=0)


@given(alphabets(max_d=4, max_s=5))
def test_complete_and_duplicate_free(s):
    stream = list(enumerate_segments(s))
    assert len(stream) == len(set(stream)) == count_all_rules(s) + 1
    assert set(stream) == brute_segments(s)


@given(alphabets(max_d=4, max_s=4), st.integers(1, 3))
def test_feature_cap_is_exact_filter(s, cap):
    capped = set(enumerate_segments(s, cap))
    expected = {r for r in brute_segments(s) if len(r.constrained(s)) <= cap}
    assert capped == expected


@given(st.integers(0, 10_000))
def test_matched_samples_are_exact_and_nested(seed):
    rng = np.random.default_rng(seed)
    ds = discretize_quantile(rng.normal(size=(int(rng.integers(1, 25)), int(rng.integers(1, 4)))), 3)

    def visit(node):
        expected = np.flatnonzero(matches(node.seg, ds.xbar))
        assert np.array_equal(node.matched, expected)
        for child in children(node):
            assert set(child.matched) <= set(node.matched)
        return True

    assert walk(root(ds), visit) == count_all_rules(ds.s) + 1


def test_walk_prunes_subtrees():
    ds = Data(np.zeros((1, 2), int), (3, 3))
    seen = []

    def visit(node):
        seen.append(node.seg)
        return node.is_root  # only expand the root
    assert walk(root(ds), visit) == 5
    assert len(seen) == 5


def test_enumerate_all_yields_nodes_in_walk_order():
    ds = Data(np.array([[0, 1], [2, 2]]), (3, 3))
    order = []
    walk(root(ds), lambda n: order.append(n.seg) or True)
    assert [n.seg for n in enumerate_all(ds)] == order


@given(alphabets(max_d=3, max_s=4), st.one_of(st.none(), st.integers(1, 2)))
def test_has_children_agrees_with_children(s, cap):
    from saferule.tree import has_children

    def visit(node):
        assert has_children(node) == bool(children(node))
        return True

    walk(root(Data(np.zeros((1, len(s)), int), s), cap), visit)
