"""Shared hypothesis strategies and instance builders."""

import numpy as np
from hypothesis import strategies as st

from saferule import oracle
from saferule.encoding import Task
from saferule.rules import RuleSegment


@st.composite
def alphabets(draw, max_d=3, max_s=4):
    d = draw(st.integers(1, max_d))
    return tuple(draw(st.integers(1, max_s)) for _ in range(d))


@st.composite
def segments(draw, s):
    lo, hi = [], []
    for k in s:
        a = draw(st.integers(0, k - 1))
        b = draw(st.integers(a, k - 1))
        lo.append(a)
        hi.append(b)
    return RuleSegment(tuple(lo), tuple(hi))


def small_instance(seed, task="regression", **kw):
    return oracle.random_instance(np.random.default_rng(seed), Task(task), **kw)
