"""Duplicate-free enumeration of every rule segment as a search tree.

Starting from the all-covering segment ``(0, s-1)``, a node spawns children
by shrinking one feature range by one step: the upper end first (only while
the lower end is still 0), then the lower end. Only features at or after the
last shrunk feature ``tau`` may be touched, which is what makes the tree a
tree rather than a DAG. Every child matches a subset of its parent's
samples, so bounds computed on a node also hold on all of its descendants.

Nothing is materialised: children are produced on demand and each node
carries the sorted indices of the training samples it matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .rules import RuleSegment


class TreeContext:
    """Read-only data shared by every node of one tree."""

    def __init__(self, xbar, s, max_features=None):
        xbar = np.asarray(xbar)
        self.s = tuple(int(k) for k in s)
        self.d = len(self.s)
        if xbar.ndim != 2 or xbar.shape[1] != self.d:
            raise ValueError(f"xbar must be n x {self.d}")
        self.cols = [np.ascontiguousarray(xbar[:, j]) for j in range(self.d)]
        self.n = xbar.shape[0]
        if max_features is not None and max_features < 1:
            raise ValueError("max_features must be >= 1")
        self.max_features = max_features


@dataclass
class TreeNode:
    lo: tuple
    hi: tuple
    tau: int  # 0-based index of the last shrunk feature (0 at the root)
    matched: np.ndarray
    n_constrained: int
    ctx: TreeContext

    @property
    def seg(self) -> RuleSegment:
        return RuleSegment(self.lo, self.hi)

    @property
    def is_root(self) -> bool:
        return self.n_constrained == 0

    def __repr__(self):
        return f"TreeNode(lo={self.lo}, hi={self.hi}, tau={self.tau}, m={len(self.matched)})"


def root(ds, max_features=None) -> TreeNode:
    """Root node for any object exposing ``xbar`` and ``s``."""
    ctx = TreeContext(ds.xbar, ds.s, max_features)
    if ctx.n == 0:
        raise ValueError("dataset has no samples")
    return TreeNode(
        lo=(0,) * ctx.d,
        hi=tuple(k - 1 for k in ctx.s),
        tau=0,
        matched=np.arange(ctx.n),
        n_constrained=0,
        ctx=ctx,
    )


def children(node: TreeNode) -> list:
    ctx = node.ctx
    capped = ctx.max_features is not None and node.n_constrained >= ctx.max_features
    lo, hi, idx = node.lo, node.hi, node.matched
    out = []
    for j in range(node.tau, ctx.d):
        a, b = lo[j], hi[j]
        if a >= b:
            continue
        fresh = a == 0 and b == ctx.s[j] - 1
        if fresh and capped:
            continue
        nc = node.n_constrained + fresh
        col = ctx.cols[j][idx]
        if a == 0:
            out.append(TreeNode(lo, hi[:j] + (b - 1,) + hi[j + 1:], j, idx[col <= b - 1], nc, ctx))
        out.append(TreeNode(lo[:j] + (a + 1,) + lo[j + 1:], hi, j, idx[col >= a + 1], nc, ctx))
    return out


def has_children(node: TreeNode) -> bool:
    """Whether ``children(node)`` would be non-empty, without building them."""
    ctx = node.ctx
    capped = ctx.max_features is not None and node.n_constrained >= ctx.max_features
    for j in range(node.tau, ctx.d):
        a, b = node.lo[j], node.hi[j]
        if a < b and not (capped and a == 0 and b == ctx.s[j] - 1):
            return True
    return False


def walk(start: TreeNode, visit: Callable[[TreeNode], bool]) -> int:
    """Depth-first pre-order traversal from ``start``.

    ``visit(node)`` returns whether to descend into the node's subtree.
    Returns the number of nodes visited.
    """
    stack = [start]
    count = 0
    while stack:
        node = stack.pop()
        count += 1
        if visit(node):
            stack.extend(reversed(children(node)))
    return count


def enumerate_all(ds, max_features=None) -> Iterator[TreeNode]:
    """Stream every node (root included) in depth-first order."""
    stack = [root(ds, max_features)]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


class _Alphabet:
    """Stand-in dataset (a single all-zero sample) for enumeration without data."""

    def __init__(self, s):
        self.s = tuple(s)
        self.xbar = np.zeros((1, len(self.s)), dtype=np.int64)


def enumerate_segments(s, max_features=None) -> Iterator[RuleSegment]:
    """Every segment for alphabet sizes ``s`` (root first)."""
    for node in enumerate_all(_Alphabet(s), max_features):
        yield node.seg
