"""Gap-safe screening of linear features and whole subtrees of rules.

Given any primal/dual feasible pair with duality gap ``G``, the dual optimum
lies in the ball of radius ``sqrt(2 G)`` around the dual point. Maximising a
column correlation over that ball (intersected with ``beta @ theta = 0``)
gives a per-column upper bound; a column whose bound falls strictly below
its penalty has a zero optimal coefficient.

For a tree node with matches ``I`` and signed dual ``w = beta * theta``,

    srpc = max(sum_{i in I, w_i > 0} w_i, -sum_{i in I, w_i < 0} w_i) + radius * sqrt(|I|)

bounds the per-rule bound of every descendant, so ``srpc < lam`` discards
the whole subtree.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import tree
from .encoding import ModelState, ProblemEncoding
from .rules import RuleSegment

log = logging.getLogger(__name__)


class SurvivorOverflow(RuntimeError):
    """Too many rules survived screening; a larger lambda is needed."""


@dataclass(frozen=True)
class SafeSphere:
    center: np.ndarray
    radius: float

    @classmethod
    def from_gap(cls, theta, gap: float) -> "SafeSphere":
        return cls(np.asarray(theta, dtype=float), math.sqrt(2.0 * max(gap, 0.0)))


@dataclass(frozen=True)
class SubtreeBound:
    u: float
    v: float
    srpc: float


@dataclass
class ScreeningStats:
    """``pruned`` counts visited nodes whose non-empty subtree was skipped."""

    visited: int = 0
    pruned: int = 0
    survivors: int = 0

    def log(self, **extra):
        log.info(json.dumps({"event": "screening", **vars(self), **extra}))


@dataclass
class ScreeningResult:
    rules: list = field(default_factory=list)  # RuleSegment, depth-first order
    matched: list = field(default_factory=list)  # matched sample indices per rule
    stats: ScreeningStats = field(default_factory=ScreeningStats)


def sphere(state: ModelState, enc: ProblemEncoding) -> SafeSphere:
    """Safe ball around the state's dual point; needs ``theta`` and ``gap`` filled."""
    if state.theta is None:
        raise ValueError("state carries no dual point; evaluate it first")
    return SafeSphere.from_gap(state.theta, state.gap)


def _ub(col: np.ndarray, sph: SafeSphere, enc: ProblemEncoding) -> float:
    spread = col @ col - (col @ enc.beta) ** 2 / enc.n
    return abs(float(col @ sph.center)) + sph.radius * math.sqrt(max(spread, 0.0))


def ub_linear(j: int, sph: SafeSphere, enc: ProblemEncoding) -> float:
    return _ub(enc.alpha_hat_column(j), sph, enc)


def ub_rule(seg: RuleSegment, sph: SafeSphere, enc: ProblemEncoding) -> float:
    return _ub(enc.alpha_tilde_column(seg), sph, enc)


def ub_linear_all(sph: SafeSphere, enc: ProblemEncoding) -> np.ndarray:
    w = enc.beta * sph.center
    spread = enc.x_sqnorm - enc.x_sum ** 2 / enc.n
    return np.abs(enc.X.T @ w) + sph.radius * np.sqrt(np.maximum(spread, 0.0))


def ub_rule_matched(idx: np.ndarray, w: np.ndarray, radius: float, n: int) -> float:
    """Per-rule bound from matched indices; ``w`` is the signed dual."""
    m = len(idx)
    return abs(float(w[idx].sum())) + radius * math.sqrt(max(m - m * m / n, 0.0))


def srpc(node: tree.TreeNode, sph: SafeSphere, enc: ProblemEncoding) -> SubtreeBound:
    w = (enc.beta * sph.center)[node.matched]
    u = max(float(w[w > 0].sum()), float(-w[w < 0].sum()))
    v = float(len(node.matched))
    return SubtreeBound(u, v, u + sph.radius * math.sqrt(v))


def screen_linear(sph: SafeSphere, enc: ProblemEncoding) -> set:
    """Indices of linear features whose optimal coefficient is certainly zero."""
    return {int(j) for j in np.flatnonzero(ub_linear_all(sph, enc) < enc.rho)}


def screen_rules(sph: SafeSphere, enc: ProblemEncoding, lam=None, start=None, cap=None) -> ScreeningResult:
    """Depth-first search for the rules that may be active at the optimum.

    Subtrees with ``srpc < lam`` are skipped; a visited non-root node is kept
    iff its own bound reaches ``lam``. Ties are kept. The result is a
    superset of the optimal active set.
    """
    lam = enc.lam if lam is None else lam
    result = ScreeningResult()
    if not enc.use_rules:
        return result
    w = enc.beta * sph.center
    wp = np.maximum(w, 0.0)
    wn = np.maximum(-w, 0.0)
    R, n = sph.radius, enc.n
    stats = result.stats

    def visit(node):
        idx = node.matched
        m = len(idx)
        p = wp[idx].sum()
        q = wn[idx].sum()
        if max(p, q) + R * math.sqrt(m) < lam:
            # only count cuts that actually skip descendants
            stats.pruned += tree.has_children(node)
            return False
        if not node.is_root:
            if abs(p - q) + R * math.sqrt(max(m - m * m / n, 0.0)) >= lam:
                result.rules.append(RuleSegment(node.lo, node.hi))
                result.matched.append(idx)
                if cap is not None and len(result.rules) > cap:
                    raise SurvivorOverflow(
                        f"more than {cap} rules survived screening at lambda={lam:.6g}; "
                        "use a larger lambda or raise the survivor cap"
                    )
        return True

    stats.visited = tree.walk(start if start is not None else enc.tree_root(), visit)
    stats.survivors = len(result.rules)
    return result
