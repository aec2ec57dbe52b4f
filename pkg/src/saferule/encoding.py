"""Regression and classification written as one L1-penalised problem.

Both tasks minimise ``sum_i loss(z_i) + rho*|eta|_1 + lam*|zeta|_1`` where
``z_i = beta_i * f_i + gamma_i`` and ``f`` is the model output
``X @ eta + sum_k zeta_k r_k(xbar) + b``:

==============  ===========  ========  =========  =======  =========
task            loss(u)      beta      gamma      delta    epsilon
==============  ===========  ========  =========  =======  =========
regression      u^2/2        1         -y         y        -inf
classification  (1-u)_+^2/2  y         0          1        0
==============  ===========  ========  =========  =======  =========

The dual is ``max -|theta|^2/2 + delta @ theta`` subject to
``|X_j^T (beta*theta)| <= rho``, ``|sum_{i in k} beta_i theta_i| <= lam`` for
every rule ``k``, ``beta @ theta = 0`` and ``theta >= epsilon``. Every
correlation with a column is therefore a plain dot product with the
"signed dual" ``w = beta * theta``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import tree
from .rules import RuleSegment, matches


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


def loss(u, task: Task):
    u = np.asarray(u, dtype=float)
    if task is Task.REGRESSION:
        return 0.5 * u * u
    return 0.5 * np.maximum(0.0, 1.0 - u) ** 2


def loss_grad(u, task: Task):
    u = np.asarray(u, dtype=float)
    if task is Task.REGRESSION:
        return u
    return -np.maximum(0.0, 1.0 - u)


@dataclass(frozen=True, eq=False)
class ProblemEncoding:
    task: Task
    X: np.ndarray  # n x d, linear part
    xbar: np.ndarray  # n x d, discretized levels used by rules
    s: tuple
    y: np.ndarray
    rho: float = 1.0
    lam: float = 1.0
    max_features: Optional[int] = None
    use_rules: bool = True

    def __post_init__(self):
        task = Task(self.task)
        object.__setattr__(self, "task", task)
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        xbar = np.asarray(self.xbar, dtype=np.int64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "xbar", xbar)
        object.__setattr__(self, "s", tuple(int(k) for k in self.s))
        n = len(y)
        if n == 0:
            raise ValueError("no samples")
        if X.shape[0] != n or xbar.shape[0] != n:
            raise ValueError("X, xbar and y disagree on the number of samples")
        if xbar.shape[1] != len(self.s):
            raise ValueError("xbar and s disagree on the number of features")
        if xbar.size and (xbar.min() < 0 or np.any(xbar.max(axis=0) >= np.asarray(self.s))):
            raise ValueError("xbar has levels outside [0, s-1]")
        if task is Task.CLASSIFICATION and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("classification labels must be -1 or +1")
        if self.rho < 0 or self.lam < 0:
            raise ValueError("regularisation parameters must be non-negative")

    @classmethod
    def from_data(cls, task, X, ds, y, **kw) -> "ProblemEncoding":
        return cls(task, X, ds.xbar, ds.s, y, **kw)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def beta(self) -> np.ndarray:
        return np.ones(self.n) if self.task is Task.REGRESSION else self.y.copy()

    @cached_property
    def gamma(self) -> np.ndarray:
        return -self.y if self.task is Task.REGRESSION else np.zeros(self.n)

    @cached_property
    def delta(self) -> np.ndarray:
        return self.y.copy() if self.task is Task.REGRESSION else np.ones(self.n)

    @property
    def epsilon(self) -> float:
        return -np.inf if self.task is Task.REGRESSION else 0.0

    @cached_property
    def x_sqnorm(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.X, self.X)

    @cached_property
    def x_sum(self) -> np.ndarray:
        return self.X.sum(axis=0)

    def alpha_hat_column(self, j: int) -> np.ndarray:
        return self.beta * self.X[:, j]

    def alpha_tilde_column(self, seg: RuleSegment) -> np.ndarray:
        return self.beta * matches(seg, self.xbar)

    def with_regularization(self, lam: float, rho: Optional[float] = None) -> "ProblemEncoding":
        """Same data, new penalties; ``rho`` defaults to ``lam``."""
        new = dataclasses.replace(self, lam=float(lam), rho=float(lam if rho is None else rho))
        # data-only caches carry over
        for key in ("beta", "gamma", "delta", "x_sqnorm", "x_sum"):
            if key in self.__dict__:
                new.__dict__[key] = self.__dict__[key]
        return new

    def tree_root(self) -> tree.TreeNode:
        return tree.root(self, self.max_features)

    def z(self, f: np.ndarray) -> np.ndarray:
        """Loss arguments for model outputs ``f``."""
        return self.beta * f + self.gamma

    def signed_residual(self, f: np.ndarray) -> np.ndarray:
        """``beta * (-loss'(z))``: the signed dual before any feasibility fix."""
        if self.task is Task.REGRESSION:
            return self.y - f
        return self.y * np.maximum(0.0, 1.0 - self.y * f)


@dataclass
class ModelState:
    eta: np.ndarray
    zeta: dict  # RuleSegment -> coefficient, active rules only
    b: float
    theta: Optional[np.ndarray] = None
    primal: float = np.nan
    dual: float = np.nan
    gap: float = np.inf
    lam: float = np.nan
    rho: float = np.nan
    converged: bool = False
    iterations: int = 0
    stats: dict = field(default_factory=dict)

    @classmethod
    def zero(cls, d: int, b: float = 0.0) -> "ModelState":
        return cls(np.zeros(d), {}, float(b))

    @property
    def active_rules(self) -> list:
        return sorted(k for k, v in self.zeta.items() if v != 0.0)

    @property
    def n_active_rules(self) -> int:
        return sum(1 for v in self.zeta.values() if v != 0.0)


def predict_levels(eta, zeta, b, X, xbar) -> np.ndarray:
    """Model output for raw features ``X`` and their levels ``xbar``."""
    f = np.asarray(X, dtype=float) @ np.asarray(eta, dtype=float) + b
    for seg, coef in zeta.items():
        if coef != 0.0:
            f = f + coef * matches(seg, xbar)
    return f


def predictions(state: ModelState, enc: ProblemEncoding) -> np.ndarray:
    return predict_levels(state.eta, state.zeta, state.b, enc.X, enc.xbar)


def primal_from_predictions(f, eta, zeta_values, enc: ProblemEncoding) -> float:
    zeta_values = np.fromiter(zeta_values, dtype=float)
    return float(
        loss(enc.z(f), enc.task).sum()
        + enc.rho * np.abs(eta).sum()
        + enc.lam * np.abs(zeta_values).sum()
    )


def primal_value(state: ModelState, enc: ProblemEncoding) -> float:
    f = predictions(state, enc)
    return primal_from_predictions(f, state.eta, state.zeta.values(), enc)


def dual_value(theta, enc: ProblemEncoding) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(-0.5 * theta @ theta + enc.delta @ theta)


def rule_corr_max(enc: ProblemEncoding, w: np.ndarray, floor: float = 0.0):
    """Largest ``|sum_{i matched by k} w_i|`` over all rules, by branch and bound.

    A subtree is skipped once ``max(sum of positive w, -sum of negative w)``
    over its root's matches cannot beat both the best value so far and
    ``floor``. The result is exact whenever it exceeds ``floor``.
    Returns ``(value, nodes_visited)``.
    """
    if not enc.use_rules:
        return 0.0, 0
    wp = np.maximum(w, 0.0)
    wn = np.maximum(-w, 0.0)
    best = 0.0

    def visit(node):
        nonlocal best
        idx = node.matched
        p = wp[idx].sum()
        q = wn[idx].sum()
        if not node.is_root:
            v = abs(p - q)
            if v > best:
                best = v
        return max(p, q) > max(best, floor)

    visited = tree.walk(enc.tree_root(), visit)
    return float(best), visited


_MAX_BALANCE_ROUNDS = 50


def _balance(theta: np.ndarray, enc: ProblemEncoding) -> np.ndarray:
    """Bring ``theta`` onto ``beta @ theta = 0`` (and ``theta >= 0`` for classification)."""
    beta, n = enc.beta, enc.n
    theta = theta - (beta @ theta / n) * beta
    if enc.task is Task.REGRESSION:
        return theta
    for _ in range(_MAX_BALANCE_ROUNDS):
        theta = np.maximum(theta, 0.0)
        off = beta @ theta
        if abs(off) < 1e-10:
            break
        theta = theta - (off / n) * beta
    else:
        return np.zeros(n)
    # exact finish: shrink the heavier class so both sides carry equal mass
    pos = theta[beta > 0].sum()
    neg = theta[beta < 0].sum()
    if pos > neg:
        theta = np.where(beta > 0, theta * (neg / pos), theta)
    elif neg > pos:
        theta = np.where(beta < 0, theta * (pos / neg), theta)
    return theta


def dual_point(f: np.ndarray, enc: ProblemEncoding, rule_max: Optional[Callable] = None):
    """Dual-feasible point built from model outputs ``f``.

    ``rule_max(enc, w, floor)`` must return the largest rule correlation with
    ``w`` (exact above ``floor``) and a visited-node count; the tree-pruned
    :func:`rule_corr_max` is used by default.
    Returns ``(theta, info)``.
    """
    rule_max = rule_max or rule_corr_max
    theta = _balance(enc.beta * enc.signed_residual(f), enc)
    w = enc.beta * theta
    scale = 1.0
    lin = float(np.abs(enc.X.T @ w).max()) if enc.d else 0.0
    if lin > enc.rho:
        scale = enc.rho / lin
    rmax, visited = rule_max(enc, w, enc.lam) if enc.use_rules else (0.0, 0)
    if rmax > enc.lam:
        scale = min(scale, enc.lam / rmax)
    return scale * theta, {"scale": scale, "linear_max": lin, "rule_max": rmax, "nodes": visited}


def dual_feasible_point(state: ModelState, enc: ProblemEncoding, rule_max=None) -> np.ndarray:
    theta, _ = dual_point(predictions(state, enc), enc, rule_max)
    return theta


def evaluate_state(state: ModelState, enc: ProblemEncoding, rule_max=None) -> ModelState:
    """Fill in ``theta``, primal/dual values and gap for ``state`` under ``enc``."""
    f = predictions(state, enc)
    theta, info = dual_point(f, enc, rule_max)
    primal = primal_from_predictions(f, state.eta, state.zeta.values(), enc)
    dual = dual_value(theta, enc)
    return dataclasses.replace(
        state,
        theta=theta,
        primal=primal,
        dual=dual,
        gap=primal - dual,
        lam=enc.lam,
        rho=enc.rho,
        stats={**state.stats, "dual_nodes": info["nodes"]},
    )


def is_dual_feasible(theta, enc: ProblemEncoding, rule_max=None, tol: float = 1e-9) -> bool:
    theta = np.asarray(theta, dtype=float)
    w = enc.beta * theta
    scale = max(1.0, float(np.abs(theta).max(initial=0.0)))
    if abs(enc.beta @ theta) > 1e-10 * scale * np.sqrt(enc.n):
        return False
    if enc.task is Task.CLASSIFICATION and theta.min(initial=0.0) < 0:
        return False
    if enc.d and np.abs(enc.X.T @ w).max() > enc.rho * (1 + tol) + tol:
        return False
    if enc.use_rules:
        rmax, _ = (rule_max or rule_corr_max)(enc, w, 0.0)
        if rmax > enc.lam * (1 + tol) + tol:
            return False
    return True
