"""Brute-force ground truth for small instances.

Materialises every rule as a dense column and solves the full problem
without any screening or tree search. Shares nothing with the fast path
except :func:`saferule.rules.matches`, so agreement between the two is
evidence rather than tautology.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretize import discretize_quantile
from .encoding import ModelState, ProblemEncoding, Task
from .rules import RuleSegment, matches


class OracleCapExceeded(ValueError):
    pass


@dataclass
class DenseInstance:
    enc: ProblemEncoding
    segments: list
    R: np.ndarray  # n x |R| rule indicator columns

    @property
    def columns(self) -> np.ndarray:
        """Linear features followed by rule indicators (model space, not signed)."""
        return np.hstack([self.enc.X, self.R])


def all_segments(s, max_features=None) -> list:
    """Every non-root segment, by direct product over per-feature ranges."""
    per_feature = [[(a, b) for a in range(k) for b in range(a, k)] for k in s]
    full = tuple((0, k - 1) for k in s)
    out = []
    for combo in itertools.product(*per_feature):
        if combo == full:
            continue
        if max_features is not None:
            narrowed = sum(1 for (a, b), k in zip(combo, s) if (a, b) != (0, k - 1))
            if narrowed > max_features:
                continue
        out.append(RuleSegment(tuple(a for a, _ in combo), tuple(b for _, b in combo)))
    return out


def build_instance(enc: ProblemEncoding, cap: int = 20_000) -> DenseInstance:
    segs = all_segments(enc.s, enc.max_features) if enc.use_rules else []
    if len(segs) > cap:
        raise OracleCapExceeded(f"{len(segs)} rules exceeds the oracle cap of {cap}")
    R = np.zeros((enc.n, len(segs)))
    for k, seg in enumerate(segs):
        R[:, k] = matches(seg, enc.xbar)
    return DenseInstance(enc, segs, R)


def brute_rule_max(inst: DenseInstance, weights) -> float:
    if inst.R.shape[1] == 0:
        return 0.0
    return float(np.abs(inst.R.T @ np.asarray(weights, dtype=float)).max())


def _grad_factor(task, y, f):
    # derivative of the loss w.r.t. f, per sample
    if task is Task.REGRESSION:
        return f - y
    return -y * np.maximum(0.0, 1.0 - y * f)


def _loss_sum(task, y, f):
    if task is Task.REGRESSION:
        return 0.5 * np.sum((f - y) ** 2)
    return 0.5 * np.sum(np.maximum(0.0, 1.0 - y * f) ** 2)


def _best_b(task, y, g):
    """Intercept minimising the loss with other contributions ``g`` fixed."""
    if task is Task.REGRESSION:
        return float(np.mean(y - g))
    lo, hi = -1.0 - np.abs(g).max() - 1.0, 1.0 + np.abs(g).max() + 1.0
    # bisection on the monotone derivative
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(_grad_factor(task, y, g + mid)) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _project(theta, beta, nonneg):
    if not nonneg:
        return theta - beta * (beta @ theta) / (beta @ beta)
    # theta_i = max(0, t_i - nu * beta_i), choose nu so beta @ theta = 0
    def off(nu):
        return beta @ np.maximum(0.0, theta - nu * beta)

    span = np.abs(theta).max() + 1.0
    lo, hi = -span, span
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if off(mid) > 0:
            lo = mid
        else:
            hi = mid
    out = np.maximum(0.0, theta - 0.5 * (lo + hi) * beta)
    pos, neg = out[beta > 0].sum(), out[beta < 0].sum()
    if pos > neg and pos > 0:
        out[beta > 0] *= neg / pos
    elif neg > pos and neg > 0:
        out[beta < 0] *= pos / neg
    return out


def dense_gap(inst: DenseInstance, rho, lam, coef, b):
    """Primal, dual, feasible theta for full coefficient vector ``coef``."""
    enc = inst.enc
    task, y, d = enc.task, enc.y, enc.d
    A = inst.columns
    f = A @ coef + b
    primal = _loss_sum(task, y, f) + rho * np.abs(coef[:d]).sum() + lam * np.abs(coef[d:]).sum()
    beta = np.ones(enc.n) if task is Task.REGRESSION else y
    delta = y if task is Task.REGRESSION else np.ones(enc.n)
    theta = -_grad_factor(task, y, f) * beta  # = -loss'(z)
    theta = _project(theta, beta, task is Task.CLASSIFICATION)
    corr = A.T @ (beta * theta)
    limits = np.concatenate([np.full(d, rho), np.full(A.shape[1] - d, lam)])
    with np.errstate(divide="ignore"):
        ratios = np.where(np.abs(corr) > 0, limits / np.abs(corr), np.inf)
    scale = min(1.0, float(ratios.min(initial=np.inf)))
    theta = scale * theta
    dual = -0.5 * theta @ theta + delta @ theta
    return float(primal), float(dual), theta


def brute_solve(inst: DenseInstance, rho: float, lam: float, tol: float = 1e-9,
                max_rounds: int = 5000):
    """Coordinate descent over every column until the duality gap is below ``tol``.

    Returns ``(state, active)`` where ``active`` is the set of rules with a
    nonzero coefficient.
    """
    enc = inst.enc
    task, y = enc.task, enc.y
    A = inst.columns
    p = A.shape[1]
    d = enc.d
    pen = np.concatenate([np.full(d, rho), np.full(p - d, lam)])
    sq = np.einsum("ij,ij->j", A, A)
    coef = np.zeros(p)
    b = _best_b(task, y, np.zeros(enc.n))
    f = np.full(enc.n, b)

    def sweep(cols):
        nonlocal b, f
        nb = _best_b(task, y, f - b)
        f += nb - b
        b = nb
        for j in cols:
            if sq[j] == 0:
                continue
            g = A[:, j] @ _grad_factor(task, y, f)
            old = coef[j]
            z = old - g / sq[j]
            new = np.sign(z) * max(abs(z) - pen[j] / sq[j], 0.0)
            if new != old:
                coef[j] = new
                f += (new - old) * A[:, j]

    everything = range(p)
    primal = dual = np.nan
    theta = None
    for _ in range(max_rounds):
        sweep(everything)
        support = np.flatnonzero(coef)
        for _inner in range(200):
            before = coef.copy()
            sweep(support)
            if np.max(np.abs(coef - before), initial=0.0) < 1e-14:
                break
        f = A @ coef + b
        primal, dual, theta = dense_gap(inst, rho, lam, coef, b)
        if primal - dual <= tol:
            break
    zeta = {seg: float(c) for seg, c in zip(inst.segments, coef[d:]) if c != 0.0}
    state = ModelState(
        eta=coef[:d].copy(), zeta=zeta, b=float(b), theta=theta, primal=primal, dual=dual,
        gap=primal - dual, lam=lam, rho=rho, converged=primal - dual <= tol,
    )
    return state, set(zeta)


def brute_lambda_max(inst: DenseInstance) -> float:
    """lambda_max with tied penalties, by exhaustive correlation."""
    enc = inst.enc
    b = _best_b(enc.task, enc.y, np.zeros(enc.n))
    beta = np.ones(enc.n) if enc.task is Task.REGRESSION else enc.y
    w = -_grad_factor(enc.task, enc.y, np.full(enc.n, b)) * beta * beta
    lin = float(np.abs(enc.X.T @ w).max()) if enc.d else 0.0
    return max(lin, brute_rule_max(inst, w))


def random_instance(rng: np.random.Generator, task, n_range=(10, 50), d_range=(1, 3),
                    s_max: int = 4, max_features=None) -> ProblemEncoding:
    """Small random problem with continuous features and a nonlinear target."""
    task = Task(task)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    X = rng.normal(size=(n, d))
    M = int(rng.integers(2, s_max + 1))
    ds = discretize_quantile(X, M)
    box = np.all(np.abs(X[:, : min(d, 2)]) < 0.8, axis=1)
    signal = 0.3 * X[:, 0] + 2.0 * box + 1.0 * (X[:, -1] > 0.5) - 1.0
    if task is Task.REGRESSION:
        y = signal + 0.5 * rng.normal(size=n)
        y = (y - y.mean()) / (y.std() or 1.0)
    else:
        y = np.where(signal + 0.7 * rng.normal(size=n) > 0, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
    return ProblemEncoding(task, X, ds.xbar, ds.s, y, max_features=max_features)


def unique_optimum(inst: DenseInstance, state: ModelState, rel_tol: float = 1e-6) -> bool:
    """Sufficient check that the optimal coefficients are unique.

    Every optimum shares its fitted values on the rows where the loss is
    strictly convex and is supported on the equicorrelation set (columns
    whose dual correlation reaches the penalty). If the intercept plus that
    set has full column rank on those rows, the coefficients are pinned.
    """
    enc = inst.enc
    A = inst.columns
    d = enc.d
    beta = np.ones(enc.n) if enc.task is Task.REGRESSION else enc.y
    corr = np.abs(A.T @ (beta * state.theta))
    pen = np.concatenate([np.full(d, state.rho), np.full(A.shape[1] - d, state.lam)])
    eq = np.flatnonzero(corr >= pen * (1 - rel_tol))
    coef = np.concatenate([state.eta, [state.zeta.get(g, 0.0) for g in inst.segments]])
    if enc.task is Task.REGRESSION:
        rows = np.arange(enc.n)
    else:
        f = A @ coef + state.b
        rows = np.flatnonzero(1.0 - enc.y * f > 1e-9)
    M = np.hstack([np.ones((len(rows), 1)), A[np.ix_(rows, eq)]])
    return bool(np.linalg.matrix_rank(M) == M.shape[1])


@dataclass
class VerifyRecord:
    index: int
    task: str
    s: tuple
    lam: float
    safe: bool  # oracle active set inside the survivors
    objective_ok: bool
    coefficients_ok: Optional[bool]  # None when the optimum is not certified unique
    lambda_max_ok: bool

    @property
    def passed(self) -> bool:
        return self.safe and self.objective_ok and self.coefficients_ok is not False and self.lambda_max_ok


def verify_instance(enc: ProblemEncoding, lam: float, index: int = 0, tol: float = 1e-10) -> VerifyRecord:
    """Screen, solve and compare one instance against the dense solution."""
    # imported here: the fast path is what is being checked, not a dependency
    from . import path as _path
    from .encoding import evaluate_state
    from .screening import screen_rules, sphere
    from .solver import SolverConfig

    inst = build_instance(enc)
    lam_max = _path.lambda_max(enc)
    ref, active = brute_solve(inst, lam, lam, tol=tol)

    scfg = SolverConfig(gap_tol=tol)
    grid = list(np.geomspace(lam_max, lam, 4)) if lam < lam_max else [lam]
    grid[-1] = lam
    res = _path.run_path(enc, _path.PathConfig(lambdas=grid), scfg)
    before = res.steps[-2].state if len(res.steps) > 1 else res.steps[-1].state
    enc_t = enc.with_regularization(lam)
    feasible = evaluate_state(before, enc_t)
    survivors = set(screen_rules(sphere(feasible, enc_t), enc_t).rules)
    got = res.steps[-1].state

    obj_ok = abs(got.primal - ref.primal) <= 1e-6 * max(1.0, ref.primal)
    coef_ok = None
    if unique_optimum(inst, ref):
        a = np.concatenate([got.eta, [got.zeta.get(g, 0.0) for g in inst.segments], [got.b]])
        r = np.concatenate([ref.eta, [ref.zeta.get(g, 0.0) for g in inst.segments], [ref.b]])
        coef_ok = bool(np.max(np.abs(a - r)) <= 1e-5)
    return VerifyRecord(
        index, enc.task.value, enc.s, lam,
        safe=active <= survivors,
        objective_ok=bool(obj_ok),
        coefficients_ok=coef_ok,
        lambda_max_ok=abs(lam_max - brute_lambda_max(inst)) <= 1e-10 * max(1.0, lam_max),
    )


def verify_suite(n_instances: int = 20, seed: int = 0, tol: float = 1e-10):
    """Yield one :class:`VerifyRecord` per random instance, alternating tasks."""
    rng = np.random.default_rng(seed)
    for i in range(n_instances):
        task = Task.REGRESSION if i % 2 == 0 else Task.CLASSIFICATION
        enc = random_instance(rng, task)
        inst_lam_max = brute_lambda_max(build_instance(enc))
        lam = float(inst_lam_max * rng.uniform(0.05, 1.0))
        yield verify_instance(enc, lam, i, tol)
