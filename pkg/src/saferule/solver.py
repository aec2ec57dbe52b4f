"""Cyclic coordinate descent on the problem restricted to surviving columns.

Each sweep updates the intercept exactly, then every surviving linear
feature, then every surviving rule. With ``w = beta * (-loss'(z))`` the
gradient of the smooth part along a column ``a`` (in feature space) is
``-a @ w`` and its curvature is at most ``|a|^2``, so

    c <- soft_threshold(c + a @ w / |a|^2, penalty / |a|^2)

is the exact one-dimensional minimiser for the squared loss and a
``1/L`` proximal gradient step for the squared hinge.

Every ``screen_every`` sweeps the duality gap is computed against a dual
point that is feasible for the full problem (all rules, not only the
survivors), and the survivor lists are re-screened with the current ball.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encoding import (
    ModelState,
    ProblemEncoding,
    Task,
    dual_point,
    dual_value,
    primal_from_predictions,
    rule_corr_max,
)
from .rules import RuleSegment, matches
from .screening import SafeSphere, ub_linear_all


@dataclass
class SolverConfig:
    gap_tol: float = 1e-6
    max_iter: int = 100_000
    screen_every: int = 10
    survivor_cap: int = 200_000
    refresh_every: int = 100
    dynamic_screening: bool = True
    record_history: bool = False

    def __post_init__(self):
        if self.gap_tol <= 0:
            raise ValueError("gap_tol must be positive")
        if self.screen_every < 1:
            raise ValueError("screen_every must be >= 1")


def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def best_intercept_shift(y: np.ndarray, f: np.ndarray) -> float:
    """Exact minimiser ``t`` of ``sum_i (1 - y_i (f_i + t))_+^2 / 2``.

    The derivative is continuous, piecewise linear and nondecreasing in
    ``t``; it is evaluated at every breakpoint and the root found by linear
    interpolation on the bracketing piece. When the minimiser is not unique
    the one closest to ``t = 0`` is returned.
    """
    m = 1.0 - y * f
    P = np.sort(m[y > 0])  # term active while t < P_i
    A = np.sort(-m[y < 0])  # term active while t > A_i
    cP, cA = np.concatenate(([0.0], np.cumsum(P))), np.concatenate(([0.0], np.cumsum(A)))

    def deriv(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        kP = np.searchsorted(P, t, side="right")  # P_i <= t are inactive
        nP = len(P) - kP
        sP = cP[-1] - cP[kP]
        kA = np.searchsorted(A, t, side="left")  # A_i < t are active
        return (nP + kA) * t - sP - cA[kA]

    g0 = deriv(0.0)[0]
    if g0 == 0.0:
        return 0.0
    pts = np.unique(np.concatenate((P, A, [0.0])))
    gp = deriv(pts)
    if g0 < 0:
        right = np.flatnonzero((gp >= 0) & (pts > 0))
        if len(right) == 0:
            slope = len(A)  # beyond every breakpoint only the y=-1 terms remain active
            t0, g = pts[-1], gp[-1]
            return float(t0 - g / slope) if slope else float(t0)
        k = right[0]
        t0, t1, g_0, g_1 = pts[k - 1], pts[k], gp[k - 1], gp[k]
        if g_1 == 0.0:
            return float(t1)
        return float(t0 - g_0 * (t1 - t0) / (g_1 - g_0))
    left = np.flatnonzero((gp <= 0) & (pts < 0))
    if len(left) == 0:
        slope = len(P)
        t0, g = pts[0], gp[0]
        return float(t0 - g / slope) if slope else float(t0)
    k = left[-1]
    t0, t1, g_0, g_1 = pts[k], pts[k + 1], gp[k], gp[k + 1]
    if g_0 == 0.0:
        return float(t0)
    return float(t0 - g_0 * (t1 - t0) / (g_1 - g_0))


def _outputs(enc, eta, b, zeta, matched):
    f = enc.X @ eta + b
    for c, idx in zip(zeta, matched):
        if c != 0.0:
            f[idx] += c
    return f


def solve_restricted(
    enc: ProblemEncoding,
    active_linear,
    active_rules,
    warm: Optional[ModelState] = None,
    cfg: Optional[SolverConfig] = None,
    matched=None,
    rule_max=None,
    screened_in: Optional[SafeSphere] = None,
) -> ModelState:
    """Minimise the objective over the given linear features and rules.

    ``active_rules`` must contain every rule that is nonzero at the optimum
    (screening guarantees this). ``matched`` optionally supplies the matched
    sample indices of each rule. The returned state carries a gap measured
    against a dual point feasible for the full problem.

    If ``active_rules`` is the survivor set of a screening pass at this
    ``lam`` with ball ``screened_in``, dual candidates inside that ball only
    need their rule maximum taken over the survivors, because every other
    rule is certified below ``lam`` there. Outside it the tree is searched.
    """
    cfg = cfg or SolverConfig()
    X, y, n = enc.X, enc.y, enc.n
    regression = enc.task is Task.REGRESSION
    rules = list(active_rules)
    if matched is None:
        matched = [np.flatnonzero(matches(seg, enc.xbar)) for seg in rules]
    else:
        matched = list(matched)
    lin = np.array(sorted(int(j) for j in active_linear), dtype=int)
    if screened_in is not None:
        rule_max = _ball_rule_max(screened_in, list(matched), rule_max or rule_corr_max)

    eta = np.zeros(enc.d)
    if warm is not None and len(lin):
        eta[lin] = warm.eta[lin]
    zeta = np.array([warm.zeta.get(seg, 0.0) if warm else 0.0 for seg in rules], dtype=float)
    b = float(warm.b) if warm is not None else 0.0

    f = _outputs(enc, eta, b, zeta, matched)
    w = enc.signed_residual(f)
    cols = [np.ascontiguousarray(X[:, j]) for j in range(enc.d)]
    Lx = enc.x_sqnorm
    rho, lam = enc.rho, enc.lam

    history = []
    dual_nodes = 0
    gap, primal, dual, theta = np.inf, np.nan, np.nan, None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if regression:
            t = float(w.mean())
        else:
            t = best_intercept_shift(y, f)
        if t != 0.0:
            b += t
            f += t
            w = enc.signed_residual(f)

        for j in lin:
            L = Lx[j]
            if L == 0.0:
                continue
            a = cols[j]
            c = eta[j]
            new = soft_threshold(c + float(a @ w) / L, rho / L)
            if new != c:
                eta[j] = new
                f += (new - c) * a
                w = enc.signed_residual(f)

        for k in range(len(rules)):
            idx = matched[k]
            m = len(idx)
            if m == 0:
                continue
            c = zeta[k]
            new = soft_threshold(c + float(w[idx].sum()) / m, lam / m)
            if new != c:
                zeta[k] = new
                f[idx] += new - c
                if regression:
                    w[idx] -= new - c
                else:
                    yi = y[idx]
                    w[idx] = yi * np.maximum(0.0, 1.0 - yi * f[idx])

        if cfg.record_history:
            history.append(primal_from_predictions(f, eta, zeta, enc))
        if it % cfg.refresh_every == 0:
            f = _outputs(enc, eta, b, zeta, matched)
            w = enc.signed_residual(f)

        if it % cfg.screen_every and it != cfg.max_iter:
            continue
        f = _outputs(enc, eta, b, zeta, matched)
        w = enc.signed_residual(f)
        theta, info = dual_point(f, enc, rule_max)
        dual_nodes += info["nodes"]
        primal = primal_from_predictions(f, eta, zeta, enc)
        dual = dual_value(theta, enc)
        gap = primal - dual
        if gap <= cfg.gap_tol:
            converged = True
            break
        if not cfg.dynamic_screening:
            continue

        radius = math.sqrt(2.0 * max(gap, 0.0))
        sw = enc.beta * theta
        if len(lin):
            ub = ub_linear_all(SafeSphere(theta, radius), enc)
            drop = lin[ub[lin] < rho]
            for j in drop:
                if eta[j] != 0.0:
                    f -= eta[j] * cols[j]
                    eta[j] = 0.0
            if len(drop):
                lin = lin[ub[lin] >= rho]
                w = enc.signed_residual(f)
        keep = []
        for k, idx in enumerate(matched):
            m = len(idx)
            bound = abs(float(sw[idx].sum())) + radius * math.sqrt(max(m - m * m / n, 0.0))
            if bound >= lam:
                keep.append(k)
            elif zeta[k] != 0.0:
                f[idx] -= zeta[k]
                zeta[k] = 0.0
        if len(keep) < len(rules):
            rules = [rules[k] for k in keep]
            matched = [matched[k] for k in keep]
            zeta = zeta[keep]
            w = enc.signed_residual(f)

    state = ModelState(
        eta=eta,
        zeta={seg: float(c) for seg, c in zip(rules, zeta) if c != 0.0},
        b=b,
        theta=theta,
        primal=primal,
        dual=dual,
        gap=gap,
        lam=lam,
        rho=rho,
        converged=converged,
        iterations=it,
        stats={
            "dual_nodes": dual_nodes,
            "final_linear": [int(j) for j in lin],
            "final_rules": list(rules),
        },
    )
    if cfg.record_history:
        state.stats["history"] = history
    return state


def _ball_rule_max(ball: SafeSphere, matched: list, fallback):
    """Rule maximum that scans only the screened survivors when it can."""

    def rule_max(enc, w, floor):
        # exact above floor only if floor >= lam, which is how dual_point calls it
        theta = enc.beta * w
        if floor >= enc.lam and np.linalg.norm(theta - ball.center) <= ball.radius:
            best = max((abs(float(w[idx].sum())) for idx in matched), default=0.0)
            return best, 0
        return fallback(enc, w, floor)

    return rule_max


def random_segment(rng: np.random.Generator, s, max_features=None) -> RuleSegment:
    """A uniformly drawn non-root segment (within the feature cap, if any)."""
    d = len(s)
    while True:
        feats = range(d)
        if max_features is not None and max_features < d:
            feats = rng.choice(d, size=rng.integers(1, max_features + 1), replace=False)
        lo, hi = [0] * d, [k - 1 for k in s]
        for j in feats:
            a, b = sorted(rng.integers(0, s[j], size=2))
            lo[j], hi[j] = int(a), int(b)
        if lo != [0] * d or hi != [k - 1 for k in s]:
            return RuleSegment(tuple(lo), tuple(hi))
        if all(k == 1 for k in s):
            raise ValueError("alphabet admits no rule besides the root")


def reconstruct_full(state: ModelState, enc: ProblemEncoding, n_checks: int = 64, seed: int = 0) -> ModelState:
    """The full-problem model: rules outside the solved set carry coefficient 0.

    Spot-checks that randomly drawn rules satisfy the dual constraint
    ``|column @ theta| <= lam``, which is what makes their zero optimal.
    """
    zeta = {seg: c for seg, c in state.zeta.items() if c != 0.0}
    if state.theta is not None and enc.use_rules and n_checks and any(k > 1 for k in enc.s):
        rng = np.random.default_rng(seed)
        w = enc.beta * state.theta
        for _ in range(n_checks):
            seg = random_segment(rng, enc.s, enc.max_features)
            corr = abs(float(w[matches(seg, enc.xbar)].sum()))
            if corr > enc.lam * (1 + 1e-9) + 1e-12:
                raise AssertionError(
                    f"dual point violates the constraint of rule {seg}: {corr} > {enc.lam}"
                )
    return dataclasses.replace(state, zeta=zeta)
