"""Warm-started regularization paths and model selection.

The path starts at ``lambda_max``, the smallest penalty at which every
linear and rule coefficient is zero, and walks down a decreasing grid. At
each step the previous solution provides the feasible pair used to screen
the rule tree once, then the restricted problem is solved from that warm
start.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoding import (
    ModelState,
    ProblemEncoding,
    Task,
    evaluate_state,
    predict_levels,
    rule_corr_max,
)
from .rules import count_all_rules
from .screening import SurvivorOverflow, screen_linear, screen_rules, sphere
from .solver import SolverConfig, best_intercept_shift, reconstruct_full, solve_restricted

log = logging.getLogger(__name__)


@dataclass
class PathConfig:
    n_steps: int = 100
    lambda_min_ratio: float = 0.01
    lambda_min: Optional[float] = None
    lambdas: Optional[Sequence[float]] = None  # explicit grid, overrides the three above
    rho: Optional[float] = None  # None ties rho to lambda
    stop_at_rules: Optional[int] = None
    verify_samples: int = 64
    log_stats: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")


@dataclass
class PathStep:
    lam: float
    rho: float
    state: ModelState
    survivors: int = 0
    linear_survivors: int = 0
    nodes_visited: int = 0
    nodes_pruned: int = 0
    iterations: int = 0
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.error is None and self.state.converged

    def to_dict(self) -> dict:
        st = self.state
        return {
            "lambda": self.lam,
            "rho": self.rho,
            "active_linear": int(np.count_nonzero(st.eta)),
            "active_rules": st.n_active_rules,
            "survivors": self.survivors,
            "linear_survivors": self.linear_survivors,
            "nodes_visited": self.nodes_visited,
            "nodes_pruned": self.nodes_pruned,
            "dual_nodes": st.stats.get("dual_nodes", 0),
            "iterations": self.iterations,
            "primal": st.primal,
            "gap": st.gap,
            "converged": self.converged,
            "seconds": self.seconds,
            "error": self.error,
        }


@dataclass
class PathResult:
    steps: list = field(default_factory=list)
    lambda_max: float = 0.0
    tree_size: int = 0

    @property
    def lambdas(self) -> list:
        return [st.lam for st in self.steps]

    def write_jsonl(self, fh) -> None:
        for t, step in enumerate(self.steps):
            fh.write(json.dumps({"step": t, **step.to_dict()}) + "\n")


def _intercept_only(enc: ProblemEncoding) -> float:
    if enc.task is Task.REGRESSION:
        return float(enc.y.mean())
    return best_intercept_shift(enc.y, np.zeros(enc.n))


def _start_state(enc: ProblemEncoding, rho: Optional[float], scfg: SolverConfig) -> ModelState:
    """Model that is optimal for every lambda >= lambda_max."""
    if rho is None:
        return ModelState.zero(enc.d, _intercept_only(enc))
    lin_enc = dataclasses.replace(enc, use_rules=False).with_regularization(1.0, rho)
    cfg = dataclasses.replace(scfg, gap_tol=min(scfg.gap_tol, 1e-10))
    start = ModelState.zero(enc.d, _intercept_only(enc))
    state = solve_restricted(lin_enc, range(enc.d), [], warm=start, cfg=cfg)
    return dataclasses.replace(state, zeta={})


def _lambda_max_from(enc: ProblemEncoding, start: ModelState, tied: bool) -> tuple:
    f = enc.X @ start.eta + start.b
    w = enc.signed_residual(f)
    lin = float(np.abs(enc.X.T @ w).max()) if (tied and enc.d) else 0.0
    rmax, nodes = rule_corr_max(enc, w, 0.0) if enc.use_rules else (0.0, 0)
    return max(lin, rmax), nodes


def lambda_max(enc: ProblemEncoding, rho: Optional[float] = None, scfg: Optional[SolverConfig] = None) -> float:
    """Smallest lambda whose optimum has no active rule (and, with tied rho, no active feature).

    With ``rho`` tied to lambda this is the largest correlation of any
    linear feature or rule with the intercept-only residual. With a fixed
    ``rho`` the residual comes from the linear-only fit at that ``rho``.
    """
    scfg = scfg or SolverConfig()
    start = _start_state(enc, rho, scfg)
    return _lambda_max_from(enc, start, rho is None)[0]


def lambda_grid(lam_max: float, pcfg: PathConfig) -> list:
    if pcfg.lambdas is not None:
        grid = [float(v) for v in pcfg.lambdas]
        if any(a <= b for a, b in zip(grid, grid[1:])) or min(grid) <= 0:
            raise ValueError("explicit lambda grid must be positive and strictly decreasing")
        return grid
    lam_min = pcfg.lambda_min if pcfg.lambda_min is not None else lam_max * pcfg.lambda_min_ratio
    if not 0 < lam_min < lam_max:
        raise ValueError(f"lambda_min={lam_min} must lie in (0, lambda_max={lam_max})")
    return list(np.geomspace(lam_max, lam_min, pcfg.n_steps + 1))


def run_path(
    enc: ProblemEncoding,
    pcfg: Optional[PathConfig] = None,
    scfg: Optional[SolverConfig] = None,
    rule_max=None,
) -> PathResult:
    pcfg = pcfg or PathConfig()
    scfg = scfg or SolverConfig()
    start = _start_state(enc, pcfg.rho, scfg)
    lam_max, _ = _lambda_max_from(enc, start, pcfg.rho is None)
    tree_size = count_all_rules(enc.s) + 1 if enc.use_rules else 0
    result = PathResult(lambda_max=lam_max, tree_size=tree_size)

    if lam_max <= 0.0:
        enc0 = enc.with_regularization(0.0, pcfg.rho)
        state = dataclasses.replace(evaluate_state(start, enc0, rule_max), converged=True)
        result.steps.append(PathStep(0.0, enc0.rho, state))
        return result

    prev = start
    for t, lam in enumerate(lambda_grid(lam_max, pcfg)):
        t0 = time.perf_counter()
        enc_t = enc.with_regularization(lam, pcfg.rho)
        if lam >= lam_max:
            state = evaluate_state(start, enc_t, rule_max)
            state = dataclasses.replace(state, converged=state.gap <= scfg.gap_tol)
            step = PathStep(lam, enc_t.rho, state, seconds=time.perf_counter() - t0)
            result.steps.append(step)
            prev = state
            continue

        feasible = evaluate_state(prev, enc_t, rule_max)
        sph = sphere(feasible, enc_t)
        dropped = screen_linear(sph, enc_t)
        lin = [j for j in range(enc.d) if j not in dropped]
        try:
            scr = screen_rules(sph, enc_t, cap=scfg.survivor_cap)
        except SurvivorOverflow as exc:
            log.warning("path stopped at lambda=%g: %s", lam, exc)
            result.steps.append(
                PathStep(lam, enc_t.rho, feasible, error=str(exc), seconds=time.perf_counter() - t0)
            )
            break
        if pcfg.log_stats:
            scr.stats.log(step=t, lam=lam, linear_survivors=len(lin))
        state = solve_restricted(
            enc_t, lin, scr.rules, warm=prev, cfg=scfg, matched=scr.matched,
            rule_max=rule_max, screened_in=sph,
        )
        state = reconstruct_full(state, enc_t, n_checks=pcfg.verify_samples, seed=t)
        step = PathStep(
            lam,
            enc_t.rho,
            state,
            survivors=scr.stats.survivors,
            linear_survivors=len(lin),
            nodes_visited=scr.stats.visited,
            nodes_pruned=scr.stats.pruned,
            iterations=state.iterations,
            seconds=time.perf_counter() - t0,
            error=None if state.converged else "solver hit max_iter before reaching gap_tol",
        )
        result.steps.append(step)
        prev = state
        if pcfg.stop_at_rules is not None and state.n_active_rules >= pcfg.stop_at_rules:
            break
    return result


def fit(enc: ProblemEncoding, lam: float, n_steps: int = 5, scfg: Optional[SolverConfig] = None,
        rho: Optional[float] = None, rule_max=None) -> PathStep:
    """Model at a single ``lam``, reached through a short warm-started path."""
    scfg = scfg or SolverConfig()
    lam_max = lambda_max(enc, rho, scfg)
    if lam >= lam_max or lam_max <= 0:
        grid = [lam]
    else:
        grid = list(np.geomspace(lam_max, lam, n_steps + 1))
        grid[-1] = lam
    path = run_path(enc, PathConfig(lambdas=grid, rho=rho), scfg, rule_max)
    return path.steps[-1]


# --- model selection -------------------------------------------------------


@dataclass(frozen=True)
class FixedLambda:
    value: float


@dataclass(frozen=True)
class ActiveRuleCount:
    k: int


@dataclass(frozen=True)
class CrossValidation:
    folds: int = 2
    seed: int = 0


def parse_criterion(text: str):
    """``cv:K``, ``count:N`` or ``lambda:V``."""
    kind, _, value = text.partition(":")
    if kind == "cv":
        return CrossValidation(int(value or 2))
    if kind == "count":
        return ActiveRuleCount(int(value))
    if kind == "lambda":
        return FixedLambda(float(value))
    raise ValueError(f"unknown selection criterion {text!r}")


def subset(enc: ProblemEncoding, rows) -> ProblemEncoding:
    rows = np.asarray(rows)
    return dataclasses.replace(enc, X=enc.X[rows], xbar=enc.xbar[rows], y=enc.y[rows])


def score(task: Task, y, f) -> float:
    """MSE for regression, accuracy for classification."""
    if Task(task) is Task.REGRESSION:
        return float(np.mean((y - f) ** 2))
    return float(np.mean(np.where(f >= 0, 1.0, -1.0) == y))


def cross_validate(enc: ProblemEncoding, lambdas, folds: int = 2, seed: int = 0,
                   scfg: Optional[SolverConfig] = None, rho: Optional[float] = None) -> np.ndarray:
    """Mean held-out score per lambda (MSE or accuracy)."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    parts = np.array_split(rng.permutation(enc.n), folds)
    scores = np.zeros((folds, len(lambdas)))
    for f_i, test in enumerate(parts):
        train = np.setdiff1d(np.arange(enc.n), test)
        tr, te = subset(enc, train), subset(enc, test)
        path = run_path(tr, PathConfig(lambdas=lambdas, rho=rho, verify_samples=0), scfg)
        for t, step in enumerate(path.steps):
            st = step.state
            scores[f_i, t] = score(enc.task, te.y, predict_levels(st.eta, st.zeta, st.b, te.X, te.xbar))
        scores[f_i, len(path.steps):] = np.nan
    return np.nanmean(scores, axis=0)


def select_model(path: PathResult, criterion, enc: Optional[ProblemEncoding] = None,
                 scfg: Optional[SolverConfig] = None, rho: Optional[float] = None) -> PathStep:
    if not path.steps:
        raise ValueError("empty path")
    steps = path.steps
    if isinstance(criterion, FixedLambda):
        return min(steps, key=lambda st: abs(np.log(max(st.lam, 1e-300)) - np.log(criterion.value)))
    if isinstance(criterion, ActiveRuleCount):
        return min(steps, key=lambda st: abs(st.state.n_active_rules - criterion.k))
    if isinstance(criterion, CrossValidation):
        if len(steps) == 1:
            return steps[0]
        if enc is None:
            raise ValueError("cross-validation needs the training encoding")
        lams = [st.lam for st in steps]
        cv = cross_validate(enc, lams, criterion.folds, criterion.seed, scfg, rho)
        best = int(np.nanargmin(cv) if enc.task is Task.REGRESSION else np.nanargmax(cv))
        return steps[best]
    raise TypeError(f"unknown criterion {criterion!r}")
