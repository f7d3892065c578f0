"""Value iteration drivers and policy extraction."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bellman import bellman_opt, bellman_policy, make_context
from .errors import ConvergenceError, InvalidConfig, RectangularityMismatch
from .mdp import (
    MdpInstance,
    Rect,
    UncertaintySpec,
    check_policy,
    q_from_value,
    validate_mdp,
    validate_uncertainty,
)
from .waterfill import water_fill_rows


@dataclass
class SolveConfig:
    """Iteration settings.

    ``inner_tol`` is the bisection tolerance for kappa and water-fill roots;
    when left as None it defaults to ``(1 - gamma) * epsilon / 6``.
    """

    epsilon: float = 1e-6
    max_iters: int = 10_000
    inner_tol: Optional[float] = None
    record_residuals: bool = True
    workers: int = 1
    raise_on_failure: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidConfig(f"epsilon must be positive, got {self.epsilon}")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise InvalidConfig(f"inner_tol must be positive, got {self.inner_tol}")
        if int(self.max_iters) < 1:
            raise InvalidConfig(f"max_iters must be >= 1, got {self.max_iters}")
        if int(self.workers) < 1:
            raise InvalidConfig(f"workers must be >= 1, got {self.workers}")
        self.max_iters = int(self.max_iters)
        self.workers = int(self.workers)

    def tolerance(self, gamma: float) -> float:
        if self.inner_tol is not None:
            return self.inner_tol
        return max((1.0 - gamma) * self.epsilon / 6.0, 1e-15)

    def stop_threshold(self, gamma: float) -> float:
        if gamma == 0.0:
            return math.inf
        return self.epsilon * (1.0 - gamma) / (2.0 * gamma)


@dataclass
class SolveReport:
    value: np.ndarray
    policy: np.ndarray
    iterations: int
    residuals: List[float]
    chi_per_state: np.ndarray
    timings: dict = field(default_factory=dict)
    converged: bool = True


def _prepare(inst, unc, cfg):
    validate_mdp(inst)
    if unc is None:
        unc = UncertaintySpec.nonrobust(inst.num_states, inst.num_actions)
    validate_uncertainty(inst, unc)
    return unc, cfg or SolveConfig()


def _finish(report: SolveReport, cfg: SolveConfig, what: str) -> SolveReport:
    if not report.converged and cfg.raise_on_failure:
        last = report.residuals[-1] if report.residuals else float("nan")
        raise ConvergenceError(
            f"{what} did not converge in {report.iterations} iterations "
            f"(last residual {last:.3e})",
            report,
        )
    return report


def value_iteration(inst: MdpInstance, unc: Optional[UncertaintySpec] = None,
                    cfg: Optional[SolveConfig] = None) -> SolveReport:
    """Iterate the optimal robust operator from v = 0 to an epsilon-accurate value."""
    unc, cfg = _prepare(inst, unc, cfg)
    tol = cfg.tolerance(inst.gamma)
    thresh = cfg.stop_threshold(inst.gamma)
    timings = {"kappa": 0.0, "q": 0.0, "waterfill": 0.0}
    v = np.zeros(inst.num_states)
    residuals = []
    converged = False
    n = 0
    while n < cfg.max_iters:
        t0 = time.perf_counter()
        ctx = make_context(inst, unc, v, tol)
        t1 = time.perf_counter()
        Q = q_from_value(inst, v)
        t2 = time.perf_counter()
        v_new, _ = bellman_opt(ctx, Q, cfg.workers)
        t3 = time.perf_counter()
        timings["kappa"] += t1 - t0
        timings["q"] += t2 - t1
        timings["waterfill"] += t3 - t2
        res = float(np.max(np.abs(v_new - v)))
        v = v_new
        n += 1
        if cfg.record_residuals:
            residuals.append(res)
        if res <= thresh:
            converged = True
            break
    if not cfg.record_residuals:
        residuals = [res]
    policy, chi = extract_policy(inst, unc, v, tol, return_chi=True)
    report = SolveReport(v, policy, n, residuals, chi, timings, converged)
    return _finish(report, cfg, "value iteration")


def q_value_iteration_sa(inst: MdpInstance, unc: UncertaintySpec,
                         cfg: Optional[SolveConfig] = None) -> SolveReport:
    """Q-value iteration for sa-rectangular (or non-robust) specs."""
    unc, cfg = _prepare(inst, unc, cfg)
    if unc.rect is Rect.S:
        raise RectangularityMismatch("Q-value iteration needs an sa-rectangular spec")
    tol = cfg.tolerance(inst.gamma)
    thresh = cfg.stop_threshold(inst.gamma)
    timings = {"kappa": 0.0, "q": 0.0, "waterfill": 0.0}
    Qv = np.zeros((inst.num_states, inst.num_actions))
    v = np.zeros(inst.num_states)
    residuals = []
    converged = False
    n = 0
    while n < cfg.max_iters:
        t0 = time.perf_counter()
        ctx = make_context(inst, unc, v, tol)
        t1 = time.perf_counter()
        Q_new = q_from_value(inst, v) - ctx.sigma
        t2 = time.perf_counter()
        timings["kappa"] += t1 - t0
        timings["q"] += t2 - t1
        res = float(np.max(np.abs(Q_new - Qv)))
        Qv = Q_new
        v = Qv.max(axis=1)
        n += 1
        if cfg.record_residuals:
            residuals.append(res)
        if res <= thresh:
            converged = True
            break
    if not cfg.record_residuals:
        residuals = [res]
    policy, chi = extract_policy(inst, unc, v, tol, return_chi=True)
    report = SolveReport(v, policy, n, residuals, chi, timings, converged)
    return _finish(report, cfg, "Q-value iteration")


def _one_hot(idx: np.ndarray, A: int) -> np.ndarray:
    pi = np.zeros((idx.size, A))
    pi[np.arange(idx.size), idx] = 1.0
    return pi


def extract_policy(inst: MdpInstance, unc: Optional[UncertaintySpec], v_star,
                   tol: float = 1e-10, return_chi: bool = False):
    """Optimal (threshold) policy read off an approximate fixed point ``v_star``.

    Non-robust and sa-rectangular specs give the one-hot argmax of the
    (penalized) Q-values with ties to the lowest action. s-rectangular specs
    give weights proportional to ``(Q - zeta)^(p-1)`` above the water level
    ``zeta`` computed at ``v_star``; p = 1 spreads uniformly over the active
    block and p = inf picks the best action.

    With ``return_chi`` also returns the per-state active-action count.
    """
    S, A = inst.num_states, inst.num_actions
    if unc is None:
        unc = UncertaintySpec.nonrobust(S, A)
    ctx = make_context(inst, unc, v_star, tol)
    Q = q_from_value(inst, ctx.v)
    if unc.rect is Rect.S:
        batch = water_fill_rows(Q, ctx.sigma, unc.p, tol)
        pi = batch.weights.copy()
        chi = batch.chi.copy()
        if unc.p.kind in ("two", "finite"):
            # weights of actions sitting on the water level are numerical noise
            adv = Q - batch.zeta[:, None]
            clamp = (adv >= 0) & (adv <= tol) & (pi > 0)
            keep = (pi > 0) & ~clamp
            rows = clamp.any(axis=1) & keep.any(axis=1)
            if rows.any():
                pi[rows] = np.where(keep[rows], pi[rows], 0.0)
                pi[rows] /= pi[rows].sum(axis=1, keepdims=True)
    else:
        pi = _one_hot(np.argmax(Q - ctx.sigma, axis=1), A)
        chi = np.ones(S, dtype=np.int64)
    return (pi, chi) if return_chi else pi


def evaluate_policy(inst: MdpInstance, unc: Optional[UncertaintySpec], policy,
                    cfg: Optional[SolveConfig] = None) -> SolveReport:
    """Robust value of a fixed policy: fixed point of the policy operator."""
    unc, cfg = _prepare(inst, unc, cfg)
    policy = check_policy(policy, inst.num_states, inst.num_actions)
    tol = cfg.tolerance(inst.gamma)
    thresh = cfg.stop_threshold(inst.gamma)
    timings = {"kappa": 0.0, "q": 0.0, "waterfill": 0.0}
    v = np.zeros(inst.num_states)
    residuals = []
    converged = False
    n = 0
    while n < cfg.max_iters:
        t0 = time.perf_counter()
        ctx = make_context(inst, unc, v, tol)
        t1 = time.perf_counter()
        Q = q_from_value(inst, v)
        t2 = time.perf_counter()
        v_new = bellman_policy(ctx, policy, Q)
        t3 = time.perf_counter()
        timings["kappa"] += t1 - t0
        timings["q"] += t2 - t1
        timings["waterfill"] += t3 - t2
        res = float(np.max(np.abs(v_new - v)))
        v = v_new
        n += 1
        if cfg.record_residuals:
            residuals.append(res)
        if res <= thresh:
            converged = True
            break
    if not cfg.record_residuals:
        residuals = [res]
    chi = np.count_nonzero(policy > 0, axis=1)
    report = SolveReport(v, policy, n, residuals, chi, timings, converged)
    return _finish(report, cfg, "policy evaluation")
