"""Robust Bellman operators for L_p-ball uncertainty.

Every robust operator reduces to a non-robust one plus a penalty
``sigma = alpha + gamma * beta * kappa_q(v)`` where q is the Holder conjugate
of the noise norm p. The penalty is shared across the sweep, so it is
computed once and stored in a :class:`BellmanContext`.

Sweep contract for parallel work: build the context (kappa) on the calling
thread, then fan states out to workers that only read the context.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import RectangularityMismatch
from .mdp import MdpInstance, Rect, UncertaintySpec, q_from_value
from .pvariance import DEFAULT_TOL, PMeanResult, kappa_rows, p_mean
from .waterfill import WaterFillBatch, water_fill_rows


@dataclass(frozen=True, eq=False)
class BellmanContext:
    """Penalty data for one value vector.

    ``kappa`` is a scalar without a forbidden mask, otherwise an array shaped
    like ``sigma`` (one kappa per mask row). ``sigma`` has shape ``(S, A)``
    for sa-rectangular and non-robust specs and ``(S,)`` for s-rectangular.
    """

    inst: MdpInstance
    unc: UncertaintySpec
    v: np.ndarray
    kappa: object
    sigma: np.ndarray
    kappa_result: Optional[PMeanResult] = None
    tol: float = DEFAULT_TOL


def compute_kappa(inst: MdpInstance, unc: UncertaintySpec, v, tol: float = DEFAULT_TOL):
    """Return ``(kappa, PMeanResult or None)`` for the penalty of ``v``."""
    q = unc.q
    if unc.rect is Rect.NONE:
        return 0.0, None
    if unc.forbidden is None:
        res = p_mean(v, q, tol)
        return res.kappa, res
    return kappa_rows(v, ~unc.forbidden, q, tol), None


def make_context(inst: MdpInstance, unc: UncertaintySpec, v, tol: float = DEFAULT_TOL,
                 kappa=None) -> BellmanContext:
    v = np.asarray(v, dtype=float)
    res = None
    if kappa is None:
        kappa, res = compute_kappa(inst, unc, v, tol)
    if unc.rect is Rect.NONE:
        sigma = np.zeros((inst.num_states, inst.num_actions))
    else:
        sigma = unc.alpha + inst.gamma * unc.beta * kappa
    return BellmanContext(inst, unc, v, kappa, sigma, res, tol)


def _require(ctx: BellmanContext, rect: Rect, op: str):
    if ctx.unc.rect is not rect:
        raise RectangularityMismatch(
            f"{op} needs a {rect.value}-rectangular spec, got {ctx.unc.rect.value}"
        )


def _q(ctx: BellmanContext, Q):
    return q_from_value(ctx.inst, ctx.v) if Q is None else Q


def bellman_opt_nonrobust(inst: MdpInstance, v) -> np.ndarray:
    return q_from_value(inst, v).max(axis=1)


def bellman_policy_nonrobust(inst: MdpInstance, policy, v) -> np.ndarray:
    return np.einsum("sa,sa->s", np.asarray(policy, dtype=float), q_from_value(inst, v))


def bellman_sa_policy(ctx: BellmanContext, policy, Q=None) -> np.ndarray:
    _require(ctx, Rect.SA, "bellman_sa_policy")
    return np.einsum("sa,sa->s", np.asarray(policy, dtype=float), _q(ctx, Q) - ctx.sigma)


def bellman_sa_opt(ctx: BellmanContext, Q=None) -> np.ndarray:
    _require(ctx, Rect.SA, "bellman_sa_opt")
    return (_q(ctx, Q) - ctx.sigma).max(axis=1)


def bellman_s_policy(ctx: BellmanContext, policy, Q=None) -> np.ndarray:
    _require(ctx, Rect.S, "bellman_s_policy")
    policy = np.asarray(policy, dtype=float)
    pen = ctx.sigma * ctx.unc.q.norm(policy, axis=1)
    return np.einsum("sa,sa->s", policy, _q(ctx, Q)) - pen


def bellman_s_opt(ctx: BellmanContext, Q=None, workers: int = 1):
    """Optimal s-rectangular image and the per-state water-fill results."""
    _require(ctx, Rect.S, "bellman_s_opt")
    Q = _q(ctx, Q)
    p = ctx.unc.p
    S = Q.shape[0]
    if workers <= 1 or S < 2 * workers:
        batch = water_fill_rows(Q, ctx.sigma, p, ctx.tol)
    else:
        chunks = np.array_split(np.arange(S), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda idx: water_fill_rows(Q[idx], ctx.sigma[idx], p, ctx.tol), chunks))
        batch = WaterFillBatch.concat(parts)
    return batch.zeta.copy(), batch


def bellman_optimistic_sa(ctx: BellmanContext, Q=None) -> np.ndarray:
    _require(ctx, Rect.SA, "bellman_optimistic_sa")
    return (_q(ctx, Q) + ctx.sigma).max(axis=1)


def bellman_optimistic_s(ctx: BellmanContext, Q=None) -> np.ndarray:
    # the bonus sigma * ||pi||_q peaks at a deterministic policy, so the max
    # over the simplex is attained by the best single action
    _require(ctx, Rect.S, "bellman_optimistic_s")
    return _q(ctx, Q).max(axis=1) + ctx.sigma


def bellman_opt(ctx: BellmanContext, Q=None, workers: int = 1):
    """Optimal (pessimistic) operator for whichever rectangularity ``ctx`` carries.

    Returns ``(value, WaterFillBatch or None)``.
    """
    rect = ctx.unc.rect
    Q = _q(ctx, Q)
    if rect is Rect.NONE:
        return Q.max(axis=1), None
    if rect is Rect.SA:
        return bellman_sa_opt(ctx, Q), None
    return bellman_s_opt(ctx, Q, workers)


def bellman_policy(ctx: BellmanContext, policy, Q=None) -> np.ndarray:
    rect = ctx.unc.rect
    Q = _q(ctx, Q)
    if rect is Rect.NONE:
        return np.einsum("sa,sa->s", np.asarray(policy, dtype=float), Q)
    if rect is Rect.SA:
        return bellman_sa_policy(ctx, policy, Q)
    return bellman_s_policy(ctx, policy, Q)


def bellman_optimistic(ctx: BellmanContext, Q=None) -> np.ndarray:
    rect = ctx.unc.rect
    Q = _q(ctx, Q)
    if rect is Rect.NONE:
        return Q.max(axis=1)
    if rect is Rect.SA:
        return bellman_optimistic_sa(ctx, Q)
    return bellman_optimistic_s(ctx, Q)
