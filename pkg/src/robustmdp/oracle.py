"""Brute-force reference computations.

Nothing here imports the p-variance, water-fill, Bellman or solver modules;
each routine works straight from the definition so it can check them.

Soundness directions:

* :func:`kappa_grid` minimizes over a finite set of shifts, so it can only
  overestimate kappa.
* :func:`waterfill_grid` maximizes over a simplex lattice, so it can only
  underestimate zeta.
* :func:`inner_min_sampled` minimizes over sampled feasible noise, so it can
  only overestimate the robust inner minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DimensionTooLarge, InvalidConfig
from .mdp import MdpInstance, NormIndex, Rect, UncertaintySpec

FULL_GRID_LIMIT = 200_000


@dataclass(frozen=True)
class OracleConfig:
    grid_step: float = 1e-3
    noise_samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.grid_step > 0:
            raise InvalidConfig("grid_step must be positive")
        if self.noise_samples < 1:
            raise InvalidConfig("noise_samples must be >= 1")


def _lp(x, p: float, axis=-1):
    x = np.abs(x)
    if math.isinf(p):
        return x.max(axis=axis)
    if p == 1.0:
        return x.sum(axis=axis)
    return (x ** p).sum(axis=axis) ** (1.0 / p)


def kappa_grid(v, p, cfg: OracleConfig = OracleConfig()) -> float:
    """min over shifts w on a ``grid_step`` lattice of [min v, max v] of ||v - w||_p.

    Small grids are scanned in full. Large grids use a ternary search over
    lattice indices, which finds the lattice minimum exactly because the
    objective is convex in w.
    """
    v = np.asarray(v, dtype=float).ravel()
    p = NormIndex.parse(p).value
    lo, hi = float(v.min()), float(v.max())
    n = int(math.floor((hi - lo) / cfg.grid_step)) + 1
    if hi - lo == 0.0:
        return 0.0

    def f(idx):
        w = np.minimum(lo + np.asarray(idx, dtype=float) * cfg.grid_step, hi)
        return _lp(v[None, :] - np.atleast_1d(w)[:, None], p)

    # include the right endpoint so the midrange of two points is reachable
    if n <= FULL_GRID_LIMIT:
        vals = f(np.arange(n + 1))
        return float(vals.min())
    a, b = 0, n
    while b - a > 2:
        m1 = a + (b - a) // 3
        m2 = b - (b - a) // 3
        f1, f2 = f([m1, m2])
        if f1 < f2:
            b = m2 - 1
        elif f1 > f2:
            a = m1 + 1
        else:
            a, b = m1, m2
    return float(f(np.arange(a, b + 1)).min())


@lru_cache(maxsize=8)
def _simplex_lattice(A: int, n: int) -> np.ndarray:
    """All compositions of n into A nonnegative parts, divided by n."""
    if A == 1:
        return np.ones((1, 1))
    if A == 2:
        i = np.arange(n + 1)
        return np.stack([i, n - i], axis=1) / n
    if A == 3:
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        i, j = i[keep], j[keep]
        return np.stack([i, j, n - i - j], axis=1) / n
    raise DimensionTooLarge(f"simplex lattice supports A <= 3 directly, got {A}")


def waterfill_grid(b, sigma: float, q, cfg: OracleConfig = OracleConfig(),
                   return_argmax: bool = False):
    """max over a simplex lattice of <c, b> - sigma * ||c||_q (A <= 4).

    With ``return_argmax`` returns ``(value, c)`` for the first maximizer.
    """
    b = np.asarray(b, dtype=float).ravel()
    A = b.size
    if A > 4:
        raise DimensionTooLarge(f"simplex grid limited to A <= 4, got {A}")
    q = NormIndex.parse(q).value
    n = int(round(1.0 / cfg.grid_step))
    best, arg = -math.inf, None
    if A <= 3:
        pts = _simplex_lattice(A, n)
        vals = pts @ b - sigma * _lp(pts, q)
        k = int(np.argmax(vals))
        best, arg = float(vals[k]), pts[k]
    else:
        for i0 in range(n + 1):
            m = n - i0
            if m == 0:
                pts = np.zeros((1, 3))
            else:
                pts = _simplex_lattice(3, m) * (m / n)
            full = np.concatenate([np.full((pts.shape[0], 1), i0 / n), pts], axis=1)
            vals = full @ b - sigma * _lp(full, q)
            k = int(np.argmax(vals))
            if vals[k] > best:
                best, arg = float(vals[k]), full[k]
    return (best, arg.copy()) if return_argmax else best


def _project(X, allowed, zero_sum: bool):
    """Zero forbidden entries and (optionally) make each row sum to zero over allowed ones."""
    X = np.where(allowed, X, 0.0)
    if zero_sum:
        cnt = allowed.sum(axis=-1, keepdims=True)
        X = X - X.sum(axis=-1, keepdims=True) / np.maximum(cnt, 1)
        X = np.where(allowed, X, 0.0)
    return X


def _to_boundary(X, radius: float, p: float):
    flat = X.reshape(X.shape[0], -1)
    nrm = _lp(flat, p)
    scale = np.where(nrm > 0, radius / np.where(nrm > 0, nrm, 1.0), 0.0)
    return X * scale.reshape((-1,) + (1,) * (X.ndim - 1))


def _directions(rng, N: int, shape, allowed):
    """Mixture of Gaussian, signed coordinate-pair and Rademacher directions."""
    m, S = shape
    G = rng.standard_normal((N, m, S))
    third = N // 3
    # pair directions e_i - e_j within one row
    rows = rng.integers(0, m, size=third)
    i = rng.integers(0, S, size=third)
    j = rng.integers(0, S, size=third)
    pair = np.zeros((third, m, S))
    pair[np.arange(third), rows, i] += 1.0
    pair[np.arange(third), rows, j] -= 1.0
    G[:third] = pair
    G[third:2 * third] = rng.choice([-1.0, 1.0], size=(third, m, S))
    return np.where(allowed[None], G, 0.0)


def _min_linear(c, radius: float, p: float, allowed, zero_sum: bool, N: int, rng) -> float:
    """Sampled min of <c, X> over ||X||_p <= radius with the row constraints.

    Half the budget draws global directions, the rest refines the incumbent
    with shrinking random perturbations. Every candidate is feasible, so the
    result is never below the true minimum.
    """
    c = np.asarray(c, dtype=float)
    if radius <= 0.0 or not np.any(c):
        return 0.0
    n_global = max(N // 2, 1)
    X = _to_boundary(_project(_directions(rng, n_global, c.shape, allowed), allowed, zero_sum),
                     radius, p)
    vals = np.einsum("nms,ms->n", X, c)
    k = int(np.argmin(vals))
    best_x, best = X[k], float(vals[k])
    best = min(best, 0.0)
    remaining = N - n_global
    rounds = 25
    per = max(remaining // rounds, 1)
    step = 0.5 * radius
    for _ in range(rounds):
        if remaining <= 0:
            break
        cnt = min(per, remaining)
        remaining -= cnt
        Y = best_x[None] + step * rng.standard_normal((cnt,) + c.shape)
        Y = _to_boundary(_project(Y, allowed, zero_sum), radius, p)
        vals = np.einsum("nms,ms->n", Y, c)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, best_x = float(vals[k]), Y[k]
        else:
            step *= 0.5
    return best


def inner_min_sampled(inst: MdpInstance, unc: UncertaintySpec, policy, v, s: int,
                      cfg: OracleConfig = OracleConfig()) -> float:
    """Sampled robust inner minimum at state ``s`` for a fixed policy.

    The objective ``sum_a pi(a) [R(s,a) + gamma <P(.|s,a), v>]`` separates
    into reward and kernel noise (and, for sa-rectangular sets, per action),
    so each piece is minimized over its own ``noise_samples`` draws.
    """
    rng = np.random.default_rng(cfg.seed)
    pi = np.asarray(policy, dtype=float)[s]
    v = np.asarray(v, dtype=float)
    S, A = inst.num_states, inst.num_actions
    gamma = inst.gamma
    nominal = 0.0
    for a in range(A):
        nominal += pi[a] * (inst.R0[s, a] + gamma * sum(inst.P0[s, a, t] * v[t] for t in range(S)))
    if unc.rect is Rect.NONE:
        return float(nominal)
    p = unc.p.value
    N = cfg.noise_samples
    total = nominal
    if unc.rect is Rect.SA:
        for a in range(A):
            if pi[a] == 0.0:
                continue
            one = np.ones((1, 1), dtype=bool)
            r_min = _min_linear(np.ones((1, 1)), unc.alpha[s, a], p, one, False, N, rng)
            allowed = np.ones((1, S), dtype=bool)
            if unc.forbidden is not None:
                allowed = ~unc.forbidden[s, a][None, :]
            k_min = _min_linear(gamma * v[None, :], unc.beta[s, a], p, allowed, True, N, rng)
            total += pi[a] * (r_min + k_min)
    else:
        r_min = _min_linear(pi[None, :], unc.alpha[s], p, np.ones((1, A), dtype=bool),
                            False, N, rng)
        allowed = np.ones((A, S), dtype=bool)
        if unc.forbidden is not None:
            allowed = np.broadcast_to(~unc.forbidden[s][None, :], (A, S))
        k_min = _min_linear(gamma * np.outer(pi, v), unc.beta[s], p, allowed, True, N, rng)
        total += r_min + k_min
    return float(total)


def vi_reference(inst: MdpInstance, cfg: OracleConfig = OracleConfig(),
                 tol: float = 1e-12, max_iters: int = 100_000) -> np.ndarray:
    """Textbook non-robust value iteration with explicit loops."""
    S, A = inst.num_states, inst.num_actions
    P = inst.P0.tolist()
    R = inst.R0.tolist()
    g = inst.gamma
    v = [0.0] * S
    for _ in range(max_iters):
        new = []
        for s in range(S):
            best = -math.inf
            for a in range(A):
                acc = R[s][a]
                row = P[s][a]
                for t in range(S):
                    acc += g * row[t] * v[t]
                if acc > best:
                    best = acc
            new.append(best)
        diff = max(abs(x - y) for x, y in zip(new, v))
        v = new
        if diff <= tol * (1.0 - g):
            return np.array(v)
    raise ConvergenceError(f"reference value iteration did not converge in {max_iters} iterations")
