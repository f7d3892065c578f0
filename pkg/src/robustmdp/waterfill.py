"""L_p water-pouring: ``max_{c in simplex} <c, b> - sigma * ||c||_q``.

Here q is the Holder conjugate of p. The optimum ``zeta`` is the level at
which ``sum_i (b_i - zeta)_+^p = sigma^p``; actions with ``b_i`` above that
level are active and share the probability mass in proportion to
``(b_i - zeta)^(p-1)``.

:func:`water_fill` handles one vector. :func:`water_fill_rows` solves many
independent rows at once (one per state) and is what the Bellman sweeps use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .mdp import NormIndex

DEFAULT_TOL = 1e-10
MAX_BISECT = 200


@dataclass(frozen=True)
class WaterFillResult:
    zeta: float
    chi: int
    weights: np.ndarray
    residual: float = 0.0
    iterations: int = 0


def _sorted_desc(b):
    b = np.asarray(b, dtype=float).ravel()
    order = np.argsort(-b, kind="stable")
    return b, order, b[order]


def _level_residual(x: np.ndarray, zeta: float, sigma: float, p: NormIndex) -> float:
    if p.kind == "inf":
        return abs(float(x[0] - zeta) - sigma)
    gap = np.clip(x - zeta, 0.0, None)
    return abs(float(np.sum(gap ** p.value)) - sigma ** p.value)


def _block_fits(x: np.ndarray, k: int, sigma: float, p: NormIndex) -> bool:
    """True when sum_{i<=k} (x_i - x_k)^p <= sigma^p (k is 1-based, x descending)."""
    with np.errstate(over="ignore"):
        d = (x[:k] - x[k - 1]) / sigma
        if p.kind == "one":
            return bool(d.sum() <= 1.0)
        return bool(np.sum(d ** p.value) <= 1.0)


def _active_count_sorted(x: np.ndarray, sigma: float, p: NormIndex) -> int:
    if sigma <= 0.0:
        return 1
    if p.kind == "inf":
        return int(np.count_nonzero(x[0] - x <= sigma))
    chi = 1
    while chi < x.size and _block_fits(x, chi + 1, sigma, p):
        chi += 1
    return chi


def active_count(b, sigma: float, p) -> int:
    """Number of active actions: max k with sum_{i<=k} (b_i - b_k)^p <= sigma^p.

    ``b`` is sorted internally (descending). For p = inf the limit form
    ``b_1 - b_k <= sigma`` is used.
    """
    _, _, x = _sorted_desc(b)
    return _active_count_sorted(x, float(sigma), NormIndex.parse(p))


def _threshold_weights(x: np.ndarray, zeta: float, chi: int, sigma: float,
                       p: NormIndex) -> np.ndarray:
    """Optimal weights in descending-sorted order."""
    w = np.zeros_like(x)
    if sigma <= 0.0 or p.kind == "inf":
        w[0] = 1.0
        return w
    if p.kind == "one":
        w[:chi] = 1.0 / chi
        return w
    gap = np.clip(x - zeta, 0.0, None)
    w = gap ** (p.value - 1.0)
    total = w.sum()
    if total <= 0.0 or not np.isfinite(total):
        w = np.zeros_like(x)
        w[0] = 1.0
        return w
    return w / total


def water_fill(b, sigma: float, p, tol: float = DEFAULT_TOL,
               max_iter: int = MAX_BISECT) -> WaterFillResult:
    """Solve the water-pouring problem for one vector ``b``.

    Weights are returned in the caller's action order.

    >>> r = water_fill([3.0, 2.0, 0.0], 2.0, 1)
    >>> r.zeta, r.chi
    (1.5, 2)
    """
    b, order, x = _sorted_desc(b)
    p = NormIndex.parse(p)
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    A = x.size
    iterations = 0

    if sigma == 0.0:
        zeta, chi = float(x[0]), 1
    elif p.kind == "inf":
        zeta = float(x[0] - sigma)
        chi = _active_count_sorted(x, sigma, p)
    elif p.kind == "one":
        lam = (np.cumsum(x) - sigma) / np.arange(1, A + 1)
        zeta = float(lam.max())
        chi = _active_count_sorted(x, sigma, p)
    elif p.kind == "two":
        # grow the active block while the next action still fits under the
        # budget, i.e. sits at or above the current level
        k = 1
        s1 = float(x[0])
        s2 = 0.0  # within-block sum of squared deviations
        lam = s1 - sigma
        while k < A and _block_fits(x, k + 1, sigma, p):
            mean_old = s1 / k
            s1 += x[k]
            k += 1
            s2 += (x[k - 1] - mean_old) ** 2 * (k - 1) / k
            mean = s1 / k
            lam = mean - math.sqrt(max(sigma * sigma - s2, 0.0) / k)
        zeta, chi = float(lam), k
    else:
        r = p.value
        lo, hi = float(x[0] - sigma), float(x[0])
        while hi - lo > tol and iterations < max_iter:
            mid = 0.5 * (lo + hi)
            gap = np.clip(x - mid, 0.0, None) / sigma
            if np.sum(gap ** r) > 1.0:
                lo = mid
            else:
                hi = mid
            iterations += 1
        zeta = 0.5 * (lo + hi)
        chi = _active_count_sorted(x, sigma, p)

    w_sorted = _threshold_weights(x, zeta, chi, sigma, p)
    weights = np.empty_like(w_sorted)
    weights[order] = w_sorted
    return WaterFillResult(zeta, chi, weights, _level_residual(x, zeta, sigma, p), iterations)


class WaterFillBatch:
    """Row-wise water-fill results for an ``(S, A)`` matrix of scores.

    ``zeta`` and ``chi`` are length-S arrays; optimal weights are built on
    first access of :attr:`weights`. Indexing returns a
    :class:`WaterFillResult` for a single row.
    """

    def __init__(self, B, sigma, p: NormIndex, zeta, chi, iterations=0):
        self._B = B
        self.sigma = sigma
        self.p = p
        self.zeta = zeta
        self.chi = chi
        self.iterations = iterations
        self._weights: Optional[np.ndarray] = None

    def __len__(self):
        return self.zeta.shape[0]

    @property
    def weights(self) -> np.ndarray:
        if self._weights is None:
            self._weights = self._build_weights()
        return self._weights

    def _build_weights(self) -> np.ndarray:
        p = self.p
        order = np.argsort(-self._B, axis=1, kind="stable")
        X = np.take_along_axis(self._B, order, axis=1)
        S, A = X.shape
        if p.kind == "inf":
            W = np.zeros((S, A))
            W[:, 0] = 1.0
        elif p.kind == "one":
            W = (np.arange(A)[None, :] < self.chi[:, None]) / self.chi[:, None]
        else:
            W = np.clip(X - self.zeta[:, None], 0.0, None) ** (p.value - 1.0)
        W = np.where(self.sigma[:, None] > 0, W, np.eye(1, A)[0][None, :])
        tot = W.sum(axis=1, keepdims=True)
        bad = ~(tot[:, 0] > 0) | ~np.isfinite(tot[:, 0])
        if bad.any():
            W[bad] = 0.0
            W[bad, 0] = 1.0
            tot[bad] = 1.0
        W = W / tot
        out = np.empty_like(W)
        np.put_along_axis(out, order, W, axis=1)
        return out

    def residuals(self) -> np.ndarray:
        top = self._B.max(axis=1)
        if self.p.kind == "inf":
            return np.abs(top - self.zeta - self.sigma)
        gap = np.clip(self._B - self.zeta[:, None], 0.0, None)
        return np.abs((gap ** self.p.value).sum(axis=1) - self.sigma ** self.p.value)

    def __getitem__(self, s) -> WaterFillResult:
        return WaterFillResult(
            float(self.zeta[s]),
            int(self.chi[s]),
            self.weights[s].copy(),
            float(self.residuals()[s]),
            int(self.iterations),
        )

    @classmethod
    def concat(cls, parts) -> "WaterFillBatch":
        cat = np.concatenate
        return cls(
            cat([b._B for b in parts]),
            cat([b.sigma for b in parts]),
            parts[0].p,
            cat([b.zeta for b in parts]),
            cat([b.chi for b in parts]),
            max(b.iterations for b in parts),
        )


@lru_cache(maxsize=32)
def _suffix_tools(A: int):
    """Matrix turning ascending-sorted rows into top-k sums, and the k of each column."""
    L = np.tril(np.ones((A, A)))
    L.setflags(write=False)
    k = np.arange(A, 0, -1, dtype=float)
    k.setflags(write=False)
    return L, k


def _top_run(ok: np.ndarray) -> np.ndarray:
    """Length of the trailing run of True in each row, at least 1.

    Rows are in ascending score order, so the trailing run is the block of
    best actions.
    """
    A = ok.shape[1]
    run = np.argmax(~ok[:, ::-1], axis=1)
    run = np.where(ok[:, 0], A, run)
    return np.maximum(run, 1)


def water_fill_rows(B, sigma, p, tol: float = DEFAULT_TOL,
                    max_iter: int = MAX_BISECT) -> WaterFillBatch:
    """Water-fill every row of ``B`` (shape ``(S, A)``) with its own ``sigma[s]``.

    Rows are sorted ascending and all top-k totals come from one product with
    a triangular matrix, which keeps the sweep cheap for many short rows.
    """
    B = np.asarray(B, dtype=float)
    S, A = B.shape
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (S,):
        sigma = np.broadcast_to(sigma, (S,)).copy()
    if not isinstance(p, NormIndex):
        p = NormIndex.parse(p)
    X = np.sort(B, axis=1)
    top = X[:, -1].copy()
    Y = X - top[:, None]  # shifted scores, all <= 0; every total below is shift invariant
    sig = sigma[:, None]
    rows = np.arange(S)
    iterations = 0
    kind = p.kind
    if kind == "inf":
        chi = _top_run(-Y <= sig)
        zeta = top - sigma
    elif kind in ("one", "two"):
        L, k = _suffix_tools(A)
        c1 = Y @ L
        if kind == "one":
            chi = _top_run(c1 - k * Y <= sig)
            zeta = top + (c1[rows, A - chi] - sigma) / chi
        else:
            Y2 = Y * Y
            c2 = Y2 @ L
            D = k * Y2
            D -= 2.0 * c1 * Y
            D += c2
            chi = _top_run(D <= sig * sig)
            idx = A - chi
            s1 = c1[rows, idx]
            ss = c2[rows, idx] - s1 * s1 / chi
            zeta = top + s1 / chi - np.sqrt(np.clip(sigma * sigma - ss, 0.0, None) / chi)
    else:
        r = p.value
        safe = np.where(sigma > 0, sigma, 1.0)[:, None]
        with np.errstate(over="ignore"):
            D = np.clip(Y[:, :, None] - Y[:, None, :], 0.0, None) / safe[:, :, None]
            chi = _top_run(np.sum(D ** r, axis=1) <= 1.0)
        # only the active block contributes at the root, which also narrows the bracket
        first = A - chi
        Ya = np.where(np.arange(A)[None, :] >= first[:, None], Y, -np.inf)
        nxt = np.where(chi < A, Y[rows, np.maximum(first - 1, 0)], -np.inf)
        lo = np.maximum(-sigma, nxt)
        hi = np.minimum(0.0, Y[rows, first])
        lo = np.minimum(lo, hi)
        # rows stop individually, so a row's answer does not depend on its batch
        live = hi - lo > tol
        while iterations < max_iter and live.any():
            mid = 0.5 * (lo + hi)
            gap = np.clip(Ya - mid[:, None], 0.0, None) / safe
            big = np.sum(gap ** r, axis=1) > 1.0
            lo = np.where(big & live, mid, lo)
            hi = np.where(~big & live, mid, hi)
            live = hi - lo > tol
            iterations += 1
        zeta = top + 0.5 * (lo + hi)
    pos = sigma > 0
    if not pos.all():
        zeta = np.where(pos, zeta, top)
        chi = np.where(pos, chi, 1)
    return WaterFillBatch(B, sigma, p, zeta, chi.astype(np.int64), iterations)
