"""p-mean and p-variance of a value vector.

``kappa_p(v) = min_w ||v - w 1||_p`` measures how spread out ``v`` is in the
L_p sense; ``w`` attaining the minimum is the p-mean. Closed forms exist for
p in {1, 2, inf}; other exponents locate the root of the derivative by
bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mdp import NormIndex

DEFAULT_TOL = 1e-10
MAX_BISECT = 200


@dataclass(frozen=True)
class PMeanResult:
    omega: float
    kappa: float
    iterations: int = 0


def _as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValidationError("empty vector")
    return v


def root_fn(v, omega, r: float) -> float:
    """h(w) = sum sign(v - w) |v - w|^(r-1); strictly decreasing in w for r > 1."""
    d = np.asarray(v, dtype=float) - omega
    return float(np.sum(np.sign(d) * np.abs(d) ** (r - 1.0)))


def _bisect_omega(v: np.ndarray, r: float, tol: float, max_iter: int):
    lo, hi = float(v.min()), float(v.max())
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if root_fn(v, mid, r) > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return 0.5 * (lo + hi), it


def p_mean(v, p, tol: float = DEFAULT_TOL, max_iter: int = MAX_BISECT) -> PMeanResult:
    """Return the minimizing shift and the p-variance of ``v``.

    >>> p_mean([1.0, 2.0, 6.0], 1).kappa
    5.0
    """
    v = _as_vector(v)
    if not isinstance(p, NormIndex):
        p = NormIndex.parse(p)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    kind = p.kind
    if kind == "two":
        omega = float(v.mean())
        d = v - omega
        return PMeanResult(omega, float(np.sqrt(d @ d)), 0)
    if kind == "one":
        omega = float(np.median(v))
        return PMeanResult(omega, float(np.abs(v - omega).sum()), 0)
    lo, hi = float(v.min()), float(v.max())
    if kind == "inf":
        return PMeanResult(0.5 * (lo + hi), 0.5 * (hi - lo), 0)
    if hi - lo <= tol:
        return PMeanResult(0.5 * (lo + hi), 0.0, 0)
    omega, it = _bisect_omega(v, p.value, tol, max_iter)
    return PMeanResult(omega, float(p.norm(v - omega)), it)


def p_variance(v, p, tol: float = DEFAULT_TOL) -> float:
    return p_mean(v, p, tol).kappa


def p_variance_masked(v, allowed, p, tol: float = DEFAULT_TOL) -> PMeanResult:
    """p_mean of the entries of ``v`` whose ``allowed`` flag is set."""
    v = np.asarray(v, dtype=float).ravel()
    allowed = np.asarray(allowed, dtype=bool).ravel()
    if allowed.shape != v.shape:
        raise ValidationError(f"mask shape {allowed.shape} does not match vector {v.shape}")
    if not allowed.any():
        raise ValidationError("all entries are masked")
    return p_mean(v[allowed], p, tol)


def kappa_rows(v, allowed_rows, p, tol: float = DEFAULT_TOL) -> np.ndarray:
    """kappa_p of ``v`` restricted to each row of a boolean mask array.

    ``allowed_rows`` has shape ``(..., S)``; the result has shape ``(...)``.
    Work is done once per distinct mask pattern.
    """
    v = np.asarray(v, dtype=float).ravel()
    allowed_rows = np.asarray(allowed_rows, dtype=bool)
    flat = allowed_rows.reshape(-1, v.size)
    patterns, inverse = np.unique(flat, axis=0, return_inverse=True)
    vals = np.array([p_variance_masked(v, pat, p, tol).kappa for pat in patterns])
    return vals[inverse.ravel()].reshape(allowed_rows.shape[:-1])
