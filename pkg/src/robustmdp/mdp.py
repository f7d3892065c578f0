"""Core data model: MDP instances, norm indices, uncertainty sets.

Value functions, Q-functions and policies are plain numpy arrays of shape
``(S,)``, ``(S, A)`` and ``(S, A)`` respectively.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DiscountOutOfRange,
    NonStochasticRow,
    ValidationError,
)

ROW_TOL = 1e-12


@dataclass(frozen=True)
class NormIndex:
    """Exponent of an L_p norm, ``1 <= p <= inf``.

    ``kind`` selects the algorithm family: ``"one"``, ``"two"``, ``"inf"``
    have closed forms, everything else (``"finite"``) goes through bisection.
    """

    value: float

    def __post_init__(self):
        p = float(self.value)
        if math.isnan(p) or p < 1.0:
            raise ValidationError(f"norm index must be >= 1, got {self.value!r}")
        object.__setattr__(self, "value", p)

    @classmethod
    def parse(cls, p: Union["NormIndex", float, int, str]) -> "NormIndex":
        if isinstance(p, NormIndex):
            return p
        if isinstance(p, str):
            s = p.strip().lower()
            if s in ("inf", "infinity", "∞", "max"):
                return cls(math.inf)
            return cls(float(s))
        return cls(float(p))

    @property
    def kind(self) -> str:
        if self.value == 1.0:
            return "one"
        if self.value == 2.0:
            return "two"
        if math.isinf(self.value):
            return "inf"
        return "finite"

    def conjugate(self) -> "NormIndex":
        return holder_conjugate(self)

    def norm(self, x, axis=None):
        """L_p norm of ``x`` along ``axis`` (all entries when ``axis`` is None)."""
        x = np.abs(np.asarray(x, dtype=float))
        k = self.kind
        if k == "inf":
            return np.max(x, axis=axis)
        if k == "one":
            return np.sum(x, axis=axis)
        if k == "two":
            return np.sqrt(np.sum(x * x, axis=axis))
        return np.sum(x ** self.value, axis=axis) ** (1.0 / self.value)

    def __str__(self):
        if math.isinf(self.value):
            return "inf"
        return f"{self.value:g}"


def holder_conjugate(p) -> NormIndex:
    """Return q with 1/p + 1/q = 1 (1 <-> inf, 2 <-> 2)."""
    p = NormIndex.parse(p)
    k = p.kind
    if k == "one":
        return NormIndex(math.inf)
    if k == "inf":
        return NormIndex(1.0)
    if k == "two":
        return p
    r = p.value
    return NormIndex(r / (r - 1.0))


@dataclass(frozen=True, eq=False)
class MdpInstance:
    """Nominal MDP (P0, R0, gamma, mu).

    ``P0`` has shape ``(S, A, S)`` indexed ``[s, a, s']``; ``R0`` has shape
    ``(S, A)``. Arrays are copied and made read-only. Construction only
    coerces types; call :func:`validate_mdp` to check the invariants.
    """

    P0: np.ndarray
    R0: np.ndarray
    gamma: float
    mu: Optional[np.ndarray] = None
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P0 = np.array(self.P0, dtype=float)
        R0 = np.array(self.R0, dtype=float)
        if P0.ndim != 3:
            raise DimensionMismatch(f"P0 must be 3-d (S, A, S), got shape {P0.shape}")
        S = P0.shape[0]
        if self.mu is None:
            mu = np.full(S, 1.0 / S) if S > 0 else np.zeros(0)
        else:
            mu = np.array(self.mu, dtype=float)
        for arr in (P0, R0, mu):
            arr.setflags(write=False)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "R0", R0)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", float(self.gamma))
        flat = np.ascontiguousarray(P0.reshape(P0.shape[0] * P0.shape[1], P0.shape[2]))
        flat.setflags(write=False)
        object.__setattr__(self, "_flat", flat)

    @property
    def num_states(self) -> int:
        return self.P0.shape[0]

    @property
    def num_actions(self) -> int:
        return self.P0.shape[1]

    S = num_states
    A = num_actions


def validate_mdp(inst: MdpInstance) -> None:
    """Raise unless every MdpInstance invariant holds."""
    P0, R0 = inst.P0, inst.R0
    S, A = P0.shape[0], P0.shape[1]
    if S < 1 or A < 1:
        raise DimensionMismatch(f"need S, A >= 1, got S={S}, A={A}")
    if P0.shape != (S, A, S):
        raise DimensionMismatch(f"P0 shape {P0.shape} is not (S, A, S) = {(S, A, S)}")
    if R0.shape != (S, A):
        raise DimensionMismatch(f"R0 shape {R0.shape} does not match (S, A) = {(S, A)}")
    if inst.mu.shape != (S,):
        raise DimensionMismatch(f"mu shape {inst.mu.shape} does not match (S,) = {(S,)}")
    if not (np.all(np.isfinite(P0)) and np.all(np.isfinite(R0))):
        raise ValidationError("P0 and R0 must be finite")
    if not (0.0 <= inst.gamma < 1.0):
        raise DiscountOutOfRange(f"gamma must lie in [0, 1), got {inst.gamma}")
    bad = (P0 < 0).any(axis=2) | (np.abs(P0.sum(axis=2) - 1.0) > ROW_TOL)
    if bad.any():
        s, a = (int(i) for i in np.argwhere(bad)[0])
        raise NonStochasticRow(
            f"P0[{s}, {a}, :] is not a probability vector (sum={P0[s, a].sum()!r})",
            index=(s, a),
        )
    mu = inst.mu
    if (mu < 0).any() or abs(mu.sum() - 1.0) > ROW_TOL:
        raise NonStochasticRow("mu is not a probability vector")


def q_from_value(inst: MdpInstance, v) -> np.ndarray:
    """Q(s, a) = R0(s, a) + gamma * sum_s' P0(s'|s, a) v(s')."""
    v = np.asarray(v, dtype=float)
    if v.shape != (inst.num_states,):
        raise DimensionMismatch(f"value has shape {v.shape}, expected ({inst.num_states},)")
    return inst.R0 + inst.gamma * (inst._flat @ v).reshape(inst.R0.shape)


def random_instance(S: int, A: int, seed: int = 0, reward_scale: float = 1.0,
                    gamma: float = 0.9) -> MdpInstance:
    """Random MDP: Dirichlet(1, ..., 1) kernel rows, Uniform[0, reward_scale] rewards."""
    if S < 1 or A < 1:
        raise DimensionMismatch(f"need S, A >= 1, got S={S}, A={A}")
    rng = np.random.default_rng(seed)
    P0 = rng.dirichlet(np.ones(S), size=(S, A))
    # push the Dirichlet rounding error into the largest entry so rows sum to 1
    err = 1.0 - P0.sum(axis=2)
    idx = P0.argmax(axis=2)
    np.put_along_axis(P0, idx[..., None],
                      np.take_along_axis(P0, idx[..., None], axis=2) + err[..., None], axis=2)
    R0 = rng.uniform(0.0, reward_scale, size=(S, A))
    inst = MdpInstance(P0, R0, gamma)
    validate_mdp(inst)
    return inst


def check_policy(pi, S: int, A: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (S, A):
        raise DimensionMismatch(f"policy has shape {pi.shape}, expected {(S, A)}")
    bad = (pi < 0).any(axis=1) | (np.abs(pi.sum(axis=1) - 1.0) > ROW_TOL)
    if bad.any():
        s = int(np.argmax(bad))
        raise NonStochasticRow(f"policy row {s} is not a probability vector", index=s)
    return pi


class Rect(str, enum.Enum):
    NONE = "none"
    SA = "sa"
    S = "s"


@dataclass(frozen=True, eq=False)
class UncertaintySpec:
    """L_p-ball uncertainty around the nominal (P0, R0).

    ``alpha`` and ``beta`` have shape ``(S, A)`` for sa-rectangular sets and
    ``(S,)`` for s-rectangular ones. ``forbidden`` (optional) marks next
    states the noise must leave at zero: shape ``(S, A, S)`` for sa and
    ``(S, S)`` for s.
    """

    rect: Rect
    p: NormIndex
    alpha: np.ndarray
    beta: np.ndarray
    forbidden: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "rect", Rect(self.rect))
        object.__setattr__(self, "p", NormIndex.parse(self.p))
        for name in ("alpha", "beta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.forbidden is not None:
            mask = np.array(self.forbidden, dtype=bool)
            mask.setflags(write=False)
            object.__setattr__(self, "forbidden", mask)

    @property
    def q(self) -> NormIndex:
        return holder_conjugate(self.p)

    @classmethod
    def nonrobust(cls, S: int, A: int) -> "UncertaintySpec":
        return cls(Rect.NONE, NormIndex(math.inf), np.zeros((S, A)), np.zeros((S, A)))

    @classmethod
    def uniform(cls, inst: MdpInstance, rect, p, alpha: float, beta: float,
                forbid_zeros: bool = False) -> "UncertaintySpec":
        """Same radii everywhere; optionally forbid every zero-probability transition."""
        S, A = inst.num_states, inst.num_actions
        rect = Rect(rect)
        if rect is Rect.NONE:
            return cls.nonrobust(S, A)
        shape = (S, A) if rect is Rect.SA else (S,)
        forbidden = None
        if forbid_zeros:
            zero = inst.P0 == 0.0
            forbidden = zero if rect is Rect.SA else zero.all(axis=1)
        return cls(rect, p, np.full(shape, float(alpha)), np.full(shape, float(beta)), forbidden)

    def with_radii(self, alpha, beta) -> "UncertaintySpec":
        return UncertaintySpec(self.rect, self.p, alpha, beta, self.forbidden)


def validate_uncertainty(inst: MdpInstance, unc: UncertaintySpec, warn: bool = True) -> None:
    """Check radii shapes/signs and the forbidden mask against ``inst``.

    Emits a ``RuntimeWarning`` when a kernel radius exceeds the smallest
    nonzero nominal transition mass it can act on: the noise set then
    contains kernels with negative entries.
    """
    S, A = inst.num_states, inst.num_actions
    if unc.rect is Rect.NONE:
        if np.any(unc.alpha != 0) or np.any(unc.beta != 0):
            raise ValidationError("non-robust spec must have zero radii")
        return
    shape = (S, A) if unc.rect is Rect.SA else (S,)
    for name in ("alpha", "beta"):
        arr = getattr(unc, name)
        if arr.shape != shape:
            raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)) or (arr < 0).any():
            raise ValidationError(f"{name} must be finite and nonnegative")
    mask = unc.forbidden
    if mask is not None:
        if unc.rect is Rect.SA:
            if mask.shape != (S, A, S):
                raise DimensionMismatch(f"forbidden has shape {mask.shape}, expected {(S, A, S)}")
            if (mask & (inst.P0 != 0.0)).any():
                raise ValidationError("forbidden transitions must have zero nominal probability")
            if mask.all(axis=2).any():
                raise ValidationError("every (s, a) needs at least one allowed next state")
        else:
            if mask.shape != (S, S):
                raise DimensionMismatch(f"forbidden has shape {mask.shape}, expected {(S, S)}")
            if (mask[:, None, :] & (inst.P0 != 0.0)).any():
                raise ValidationError("forbidden transitions must have zero nominal probability")
            if mask.all(axis=1).any():
                raise ValidationError("every state needs at least one allowed next state")
    if warn:
        P = np.where(inst.P0 > 0, inst.P0, np.inf)
        min_mass = P.min(axis=2) if unc.rect is Rect.SA else P.min(axis=(1, 2))
        if (unc.beta > min_mass).any():
            warnings.warn(
                "kernel radius exceeds the smallest nonzero nominal transition mass; "
                "the uncertainty set contains signed kernels",
                RuntimeWarning,
                stacklevel=2,
            )


_INSTANCE_FIELDS = {"S", "A", "gamma", "P0", "R0", "mu"}


def instance_to_dict(inst: MdpInstance) -> dict:
    return {
        "S": inst.num_states,
        "A": inst.num_actions,
        "gamma": inst.gamma,
        "P0": inst.P0.tolist(),
        "R0": inst.R0.tolist(),
        "mu": inst.mu.tolist(),
    }


def instance_from_dict(d: dict) -> MdpInstance:
    if not isinstance(d, dict):
        raise ValidationError("instance JSON must be an object")
    unknown = set(d) - _INSTANCE_FIELDS
    if unknown:
        raise ValidationError(f"unknown instance fields: {sorted(unknown)}")
    missing = {"S", "A", "gamma", "P0", "R0"} - set(d)
    if missing:
        raise ValidationError(f"missing instance fields: {sorted(missing)}")
    try:
        inst = MdpInstance(d["P0"], d["R0"], d["gamma"], d.get("mu"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed instance arrays: {exc}") from exc
    if (inst.num_states, inst.num_actions) != (d["S"], d["A"]):
        raise DimensionMismatch(
            f"declared S={d['S']}, A={d['A']} but P0 has shape {inst.P0.shape}"
        )
    validate_mdp(inst)
    return inst


def save_instance(inst: MdpInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh)


def load_instance(path) -> MdpInstance:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(d)
