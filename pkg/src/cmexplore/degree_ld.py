"""Decay rate of the probability that some component has a prescribed
degree configuration ``q`` (vertices of degree ``k`` per vertex of the graph).
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .degree_model import DegreeModel, build_model
from .errors import AllZero, InvalidTarget, NegativeInput, NoConvergence, NoSignChange

BETA_LO = 1e-12
BETA_HI = 1.0 - 1e-12
BETA_MAX_ITER = 200
BETA_RESIDUAL = 1e-10


def _dense(q: Mapping[int, float] | np.ndarray, size: int | None = None) -> np.ndarray:
    if isinstance(q, Mapping):
        kmax = max((int(k) for k in q), default=0)
        out = np.zeros(max(kmax + 1, size or 0))
        for k, v in q.items():
            out[int(k)] += float(v)
        return out
    a = np.asarray(q, dtype=float)
    if size is not None and len(a) < size:
        a = np.concatenate([a, np.zeros(size - len(a))])
    return a


@dataclass(frozen=True)
class DegreeConfigTarget:
    """Target configuration ``q`` against the reference distribution ``p``.

    ``q`` and ``p`` are dense arrays of the same length indexed by degree.
    """

    q: np.ndarray
    p: np.ndarray
    eps: float = 0.02

    @classmethod
    def build(cls, q, model, eps: float = 0.02, check: bool = True) -> "DegreeConfigTarget":
        p_model = model if isinstance(model, DegreeModel) else build_model(model)
        qd = _dense(q)
        size = max(len(qd), len(p_model.p))
        t = cls(_dense(qd, size), _dense(p_model.p, size), float(eps))
        if check:
            t.validate()
        return t

    def validate(self) -> None:
        """Raise InvalidTarget naming the first violated constraint."""
        q, p = self.q, self.p
        if np.any(~np.isfinite(q)) or np.any(q < 0):
            raise InvalidTarget("constraint q_k >= 0 violated")
        if q[0] != 0:
            raise InvalidTarget("q_0 must be 0 (degrees are >= 1)")
        over = np.flatnonzero(q > p * (1 + 1e-12) + 1e-15)
        if over.size:
            k = int(over[0])
            raise InvalidTarget(f"constraint q_k <= p_k violated at k={k}")
        k = np.arange(len(q))
        if not np.dot(k, q) > 2 * q.sum():
            raise InvalidTarget("constraint sum k q_k > 2 sum q_k violated (need more edges than vertices)")
        if not self.eps > 0:
            raise InvalidTarget("eps must be positive")

    def as_dict(self) -> dict:
        return {int(k): float(v) for k, v in enumerate(self.q) if v > 0}

    def matching_bounds(self) -> bool:
        """Whether ``p_1 = p_2 = 0``, the case where the lower bound is known to be tight."""
        p = self.p
        return bool(len(p) < 2 or p[1] == 0) and bool(len(p) < 3 or p[2] == 0)


def F(alpha, q: np.ndarray):
    """``sum_{k>=3} k q_k (a - a^{k-1}) / (1 - a^k) - q_1``, vectorized in ``alpha``."""
    a = np.asarray(alpha, dtype=float)[..., None]
    k = np.arange(3, len(q))
    if k.size == 0:
        out = np.zeros(a.shape[:-1])
    else:
        frac = (a - a ** (k - 1)) / (1.0 - a**k)
        out = frac @ (k * q[3:])
    q1 = q[1] if len(q) > 1 else 0.0
    out = out - q1
    return float(out) if np.ndim(out) == 0 else out


def solve_beta(target: DegreeConfigTarget) -> float:
    """Root of ``F`` in ``(0, 1)``; 0 when ``q_1 = 0``."""
    q = target.q
    if len(q) < 2 or q[1] == 0:
        return 0.0
    lo, hi = BETA_LO, BETA_HI
    f_lo, f_hi = F(lo, q), F(hi, q)
    if not (f_lo < 0 < f_hi):
        raise NoSignChange(f"F has no sign change on [{lo}, {hi}]: F(lo)={f_lo!r}, F(hi)={f_hi!r}")
    for _ in range(BETA_MAX_ITER):
        mid = 0.5 * (lo + hi)
        f_mid = F(mid, q)
        if f_mid == 0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    beta = 0.5 * (lo + hi)
    if abs(F(beta, q)) > BETA_RESIDUAL:
        raise NoConvergence(f"beta residual {F(beta, q)!r} exceeds {BETA_RESIDUAL}")
    return beta


def entropy_H(pt) -> float:
    """``sum pt_k log pt_k - (s/2) log(s/2)`` with ``s = sum k pt_k``; zero terms drop out."""
    a = _dense(pt)
    if np.any(a < 0):
        raise NegativeInput("entries must be nonnegative")
    k = np.arange(len(a))
    half = 0.5 * float(np.dot(k, a))
    if not half > 0:
        raise AllZero("sum k p_k must be positive")
    nz = a[a > 0]
    return float(np.dot(nz, np.log(nz))) - half * math.log(half)


def _H_or_zero(a: np.ndarray) -> float:
    # H(0) = 0 by convention; clip float dust from p - q
    a = np.where(np.abs(a) < 1e-15, 0.0, a)
    return 0.0 if not np.any(a > 0) else entropy_H(a)


def coeff_K(target: DegreeConfigTarget, beta: float | None = None) -> float:
    """``(s/2) log(1 - b^2) - sum q_k log(1 - b^k)`` with ``s = sum k q_k``.

    ``beta`` may be passed to bypass :func:`solve_beta`.
    """
    b = solve_beta(target) if beta is None else float(beta)
    if b == 0.0:
        return 0.0
    q = target.q
    k = np.arange(len(q))
    half = 0.5 * float(np.dot(k, q))
    sup = np.flatnonzero(q > 0)
    return half * math.log1p(-b * b) - float(np.dot(q[sup], np.log1p(-(b ** k[sup]))))


@dataclass(frozen=True)
class DegreeLDReport:
    beta: float
    K: float
    H_q: float
    H_pq: float
    H_p: float
    I1: float
    matching_bounds: bool

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "K": self.K,
            "H_q": self.H_q,
            "H_pq": self.H_pq,
            "H_p": self.H_p,
            "I1": self.I1,
            "matching_bounds": self.matching_bounds,
        }


def degree_ld_report(target: DegreeConfigTarget) -> DegreeLDReport:
    target.validate()
    beta = solve_beta(target)
    K = coeff_K(target, beta)
    H_q = entropy_H(target.q)
    H_pq = _H_or_zero(target.p - target.q)
    H_p = entropy_H(target.p)
    return DegreeLDReport(beta, K, H_q, H_pq, H_p, H_q + H_pq - H_p + K, target.matching_bounds())


def rate_I1(target: DegreeConfigTarget) -> float:
    """``H(q) + H(p - q) - H(p) + K(q)``."""
    return degree_ld_report(target).I1


def read_target(text: str) -> tuple[dict, float | None]:
    """Parse ``k q_k`` records, one per line; an ``eps <value>`` line is optional."""
    q: dict[int, float] = {}
    eps = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidTarget(f"line {lineno}: expected 'k q_k'")
        if parts[0].lower() == "eps":
            eps = float(parts[1])
            continue
        q[int(parts[0])] = q.get(int(parts[0]), 0.0) + float(parts[1])
    return q, eps
