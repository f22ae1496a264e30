"""Degree sequences, limiting degree distributions and their moments."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyInput, InvalidInput, OddDegreeSum, ZeroDegree

DEFAULT_TAIL_TOL = 1e-12
DEFAULT_EPS_P = 1.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def validate_sequence(degrees: Sequence[int]) -> np.ndarray:
    """Return the degree sequence as an int64 array after checking it.

    Raises EmptyInput, ZeroDegree (some d_i <= 0) or OddDegreeSum.
    """
    d = np.asarray(degrees)
    if d.size == 0:
        raise EmptyInput("degree sequence is empty")
    if d.ndim != 1:
        raise InvalidInput("degree sequence must be one-dimensional")
    if not np.issubdtype(d.dtype, np.integer):
        if not np.all(np.equal(np.mod(d, 1), 0)):
            raise InvalidInput("degrees must be integers")
    d = d.astype(np.int64)
    if np.any(d <= 0):
        i = int(np.flatnonzero(d <= 0)[0])
        raise ZeroDegree(f"vertex {i + 1} has degree {int(d[i])}; every degree must be >= 1")
    if int(d.sum()) % 2:
        raise OddDegreeSum(f"sum of degrees {int(d.sum())} is odd")
    return d


@dataclass(frozen=True)
class DegreeModel:
    """Finite-support degree distribution ``p`` with derived moments.

    ``p`` is dense and indexed by degree, so ``p[0] == 0`` and ``p[k]`` is the
    mass at degree ``k`` for ``k = 1..kmax``. When built from a sequence,
    ``counts[k]`` holds ``n_k`` and ``n`` the number of vertices; for a
    distribution both are ``None``.
    """

    p: np.ndarray
    mu: float
    nu: float
    drift: float
    eps_p: float
    L: int
    counts: np.ndarray | None = None
    n: int | None = None
    tail_mass: float = 0.0
    moment_check: float = field(default=math.nan)

    @property
    def kmax(self) -> int:
        return len(self.p) - 1

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.p > 0)

    @property
    def m(self) -> int | None:
        if self.counts is None:
            return None
        return int(np.dot(np.arange(len(self.counts)), self.counts)) // 2

    def degree_sequence(self) -> np.ndarray:
        """Vertices sorted by degree; only available for sequence-built models."""
        if self.counts is None:
            raise InvalidInput("model was built from a distribution, not a sequence")
        return np.repeat(np.arange(len(self.counts)), self.counts)

    def assumption_report(self) -> dict:
        return {
            "eps_p": self.eps_p,
            "moment_sum": self.moment_check,
            "second_moment": float(np.dot(np.arange(len(self.p)) ** 2, self.p)),
            "tail_mass": self.tail_mass,
            "L": self.L,
        }


def _derive(p: np.ndarray, eps_p: float, counts=None, n=None, tail_mass=0.0) -> DegreeModel:
    k = np.arange(len(p), dtype=float)
    mu = float(np.dot(k, p))
    if not mu > 0:
        raise InvalidInput("mean degree must be positive")
    nu = float(np.dot(k * (k - 1), p)) / mu
    drift = float(np.dot(k * (k - 2), p))
    moment = float(np.dot(k ** (1.0 + eps_p), p))
    if counts is not None:
        # m/n exactly, avoiding rounding in floor(mu/2)
        L = 1 + int(np.dot(np.arange(len(counts)), counts)) // (2 * n)
    else:
        L = 1 + math.floor(mu / 2)
    return DegreeModel(
        p=_frozen(p),
        mu=mu,
        nu=nu,
        drift=drift,
        eps_p=float(eps_p),
        L=L,
        counts=None if counts is None else _frozen(counts),
        n=n,
        tail_mass=float(tail_mass),
        moment_check=moment,
    )


def from_sequence(degrees: Sequence[int], eps_p: float = DEFAULT_EPS_P) -> DegreeModel:
    d = validate_sequence(degrees)
    counts = np.bincount(d).astype(np.int64)
    n = int(d.size)
    return _derive(counts / n, eps_p, counts=counts, n=n)


def from_distribution(
    p: Mapping[int, float] | Callable[[int], float],
    tail_tol: float = DEFAULT_TAIL_TOL,
    eps_p: float = DEFAULT_EPS_P,
    max_degree: int = 100_000,
) -> DegreeModel:
    """Build a model from a probability table or a pmf ``k -> p_k`` on k >= 1.

    A callable is truncated at the smallest ``K_max`` whose tail mass falls
    below ``tail_tol``; a table must already sum to 1 within ``tail_tol``.
    Either way the kept mass is renormalized and the discarded mass recorded.
    """
    if callable(p):
        probs = [0.0]
        total = 0.0
        for k in range(1, max_degree + 1):
            pk = float(p(k))
            if pk < 0:
                raise DomainError(f"negative probability at k={k}")
            probs.append(pk)
            total += pk
            if 1.0 - total < tail_tol:
                break
        else:
            raise InvalidInput(f"tail mass still >= {tail_tol} at degree {max_degree}")
        arr = np.array(probs)
    else:
        if len(p) == 0:
            raise EmptyInput("probability table is empty")
        kmax = max(int(k) for k in p)
        arr = np.zeros(kmax + 1)
        for k, v in p.items():
            k = int(k)
            if k < 1:
                raise ZeroDegree(f"degree {k} in probability table; degrees must be >= 1")
            if v < 0:
                raise DomainError(f"negative probability at k={k}")
            arr[k] += float(v)
        total = float(arr.sum())
        if abs(total - 1.0) > tail_tol:
            raise DomainError(f"probabilities sum to {total!r}, not 1 within {tail_tol}")
    total = float(arr.sum())
    tail = max(0.0, 1.0 - total)
    nz = np.flatnonzero(arr > 0)
    arr = arr[: nz[-1] + 1] / total
    return _derive(arr, eps_p, tail_mass=tail)


def build_model(
    source,
    tail_tol: float = DEFAULT_TAIL_TOL,
    eps_p: float = DEFAULT_EPS_P,
) -> DegreeModel:
    """Dispatch on input type: mapping/callable is a distribution, else a sequence."""
    if isinstance(source, DegreeModel):
        return source
    if isinstance(source, Mapping) or callable(source):
        return from_distribution(source, tail_tol=tail_tol, eps_p=eps_p)
    return from_sequence(source, eps_p=eps_p)


def eval_generating(model: DegreeModel, z, which: str = "G0"):
    """G0(z) = sum p_k z^k or G1(z) = sum (k p_k / mu) z^(k-1), for z in [0, 1].

    Accepts scalars or arrays.
    """
    za = np.asarray(z, dtype=float)
    if np.any((za < 0) | (za > 1)) or np.any(np.isnan(za)):
        raise DomainError("generating functions are evaluated on [0, 1]")
    k = np.arange(len(model.p))
    if which == "G0":
        coef = model.p
        powers = k
    elif which == "G1":
        coef = k * model.p / model.mu
        powers = np.maximum(k - 1, 0)
    else:
        raise InvalidInput(f"unknown generating function {which!r}")
    support = np.flatnonzero(coef)
    out = np.power.outer(za, powers[support]) @ coef[support]
    return float(out) if np.ndim(out) == 0 else out


def sequence_from_distribution(model: DegreeModel, n: int) -> np.ndarray:
    """Deterministic degree sequence on ``n`` vertices with ``n_k/n`` close to ``p_k``.

    Largest-remainder rounding; if the degree sum comes out odd, one vertex
    is moved between the two odd/even classes whose rounding cost is least.
    """
    if n < 1:
        raise InvalidInput("n must be positive")
    target = model.p * n
    counts = np.floor(target).astype(np.int64)
    short = n - int(counts.sum())
    order = np.argsort(-(target - counts), kind="stable")
    for k in order[:short]:
        counts[k] += 1
    k = np.arange(len(counts))
    if int(np.dot(k, counts)) % 2:
        best = None
        for a in np.flatnonzero(counts > 0):
            for b in np.flatnonzero(model.p > 0):
                if (a - b) % 2 == 0:
                    continue
                cost = abs(counts[a] - 1 - target[a]) - abs(counts[a] - target[a])
                cost += abs(counts[b] + 1 - target[b]) - abs(counts[b] - target[b])
                if best is None or cost < best[0]:
                    best = (cost, a, b)
        if best is None:
            raise OddDegreeSum(f"no even-sum sequence on {n} vertices with this support")
        _, a, b = best
        counts[a] -= 1
        counts[b] += 1
    return np.repeat(k, counts)
