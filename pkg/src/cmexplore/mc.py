"""Monte Carlo estimates of the probability that some component has a
degree configuration near ``n q``, by plain exploration replicas and by
importance sampling under a band control, with exact enumeration for tiny
instances.

Replicas are split into fixed chunks of :data:`CHUNK` and chunk ``c`` is
driven by ``SeedSequence([seed, c])``, so results depend on the seed only,
not on the number of worker threads.
"""

from __future__ import annotations

import csv
import math
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .ctmc import BandControl, simulate
from .degree_model import DegreeModel, sequence_from_distribution, validate_sequence
from .eea import eea_run
from .errors import InvalidControl, InvalidInput, InvalidTarget
from .graph_gen import ComponentRecord, components_of, double_factorial_odd, enumerate_matchings, DEFAULT_ENUM_LIMIT

CHUNK = 1000
DEFAULT_EPS = 0.02
Z95 = float(norm.ppf(0.975))
# slack for comparing integer counts against float bounds (q +- eps) n
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class EventSpec:
    """Some component has ``(q_k - eps) n <= nbar_k <= (q_k + eps) n`` for all ``k``.

    The bounds run over every ``k`` up to ``max(kmax, max degree present)``,
    so degrees with ``q_k = 0`` are constrained to ``nbar_k <= eps n``.
    """

    q: Mapping[int, float]
    eps: float = DEFAULT_EPS
    kmax: int = 0

    def __post_init__(self):
        q = {int(k): float(v) for k, v in dict(self.q).items() if v != 0}
        if any(k < 1 for k in q):
            raise InvalidTarget("target degrees must be >= 1")
        if any(not (v >= 0 and math.isfinite(v)) for v in q.values()):
            raise InvalidTarget("target entries must be finite and nonnegative")
        if not self.eps > 0:
            raise InvalidTarget("eps must be positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "kmax", max([int(self.kmax)] + list(q)))

    def bounds(self, n: int, kmax: int) -> tuple[np.ndarray, np.ndarray]:
        K = max(kmax, self.kmax)
        qd = np.zeros(K + 1)
        for k, v in self.q.items():
            qd[k] = v
        lo = (qd - self.eps) * n - BOUND_SLACK
        hi = (qd + self.eps) * n + BOUND_SLACK
        return lo, hi


def event_indicator(components: Sequence[ComponentRecord], spec: EventSpec, n: int) -> bool:
    """Whether some component's degree configuration meets every bound."""
    if not components:
        return False
    kmax = max(max(c.degree_config, default=0) for c in components)
    lo, hi = spec.bounds(n, kmax)
    lo, hi = lo[1:], hi[1:]
    K = len(lo)
    for c in components:
        counts = np.zeros(K)
        for k, v in c.degree_config.items():
            counts[k - 1] = v
        if np.all(counts >= lo) and np.all(counts <= hi):
            return True
    return False


@dataclass(frozen=True)
class EstimateReport:
    n: int
    replicas: int
    hits: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    rate_hat: float
    std_err: float
    wall_time: float
    seed: int
    method: str

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d


def wilson_interval(hits: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ph = hits / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    # the interval touches 0 (resp. 1) exactly when no (resp. every) trial hits
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


def _rate(p: float, n: int) -> float:
    return math.inf if p <= 0 else -math.log(p) / n + 0.0


def _chunks(replicas: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK, replicas - c * CHUNK)) for c in range((replicas + CHUNK - 1) // CHUNK)]


def _run_chunks(work, replicas: int, seed: int, threads: int) -> list:
    if replicas < 1:
        raise InvalidInput("replicas must be >= 1")
    if threads < 1:
        raise InvalidInput("threads must be >= 1")
    jobs = [(np.random.default_rng(np.random.SeedSequence([int(seed), c])), size) for c, size in _chunks(replicas)]
    if threads == 1:
        return [work(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda job: work(*job), jobs))


def mc_probability(
    seq: Sequence[int], spec: EventSpec, replicas: int, seed: int, threads: int = 1
) -> EstimateReport:
    """Fraction of independent exploration runs in which the event occurs."""
    d = validate_sequence(seq)
    n = len(d)
    start = time.perf_counter()

    def work(rng, size):
        hits = 0
        for _ in range(size):
            _, _, comps = eea_run(d, rng)
            hits += event_indicator(comps, spec, n)
        return hits

    hits = sum(_run_chunks(work, replicas, seed, threads))
    p = hits / replicas
    lo, hi = wilson_interval(hits, replicas)
    se = math.sqrt(p * (1 - p) / replicas)
    return EstimateReport(n, replicas, hits, p, lo, hi, _rate(p, n), se, time.perf_counter() - start, int(seed), "mc")


def exact_probability(seq: Sequence[int], spec: EventSpec, limit: int = DEFAULT_ENUM_LIMIT) -> float:
    """Event probability by enumerating every perfect matching."""
    d = validate_sequence(seq)
    n = len(d)
    hits = sum(event_indicator(components_of(g), spec, n) for g in enumerate_matchings(d, limit))
    return hits / double_factorial_odd(int(d.sum()) // 2)


def is_probability(
    seq: Sequence[int],
    spec: EventSpec,
    control: BandControl,
    replicas: int,
    seed: int,
    threads: int = 1,
    weight: str = "auto",
) -> EstimateReport:
    """Importance-sampling estimate: mean of ``L * 1_event`` over controlled runs.

    The control must be strictly positive so the controlled law charges
    every nominal path. ``weight="path"`` uses the likelihood ratio of the
    whole path; ``weight="chain"`` (single-piece controls only) uses the
    ratio of the jump-type sequence, its conditional expectation given the
    chain. ``"auto"`` picks ``"chain"`` when allowed. The event only sees the
    jump chain, so both are unbiased; the chain weight never has larger
    variance, and for a constant tilt ``c`` the path weight has infinite
    variance once ``c >= 2``.
    """
    if not isinstance(control, BandControl):
        raise InvalidControl("control must be a BandControl")
    if np.any(control.values <= 0):
        raise InvalidControl("importance sampling needs strictly positive intensities")
    single = len(control.starts) == 1
    if weight == "auto":
        weight = "chain" if single else "path"
    if weight not in ("path", "chain"):
        raise InvalidInput(f"unknown weight {weight!r}")
    if weight == "chain" and not single:
        raise InvalidControl("chain weights need a control with a single time piece")
    d = validate_sequence(seq)
    n = len(d)
    start = time.perf_counter()

    def work(rng, size):
        hits, w, w2 = 0, [], []
        for _ in range(size):
            path = simulate(d, math.inf, control, rng)
            if event_indicator(path.components, spec, n):
                x = math.exp(path.log_chain_weight if weight == "chain" else path.log_weight)
                hits += 1
                w.append(x)
                w2.append(x * x)
        return hits, math.fsum(w), math.fsum(w2)

    parts = _run_chunks(work, replicas, seed, threads)
    hits = sum(h for h, _, _ in parts)
    s1 = math.fsum(s for _, s, _ in parts)
    s2 = math.fsum(s for _, _, s in parts)
    p = s1 / replicas
    var = max(s2 / replicas - p * p, 0.0) * replicas / max(replicas - 1, 1)
    se = math.sqrt(var / replicas)
    lo, hi = max(0.0, p - Z95 * se), p + Z95 * se
    return EstimateReport(
        n, replicas, hits, p, lo, hi, _rate(p, n), se, time.perf_counter() - start, int(seed), f"is-{weight}"
    )


def mc_sweep(
    model: DegreeModel,
    spec: EventSpec,
    ns: Sequence[int],
    replicas: int,
    seed: int,
    threads: int = 1,
) -> list[EstimateReport]:
    """Plain estimates on deterministic sequences of each size in ``ns``.

    Size ``ns[i]`` uses seed ``seed + i``.
    """
    return [
        mc_probability(sequence_from_distribution(model, n), spec, replicas, seed + i, threads)
        for i, n in enumerate(ns)
    ]


def write_sweep(reports: Sequence[EstimateReport], fh) -> None:
    w = csv.writer(fh)
    w.writerow(["n", "p_hat", "ci_lo", "ci_hi", "rate_hat"])
    for r in reports:
        w.writerow([r.n, repr(r.p_hat), repr(r.ci_lo), repr(r.ci_hi), repr(r.rate_hat)])
