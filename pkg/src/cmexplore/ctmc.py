"""Exact simulation of the scaled continuous-time exploration process,
nominal or under a band control, with Poisson likelihood-ratio weights.

States are tracked as integer counts (active half-edges ``A`` and sleeping
vertices per degree); the scaled coordinates are ``x0 = (A - 1)/n`` and
``xk = V_k / n``. The driver ``Y`` and regulator ``eta`` are multiples of
``1/n`` and are accumulated exactly as integers ``n*Y`` and ``n*eta``.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .degree_model import validate_sequence
from .eea import ExplorationState
from .errors import InvalidControl, ZeroIntensityJump
from .graph_gen import ComponentRecord, Multigraph


@dataclass(frozen=True)
class ScaledState:
    """Scaled state ``(x0, x1, x2, ...)``; ``xk`` is dense with ``xk[0]`` unused."""

    x0: float
    xk: np.ndarray

    @classmethod
    def from_counts(cls, A: int, V: Mapping[int, int], n: int) -> "ScaledState":
        kmax = max(V) if V else 0
        xk = np.zeros(kmax + 1)
        for k, v in V.items():
            xk[k] = v / n
        return cls((A - 1) / n, xk)


def rates(state: ScaledState) -> tuple[float, np.ndarray]:
    """Total living mass ``r`` and band widths ``r_0, r_1, ...`` (all zero if r = 0)."""
    xk = np.asarray(state.xk, dtype=float)
    k = np.arange(len(xk))
    mass = k * xk
    mass[0] = max(state.x0, 0.0)
    r = float(mass.sum())
    if r <= 0:
        return 0.0, np.zeros(len(xk))
    return r, mass / r


@dataclass(frozen=True)
class BandControl:
    """Intensities piecewise constant in time, constant on each band ``[0, r_k)``.

    Piece ``p`` covers ``[starts[p], starts[p+1])`` and the last piece runs
    to infinity. ``values[p, k]`` is the intensity for type ``k``; types above
    the last column use 1.
    """

    starts: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=float).reshape(-1)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if starts.size == 0 or starts[0] != 0.0:
            raise InvalidControl("control pieces must start at time 0")
        if np.any(np.diff(starts) <= 0):
            raise InvalidControl("control breakpoints must be strictly increasing")
        if values.shape[0] != starts.size:
            raise InvalidControl("need one row of intensities per piece")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise InvalidControl("intensities must be finite and nonnegative")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "values", values)

    @classmethod
    def nominal(cls) -> "BandControl":
        return cls([0.0], [[1.0]])

    @classmethod
    def constant(cls, c: float, kmax: int) -> "BandControl":
        return cls([0.0], np.full((1, kmax + 1), float(c)))

    @classmethod
    def per_type(cls, phi: Mapping[int, float]) -> "BandControl":
        kmax = max(phi)
        row = np.ones(kmax + 1)
        for k, v in phi.items():
            row[k] = v
        return cls([0.0], row[None, :])

    @property
    def cutoff(self) -> int:
        return self.values.shape[1] - 1

    def is_nominal(self) -> bool:
        return bool(np.all(self.values == 1.0))

    def piece_index(self, t: float) -> int:
        return int(np.searchsorted(self.starts, t, side="right")) - 1

    def row(self, p: int, kmax: int) -> np.ndarray:
        """Intensities of piece ``p`` for types ``0..kmax``."""
        out = np.ones(kmax + 1)
        w = min(kmax + 1, self.values.shape[1])
        out[:w] = self.values[p, :w]
        return out

    def phi(self, t: float, kmax: int) -> np.ndarray:
        return self.row(self.piece_index(t), kmax)


@dataclass
class CTPath:
    """Jump skeleton of one simulated path.

    ``times[i]``/``types[i]`` describe jump ``i``; ``A`` and ``V`` hold the
    counts before any jump (row 0) and after each jump. ``V`` columns follow
    ``degree_classes``. ``nY``/``neta`` are ``n*Y`` and ``n*eta`` at the same
    rows.
    """

    n: int
    degree_classes: tuple
    times: np.ndarray
    types: np.ndarray
    A: np.ndarray
    V: np.ndarray
    nY: np.ndarray
    neta: np.ndarray
    stop_time: float
    absorbed: bool
    components: list[ComponentRecord] = field(default_factory=list)
    log_weight: float = 0.0
    graph: Multigraph | None = None
    log_chain_weight: float = 0.0

    @property
    def absorption_time(self) -> float | None:
        return self.stop_time if self.absorbed else None

    @property
    def jumps(self) -> int:
        return len(self.times)

    @property
    def x0(self) -> np.ndarray:
        return (self.A - 1) / self.n

    @property
    def Y(self) -> np.ndarray:
        return self.nY / self.n

    @property
    def eta(self) -> np.ndarray:
        return self.neta / self.n

    def xk(self) -> np.ndarray:
        """Dense scaled sleeping counts, one column per degree ``0..kmax``."""
        kmax = max(self.degree_classes)
        out = np.zeros((len(self.A), kmax + 1))
        out[:, list(self.degree_classes)] = self.V / self.n
        return out

    def living(self) -> np.ndarray:
        """``n * r`` after each jump (row 0 is the initial state)."""
        ks = np.asarray(self.degree_classes)
        return np.maximum(self.A - 1, 0) + self.V @ ks

    def r(self) -> np.ndarray:
        return self.living() / self.n

    def band_widths(self) -> np.ndarray:
        """Band widths ``r_k`` per row, dense over ``0..kmax``."""
        kmax = max(self.degree_classes)
        liv = self.living().astype(float)
        out = np.zeros((len(self.A), kmax + 1))
        safe = np.where(liv > 0, liv, 1.0)
        out[:, 0] = np.maximum(self.A - 1, 0) / safe
        for j, k in enumerate(self.degree_classes):
            out[:, k] = k * self.V[:, j] / safe
        out[liv <= 0] = 0.0
        return out


def _check_control(control: BandControl | None) -> BandControl:
    if control is None:
        return BandControl.nominal()
    if not isinstance(control, BandControl):
        raise InvalidControl("control must be a BandControl")
    return control


def simulate(
    degrees: Sequence[int],
    T: float,
    control: BandControl | None = None,
    rng: np.random.Generator | None = None,
    realize: bool = False,
) -> CTPath:
    """Simulate the (controlled) exploration process on ``[0, min(T, absorption)]``.

    Between jumps the type-``k`` hazard is ``n * r_k * phi_k(t)``; waiting
    times are sampled exactly against the piecewise-constant total hazard,
    carrying the residual exponential mass across control breakpoints.
    ``T`` may be ``math.inf`` to run until absorption (a control whose last
    piece has zero hazard then stops the path unabsorbed).

    With ``realize=True`` the matching is also built half-edge by half-edge
    and returned as ``path.graph``.

    ``log_weight`` is the log likelihood ratio of the whole path.
    ``log_chain_weight`` is the log ratio of the jump-type sequence alone,
    which is the conditional expectation of the path ratio given the jump
    chain when the control has a single piece.
    """
    if not T > 0:
        raise InvalidControl("horizon T must be positive")
    control = _check_control(control)
    rng = np.random.default_rng() if rng is None else rng
    d = validate_sequence(degrees)
    n = len(d)
    counts = np.bincount(d)
    classes = [int(k) for k in np.flatnonzero(counts)]
    kmax = classes[-1]
    V = [int(counts[k]) for k in classes]
    ci = {k: i for i, k in enumerate(classes)}
    nominal = control.is_nominal()
    starts = control.starts.tolist()
    rows = [control.row(p, kmax).tolist() for p in range(len(starts))]
    ends = starts[1:] + [math.inf]
    engine = ExplorationState(d) if realize else None
    edges = []

    A = 0
    nY, neta = -1, 0
    t = 0.0
    piece = 0
    log_w = 0.0
    log_wc = 0.0
    times, types = [], []
    A_rows, V_rows, Y_rows, eta_rows = [0], [tuple(V)], [-1], [0]
    comps: list[ComponentRecord] = []
    comp_cfg: Counter = Counter()
    comp_edges = 0
    S = int(d.sum())
    living = S
    absorbed = False
    stop = T

    while True:
        if living == 0:
            absorbed = True
            stop = t
            break
        # type weights k * V_k (pairs for type 0) times intensities
        pair_w = A - 1 if A > 1 else 0
        if nominal:
            phi = None
            E = rng.standard_exponential()
            t_new = t + E / n
            if t_new >= T:
                break
        else:
            E = rng.standard_exponential()
            while True:
                phi = rows[piece]
                tot = pair_w * phi[0]
                for j, k in enumerate(classes):
                    tot += k * V[j] * phi[k]
                lam = n * tot / living
                seg_end = min(ends[piece], T)
                if lam > 0 and t + E / lam < seg_end:
                    # band integral of (phi - 1) over [t, t_new)
                    dt = E / lam
                    log_w += dt * (lam - n)
                    t_new = t + dt
                    break
                if lam == 0 and seg_end == math.inf:
                    log_w = -math.inf
                    t = seg_end
                    t_new = math.inf
                    break
                if lam > 0:
                    E -= lam * (seg_end - t)
                log_w += (seg_end - t) * (lam - n)
                t = seg_end
                if seg_end >= T or ends[piece] == math.inf:
                    t_new = math.inf
                    break
                piece += 1
            if t_new == math.inf:
                break
        # choose the jump type
        if phi is None:
            u = rng.random() * living
            if u < pair_w:
                k = 0
            else:
                u -= pair_w
                k = classes[-1]
                for j, kk in enumerate(classes):
                    w = kk * V[j]
                    if u < w:
                        k = kk
                        break
                    u -= w
        else:
            u = rng.random() * tot
            w0 = pair_w * phi[0]
            if u < w0:
                k = 0
            else:
                u -= w0
                k = None
                for j, kk in enumerate(classes):
                    w = kk * V[j] * phi[kk]
                    if u < w:
                        k = kk
                        break
                    u -= w
                if k is None:  # float round-off at the top end
                    k = next(kk for j, kk in reversed(list(enumerate(classes))) if V[j] and phi[kk] > 0)
            log_w -= math.log(phi[k])
            # nominal over controlled probability of this jump type
            log_wc += math.log(tot / living) - math.log(phi[k])
        t = t_new
        if realize:
            u1, u2 = rng.random(2)
            _, _, a, b = engine.step_type(k, u1, u2)
            if a >= 0:
                edges.append((a, b) if a <= b else (b, a))
        # jump effects
        nY += k - 2
        if k == 0:
            A -= 2
            comp_edges += 1
        else:
            V[ci[k]] -= 1
            S -= k
            if A == 0:
                neta += 2
                A = k
                comp_cfg = Counter({k: 1})
                comp_edges = 0
            else:
                A += k - 2
                comp_cfg[k] += 1
                comp_edges += 1
        living = (A - 1 if A > 1 else 0) + S
        times.append(t)
        types.append(k)
        A_rows.append(A)
        V_rows.append(tuple(V))
        Y_rows.append(nY)
        eta_rows.append(neta)
        if A == 0:
            if realize:
                comps.append(engine.component_if_complete())
            else:
                comps.append(ComponentRecord(vertices=(), edge_count=comp_edges, degree_config=dict(comp_cfg)))
    graph = None
    if realize:
        graph = Multigraph(n=n, edges=np.array(edges, dtype=np.int64).reshape(-1, 2), degrees=d)
    return CTPath(
        n=n,
        degree_classes=tuple(classes),
        times=np.array(times),
        types=np.array(types, dtype=np.int64),
        A=np.array(A_rows, dtype=np.int64),
        V=np.array(V_rows, dtype=np.int64).reshape(-1, len(classes)),
        nY=np.array(Y_rows, dtype=np.int64),
        neta=np.array(eta_rows, dtype=np.int64),
        stop_time=float(stop),
        absorbed=absorbed,
        components=comps,
        log_weight=log_w,
        graph=graph,
        log_chain_weight=log_wc,
    )


def log_importance_weight(path: CTPath, control: BandControl | None, n: int | None = None) -> float:
    """Log of the likelihood ratio (nominal law / controlled law) of ``path``.

    Sum over jumps of ``-log phi_k(s)`` plus ``n * sum_k int r_k (phi_k - 1) ds``
    up to the stop time, recomputed from the recorded skeleton.
    """
    control = _check_control(control)
    n = path.n if n is None else n
    kmax = max(path.degree_classes)
    bands = path.band_widths()
    starts = control.starts
    rows = np.array([control.row(p, kmax) for p in range(len(starts))])
    ends = np.append(starts[1:], np.inf)
    seg_t = np.concatenate(([0.0], path.times, [path.stop_time]))
    total = 0.0
    for i in range(len(seg_t) - 1):
        a, b = seg_t[i], seg_t[i + 1]
        if b <= a or not bands[i].any():
            continue
        lo = np.maximum(starts, a)
        hi = np.minimum(ends, b)
        dur = np.clip(hi - lo, 0.0, None)
        mask = dur > 0
        if np.isinf(b) and np.any(rows[mask] @ bands[i] == 0):
            return -math.inf
        total += float(np.sum(dur[mask] * (rows[mask] @ bands[i] - 1.0)))
    total *= n
    for s, k in zip(path.times.tolist(), path.types.tolist()):
        phi = control.phi(s, kmax)[k]
        if phi <= 0:
            raise ZeroIntensityJump(f"type-{k} jump at t={s} where the intensity is 0")
        total -= math.log(phi)
    return total


def importance_weight(path: CTPath, control: BandControl | None, n: int | None = None) -> float:
    """Radon-Nikodym factor ``L`` with ``E_control[L 1_A] = P_nominal(A)``."""
    return math.exp(log_importance_weight(path, control, n))


def next_jump(state, n: int, phi: Sequence[float] | None, rng: np.random.Generator) -> tuple[float, int]:
    """Holding time and type of the next jump from a count state, for a
    time-constant intensity row ``phi`` (``None`` for nominal)."""
    A, V = state.A, state.V
    ks = sorted(k for k in V if V[k])
    w = [max(A - 1, 0)] + [k * V[k] for k in ks]
    types = [0] + ks
    living = sum(w)
    if living == 0:
        raise ZeroIntensityJump("state is absorbed")
    if phi is not None:
        w = [wi * (phi[t] if t < len(phi) else 1.0) for wi, t in zip(w, types)]
    tot = sum(w)
    if tot == 0:
        return math.inf, -1
    dt = rng.standard_exponential() / (n * tot / living)
    u = rng.random() * tot
    for wi, t in zip(w, types):
        if u < wi:
            return dt, t
        u -= wi
    return dt, types[max(i for i, wi in enumerate(w) if wi > 0)]


def write_path(path: CTPath, fh, stride: int = 1) -> None:
    """Records ``t,k,x0,r`` per jump (every ``stride``-th jump and the last)."""
    w = csv.writer(fh)
    w.writerow(["t", "k", "x0", "r"])
    x0 = path.x0
    r = path.r()
    last = path.jumps - 1
    for i in range(path.jumps):
        if i % stride == 0 or i == last:
            w.writerow([repr(float(path.times[i])), int(path.types[i]), repr(float(x0[i + 1])), repr(float(r[i + 1]))])
