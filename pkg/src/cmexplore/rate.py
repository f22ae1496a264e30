"""Rate function of the exploration process on discretized paths.

A path is a pair ``(zeta, psi)`` on a uniform grid. On each slice the
consumption rates ``b_k`` are read off by forward differences and the band
widths ``r_k`` are taken at the slice midpoint (linear interpolation of
``zeta``). The cheapest intensity reproducing ``b_k`` is constant on the
band, ``phi_k = b_k / r_k``, so the rate is ``sum r_k ell(phi_k) dt``.
This is the rate of the piecewise-linear interpolant of the samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .ctmc import BandControl
from .errors import ControlPathMismatch, InvalidControl, InvalidInput, NegativeInput
from .lln import LLNPath, integrate_controlled

NUM_TOL = 1e-9
GRID_TOL = 1e-6


def ell(x):
    """``x log x - x + 1`` with ``0 log 0 = 0``; scalar or array."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise NegativeInput("ell is defined on x >= 0")
    out = xlogy(xa, xa) - xa + 1.0
    return float(out) if out.ndim == 0 else out


def skorokhod_map(psi) -> tuple[np.ndarray, np.ndarray]:
    """Reflect ``psi`` at 0: returns ``(zeta_0, eta)`` with ``zeta_0 = psi + eta``."""
    psi = np.asarray(psi, dtype=float)
    eta = -np.minimum(np.minimum.accumulate(psi), 0.0)
    return psi + eta, eta


@dataclass(frozen=True)
class PathPair:
    """Grid samples of ``(zeta, psi)``.

    ``zeta[:, 0]`` is ``zeta_0`` and ``zeta[:, k]`` is ``zeta_k``; the first
    row fixes ``p``.
    """

    t: np.ndarray
    zeta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        zeta = np.atleast_2d(np.asarray(self.zeta, dtype=float))
        psi = np.asarray(self.psi, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise InvalidInput("need at least two grid points")
        if zeta.shape[0] != len(t) or psi.shape != t.shape:
            raise InvalidInput("zeta and psi must have one row per grid point")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(zeta)) and np.all(np.isfinite(psi))):
            raise InvalidInput("path values must be finite")
        dt = np.diff(t)
        if t[0] != 0.0 or np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt.mean():
            raise InvalidInput("grid must be uniform and start at 0")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_lln(cls, path: LLNPath) -> "PathPair":
        return cls(path.t, path.zeta, path.psi)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def p(self) -> np.ndarray:
        out = self.zeta[0].copy()
        out[0] = 0.0
        return out

    def to_csv(self, fh) -> None:
        w = csv.writer(fh)
        K = self.zeta.shape[1] - 1
        w.writerow(["t", "psi"] + [f"zeta_{k}" for k in range(K + 1)])
        for i in range(len(self.t)):
            w.writerow([repr(float(self.t[i])), repr(float(self.psi[i]))] + [repr(float(v)) for v in self.zeta[i]])

    @classmethod
    def from_csv(cls, fh) -> "PathPair":
        rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        if header[:3] != ["t", "psi", "zeta_0"]:
            raise InvalidInput("path CSV header must start with t,psi,zeta_0")
        return cls(body[:, 0], body[:, 2:], body[:, 1])


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    reason: str | None = None
    index: int | None = None
    tau: float = math.nan


def _living_mass(zeta: np.ndarray) -> np.ndarray:
    k = np.arange(zeta.shape[-1], dtype=float)
    mass = np.maximum(zeta, 0.0) * k
    mass[..., 0] = np.maximum(zeta[..., 0], 0.0)
    return mass


def absorption_index(path: PathPair, tol: float = GRID_TOL) -> int | None:
    """First grid index where ``r(zeta) <= tol``, or None."""
    r = _living_mass(path.zeta).sum(axis=1)
    hit = np.flatnonzero(r <= tol)
    return int(hit[0]) if hit.size else None


def feasibility(path: PathPair, p=None, tol: float = GRID_TOL) -> FeasibilityReport:
    """Grid checks for membership in the set of admissible paths.

    ``p``, when given, is compared with the first row of ``zeta``.
    Reports the first violation found.
    """
    i_abs = absorption_index(path, tol)
    tau = path.T if i_abs is None else float(path.t[i_abs])

    def bad(reason, index):
        return FeasibilityReport(False, reason, int(index), tau)

    if abs(path.psi[0]) > tol:
        return bad("psi(0) != 0", 0)
    if p is not None:
        p = np.asarray(p, dtype=float)
        K = path.zeta.shape[1] - 1
        full = np.zeros(max(K + 1, len(p)))
        full[: len(p)] = p
        if np.any(full[K + 1 :] > tol):
            return bad("initial condition", 0)
        off = np.flatnonzero(np.abs(path.zeta[0, 1:] - full[1 : K + 1]) > tol)
        if off.size:
            return bad(f"initial condition k={off[0] + 1}", 0)
    z0, _ = skorokhod_map(path.psi)
    off = np.flatnonzero(np.abs(path.zeta[:, 0] - z0) > tol)
    if off.size:
        return bad("reflection", off[0])
    for k in range(1, path.zeta.shape[1]):
        col = path.zeta[:, k]
        neg = np.flatnonzero(col < -tol)
        if neg.size:
            return bad(f"nonnegativity k={k}", neg[0])
        up = np.flatnonzero(np.diff(col) > tol)
        if up.size:
            return bad(f"monotonicity k={k}", up[0] + 1)
    if i_abs is not None:
        tail = np.abs(path.zeta[i_abs:]).max(axis=1)
        off = np.flatnonzero(tail > tol)
        if off.size:
            return bad("absorption", i_abs + off[0])
    return FeasibilityReport(True, None, None, tau)


@dataclass(frozen=True)
class RateResult:
    """Rate of a path with the per-slice optimal band control.

    ``phi``, ``b`` and ``r_mid`` have one row per slice and one column per
    type ``0..K``. ``value`` is ``inf`` when the path is infeasible.
    """

    value: float
    phi: np.ndarray
    b: np.ndarray
    r_mid: np.ndarray
    dt: float
    reason: str | None = None
    feasibility: FeasibilityReport | None = None
    slice_cost: np.ndarray | None = field(default=None, repr=False)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def tau(self) -> float:
        return math.nan if self.feasibility is None else self.feasibility.tau

    def as_control(self, path: PathPair) -> BandControl:
        """The optimal control as a band control with one piece per slice."""
        return BandControl(path.t[:-1], self.phi)

    def summary(self) -> dict:
        return {
            "value": self.value,
            "feasible": self.finite,
            "reason": self.reason,
            "tau": self.tau,
            "max_phi": self.phi.max(axis=1).tolist(),
        }


def slice_rates(path: PathPair) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice consumption rates ``b`` and midpoint band widths ``r_mid``."""
    dt = path.dt
    z = path.zeta
    b = np.empty((len(path.t) - 1, z.shape[1]))
    b[:, 1:] = -np.diff(z[:, 1:], axis=0) / dt
    k = np.arange(z.shape[1], dtype=float)
    b[:, 0] = (b[:, 1:] @ (k[1:] - 2.0) - np.diff(path.psi) / dt) / 2.0
    mass = _living_mass(0.5 * (z[:-1] + z[1:]))
    r = mass.sum(axis=1, keepdims=True)
    r_mid = np.divide(mass, r, out=np.zeros_like(mass), where=r > 0)
    return b, r_mid


def optimal_band_control(path: PathPair, num_tol: float = NUM_TOL) -> RateResult:
    """Invert the slice dynamics for the band-constant control ``b_k / r_k``."""
    b, r_mid = slice_rates(path)
    on_band = r_mid > num_tol
    phi = np.ones_like(b)
    np.divide(np.maximum(b, 0.0), r_mid, out=phi, where=on_band)
    reason = None
    neg = np.argwhere(b < -num_tol)
    empty = np.argwhere(~on_band & (b > num_tol))
    if neg.size:
        i, k = neg[0]
        reason = f"negative consumption k={k} slice={i}"
    elif empty.size:
        i, k = empty[0]
        reason = f"consumption from empty band k={k} slice={i}"
    cost = np.where(on_band, r_mid * ell(phi), 0.0) * path.dt
    value = math.inf if reason else float(cost.sum())
    return RateResult(value, phi, b, r_mid, path.dt, reason, None, cost)


def rate_integral(path: PathPair, p=None, num_tol: float = NUM_TOL, grid_tol: float = GRID_TOL) -> RateResult:
    """Rate of ``path``; ``inf`` when it fails the grid feasibility checks."""
    rep = feasibility(path, p, grid_tol)
    res = optimal_band_control(path, num_tol)
    if not rep.feasible:
        return RateResult(math.inf, res.phi, res.b, res.r_mid, res.dt, rep.reason, rep, res.slice_cost)
    return RateResult(res.value, res.phi, res.b, res.r_mid, res.dt, res.reason, rep, res.slice_cost)


@dataclass(frozen=True)
class LayeredControl:
    """Per-slice intensities that are step functions of the band coordinate.

    For slice ``i`` and type ``k``, ``levels[i, k, j]`` applies on
    ``y in [edges[i, k, j-1] * r_k, edges[i, k, j] * r_k)`` with an implicit
    leading edge 0; beyond the last edge the intensity is 1. Edges are
    multiples of the band width and the layer is cut at ``y = 1``.
    """

    edges: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        v = np.asarray(self.levels, dtype=float)
        if e.shape != v.shape or e.ndim != 3:
            raise InvalidControl("edges and levels must share a (slices, types, layers) shape")
        if np.any(e < 0) or np.any(np.diff(e, axis=2) < 0):
            raise InvalidControl("layer edges must be nonnegative and nondecreasing")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise InvalidControl("intensities must be finite and nonnegative")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "levels", v)

    def _widths(self, r_mid: np.ndarray, cap: np.ndarray) -> np.ndarray:
        """Layer widths in ``y``, each edge capped at ``cap`` (broadcast over layers)."""
        hi = np.minimum(self.edges * r_mid[..., None], cap)
        lo = np.concatenate([np.zeros_like(hi[..., :1]), hi[..., :-1]], axis=2)
        return hi - lo

    def consumption(self, r_mid: np.ndarray) -> np.ndarray:
        """``int_0^{r_k} phi(y) dy`` per slice and type."""
        r = r_mid[..., None]
        w = self._widths(r_mid, r)
        rest = np.maximum(r_mid - np.minimum(self.edges[..., -1] * r_mid, r_mid), 0.0)
        return (w * self.levels).sum(axis=2) + rest

    def band_cost(self, r_mid: np.ndarray) -> np.ndarray:
        """``int_0^1 ell(phi(y)) dy`` per slice and type."""
        w = self._widths(r_mid, 1.0)
        return (w * ell(self.levels)).sum(axis=2)


def _as_layers(control, path: PathPair, K: int) -> LayeredControl:
    if isinstance(control, LayeredControl):
        return control
    if isinstance(control, BandControl):
        mid = 0.5 * (path.t[:-1] + path.t[1:])
        rows = np.array([control.phi(s, K) for s in mid])
        return LayeredControl(np.ones(rows.shape + (1,)), rows[..., None])
    raise InvalidControl(f"unsupported control type {type(control).__name__}")


def cost_of_control(path: PathPair, control, num_tol: float = NUM_TOL) -> float:
    """Cost of a specific control that reproduces the path's slice rates.

    ``control`` is a BandControl (sampled at slice midpoints) or a
    LayeredControl. Raises ControlPathMismatch when some slice consumption
    differs from ``b_k`` by more than ``num_tol * max(1, |b_k|)``.
    """
    b, r_mid = slice_rates(path)
    K = b.shape[1] - 1
    layers = _as_layers(control, path, K)
    if layers.edges.shape[:2] != b.shape:
        raise ControlPathMismatch("control has the wrong number of slices or types")
    got = layers.consumption(r_mid)
    gap = np.abs(got - b) - num_tol * np.maximum(1.0, np.abs(b))
    if np.any(gap > 0):
        i, k = np.argwhere(gap > 0)[0]
        raise ControlPathMismatch(f"control consumes {got[i, k]!r} but path needs {b[i, k]!r} (k={k}, slice={i})")
    return float(layers.band_cost(r_mid).sum() * path.dt)


def perturb_bands(control, eps: float, path: PathPair) -> LayeredControl:
    """Shrink each band to ``(1 - eps) r_k`` and kill ``[(1-eps) r_k, (1+eps) r_k)``.

    The value on the shrunk band is ``phi_k / (1 - eps)`` so consumption is
    unchanged; above ``(1 + eps) r_k`` the intensity is 1.
    """
    if not 0 < eps < 1:
        raise InvalidInput("eps must lie in (0, 1)")
    K = path.zeta.shape[1] - 1
    base = _as_layers(control, path, K)
    if base.levels.shape[2] != 1 or np.any(base.edges != 1.0):
        raise InvalidControl("perturb_bands needs a band-constant control")
    phi = base.levels[..., 0]
    edges = np.stack([np.full_like(phi, 1 - eps), np.full_like(phi, 1 + eps)], axis=2)
    levels = np.stack([phi / (1 - eps), np.zeros_like(phi)], axis=2)
    return LayeredControl(edges, levels)


def perturbation_bound(cost: float, eps: float, T: float) -> float:
    """Upper bound on the cost added by :func:`perturb_bands`."""
    return (cost + 2 * T) * math.log(1 / (1 - eps)) + T * eps


def euler_path(p, control: BandControl, T: float, grid_points: int) -> PathPair:
    """Explicit Euler path of the controlled equations, one step per slice.

    Slice ``i`` consumes ``dt * r_k(zeta(t_i)) * phi_k`` of each type (capped
    at what is left) and ``zeta_0 = Gamma(psi)`` on the grid. The slice rates
    read back by :func:`slice_rates` are exactly these consumptions, so the
    result is always feasible; it is a first-order approximation of
    :func:`controlled_path`.
    """
    p = np.asarray(p, dtype=float)
    K = len(p) - 1
    k = np.arange(K + 1, dtype=float)
    t = np.linspace(0.0, T, grid_points)
    dt = t[1] - t[0]
    zeta = np.zeros((grid_points, K + 1))
    psi = np.zeros(grid_points)
    zeta[0, 1:] = p[1:]
    for i in range(grid_points - 1):
        mass = _living_mass(zeta[i])
        r = mass.sum()
        used = np.zeros(K + 1)
        if r > 0:
            used = dt * mass / r * control.phi(0.5 * (t[i] + t[i + 1]), K)
            used[1:] = np.minimum(used[1:], zeta[i, 1:])
        zeta[i + 1, 1:] = zeta[i, 1:] - used[1:]
        psi[i + 1] = psi[i] + float(np.dot(k - 2.0, used))
        zeta[i + 1, 0] = psi[i + 1] + max(-np.minimum.reduce(psi[: i + 2]), 0.0)
    return PathPair(t, zeta, psi)


def controlled_path(p, control: BandControl, T: float, grid_points: int, substeps: int = 4) -> PathPair:
    """Deterministic path driven by a band control, starting from ``p``.

    RK4 integration of the controlled equations, accurate but sampled on the
    grid only; see :func:`euler_path` for a path that is exactly consistent
    with the slice scheme. Control breakpoints should lie on the grid.
    """
    p = np.asarray(p, dtype=float)
    K = len(p) - 1
    t, zeta, psi, _ = integrate_controlled(p, T, grid_points, phi=lambda s: control.phi(s, K), substeps=substeps)
    return PathPair(t, zeta, psi)
