"""Law-of-large-numbers trajectories of the exploration process.

Closed forms in both regimes, plus an independent ODE integration of the
same limit used as a cross-check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .degree_model import DegreeModel, eval_generating
from .errors import NoConvergence, StepTooLarge

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class PhaseReport:
    drift: float
    supercritical: bool
    rho: float | None
    tau: float | None

    @property
    def regime(self) -> str:
        return "supercritical" if self.supercritical else "subcritical-or-critical"

    def absorption_time(self, model: DegreeModel) -> float:
        """First time the limit path reaches zero."""
        if not self.supercritical:
            return 1.0
        return self.tau + float(eval_generating(model, self.rho, "G0"))


@dataclass(frozen=True)
class LLNPath:
    """Limit path on a uniform grid.

    ``zeta[:, 0]`` is ``zeta_0`` and ``zeta[:, k]`` is ``zeta_k``.
    """

    t: np.ndarray
    zeta: np.ndarray
    psi: np.ndarray
    phase: PhaseReport
    absorption_time: float

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


def _poly(coef: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sum_k coef[k] z^k for array z (Horner)."""
    out = np.zeros_like(z, dtype=float)
    for c in coef[::-1]:
        out = out * z + c
    return out


def _bisect(fn, lo: np.ndarray, hi: np.ndarray, tol: float = BISECT_TOL) -> np.ndarray:
    """Vectorized bisection for a function positive at ``lo`` and negative at ``hi``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(BISECT_MAX_ITER):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        pos = fn(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    else:
        raise NoConvergence(f"bisection did not reach width {tol} in {BISECT_MAX_ITER} iterations")
    return 0.5 * (lo + hi)


def phase_and_rho(model: DegreeModel) -> PhaseReport:
    """Regime by the sign of sum k(k-2)p_k; extinction-type fixed point of G1."""
    p = np.asarray(model.p)
    if model.drift <= 0:
        return PhaseReport(model.drift, False, None, None)
    if p[1] == 0:
        rho = 0.0
    else:
        # (G1(a) - a)/(1 - a) = (p1 - a sum_{k>=3} k p_k (1 + a + ... + a^(k-3))) / mu,
        # decreasing from p1/mu > 0 to -drift/mu < 0
        K = len(p) - 1
        coef = np.zeros(max(K - 1, 1))
        for k in range(3, K + 1):
            coef[: k - 2] += k * p[k]

        def h(a):
            return p[1] - a * _poly(coef, a)

        rho = float(_bisect(h, 0.0, 1.0))
    tau = 0.5 * model.mu * (1.0 - rho * rho)
    return PhaseReport(model.drift, True, rho, tau)


def invert_F(s: float, t, model: DegreeModel):
    """f_s(t): the x in [0, 1] with G0(s) - G0(s x) = t, or 0 once t > G0(s)."""
    p = np.asarray(model.p)
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    g0s = float(_poly(p, np.array([s]))[0])
    out = np.zeros_like(ta)
    inside = ta <= g0s
    if np.any(inside):
        target = g0s - ta[inside]

        def fn(x):
            return target - _poly(p, s * x)

        out[inside] = _bisect(fn, np.zeros(target.shape), np.ones(target.shape))
        out[inside & (ta == 0)] = 1.0
    return float(out[0]) if np.ndim(t) == 0 else out


def psi_trapezoid(t: np.ndarray, zeta: np.ndarray, p: np.ndarray) -> np.ndarray:
    """-2 int_0^t r_0(zeta) ds + sum_k (k-2)(p_k - zeta_k(t)), trapezoid rule.

    First order on the slice holding the absorption time, where r_0 drops
    to 0 discontinuously.
    """
    k = np.arange(zeta.shape[1])
    mass = zeta * k
    mass[:, 0] = np.maximum(zeta[:, 0], 0.0)
    r = mass.sum(axis=1)
    r0 = np.where(r > 0, mass[:, 0] / np.where(r > 0, r, 1.0), 0.0)
    integral = np.concatenate(([0.0], np.cumsum(0.5 * (r0[1:] + r0[:-1]) * np.diff(t))))
    consumed = (p[None, 1:] - zeta[:, 1:]) @ (k[1:] - 2.0)
    return -2.0 * integral + consumed


def lln_path(model: DegreeModel, T: float, grid_points: int) -> LLNPath:
    """Closed-form limit path on ``grid_points`` uniform points of ``[0, T]``."""
    p = np.asarray(model.p, dtype=float)
    K = len(p) - 1
    k = np.arange(K + 1)
    t = np.linspace(0.0, T, grid_points)
    phase = phase_and_rho(model)
    zeta = np.zeros((len(t), K + 1))
    if not phase.supercritical:
        f = invert_F(1.0, t, model)
        zeta[:, 1:] = p[1:] * f[:, None] ** k[1:]
    else:
        mu, tau, rho = model.mu, phase.tau, phase.rho
        pre = t <= tau
        s = np.sqrt(np.clip(1.0 - 2.0 * t[pre] / mu, 0.0, None))
        zk = p[1:] * s[:, None] ** k[1:]
        zeta[pre, 1:] = zk
        zeta[pre, 0] = np.maximum(mu - 2.0 * t[pre] - zk @ k[1:], 0.0)
        post = ~pre
        if np.any(post) and rho > 0:
            g = invert_F(rho, t[post] - tau, model)
            zeta[post, 1:] = p[1:] * rho ** k[1:] * g[:, None] ** k[1:]
    # int_0^t r_0 has an exact antiderivative: r_0 = 0 in the subcritical
    # regime and after tau, and zeta_0 = psi up to tau
    consumed = (p[None, 1:] - zeta[:, 1:]) @ (k[1:] - 2.0)
    if phase.supercritical:
        tc = np.minimum(t, phase.tau)
        s = np.sqrt(np.clip(1.0 - 2.0 * tc / model.mu, 0.0, None))
        zc = p[1:] * s[:, None] ** k[1:]
        z0c = np.maximum(model.mu - 2.0 * tc - zc @ k[1:], 0.0)
        r0_int = 0.5 * ((p[None, 1:] - zc) @ (k[1:] - 2.0) - z0c)
    else:
        r0_int = np.zeros_like(t)
    psi = consumed - 2.0 * r0_int
    return LLNPath(t, zeta, psi, phase, phase.absorption_time(model))


# ODE oracle


def _field(y: np.ndarray, k: np.ndarray, boundary: bool, r_tol: float, phi=None) -> np.ndarray:
    """Time derivative of (zeta_0, zeta_1.., zeta_K, psi) under band intensities ``phi``."""
    mass = np.maximum(y[:-1], 0.0) * k
    mass[0] = max(y[0], 0.0)
    r = mass.sum()
    out = np.zeros_like(y)
    if r <= r_tol:
        return out
    rk = mass / r
    if phi is not None:
        rk = rk * phi
    dpsi = float(np.dot(k - 2.0, rk))
    out[1:-1] = -rk[1:]
    out[0] = max(dpsi, 0.0) if boundary else dpsi
    out[-1] = dpsi
    return out


def _rk4(y, h, k, boundary, r_tol, phi=None):
    a = _field(y, k, boundary, r_tol, phi)
    b = _field(y + 0.5 * h * a, k, boundary, r_tol, phi)
    c = _field(y + 0.5 * h * b, k, boundary, r_tol, phi)
    d = _field(y + h * c, k, boundary, r_tol, phi)
    return y + h / 6.0 * (a + 2 * b + 2 * c + d)


def _mass(y, k):
    z = np.maximum(y[:-1], 0.0)
    return float(np.dot(z[1:], k[1:]) + z[0])


def lln_ode_oracle(
    model: DegreeModel,
    T: float,
    grid_points: int,
    substeps: int = 1,
    r_tol: float = 1e-12,
    absorb_tol: float = 1e-7,
) -> LLNPath:
    """Integrate zeta_k' = -r_k(zeta), zeta_0' = -2 + sum k r_k reflected at 0.

    Fixed-step RK4 with ``substeps`` steps per grid interval. A step that
    would push ``zeta_0`` below zero is cut at the crossing (found by
    bisection on the step length) and the remainder is taken with the
    reflected field; likewise a step overshooting absorption is cut where
    the path stays nonnegative, after which everything is frozen at 0.
    """
    t, zeta, psi, absorb_time = integrate_controlled(
        model.p, T, grid_points, substeps=substeps, r_tol=r_tol, absorb_tol=absorb_tol
    )
    return LLNPath(t, zeta, psi, phase_and_rho(model), absorb_time)


def integrate_controlled(
    p,
    T: float,
    grid_points: int,
    phi=None,
    substeps: int = 1,
    r_tol: float = 1e-12,
    absorb_tol: float = 1e-7,
):
    """Deterministic path driven by band intensities ``phi(t) -> row over types``.

    Solves zeta_k' = -r_k phi_k, psi' = sum_k (k-2) r_k phi_k and
    zeta_0 = Gamma(psi); ``phi=None`` is the unit control. ``phi`` is
    sampled at the start of each step, so its breakpoints should sit on the
    grid. Returns ``(t, zeta, psi, absorption_time)``.
    """
    p = np.asarray(p, dtype=float)
    K = len(p) - 1
    k = np.arange(K + 1, dtype=float)
    t = np.linspace(0.0, T, grid_points)
    y = np.zeros(K + 2)
    y[1 : K + 1] = p[1:]
    absorbed = False
    out = np.zeros((len(t), K + 2))
    out[0] = y
    absorb_time = T
    now = 0.0

    def valid(z):
        return bool(np.all(z[:-1] >= 0))

    for i in range(1, len(t)):
        H = (t[i] - t[i - 1]) / substeps
        for _ in range(substeps):
            remaining = H
            while remaining > 0 and not absorbed:
                boundary = y[0] <= 0
                row = None if phi is None else _phi_row(phi, now, K)
                trial = _rk4(y, remaining, k, boundary, r_tol, row)
                if valid(trial):
                    y = trial
                    now += remaining
                    remaining = 0.0
                else:
                    lo, hi = 0.0, remaining
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        if valid(_rk4(y, mid, k, boundary, r_tol, row)):
                            lo = mid
                        else:
                            hi = mid
                    y = _rk4(y, lo, k, boundary, r_tol, row)
                    now += lo
                    remaining -= lo
                    # coordinates about to hit zero inside the step are set to 0
                    tiny = y[:-1] <= absorb_tol
                    if _mass(y, k) <= absorb_tol:
                        y[:-1] = 0.0
                    elif np.any(tiny & (y[:-1] != 0)):
                        y[:-1][tiny] = 0.0
                    elif lo == 0.0:
                        raise StepTooLarge(
                            f"RK4 step left the nonnegative orthant at t~{now:.6g} with r={_mass(y, k):.3g}"
                        )
                if _mass(y, k) <= r_tol:
                    y[:-1] = 0.0
                    absorbed = True
                    absorb_time = now
            if absorbed:
                break
        out[i] = y
    return t, out[:, :-1], out[:, -1], float(absorb_time)


def _phi_row(phi, t, K):
    row = np.ones(K + 1)
    vals = np.asarray(phi(t), dtype=float)
    w = min(len(vals), K + 1)
    row[:w] = vals[:w]
    return row
