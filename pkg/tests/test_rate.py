import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmexplore.ctmc import BandControl
from cmexplore.degree_model import from_distribution
from cmexplore.errors import ControlPathMismatch, InvalidControl, InvalidInput, NegativeInput
from cmexplore.lln import lln_path, phase_and_rho
from cmexplore.rate import (
    LayeredControl,
    PathPair,
    controlled_path,
    cost_of_control,
    euler_path,
    ell,
    feasibility,
    optimal_band_control,
    perturb_bands,
    perturbation_bound,
    rate_integral,
    skorokhod_map,
    slice_rates,
)

from conftest import random_table


def ell_oracle(x):
    return 1.0 if x == 0 else x * math.log(x) - x + 1


def lln_pair(table, frac=0.9, grid=10_001):
    m = from_distribution(table)
    T = frac * phase_and_rho(m).absorption_time(m)
    return m, PathPair.from_lln(lln_path(m, T, grid))


def random_controlled_path(rng, grid=201, pieces=4, lo=0.3, hi=3.0, kmax=6):
    """Euler path of a random piecewise control, redrawn until its rate is finite.

    A degree class that the step empties while holding only ~1e-10 of mass
    leaves consumption above ``num_tol`` on a band narrower than it, which
    the rate treats as infeasible.
    """
    while True:
        m = from_distribution(random_table(rng, kmax=kmax))
        T = float(rng.uniform(0.3, 0.9)) * phase_and_rho(m).absorption_time(m)
        t = np.linspace(0, T, grid)
        idx = np.sort(rng.choice(np.arange(1, grid - 1), pieces - 1, replace=False))
        starts = np.r_[0.0, t[idx]]
        vals = rng.uniform(lo, hi, size=(pieces, m.kmax + 1))
        P = euler_path(m.p, BandControl(starts, vals), T, grid)
        if rate_integral(P).finite:
            return m, P


def test_ell_examples():
    assert ell(1.0) == 0.0
    assert ell(0.0) == 1.0
    assert ell(2.0) == pytest.approx(2 * math.log(2) - 1, abs=1e-15)
    with pytest.raises(NegativeInput):
        ell(-0.1)


@given(st.floats(0, 1e6))
def test_ell_matches_oracle(x):
    assert ell(x) == pytest.approx(ell_oracle(x), rel=1e-12, abs=1e-12)
    assert ell(x) >= 0


def test_skorokhod_examples():
    t = np.linspace(0, 1, 101)
    z, eta = skorokhod_map(-t)
    assert np.all(z == 0) and np.allclose(eta, t)
    z, eta = skorokhod_map(t)
    assert np.array_equal(z, t) and np.all(eta == 0)
    s = np.linspace(0, 2 * np.pi, 100_001)
    z, _ = skorokhod_map(np.sin(s))
    assert z[-1] == pytest.approx(1.0, abs=1e-9)


def skorokhod_oracle(psi):
    out, run = [], 0.0
    for v in psi:
        run = min(run, v)
        out.append(v - min(run, 0.0))
    return np.array(out)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=60), st.lists(st.floats(-5, 5), min_size=2, max_size=60))
def test_skorokhod_properties(a, b):
    n = min(len(a), len(b))
    psi = np.r_[0.0, np.array(a[: n - 1])]
    psi2 = np.r_[0.0, np.array(b[: n - 1])]
    z, eta = skorokhod_map(psi)
    np.testing.assert_allclose(z, skorokhod_oracle(psi), atol=1e-12)
    assert np.all(z >= 0) and eta[0] == 0 and np.all(np.diff(eta) >= 0)
    # eta only grows where z = 0
    grow = np.diff(eta) > 0
    assert np.all(z[1:][grow] <= 1e-12)
    z2, _ = skorokhod_map(psi2)
    assert np.abs(z - z2).max() <= 2 * np.abs(psi - psi2).max() + 1e-12


def test_pathpair_validation():
    with pytest.raises(InvalidInput):
        PathPair([0, 1, 3], np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(InvalidInput):
        PathPair([0, 1], np.array([[0, np.nan], [0, 0]]), np.zeros(2))


def test_feasibility_examples():
    m, P = lln_pair({1: 0.5, 3: 0.5}, grid=2001)
    assert feasibility(P, p=m.p).feasible
    z = P.zeta.copy()
    z[500:, 1] += 0.01
    bad = feasibility(PathPair(P.t, z, P.psi))
    assert not bad.feasible and bad.reason == "monotonicity k=1" and bad.index == 500
    z = P.zeta.copy()
    z[300, 0] += 0.01
    bad = feasibility(PathPair(P.t, z, P.psi))
    assert bad.reason == "reflection" and bad.index == 300
    z = P.zeta.copy()
    z[0, 3] += 0.1
    assert feasibility(PathPair(P.t, z, P.psi), p=m.p).reason == "initial condition k=3"


def test_lln_has_zero_rate():
    for table in ({3: 1.0}, {1: 0.5, 3: 0.5}, {1: 0.3, 2: 0.3, 4: 0.4}, {1: 0.6, 2: 0.4}):
        m = from_distribution(table)
        T = phase_and_rho(m).absorption_time(m) + 0.2
        P = PathPair.from_lln(lln_path(m, T, 10_001))
        res = rate_integral(P, p=m.p)
        assert res.finite and 0 <= res.value <= 1e-3
        # phi = 1 on slices away from the regime switch and absorption
        ph = phase_and_rho(m)
        mid = 0.5 * (P.t[:-1] + P.t[1:])
        smooth = mid < phase_and_rho(m).absorption_time(m) - 0.1
        if ph.supercritical:
            smooth &= np.abs(mid - ph.tau) > 0.05
        on = (res.r_mid > 1e-2) & smooth[:, None]
        assert np.abs(res.phi - 1)[on].max() <= 1e-6


def test_time_scaled_path_has_phi_two():
    m = from_distribution({1: 0.3, 2: 0.3, 4: 0.4})
    T = 0.4 * phase_and_rho(m).absorption_time(m)
    L = lln_path(m, 2 * T, 8001)
    P = PathPair(L.t / 2, L.zeta, L.psi)
    res = rate_integral(P)
    mid = 0.5 * (P.t[:-1] + P.t[1:])
    on = (res.r_mid > 1e-2) & (np.abs(2 * mid - phase_and_rho(m).tau) > 0.05)[:, None]
    np.testing.assert_allclose(res.phi[on], 2.0, atol=1e-6)
    S = res.r_mid.sum() * P.dt
    assert res.value == pytest.approx(ell(2.0) * S, rel=1e-6)


def test_consuming_empty_band_is_infinite():
    # single-leaf limit zeta_1 = 1 - t, psi = -t, pushed on past t = 1
    t = np.linspace(0, 1.2, 121)
    z1 = 1 - t
    z1[t > 1] = -5e-7 * (t[t > 1] - 1) / 0.2
    zeta = np.column_stack([np.zeros_like(t), z1])
    P = PathPair(t, zeta, -(1 - z1))
    assert feasibility(P).feasible
    res = rate_integral(P)
    assert not res.finite and "empty band k=1" in res.reason


def test_negative_consumption_is_infinite():
    m, P = lln_pair({1: 0.5, 3: 0.5}, grid=501)
    z = P.zeta.copy()
    z[200:, 3] += 1e-3
    assert not rate_integral(PathPair(P.t, z, P.psi)).finite


def test_controlled_path_matches_scaled_lln():
    m = from_distribution({1: 0.3, 2: 0.3, 4: 0.4})
    T = 0.4 * phase_and_rho(m).absorption_time(m)
    C = controlled_path(m.p, BandControl.constant(2.0, 4), T, 2001)
    L = lln_path(m, 2 * T, 2001)
    np.testing.assert_allclose(C.zeta, L.zeta, atol=1e-8)


def test_optimal_control_cost_equals_rate(rng):
    for _ in range(20):
        m, P = random_controlled_path(rng)
        res = rate_integral(P, p=m.p)
        assert res.finite and res.value > 0
        c = res.as_control(P)
        assert cost_of_control(P, c) == pytest.approx(res.value, abs=1e-9)


def test_nominal_cost_on_lln_is_zero():
    _, P = lln_pair({1: 0.5, 3: 0.5}, frac=0.5, grid=4001)
    assert cost_of_control(P, BandControl.nominal(), num_tol=1e-5) == 0.0


def test_mismatched_control_raises():
    _, P = lln_pair({1: 0.5, 3: 0.5}, frac=0.5, grid=401)
    with pytest.raises(ControlPathMismatch):
        cost_of_control(P, BandControl.constant(2.0, 3))


def two_level_split(res, rng):
    """Random layered control with the same in-band consumption as ``res``."""
    phi = res.phi
    theta = rng.uniform(0.05, 0.95, size=phi.shape)
    delta = rng.uniform(-1, 1, size=phi.shape) * np.minimum(1.0, (1 - theta) / theta)
    a = phi * (1 + delta)
    b = (phi - theta * a) / (1 - theta)
    c = rng.uniform(0, 3, size=phi.shape)  # arbitrary values just above the band
    e3 = 1 + rng.uniform(0, 0.5, size=phi.shape)
    edges = np.stack([theta, np.ones_like(theta), e3], axis=2)
    levels = np.stack([a, np.maximum(b, 0), c], axis=2)
    return LayeredControl(edges, levels)


def test_jensen_band_split(rng):
    for _ in range(10):
        m, P = random_controlled_path(rng)
        res = rate_integral(P)
        for _ in range(10):
            alt = two_level_split(res, rng)
            assert cost_of_control(P, alt) >= res.value - 1e-9


def test_layered_consumption_oracle(rng):
    r = rng.uniform(0, 1, size=(4, 3))
    edges = np.sort(rng.uniform(0, 1.5, size=(4, 3, 3)), axis=2)
    levels = rng.uniform(0, 3, size=(4, 3, 3))
    L = LayeredControl(edges, levels)
    got = L.consumption(r)
    cost = L.band_cost(r)
    ys = np.linspace(0, 1, 200_001)[:-1] + 0.5 / 200_000
    for i in range(4):
        for k in range(3):
            e = edges[i, k] * r[i, k]
            idx = np.searchsorted(e, ys, side="right")
            phi = np.where(idx < 3, levels[i, k][np.minimum(idx, 2)], 1.0)
            band = ys < r[i, k]
            assert got[i, k] == pytest.approx(phi[band].sum() / 200_000, abs=1e-4)
            assert cost[i, k] == pytest.approx(np.mean([ell_oracle(v) for v in phi[::50]]), abs=2e-3)


def test_perturb_nominal_example():
    eps = 0.1
    _, P = lln_pair({1: 0.5, 3: 0.5}, frac=0.5, grid=2001)
    pert = perturb_bands(BandControl.nominal(), eps, P)
    _, r = slice_rates(P)
    per_slice = (1 - eps) * r * ell(1 / (1 - eps)) + (np.minimum((1 + eps) * r, 1) - (1 - eps) * r)
    expected = per_slice.sum() * P.dt
    assert cost_of_control(P, pert, num_tol=1e-5) == pytest.approx(expected, rel=1e-12)
    # the unclipped formula for bands narrow enough
    S = r.sum() * P.dt
    if np.all(r <= 1 / (1 + eps)):
        assert expected == pytest.approx(S * (0.9 * ell(1 / 0.9) + 0.2), rel=1e-12)


def test_perturb_preserves_consumption_and_bound(rng):
    for _ in range(20):
        m, P = random_controlled_path(rng)
        res = rate_integral(P)
        ctl = res.as_control(P)
        for eps in (1e-4, 0.05, 0.3):
            pert = perturb_bands(ctl, eps, P)
            _, r = slice_rates(P)
            np.testing.assert_allclose(pert.consumption(r), r * res.phi, atol=1e-12)
            inflation = cost_of_control(P, pert) - res.value
            assert 0 <= inflation <= perturbation_bound(res.value, eps, P.T) + 1e-12
    with pytest.raises(InvalidInput):
        perturb_bands(BandControl.nominal(), 1.0, P)


def test_perturbation_vanishes_with_eps(rng):
    m, P = random_controlled_path(rng)
    res = rate_integral(P)
    ctl = res.as_control(P)
    infl = [cost_of_control(P, perturb_bands(ctl, e, P)) - res.value for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b for a, b in zip(infl, infl[1:])) and infl[-1] < 1e-3


def test_perturb_rejects_layered_input():
    _, P = lln_pair({1: 0.5, 3: 0.5}, frac=0.5, grid=101)
    once = perturb_bands(BandControl.nominal(), 0.1, P)
    with pytest.raises(InvalidControl):
        perturb_bands(once, 0.1, P)


def test_rate_positive_off_lln_and_monotone():
    m = from_distribution({1: 0.5, 3: 0.5})
    T = 0.9 * phase_and_rho(m).absorption_time(m)
    vals = []
    for delta in (0.01, 0.05):
        ctl = BandControl.per_type({3: 1 + delta})
        vals.append(rate_integral(euler_path(m.p, ctl, T, 4001)).value)
    assert 0 < vals[0] < vals[1]


def test_grid_refinement_order():
    m = from_distribution({1: 0.3, 2: 0.3, 4: 0.4})
    T = 0.4 * phase_and_rho(m).absorption_time(m)
    vals = []
    for N in (100, 200, 400):
        L = lln_path(m, 2 * T, N + 1)
        vals.append(rate_integral(PathPair(L.t / 2, L.zeta, L.psi)).value)
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    assert d1 <= 1.0 / 100
    assert d2 <= d1 / 1.8 or d1 < 1e-12


def test_csv_roundtrip(rng):
    _, P = random_controlled_path(rng, grid=21)
    buf = io.StringIO()
    P.to_csv(buf)
    back = PathPair.from_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.zeta, P.zeta) and np.array_equal(back.t, P.t)


def test_summary_record():
    _, P = lln_pair({1: 0.5, 3: 0.5}, frac=0.5, grid=101)
    s = rate_integral(P).summary()
    assert set(s) == {"value", "feasible", "reason", "tau", "max_phi"} and len(s["max_phi"]) == 100


def test_euler_path_tracks_rk4(rng):
    m = from_distribution({1: 0.3, 2: 0.3, 4: 0.4})
    T = 0.4 * phase_and_rho(m).absorption_time(m)
    ctl = BandControl([0.0, T / 2], [[1.5, 0.7, 1.2, 1.0, 2.0], [0.5, 1.3, 1.0, 1.0, 0.8]])
    a = euler_path(m.p, ctl, T, 4001)
    b = controlled_path(m.p, ctl, T, 4001)
    assert np.abs(a.zeta - b.zeta).max() <= 1e-3
    assert feasibility(a, p=m.p).feasible
