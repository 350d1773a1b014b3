import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import shared_runs
from blowup_profiles.analysis import default_origin_window, fit_origin
from blowup_profiles.errors import InvalidBracket, InvalidParams
from blowup_profiles.integrate import EventKind
from blowup_profiles.model import (
    Params,
    critical_point,
    explicit_gamma,
    explicit_profile,
    explicit_support_edge,
    sigma_star,
)
from blowup_profiles.shooting import (
    OutcomeKind,
    ShootingControl,
    backward_reliable_from,
    bracket_good_profile,
    classify_c_intervals,
    decreasing_near_origin,
    find_good_profile,
    find_interface_c,
    p0_plane_orbit,
    shoot_from_interface,
    shoot_from_origin,
    shoot_from_p2,
)

M3S2 = Params(3.0, 2.0)


# --- backward -----------------------------------------------------------------

def test_positive_at_zero_below_critical_eta():
    o = shoot_from_interface(M3S2, 0.5)
    assert o.kind is OutcomeKind.PositiveAtZero
    assert o.A > 0 and o.slope < -ShootingControl().slope_tol
    assert o.meta["certified"]


def test_sign_change_for_large_eta():
    o = shoot_from_interface(M3S2, 10.0)
    assert o.kind is OutcomeKind.SignChange
    assert 0 < o.theta < 10.0
    assert o.trajectory.termination.kind is EventKind.VHitsZero


def test_explicit_interface_is_good_candidate():
    p = Params(3.0, sigma_star(3.0))
    xi1 = explicit_support_edge(3.0)
    o = shoot_from_interface(p, xi1)
    assert o.kind is OutcomeKind.GoodCandidate
    assert o.A == 0.0
    xs = np.linspace(0.1, 0.9 * xi1, 100)
    assert np.max(np.abs(o.trajectory.f_at(xs) / explicit_profile(3.0, xs) - 1)) < 1e-4


@pytest.mark.parametrize("eta", [0.0, -1.0, math.nan, 1e-5])
def test_shoot_from_interface_rejects(eta):
    with pytest.raises(InvalidParams):
        shoot_from_interface(M3S2, eta)


def test_find_good_profile_explicit():
    eta, o = shared_runs.explicit_recovery()
    xi1 = explicit_support_edge(3.0)
    assert abs(eta - xi1) <= 1e-4
    assert o.kind is OutcomeKind.GoodCandidate
    lo, hi = o.meta["bracket"]
    assert hi - lo <= 1e-10 * hi


def test_find_good_profile_small_sigma():
    eta, o = shared_runs.good_profile(3.0, 0.5)
    assert o.kind is OutcomeKind.GoodCandidate
    assert o.A > 1e-2 and abs(o.slope) <= 1e-4


def test_find_good_profile_large_sigma_matches_forward():
    p = Params(4.0, 4.0)
    eta, o = shared_runs.good_profile(4.0, 4.0)
    assert o.kind is OutcomeKind.GoodCandidate
    assert o.meta["origin_point"] == "P0"
    c_star, fo = shared_runs.interface_from_origin(4.0, 4.0)
    assert abs(eta - fo.xi0) <= 1e-9 * eta
    # both profiles agree where the backward run is reproducible ...
    win = (0.2, 0.4)
    assert fit_origin(o.trajectory, p, win).exponent == pytest.approx(fit_origin(fo.trajectory, p, win).exponent,
                                                                      abs=1e-3)
    # ... and the forward one resolves the xi^((sigma+2)/(m-1)) law near 0
    fit = fit_origin(fo.trajectory, p, default_origin_window(fo.trajectory))
    assert fit.exponent == pytest.approx(2.0, rel=0.05)


def test_bracket_search():
    lo, hi = bracket_good_profile(M3S2)
    assert decreasing_near_origin(M3S2, lo) and not decreasing_near_origin(M3S2, hi)


def test_find_good_profile_bad_bracket():
    with pytest.raises(InvalidBracket):
        find_good_profile(M3S2, (5.0, 10.0))
    with pytest.raises(InvalidBracket):
        find_good_profile(M3S2, (0.2, 0.5))
    with pytest.raises(InvalidBracket):
        find_good_profile(M3S2, (2.0, 1.0))


@pytest.mark.parametrize("eta", [0.5, 1.5, 3.0])
def test_backward_uniqueness_proxy(eta):
    ctrl = ShootingControl(certify=False)
    eps = ctrl.interface_offset
    a = shoot_from_interface(M3S2, eta, ctrl).trajectory
    b = shoot_from_interface(M3S2, eta, ctrl.with_(interface_offset=eps / 2)).trajectory
    lo = max(a.t.min(), b.t.min())
    xs = np.linspace(lo, eta * (1 - 2 * eps), 400)
    assert np.max(np.abs(a.f_at(xs) - b.f_at(xs))) <= 1e-6


@settings(max_examples=15)
@given(st.floats(0.05, 0.99))
def test_monotone_below_critical_eta(frac):
    eta = frac * M3S2.alpha ** (1 / M3S2.sigma)
    o = shoot_from_interface(M3S2, eta, ShootingControl(certify=False))
    assert o.kind is OutcomeKind.PositiveAtZero
    assert np.all(o.trajectory.state[:, 1] <= 0)


def test_reliable_window_for_p0_profile():
    p = Params(4.0, 4.0)
    eta, _ = shared_runs.good_profile(4.0, 4.0)
    xi_rel = backward_reliable_from(p, eta, 1e-12 * eta)
    assert 0.05 < xi_rel < 0.5 * eta


# --- forward ------------------------------------------------------------------

def test_small_sigma_origin_shot_is_tail():
    o = shoot_from_origin(Params(4.0, 0.5), 1.0)
    assert o.kind is OutcomeKind.Tail
    assert o.drift <= 1e-2 and math.isfinite(o.lnK)


@pytest.mark.parametrize("c", [0.0, -1.0, math.inf])
def test_shoot_from_origin_rejects(c):
    with pytest.raises(InvalidParams):
        shoot_from_origin(M3S2, c)


def test_c_scan_small_sigma_all_tail():
    kc = classify_c_intervals(Params(4.0, 0.5), shared_runs.C_GRID)
    assert all(k is OutcomeKind.Tail for k in kc.kinds)
    assert len(kc.intervals) == 1 and not kc.brackets
    assert kc.inconclusive_rate == 0.0


def test_c_scan_large_sigma_has_both():
    kc = shared_runs.c_scan(4.0, 4.0)
    assert kc.intervals_of("Tail") and kc.intervals_of("TransversalZero")
    assert kc.brackets
    c_tail, c_cross = kc.brackets[0]
    assert kc.kinds[kc.grid.index(c_tail)] is OutcomeKind.Tail
    assert kc.kinds[kc.grid.index(c_cross)] is OutcomeKind.TransversalZero


def test_c_scan_degenerate_grids():
    kc = classify_c_intervals(M3S2, [1.0])
    assert len(kc.kinds) == 1 and kc.brackets == []
    with pytest.raises(InvalidParams):
        classify_c_intervals(M3S2, [])
    with pytest.raises(InvalidParams):
        classify_c_intervals(M3S2, [2.0, 1.0])


def test_find_interface_c():
    c_star, o = shared_runs.interface_from_origin(4.0, 4.0)
    assert o.kind is OutcomeKind.Interface
    assert o.gamma == pytest.approx(o.xi0**4 / 0.5, rel=1e-12)
    lo, hi = o.meta["bracket"]
    assert hi - lo <= 1e-10 * hi
    with pytest.raises(InvalidBracket):
        find_interface_c(Params(4.0, 4.0), (0.01, 0.02))


def test_forward_backward_agreement():
    p = Params(4.0, 4.0)
    _, fo = shared_runs.interface_from_origin(4.0, 4.0)
    eta_b, _ = shared_runs.good_profile(4.0, 4.0)
    bo = shoot_from_interface(p, fo.xi0)
    lo = backward_reliable_from(p, fo.xi0, max(abs(fo.xi0 - eta_b), 1e-14 * fo.xi0))
    xs = np.linspace(lo, fo.xi0, 2000)
    assert np.max(np.abs(fo.trajectory.f_at(xs) - bo.trajectory.f_at(xs))) <= 1e-4


def test_p2_orbit_at_sigma_star_hits_explicit_interface():
    o = shoot_from_p2(Params(3.0, sigma_star(3.0)))
    assert o.kind is OutcomeKind.Interface
    assert o.gamma == pytest.approx(explicit_gamma(3.0), abs=1e-4)
    assert o.xi0 == pytest.approx(explicit_support_edge(3.0), abs=1e-6)


@pytest.mark.parametrize("m", [2.0, 4.0])
def test_zero_plane_orbit_reaches_p2(m):
    p = Params(m, 1.0)
    tr = p0_plane_orbit(p)
    assert tr.termination.kind is EventKind.StateNearPoint
    assert math.dist(tr.termination.state, critical_point(p, "P2").coords) <= 1e-4
    assert np.all(tr.state[:, 2] == 0.0)


FORWARD_CASES = [(3.0, 2.0, 1.0), (3.0, 2.0, 30.0), (4.0, 4.0, 10.0), (4.0, 4.0, 0.1), (4.0, 0.5, 1.0),
                 (2.0, 3.0, 5.0)]


@pytest.mark.parametrize("m, s, c", FORWARD_CASES)
def test_forward_sign_rules(m, s, c):
    p = Params(m, s)
    o = shoot_from_origin(p, c)
    X, Y, Z = o.trajectory.state.T
    # Y can only turn negative where Z > 1
    down = np.flatnonzero((Y[:-1] > 0) & (Y[1:] <= 0))
    assert np.all(Z[down + 1] > 1)
    # no return once below -beta/alpha
    below = np.flatnonzero(Y < -p.beta / p.alpha)
    if below.size:
        assert np.all(Y[below[0]:] < -p.beta / p.alpha)
