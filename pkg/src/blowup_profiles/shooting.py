"""Shooting from the interface (backward) and from the origin (forward)."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dynsys import PhaseState, ProfileState, profile_rhs, profile_to_phase
from .errors import InvalidBracket, InvalidParams
from .integrate import (
    Direction,
    EventKind,
    IntegratorControl,
    Trajectory,
    Watch,
    concat_trajectories,
    integrate_phase,
    integrate_profile,
    near_interface,
    near_point,
    v_hits_zero,
    v_diverges,
    xi_reaches,
    y_crosses,
    z_reaches,
)
from .model import (
    Anchor,
    LocalSeries,
    Params,
    PointTag,
    critical_point,
    interface_series_coefficients,
    local_series_eval,
    p2_unstable_vector,
    tail_residual_log,
)


@dataclass(frozen=True)
class ShootingControl:
    """Integrator settings plus the classification thresholds."""

    integ: IntegratorControl = field(default_factory=IntegratorControl)
    slope_tol: float = 1e-4
    fmslope_tol: float = 1e-6
    z_cut: float = 50.0
    tail_window: float = 2.0  # trailing window is z_cut / tail_window <= Z <= z_cut
    tail_tol: float = 1e-2
    interface_offset: float = 1e-4  # relative to the interface point
    series_order: int = 8
    origin_offset: float = 1e-7  # size of (X, Z) at the origin launch
    bisect_rel: float = 1e-14
    floor_rel: float = 1e-16  # xi floor of the bisection runs, relative to eta
    certify: bool = True
    certify_tol: float = 1e-6
    p0_radius: float = 0.1
    workers: int = 0

    def with_(self, **kw) -> "ShootingControl":
        return replace(self, **kw)


def as_shooting_control(ctrl) -> ShootingControl:
    if ctrl is None:
        return ShootingControl()
    if isinstance(ctrl, IntegratorControl):
        return ShootingControl(integ=ctrl)
    if isinstance(ctrl, ShootingControl):
        return ctrl
    raise InvalidParams(f"unsupported control {type(ctrl).__name__}")


class OutcomeKind(str, Enum):
    SignChange = "SignChange"
    PositiveAtZero = "PositiveAtZero"
    GoodCandidate = "GoodCandidate"
    Asymptote = "Asymptote"
    Interface = "Interface"
    TransversalZero = "TransversalZero"
    Tail = "Tail"
    Inconclusive = "Inconclusive"


@dataclass
class BackwardOutcome:
    kind: OutcomeKind
    trajectory: Trajectory
    eta: float
    theta: float = math.nan
    A: float = math.nan
    slope: float = math.nan
    meta: dict = field(default_factory=dict)


@dataclass
class ForwardOutcome:
    kind: OutcomeKind
    trajectory: Trajectory
    c: float
    xi0: float = math.nan
    gamma: float = math.nan
    lnK: float = math.nan
    drift: float = math.nan
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# backward from the interface
# ---------------------------------------------------------------------------

def interface_launch(p: Params, eta: float, ctrl: ShootingControl, offset: float | None = None) -> ProfileState:
    rel = ctrl.interface_offset if offset is None else offset
    gamma = eta**p.sigma / p.alpha
    xi = eta * (1.0 - rel)
    v, w = local_series_eval(LocalSeries(Anchor.InterfaceP1, p, gamma), xi, ctrl.series_order)
    return ProfileState(xi, v, w)


def _backward_run(p: Params, eta: float, ctrl: ShootingControl, xi_stop: float,
                  offset: float | None = None) -> Trajectory:
    """Profile ODE in xi: the origin is a regular point there, unlike in eta."""
    s0 = interface_launch(p, eta, ctrl, offset)
    ic = ctrl.integ
    watch = [v_hits_zero(), v_diverges(ic.bound_huge), xi_reaches(xi_stop, -1)]
    tr = integrate_profile(p, s0, Direction.Backward, ic, watch)
    tr.support_edge = eta
    return tr


def _origin_extrapolation(p: Params, xi: float, v: float, w: float) -> tuple[float, float]:
    """(f'(0), f(0)) extrapolated linearly / quadratically from the state at xi."""
    m = p.m
    e = 1.0 / (m - 1.0)
    _, d2v = profile_rhs(p, ProfileState(xi, v, w))
    f = v**e
    fp = e * v ** (e - 1.0) * w
    fpp = e * ((e - 1.0) * v ** (e - 2.0) * w * w + v ** (e - 1.0) * d2v)
    return fp - xi * fpp, f - xi * fp + 0.5 * xi * xi * fpp


def _classify_backward(p: Params, eta: float, tr: Trajectory, ctrl: ShootingControl) -> BackwardOutcome:
    ev = tr.termination
    cols = tr.profile_columns()
    xi, v, w = cols["xi"][-1], cols["v"][-1], cols["w"][-1]
    out = BackwardOutcome(OutcomeKind.Inconclusive, tr, eta)
    X, Y, Z = _phase_columns(p, cols)
    x2, y2, _ = critical_point(p, PointTag.P2).coords
    d2 = float(np.min(np.sqrt((X - x2) ** 2 + (Y - y2) ** 2 + Z**2)))
    d0 = float(np.min(np.sqrt(X**2 + Y**2 + Z**2)))
    out.meta["p2_distance"] = d2
    out.meta["p0_distance"] = d0
    if ev.kind is EventKind.VHitsZero:
        out.kind, out.theta = OutcomeKind.SignChange, float(xi)
    elif ev.kind is EventKind.VDiverges:
        out.kind = OutcomeKind.Asymptote
    elif ev.kind is EventKind.ReachedXiMin and v > 0:
        slope, A = _origin_extrapolation(p, xi, v, w)
        out.slope, out.A = float(slope), float(A)
        flux = float(cols["flux"][-1])
        if slope < -ctrl.slope_tol:
            out.kind = OutcomeKind.PositiveAtZero
        elif abs(slope) <= ctrl.slope_tol:
            out.kind = OutcomeKind.GoodCandidate
        elif abs(flux) <= ctrl.fmslope_tol:
            # power law at the origin: f(0) = 0 and (f^m)'(0) = 0
            out.kind, out.A = OutcomeKind.GoodCandidate, 0.0
        out.meta["flux_at_xi_min"] = flux
    if out.kind is not OutcomeKind.GoodCandidate:
        # Orbits through P2 (f ~ xi^(2/(m-1))) or P0 (f ~ c xi^((sigma+2)/(m-1)))
        # are unstable backward; past the closest approach the run only shows
        # amplified roundoff, so proximity is the criterion.
        near = None
        if d2 <= ctrl.integ.near_radius:
            near = "P2"
        elif d0 <= ctrl.p0_radius:
            near = "P0"
        if near:
            out.meta["raw_kind"] = out.kind.value
            out.meta["origin_point"] = near
            out.kind, out.A, out.theta = OutcomeKind.GoodCandidate, 0.0, math.nan
    return out


def _phase_columns(p: Params, cols: dict):
    m, a = p.m, p.alpha
    xi, v, w = cols["xi"], cols["v"], cols["w"]
    return m / a * v / xi**2, m / (a * (m - 1.0)) * w / xi, xi**p.sigma / a


def _terminal_location(o: BackwardOutcome) -> float:
    near = o.meta.get("origin_point")
    if near:
        return o.meta["p2_distance" if near == "P2" else "p0_distance"]
    if o.kind is OutcomeKind.SignChange:
        return o.theta
    if o.kind in (OutcomeKind.PositiveAtZero, OutcomeKind.GoodCandidate):
        return o.slope
    return math.nan


def shoot_from_interface(p: Params, eta: float, ctrl=None) -> BackwardOutcome:
    """Launch at the interface eta and classify the backward profile."""
    ctrl = as_shooting_control(ctrl)
    if not (math.isfinite(eta) and eta > 0):
        raise InvalidParams(f"eta must be > 0, got {eta!r}")
    if eta * (1.0 - ctrl.interface_offset) <= ctrl.integ.xi_min:
        raise InvalidParams(f"eta={eta} is inside xi_min")
    out = _classify_backward(p, eta, _backward_run(p, eta, ctrl, ctrl.integ.xi_min), ctrl)
    if ctrl.certify:
        half = _classify_backward(
            p, eta, _backward_run(p, eta, ctrl, ctrl.integ.xi_min, 0.5 * ctrl.interface_offset), ctrl)
        d = abs(_terminal_location(out) - _terminal_location(half))
        out.meta["certify_drift"] = d
        out.meta["certified"] = half.kind is out.kind and (not math.isfinite(d) or d <= ctrl.certify_tol)
    return out


def decreasing_near_origin(p: Params, eta: float, ctrl=None) -> bool:
    """True when the backward profile from eta is decreasing somewhere with Z < 1.

    Local maxima need xi^sigma >= alpha, so once f' < 0 below alpha^(1/sigma)
    the profile stays positive and decreasing down to the origin.
    """
    ctrl = as_shooting_control(ctrl)
    tr = _backward_run(p, eta, ctrl, ctrl.floor_rel * eta)
    if tr.termination.kind is EventKind.VHitsZero:
        return False
    cols = tr.profile_columns()
    return bool(np.any((cols["w"] < 0.0) & (cols["xi"] ** p.sigma < p.alpha)))


def _bisect(pred, lo: float, hi: float, rel: float, log: bool = False):
    """Bisect the boundary where pred flips from pred(lo) to pred(hi)."""
    plo = pred(lo)
    while abs(hi - lo) > rel * max(abs(hi), abs(lo)):
        mid = math.sqrt(lo * hi) if log else 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if pred(mid) == plo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def bracket_good_profile(p: Params, ctrl=None, max_doublings: int = 40) -> tuple[float, float]:
    """Geometric scan from alpha^(1/sigma)/2 upward until a sign change appears."""
    ctrl = as_shooting_control(ctrl)
    lo = p.alpha ** (1.0 / p.sigma) / 2.0
    eta = lo
    for _ in range(max_doublings):
        eta *= 2.0
        if not decreasing_near_origin(p, eta, ctrl):
            return eta / 2.0, eta
    raise InvalidBracket("no sign change found while scanning eta upward")


def find_good_profile(p: Params, bracket=None, ctrl=None) -> tuple[float, BackwardOutcome]:
    ctrl = as_shooting_control(ctrl)
    if bracket is None:
        lo, hi = bracket_good_profile(p, ctrl)
    else:
        lo, hi = map(float, bracket)
        if not (0 < lo < hi):
            raise InvalidBracket(f"need 0 < eta_lo < eta_hi, got {bracket!r}")
    if not decreasing_near_origin(p, lo, ctrl):
        raise InvalidBracket(f"eta_lo={lo} is not on the positive-at-zero side")
    if decreasing_near_origin(p, hi, ctrl):
        raise InvalidBracket(f"eta_hi={hi} does not change sign")
    lo, hi = _bisect(lambda e: decreasing_near_origin(p, e, ctrl), lo, hi, ctrl.bisect_rel)
    mid = 0.5 * (lo + hi)
    out = shoot_from_interface(p, mid, ctrl)
    out.meta["bracket"] = (lo, hi)
    if out.kind is not OutcomeKind.GoodCandidate:
        out.meta["lo_outcome"] = shoot_from_interface(p, lo, ctrl).kind.value
        out.meta["hi_outcome"] = shoot_from_interface(p, hi, ctrl).kind.value
    return mid, out


def backward_reliable_from(p: Params, eta: float, d_eta: float, ctrl=None,
                           tol: float = 1e-6, n: int = 400) -> float:
    """Smallest xi above which backward shots from eta -+ d_eta agree to tol * max f.

    Near P0 the backward flow amplifies perturbations of eta
    super-exponentially, so origin-type profiles are reproducible only down
    to some positive xi; this measures where.
    """
    ctrl = as_shooting_control(ctrl).with_(certify=False)
    runs = [_backward_run(p, e, ctrl, ctrl.integ.xi_min) for e in (eta - d_eta, eta + d_eta)]
    lo = max(float(np.min(r.t)) for r in runs)
    hi = min(float(np.max(r.t)) for r in runs)
    xs = np.geomspace(lo, hi, n)
    fa, fb = (r.f_at(xs) for r in runs)
    bad = np.abs(fa - fb) > tol * max(np.max(fa), np.max(fb))
    if not np.any(bad):
        return float(lo)
    return float(xs[np.max(np.nonzero(bad)[0]) + 1]) if not bad[-1] else float(hi)


# ---------------------------------------------------------------------------
# forward from the origin
# ---------------------------------------------------------------------------

def origin_launch(p: Params, c: float, ctrl: ShootingControl) -> PhaseState:
    """Point on the origin family near P0 with max(X, Z) = origin_offset."""
    m, a, s = p.m, p.alpha, p.sigma
    ratio = m * c ** (m - 1.0)  # X / Z along the family
    z = ctrl.origin_offset / max(ratio, 1.0)
    X = ratio * z
    return PhaseState(X, a / p.beta * X, z)


def _forward_watches(p: Params, ctrl: ShootingControl, stop_near_interface: bool):
    ws = [y_crosses(-ctrl.integ.bound_huge, -1), z_reaches(ctrl.z_cut, +1)]
    if stop_near_interface:
        ws.append(near_interface(p, ctrl.integ.near_radius, ctrl.fmslope_tol))
    return ws


def _hybrid_phase_run(p: Params, start: PhaseState, ctrl: ShootingControl, watches) -> Trajectory:
    """Rosenbrock while the orbit creeps along X ~ 0, Dormand-Prince once Y < -2 beta/alpha.

    Below -beta/alpha the orbit cannot come back (it heads to an interface or
    to a transversal zero, where Y runs off to -infinity in finite eta).
    """
    switch = y_crosses(-2.0 * p.beta / p.alpha, -1)
    tr = integrate_phase(p, start, ctrl.integ, list(watches) + [switch], method="rosenbrock")
    if tr.termination.watch is not switch:
        return tr
    X, Y, Z = tr.termination.state
    rest = integrate_phase(p, PhaseState(X, Y, Z), ctrl.integ, watches, method="dopri")
    return concat_trajectories(tr, rest)


def _forward_run(p: Params, c: float, ctrl: ShootingControl, stop_near_interface: bool = True) -> Trajectory:
    return _hybrid_phase_run(p, origin_launch(p, c, ctrl), ctrl, _forward_watches(p, ctrl, stop_near_interface))


def tail_window(tr: Trajectory, z_lo: float, z_hi: float, min_samples: int = 32):
    """(xi, ln f) over z_lo <= Z <= z_hi, resampled in eta when too sparse."""
    p = tr.params
    Z = tr.state[:, 2]
    sel = (Z >= z_lo) & (Z <= z_hi)
    cols = tr.profile_columns()
    xi, lf = cols["xi"][sel], tr.log_f()[sel]
    if sel.sum() >= min_samples or sel.sum() < 2:
        return xi, lf
    idx = np.flatnonzero(sel)
    t = np.linspace(tr.t[max(idx[0] - 1, 0)], tr.t[idx[-1]], 4 * min_samples)
    y = tr.dense(t)
    keep = (y[:, 2] >= z_lo) & (y[:, 2] <= z_hi) & (y[:, 0] > 0)
    y = y[keep]
    xi = (p.alpha * y[:, 2]) ** (1.0 / p.sigma)
    lf = (np.log(p.alpha / p.m * y[:, 0]) + 2.0 * np.log(xi)) / (p.m - 1.0)
    return xi, lf


def _interface_from_state(p: Params, xi: float, v: float) -> float:
    """Interface point estimated from a nearby state via the two-term series."""
    xi0 = xi
    for _ in range(8):
        co = interface_series_coefficients(p, xi0**p.sigma / p.alpha, 2)
        a1, a2 = co[1], co[2]
        d = 2.0 * v / (a1 + math.sqrt(max(a1 * a1 + 4.0 * a2 * v, 0.0)))
        xi0 = xi + d
    return xi0


def _classify_forward(p: Params, c: float, tr: Trajectory, ctrl: ShootingControl) -> ForwardOutcome:
    ev = tr.termination
    out = ForwardOutcome(OutcomeKind.Inconclusive, tr, c)
    cols = tr.profile_columns()
    xi, v = float(cols["xi"][-1]), float(cols["v"][-1])
    flux = ev.flux
    out.meta["terminal_flux"] = flux
    if ev.kind is EventKind.YCrossesValue:
        if flux < -ctrl.fmslope_tol:
            out.kind, out.xi0 = OutcomeKind.TransversalZero, xi
        elif abs(flux) <= ctrl.fmslope_tol:
            out.kind, out.xi0 = OutcomeKind.Interface, xi
    elif ev.kind is EventKind.NearInterface:
        out.kind = OutcomeKind.Interface
        out.xi0 = _interface_from_state(p, xi, v)
    elif ev.kind is EventKind.ZReaches:
        xs, lf = tail_window(tr, ctrl.z_cut / ctrl.tail_window, ctrl.z_cut)
        if len(xs) >= 2:
            r = tail_residual_log(p, xs, lf)
            out.drift = float(np.sum(np.abs(np.diff(r))))
            out.lnK = float(np.mean(r))
            if out.drift <= ctrl.tail_tol:
                out.kind = OutcomeKind.Tail
    if out.kind is OutcomeKind.Interface:
        out.gamma = out.xi0**p.sigma / p.alpha
        tr.support_edge = out.xi0
    return out


def shoot_from_origin(p: Params, c: float, ctrl=None) -> ForwardOutcome:
    ctrl = as_shooting_control(ctrl)
    if not (math.isfinite(c) and c > 0):
        raise InvalidParams(f"c must be > 0, got {c!r}")
    return _classify_forward(p, c, _forward_run(p, c, ctrl), ctrl)


def p2_launch(p: Params, delta: float = 1e-6) -> PhaseState:
    """P2 + delta e3, on the unstable direction with unit Z-component."""
    x2, y2, _ = critical_point(p, PointTag.P2).coords
    e3 = p2_unstable_vector(p)
    return PhaseState(x2 + delta * e3[0], y2 + delta * e3[1], delta * e3[2])


def shoot_from_p2(p: Params, ctrl=None, delta: float = 1e-6) -> ForwardOutcome:
    """Follow the unique orbit out of P2 and classify it like a forward shot."""
    ctrl = as_shooting_control(ctrl)
    tr = _hybrid_phase_run(p, p2_launch(p, delta), ctrl, _forward_watches(p, ctrl, True))
    out = _classify_forward(p, math.nan, tr, ctrl)
    out.meta["launch"] = "P2"
    return out


def p0_plane_orbit(p: Params, ctrl=None, delta: float = 1e-6, radius: float = 1e-4) -> Trajectory:
    """Orbit in {Z=0} leaving P0 along its center direction dY/dX = alpha/beta.

    Stops within `radius` of P2, its expected target.
    """
    ctrl = as_shooting_control(ctrl)
    start = PhaseState(delta, p.alpha / p.beta * delta, 0.0)
    watches = [near_point(critical_point(p, PointTag.P2).coords, radius), y_crosses(-ctrl.integ.bound_huge, -1)]
    return integrate_phase(p, start, ctrl.integ, watches, method="rosenbrock")


@dataclass
class KClassification:
    grid: list
    kinds: list
    outcomes: list
    intervals: list  # (kind, c_first, c_last, i_first, i_last)
    brackets: list  # (c_tail, c_cross) for adjacent Tail / TransversalZero entries

    def intervals_of(self, kind) -> list:
        kind = OutcomeKind(kind)
        return [iv for iv in self.intervals if iv[0] is kind]

    @property
    def inconclusive_rate(self) -> float:
        return sum(k is OutcomeKind.Inconclusive for k in self.kinds) / max(len(self.kinds), 1)


def parallel_map(fn, items, workers: int = 0) -> list:
    """Ordered map; threads because the kernels release the GIL."""
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers or None) as ex:
        return list(ex.map(fn, items))


def classify_c_intervals(p: Params, c_grid, ctrl=None) -> KClassification:
    ctrl = as_shooting_control(ctrl)
    grid = [float(c) for c in c_grid]
    if not grid:
        raise InvalidParams("empty c grid")
    if any(c <= 0 for c in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParams("c grid must be positive and strictly increasing")
    outcomes = parallel_map(lambda c: shoot_from_origin(p, c, ctrl), grid, ctrl.workers)
    kinds = [o.kind for o in outcomes]
    intervals = []
    start = 0
    for i in range(1, len(grid) + 1):
        if i == len(grid) or kinds[i] is not kinds[start]:
            intervals.append((kinds[start], grid[start], grid[i - 1], start, i - 1))
            start = i
    pair = {OutcomeKind.Tail, OutcomeKind.TransversalZero}
    brackets = []
    for i in range(len(grid) - 1):
        if {kinds[i], kinds[i + 1]} == pair:
            j_tail = i if kinds[i] is OutcomeKind.Tail else i + 1
            brackets.append((grid[j_tail], grid[2 * i + 1 - j_tail]))
    return KClassification(grid, kinds, outcomes, intervals, brackets)


def _reaches_tail(p: Params, c: float, ctrl: ShootingControl) -> bool:
    tr = _forward_run(p, c, ctrl, stop_near_interface=False)
    return tr.termination.kind is EventKind.ZReaches


def find_interface_c(p: Params, bracket, ctrl=None) -> tuple[float, ForwardOutcome]:
    """Bisect between a Tail and a TransversalZero shot for the interface profile."""
    ctrl = as_shooting_control(ctrl)
    c_tail, c_cross = map(float, bracket)
    if not (c_tail > 0 and c_cross > 0):
        raise InvalidBracket("bracket endpoints must be > 0")
    k_tail = shoot_from_origin(p, c_tail, ctrl).kind
    k_cross = shoot_from_origin(p, c_cross, ctrl).kind
    if k_tail is not OutcomeKind.Tail or k_cross is not OutcomeKind.TransversalZero:
        raise InvalidBracket(f"bracket classifies as ({k_tail.value}, {k_cross.value})")
    lo, hi = _bisect(lambda c: _reaches_tail(p, c, ctrl), c_tail, c_cross, ctrl.bisect_rel, log=True)
    mid = math.sqrt(lo * hi)
    out = shoot_from_origin(p, mid, ctrl)
    out.meta["bracket"] = (lo, hi)
    return mid, out
