"""Adaptive integration of the profile and phase-space systems with event stops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _kernels as K
from .dynsys import PhaseState, ProfileState, ReducedState
from .errors import InvalidParams
from .model import Params


@dataclass(frozen=True)
class IntegratorControl:
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float = 0.0
    h_max: float = math.inf
    max_steps: int = 100_000
    xi_min: float = 1e-4
    bound_huge: float = 1e8
    # extra knobs
    xi_max: float = math.inf
    hmax_rel: float = 0.5
    hmin_rel: float = 1e-13
    event_tol: float = 1e-12
    near_radius: float = 1e-3

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise InvalidParams("rtol and atol must be > 0")
        if not self.max_steps > 0:
            raise InvalidParams("max_steps must be > 0")
        if not self.xi_min > 0:
            raise InvalidParams("xi_min must be > 0")

    def with_(self, **kw) -> "IntegratorControl":
        return replace(self, **kw)


class EventKind(str, Enum):
    VHitsZero = "VHitsZero"
    VDiverges = "VDiverges"
    YCrossesValue = "YCrossesValue"
    XCrossesValue = "XCrossesValue"
    ZReaches = "ZReaches"
    StateNearPoint = "StateNearPoint"
    NearInterface = "NearInterface"
    StepBudgetExhausted = "StepBudgetExhausted"
    ReachedXiMin = "ReachedXiMin"
    ReachedXiMax = "ReachedXiMax"
    NonFinite = "NonFinite"


class Direction(int, Enum):
    Forward = 1
    Backward = -1


@dataclass(frozen=True)
class Watch:
    """A stop condition. `component` names a watched quantity of the system."""

    kind: EventKind
    component: str | None = None
    value: float = math.nan
    direction: int = 0
    center: tuple | None = None
    radius: float = math.nan
    flux_tol: float = math.nan


def v_hits_zero() -> Watch:
    return Watch(EventKind.VHitsZero)


def v_diverges(bound: float) -> Watch:
    return Watch(EventKind.VDiverges, "v", bound, +1)


def y_crosses(y0: float, direction: int = 0) -> Watch:
    return Watch(EventKind.YCrossesValue, "Y", y0, direction)


def x_crosses(x0: float, direction: int = 0) -> Watch:
    return Watch(EventKind.XCrossesValue, "X", x0, direction)


def z_reaches(z0: float, direction: int = +1) -> Watch:
    return Watch(EventKind.ZReaches, "Z", z0, direction)


def xi_reaches(xi: float, direction: int) -> Watch:
    kind = EventKind.ReachedXiMin if direction < 0 else EventKind.ReachedXiMax
    return Watch(kind, "xi", xi, direction)


def near_point(point, radius: float) -> Watch:
    """Stop within `radius` of `point`; NaN coordinates are ignored."""
    c = tuple(float(x) for x in point)[:3]
    return Watch(EventKind.StateNearPoint, None, math.nan, 0, c, radius)


def near_interface(p: Params, radius: float, flux_tol: float) -> Watch:
    """Stop when Y is within `radius` of -beta/alpha and |(f^m)'| <= flux_tol."""
    return Watch(EventKind.NearInterface, None, math.nan, 0, (-p.beta / p.alpha,), radius, flux_tol)


_COMPONENTS = {
    K.PROFILE: {"v": 0, "w": 1, "flux": 2, "xi": -1},
    K.PHASE: {"X": 0, "Y": 1, "Z": 2, "v": 3, "flux": 4, "xi": 5, "eta": -1},
    K.REDUCED: {"X": 0, "Y": 1, "W": 2, "eta": -1},
    K.CENTER: {"X": 0, "W": 1, "eta": -1},
}


def _event_rows(system: int, watches) -> tuple[np.ndarray, list]:
    rows, owners = [], []
    comps = _COMPONENTS[system]
    for wt in watches:
        if wt.kind is EventKind.VHitsZero:
            continue  # profile: reported from step collapse at v -> 0
        if wt.kind is EventKind.VDiverges and system == K.PROFILE:
            b = wt.value
            for comp, val, d in (("v", b, 1), ("w", b, 1), ("w", -b, -1)):
                rows.append([K.EV_CROSS, comps[comp], val, d, 0, 0, 0, 0])
                owners.append(wt)
            continue
        if wt.kind is EventKind.StateNearPoint:
            c = list(wt.center) + [math.nan] * (3 - len(wt.center))
            rows.append([K.EV_NEAR, 0, wt.radius, 0, c[0], c[1], c[2], 0])
        elif wt.kind is EventKind.NearInterface:
            rows.append([K.EV_INTERFACE, 0, wt.radius, 0, wt.center[0], wt.flux_tol, 0, 0])
        else:
            if wt.component not in comps:
                raise InvalidParams(f"{wt.kind.value} cannot watch {wt.component!r} here")
            rows.append([K.EV_CROSS, comps[wt.component], wt.value, wt.direction, 0, 0, 0, 0])
        owners.append(wt)
    arr = np.array(rows, dtype=float).reshape(-1, K.EV_WIDTH)
    return arr, owners


@dataclass
class Event:
    kind: EventKind
    location: float
    state: tuple
    watch: Watch | None = None
    flux: float = math.nan


@dataclass
class Trajectory:
    """Sampled solution. `state` is in the system's natural coordinates."""

    system: str
    params: Params
    t: np.ndarray
    state: np.ndarray
    deriv: np.ndarray
    termination: Event
    log_x: np.ndarray | None = None
    support_edge: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def samples(self):
        return list(zip(self.t.tolist(), map(tuple, self.state.tolist())))

    def dense(self, tq):
        """Cubic Hermite interpolation on the accepted steps."""
        t, y, d = self.t, self.state, self.deriv
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        sgn = 1.0 if t[-1] >= t[0] else -1.0
        ts = sgn * t
        idx = np.clip(np.searchsorted(ts, sgn * tq) - 1, 0, len(t) - 2)
        h = t[idx + 1] - t[idx]
        s = ((tq - t[idx]) / h)[:, None]
        h = h[:, None]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y[idx] + h10 * h * d[idx] + h01 * y[idx + 1] + h11 * h * d[idx + 1]

    # profile accessors -------------------------------------------------
    def profile_columns(self) -> dict:
        p = self.params
        m, a = p.m, p.alpha
        if self.system == "profile":
            xi, v, w = self.t, self.state[:, 0], self.state[:, 1]
        elif self.system == "phase":
            X, Y, Z = self.state.T
            xi = (a * Z) ** (1.0 / p.sigma)
            v = a * X * xi**2 / m
            w = a * (m - 1.0) * xi * Y / m
        else:
            raise InvalidParams(f"{self.system} trajectory has no profile view")
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(v > 0, np.abs(v) ** (1.0 / (m - 1.0)), 0.0)
            fp = np.where(v > 0, np.abs(v) ** ((2.0 - m) / (m - 1.0)) * w / (m - 1.0), np.nan)
            flux = m / (m - 1.0) * f * w
        return {"xi": xi, "v": v, "w": w, "f": f, "fprime": fp, "flux": flux}

    def log_f(self) -> np.ndarray:
        """ln f, accurate even where f underflows (phase runs in log X)."""
        p = self.params
        cols = self.profile_columns()
        if self.system == "phase" and self.log_x is not None:
            lnv = math.log(p.alpha / p.m) + self.log_x + 2.0 * np.log(cols["xi"])
            return lnv / (p.m - 1.0)
        with np.errstate(divide="ignore"):
            return np.log(cols["f"])

    def _interp(self):
        # Hermite in xi on (v, dv/dxi = w): v is smooth and vanishes linearly
        # at an interface, f is not
        if "_hermite" not in self.meta:
            p = self.params
            cols = self.profile_columns()
            xi, v, w = cols["xi"], cols["v"], cols["w"]
            order = np.argsort(xi)
            xi, v, w = xi[order], v[order], w[order]
            keep = np.concatenate([[True], np.diff(xi) > 0])
            xi, v, w = xi[keep], v[keep], w[keep]
            edge = self.support_edge
            if edge is not None and edge > xi[-1]:
                a1 = (p.m - 1.0) * p.beta * edge / p.m
                xi, v, w = np.append(xi, edge), np.append(v, 0.0), np.append(w, -a1)
            self.meta["_hermite"] = (CubicHermiteSpline(xi, v, w, extrapolate=False), xi[0], xi[-1])
        return self.meta["_hermite"]

    def f_at(self, xi):
        interp, lo, hi = self._interp()
        xi = np.asarray(xi, dtype=float)
        v = interp(xi)
        if self.support_edge is not None:
            v = np.where(xi >= self.support_edge, 0.0, v)
        if np.any(~np.isfinite(v)):
            raise InvalidParams(f"xi outside sampled range [{lo}, {hi}]")
        out = np.clip(v, 0.0, None) ** (1.0 / (self.params.m - 1.0))
        return float(out) if out.ndim == 0 else out


_METHODS = {"dopri": K.DOPRI, "rosenbrock": K.ROS4}


def concat_trajectories(first: Trajectory, second: Trajectory) -> Trajectory:
    """Join a run and its continuation (restarted at local time 0)."""
    off = first.t[-1] - second.t[0]
    t = np.concatenate([first.t, second.t[1:] + off])
    keep = np.concatenate([[True], np.diff(t) * np.sign(t[-1] - t[0] or 1.0) > 0])
    lx = None
    if first.log_x is not None and second.log_x is not None:
        lx = np.concatenate([first.log_x, second.log_x[1:]])[keep]
    ev = second.termination
    ev = Event(ev.kind, ev.location + off, ev.state, ev.watch, ev.flux)
    return Trajectory(
        first.system, first.params, t[keep],
        np.concatenate([first.state, second.state[1:]])[keep],
        np.concatenate([first.deriv, second.deriv[1:]])[keep],
        ev, lx, second.support_edge, {**first.meta, **second.meta},
    )


def _run(system: int, p: Params, t0: float, y0, hdir: int, ctrl: IntegratorControl, watches,
         log_x: bool = False, log_z: bool = False, method: str = "dopri"):
    par = np.array([p.m, p.sigma, p.alpha, p.beta, float(log_x), float(log_z)])
    rows, owners = _event_rows(system, watches)
    cap = ctrl.max_steps + 2
    n = K.DIMS[system]
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    ds = np.empty((cap, n))
    ns, status, idx, _ = K.integrate(
        system, par, float(t0), np.asarray(y0, dtype=float), int(hdir), ctrl.rtol, ctrl.atol,
        ctrl.h_init, ctrl.h_max, ctrl.hmax_rel, ctrl.hmin_rel, ctrl.max_steps, rows,
        ctrl.event_tol, ts, ys, ds, _METHODS[method],
    )
    watch = owners[idx] if (status == K.ST_EVENT and idx >= 0) else None
    return ts[:ns].copy(), ys[:ns].copy(), ds[:ns].copy(), status, watch


def _status_kind(status: int, watch: Watch | None, system: int) -> EventKind:
    if status == K.ST_EVENT:
        return watch.kind
    if status == K.ST_BUDGET:
        return EventKind.StepBudgetExhausted
    if status == K.ST_SINGULAR and system == K.PROFILE:
        return EventKind.VHitsZero
    return EventKind.NonFinite


def default_profile_watch(ctrl: IntegratorControl, direction: Direction):
    ws = [v_hits_zero(), v_diverges(ctrl.bound_huge)]
    if direction is Direction.Backward:
        ws.append(xi_reaches(ctrl.xi_min, -1))
    elif math.isfinite(ctrl.xi_max):
        ws.append(xi_reaches(ctrl.xi_max, +1))
    return ws


def integrate_profile(p: Params, start: ProfileState, direction=Direction.Backward,
                      ctrl: IntegratorControl | None = None, watch=None) -> Trajectory:
    ctrl = ctrl or IntegratorControl()
    direction = Direction(direction)
    if not start.v > 0:
        raise InvalidParams("start needs v > 0")
    if watch is None:
        watch = default_profile_watch(ctrl, direction)
    y0 = np.array([start.v, start.w])
    if direction is Direction.Backward and start.xi <= ctrl.xi_min:
        d = np.zeros((1, 2))
        ev = Event(EventKind.ReachedXiMin, start.xi, (start.xi, start.v, start.w))
        return Trajectory("profile", p, np.array([start.xi]), y0[None, :], d, ev)
    ts, ys, ds, status, wt = _run(K.PROFILE, p, start.xi, y0, int(direction), ctrl, watch)
    kind = _status_kind(status, wt, K.PROFILE)
    if (kind is EventKind.VHitsZero and direction is Direction.Backward
            and ts[-1] <= 1e3 * ctrl.hmin_rel and ys[-1, 0] > 1e-6 * np.max(ys[:, 0])):
        # steps collapsed against xi = 0, not against v = 0
        kind = EventKind.ReachedXiMin
    if kind is EventKind.VHitsZero and not any(w.kind is EventKind.VHitsZero for w in watch):
        kind = EventKind.NonFinite
    v, w = ys[-1]
    flux = p.m / (p.m - 1.0) * v ** (1.0 / (p.m - 1.0)) * w if v > 0 else 0.0
    ev = Event(kind, float(ts[-1]), (float(ts[-1]), float(v), float(w)), wt, flux)
    return Trajectory("profile", p, ts, ys, ds, ev)


def integrate_phase(p: Params, start: PhaseState, ctrl: IntegratorControl | None = None,
                    watch=(), direction=Direction.Forward, log_coords: bool = True,
                    eta0: float = 0.0, method: str = "dopri") -> Trajectory:
    """Integrate the (X, Y, Z) system in eta.

    With `log_coords` the run carries ln X and ln Z whenever they are positive,
    which keeps relative accuracy near X = 0 and Z = 0. `method="rosenbrock"`
    steps linearly implicitly; needed where the orbit creeps along X ~ 0 (near
    P0 and in tails) while the Y-direction relaxes at the much faster rate beta/alpha.
    """
    if method not in _METHODS:
        raise InvalidParams(f"unknown method {method!r}")
    ctrl = ctrl or IntegratorControl()
    direction = Direction(direction)
    if start.X < 0 or start.Z < 0:
        raise InvalidParams("phase states need X >= 0 and Z >= 0")
    lx = log_coords and start.X > 0
    lz = log_coords and start.Z > 0
    y0 = np.array([math.log(start.X) if lx else start.X, start.Y, math.log(start.Z) if lz else start.Z])
    ts, ys, ds, status, wt = _run(K.PHASE, p, eta0, y0, int(direction), ctrl, watch, lx, lz, method)
    raw_x = ys[:, 0].copy()
    if lx:
        ys[:, 0] = np.exp(ys[:, 0])
        ds[:, 0] *= ys[:, 0]
    if lz:
        ys[:, 2] = np.exp(ys[:, 2])
        ds[:, 2] *= ys[:, 2]
    kind = _status_kind(status, wt, K.PHASE)
    X, Y, Z = (float(c) for c in ys[-1])
    ev = Event(kind, float(ts[-1]), (X, Y, Z), wt)
    traj = Trajectory("phase", p, ts, ys, ds, ev, log_x=raw_x if lx else None)
    cols = traj.profile_columns()
    ev.flux = float(cols["flux"][-1]) if Z > 0 else math.nan
    return traj


def integrate_reduced(p: Params, start: ReducedState, ctrl: IntegratorControl | None = None,
                      watch=(), direction=Direction.Forward) -> Trajectory:
    ctrl = ctrl or IntegratorControl()
    y0 = np.array([start.X, start.Y, start.W])
    ts, ys, ds, status, wt = _run(K.REDUCED, p, 0.0, y0, int(Direction(direction)), ctrl, watch)
    ev = Event(_status_kind(status, wt, K.REDUCED), float(ts[-1]), tuple(map(float, ys[-1])), wt)
    return Trajectory("reduced", p, ts, ys, ds, ev)


def integrate_center_flow(p: Params, X: float, W: float, eta_end: float,
                          ctrl: IntegratorControl | None = None, bound: float | None = None) -> Trajectory:
    """Integrate the center-manifold flow in (X, W) up to eta_end or |X|, |W| > bound."""
    ctrl = ctrl or IntegratorControl()
    b = ctrl.bound_huge if bound is None else bound
    hdir = 1 if eta_end >= 0 else -1
    watch = [
        Watch(EventKind.ReachedXiMax, "eta", eta_end, hdir),
        Watch(EventKind.VDiverges, "X", b, +1),
        Watch(EventKind.VDiverges, "W", b, +1),
    ]
    ts, ys, ds, status, wt = _run(K.CENTER, p, 0.0, np.array([X, W]), hdir, ctrl, watch)
    ev = Event(_status_kind(status, wt, K.CENTER), float(ts[-1]), tuple(map(float, ys[-1])), wt)
    return Trajectory("center", p, ts, ys, ds, ev)
