"""Classifiers for computed profiles, barrier-surface formulas and the sigma scan."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynsys import PhaseState, ProfileState, phase_rhs, profile_to_phase
from .errors import InvalidParams, WindowTooShort
from .integrate import Trajectory
from .model import Params, PointTag, critical_point, sigma_star, tail_residual_log
from .shooting import (
    OutcomeKind,
    ShootingControl,
    as_shooting_control,
    classify_c_intervals,
    find_good_profile,
    find_interface_c,
    parallel_map,
)

MIN_WINDOW_SAMPLES = 8
FIT_SAMPLES = 64
LAW_TOL = 0.05
SEPARATION_TOL = 0.10


# ---------------------------------------------------------------------------
# origin and tail fits
# ---------------------------------------------------------------------------

class Law(str, Enum):
    TwoOverM1 = "TwoOverM1"
    SigmaPlus2OverM1 = "SigmaPlus2OverM1"
    OneOverM = "OneOverM"
    Constant = "Constant"


class BlowupCharacter(str, Enum):
    Global = "Global"
    AtInfinity = "AtInfinity"
    Unknown = "Unknown"


def law_exponents(p: Params) -> dict:
    m, s = p.m, p.sigma
    return {
        Law.TwoOverM1: 2.0 / (m - 1.0),
        Law.SigmaPlus2OverM1: (s + 2.0) / (m - 1.0),
        Law.OneOverM: 1.0 / m,
        Law.Constant: 0.0,
    }


@dataclass
class OriginFit:
    exponent: float
    coefficient: float
    rms_residual: float
    matched_law: Law | None
    window: tuple = (math.nan, math.nan)
    unresolvable: bool = False


def _window_samples(traj: Trajectory, window) -> np.ndarray:
    a, b = map(float, window)
    if not (0 < a < b):
        raise InvalidParams(f"need 0 < xi_a < xi_b, got {window!r}")
    xi = traj.profile_columns()["xi"]
    lo, hi = float(np.min(xi)), float(np.max(xi))
    if a < lo * (1 - 1e-12) or b > hi * (1 + 1e-12):
        raise InvalidParams(f"window {window!r} outside trajectory range [{lo}, {hi}]")
    n = int(np.sum((xi >= a) & (xi <= b)))
    if n < MIN_WINDOW_SAMPLES:
        raise WindowTooShort(f"{n} samples in {window!r}, need {MIN_WINDOW_SAMPLES}")
    return np.geomspace(a, b, max(FIT_SAMPLES, n))


def match_law(p: Params, exponent: float) -> tuple[Law | None, bool]:
    """Law within LAW_TOL of the exponent; (None, True) when two candidates are too close to tell."""
    laws = law_exponents(p)
    if abs(exponent) <= LAW_TOL:
        return Law.Constant, False
    hits = [k for k, e in laws.items() if e > 0 and abs(exponent - e) <= LAW_TOL * e]
    if not hits:
        return None, False
    law = min(hits, key=lambda k: abs(exponent - laws[k]))
    e = laws[law]
    for k, other in laws.items():
        if k is not law and other > 0 and abs(other - e) <= SEPARATION_TOL * max(e, other):
            return None, True
    return law, False


def fit_origin(traj: Trajectory, p: Params, window) -> OriginFit:
    """Least-squares slope of ln f against ln xi on the window."""
    xs = _window_samples(traj, window)
    f = traj.f_at(xs)
    if np.any(f <= 0):
        raise InvalidParams("f must be positive on the fit window")
    lx, lf = np.log(xs), np.log(f)
    slope, icpt = np.polyfit(lx, lf, 1)
    rms = float(np.sqrt(np.mean((lf - (slope * lx + icpt)) ** 2)))
    law, unresolvable = match_law(p, float(slope))
    coef = float(f[0]) if law is Law.Constant else math.exp(icpt)
    return OriginFit(float(slope), coef, rms, law, (float(xs[0]), float(xs[-1])), unresolvable)


def fit_tail(traj: Trajectory, p: Params, window) -> tuple[float, float]:
    """(mean, total variation) of the tail residual over the xi-window."""
    a, b = map(float, window)
    cols = traj.profile_columns()
    sel = (cols["xi"] >= a) & (cols["xi"] <= b)
    if sel.sum() < MIN_WINDOW_SAMPLES:
        raise WindowTooShort(f"{int(sel.sum())} samples in {window!r}, need {MIN_WINDOW_SAMPLES}")
    lf = traj.log_f()[sel]
    if not np.all(np.isfinite(lf)):
        raise InvalidParams("f must be positive on the tail window")
    r = tail_residual_log(p, cols["xi"][sel], lf)
    return float(np.mean(r)), float(np.sum(np.abs(np.diff(r))))


def tail_bound_check(traj: Trajectory, p: Params, window) -> tuple[float, bool]:
    """Check f <= K xi^((sigma+2)/(m-1)) exp(-xi^sigma) on the window.

    K is read off the fit as exp(mean + variation); returns (K, holds).
    The inequality is evaluated on ln f directly so deep tails do not underflow.
    """
    ln_k, drift = fit_tail(traj, p, window)
    bound = ln_k + drift
    a, b = map(float, window)
    cols = traj.profile_columns()
    sel = (cols["xi"] >= a) & (cols["xi"] <= b)
    xi, lf = cols["xi"][sel], traj.log_f()[sel]
    rhs = bound + (p.sigma + 2.0) / (p.m - 1.0) * np.log(xi) - xi**p.sigma
    return math.exp(bound), bool(np.all(lf <= rhs + 1e-12 * np.abs(rhs)))


def blowup_character(fit: OriginFit | None) -> BlowupCharacter:
    law = fit.matched_law if fit is not None else None
    if law in (Law.Constant, Law.TwoOverM1):
        return BlowupCharacter.Global
    if law is Law.SigmaPlus2OverM1:
        return BlowupCharacter.AtInfinity
    return BlowupCharacter.Unknown


def default_origin_window(traj: Trajectory, xi_from: float | None = None, cap: float = 0.5) -> tuple:
    """Decade above the smallest trusted xi, shrunk to stay below cap * max xi.

    Widened upward when the run took too few steps there (flat profiles).
    """
    xi = traj.profile_columns()["xi"]
    lo = float(np.min(xi)) if xi_from is None else max(float(xi_from), float(np.min(xi)))
    top = cap * float(np.max(xi))
    hi = min(10.0 * lo, top)
    while np.sum((xi >= lo) & (xi <= hi)) < MIN_WINDOW_SAMPLES and hi < top:
        hi = min(2.0 * hi, top)
    if not hi > lo:
        raise WindowTooShort("no room for an origin window")
    return lo, hi


# ---------------------------------------------------------------------------
# barrier surfaces
# ---------------------------------------------------------------------------

def barrier_k1(p: Params) -> float:
    return (p.m - 1.0) ** 2 / (4.0 * (p.sigma + 2.0) ** 2)


def flow_on_Y_plane(p: Params, y0: float, X: float, Z: float) -> float:
    """dY on the plane {Y = y0}; its sign is the crossing direction."""
    return -y0 * y0 - p.beta / p.alpha * y0 + X - X * y0 - X * Z


def hyperbola_normal_flow(p: Params, X, Y, Z):
    """Field . (Z, 0, X) on {XZ = k1}."""
    return X * Z * ((p.m - 1.0) * Y + (p.sigma - 2.0) * X)


def y_plane_threshold(p: Params, X: float) -> float:
    """Z below which the flow crosses {Y = -beta/(2 alpha)} upward."""
    return p.beta / (2.0 * p.alpha) + 1.0 + barrier_k1(p) / X


def slanted_plane_flow(p: Params, X: float, Y: float) -> float:
    """Field . (0, 1, 1/(1+sigma)) on {Y + Z/(1+sigma) = 1}, from the vector field."""
    Z = (1.0 + p.sigma) * (1.0 - Y)
    _, dY, dZ = phase_rhs(p, PhaseState(X, Y, Z))
    return dY + dZ / (1.0 + p.sigma)


def region_interm4_contains(p: Params, s: PhaseState) -> bool:
    """0 < X < X(P2), 0 < Y < Y(P2), Y + Z/(1+sigma) <= 1."""
    x2, y2, _ = critical_point(p, PointTag.P2).coords
    return bool(0.0 < s.X < x2 and 0.0 < s.Y < y2 and s.Y + s.Z / (1.0 + p.sigma) <= 1.0)


def crossing_bound_xz(p: Params) -> float:
    """Upper bound (1+sigma) X(P2) for XZ where the P2 orbit meets {Y=0}."""
    x2 = critical_point(p, PointTag.P2).coords[0]
    return (1.0 + p.sigma) * x2


def _positive_root(poly, target: float) -> float:
    """Safeguarded Newton for the root of increasing poly(x) - target on x > 0."""
    lo, hi = 0.0, 1.0
    while poly(hi)[0] < target:
        hi *= 2.0
    x = 0.5 * (lo + hi)
    for _ in range(200):
        val, der = poly(x)
        g = val - target
        if g > 0:
            hi = x
        else:
            lo = x
        if abs(g) <= 1e-14 * max(1.0, target):
            break
        nx = x - g / der if der > 0 else math.nan
        x = nx if lo < nx < hi else 0.5 * (lo + hi)
    return x


def _cubic(x: float) -> tuple[float, float]:
    return x * (x + 1.0) * (x + 2.0), 3.0 * x * x + 6.0 * x + 2.0


def sigma0_cubic_root(m: float) -> float:
    """Positive root of x(x+1)(x+2) = m+1."""
    if not m > 1:
        raise InvalidParams(f"m must be > 1, got {m!r}")
    return _positive_root(_cubic, m + 1.0)


def sigma0_barrier_root(m: float) -> float:
    """Positive root of 2x(x+1)(x+2) = m+1, where (1+sigma) X(P2) = k1."""
    if not m > 1:
        raise InvalidParams(f"m must be > 1, got {m!r}")
    return _positive_root(_cubic, 0.5 * (m + 1.0))


# ---------------------------------------------------------------------------
# tangency with {Y = y0} for large sigma
# ---------------------------------------------------------------------------

    """Closed form of Y'' at a tangency with {Y = y0}; tangency_curvature_direct differentiates the flow instead."""
    """Closed form of Y'' at a tangency with {Y = y0} (closed form; see tangency_curvature_direct for the direct one)."""
    m, s = p.m, p.sigma
    return (s * X * X * (y0 - 1.0) + (m - 1.0) * y0**3
            + ((s - 2.0) * X * y0 * (m - 1.0 + (s + 2.0) * y0) + m * (m - 2.0) * y0 * y0 + y0) / (s + 2.0))


def tangency_curvature_direct(p: Params, y0: float, X: float) -> float:
    """Y'' from differentiating the flow, with Z on the hyperbola where Y' = 0."""
    if not X > 0:
        raise InvalidParams("X must be > 0")
    m, s = p.m, p.sigma
    Z = (X - X * y0 - y0 * y0 - p.beta / p.alpha * y0) / X
    g = (m - 1.0) * y0 - 2.0 * X
    return X * g * (1.0 - y0) - X * Z * g - s * X * X * Z


def tangency_admissible_interval(m: float) -> tuple[float, float]:
    """Open y0-interval on which every term of the closed form is non-positive."""
    ss = sigma_star(m)
    if m <= 2.0:
        return -(m - 1.0) / (ss + 2.0), 0.0
    return -1.0 / (m * (m - 2.0)), 0.0


# ---------------------------------------------------------------------------
# the {Z = 0} plane
# ---------------------------------------------------------------------------

def zplane_line_flow(p: Params, X):
    """(m-1) dY on the line (m-1)Y = 2X inside {Z = 0}."""
    X = np.asarray(X, dtype=float)
    Y = 2.0 * X / (p.m - 1.0)
    return (p.m - 1.0) * (-Y * Y - p.beta / p.alpha * Y + X - X * Y)


def zplane_line_flow_closed(p: Params, X):
    x2 = critical_point(p, PointTag.P2).coords[0]
    X = np.asarray(X, dtype=float)
    return 2.0 * (p.m + 1.0) / (p.m - 1.0) * X * (x2 - X)


# ---------------------------------------------------------------------------
# sigma scan
# ---------------------------------------------------------------------------

@dataclass
class RegimeReport:
    sigma: float
    all_tail: bool
    has_interface_from_origin: bool
    has_transversal: bool
    good_profile_origin_value: float
    blowup_character: BlowupCharacter
    character_source: str = ""
    origin_fit: OriginFit | None = None
    eta_star: float = math.nan
    c_star: float = math.nan
    inconclusive_rate: float = 0.0
    below_proved_all_tail: bool = False
    sigma0: float = math.nan
    sigma0_barrier: float = math.nan
    sigma_star: float = math.nan
    notes: list = field(default_factory=list)


def default_c_grid() -> np.ndarray:
    return np.logspace(-2.0, 2.0, 25)


def backward_origin_window(out) -> tuple:
    """Trusted decade of a backward good profile (a BackwardOutcome).

    Past the closest approach to P2 or P0 the run is amplified roundoff, so
    the window starts there; otherwise at the smallest xi reached.
    """
    traj = out.trajectory
    near = out.meta.get("origin_point")
    cols = traj.profile_columns()
    if not near:
        return default_origin_window(traj)
    p = traj.params
    target = critical_point(p, PointTag(near)).coords
    xi, v, w = cols["xi"], cols["v"], cols["w"]
    ok = v > 0
    ph = [profile_to_phase(p, ProfileState(a, b, c)) for a, b, c in zip(xi[ok], v[ok], w[ok])]
    d = [math.dist((s.X, s.Y, s.Z), target) for s in ph]
    return default_origin_window(traj, xi_from=float(xi[ok][int(np.argmin(d))]))


def _one_sigma(m: float, sigma: float, ctrl: ShootingControl, c_grid) -> RegimeReport:
    p = Params(m, sigma)
    rep = RegimeReport(sigma, False, False, False, 0.0, BlowupCharacter.Unknown)
    rep.sigma0 = sigma0_cubic_root(m)
    rep.sigma0_barrier = sigma0_barrier_root(m)
    rep.sigma_star = sigma_star(m)
    rep.below_proved_all_tail = sigma < min(rep.sigma0, 2.0)

    kc = classify_c_intervals(p, c_grid, ctrl)
    rep.inconclusive_rate = kc.inconclusive_rate
    rep.all_tail = all(k is OutcomeKind.Tail for k in kc.kinds)
    rep.has_transversal = any(k is OutcomeKind.TransversalZero for k in kc.kinds)
    interface = None
    if any(k is OutcomeKind.Interface for k in kc.kinds):
        interface = next(o for o in kc.outcomes if o.kind is OutcomeKind.Interface)
        rep.c_star = interface.c
    elif kc.brackets:
        try:
            rep.c_star, interface = find_interface_c(p, kc.brackets[0], ctrl)
        except Exception as ex:  # recorded, never fatal
            rep.notes.append(f"find_interface_c: {ex}")
    if interface is not None and interface.kind is OutcomeKind.Interface:
        rep.has_interface_from_origin = True
    else:
        interface = None

    good = None
    try:
        rep.eta_star, good = find_good_profile(p, None, ctrl)
    except Exception as ex:
        rep.notes.append(f"find_good_profile: {ex}")
    if good is not None and good.kind is OutcomeKind.GoodCandidate:
        rep.good_profile_origin_value = float(good.A) if math.isfinite(good.A) else 0.0

    # P0-type good profiles are only reproducible forward; everything else
    # is fitted on the backward run
    fit = None
    try:
        if good is not None and good.kind is OutcomeKind.GoodCandidate and good.meta.get("origin_point") != "P0":
            fit = fit_origin(good.trajectory, p, backward_origin_window(good))
            rep.character_source = "backward"
        elif interface is not None:
            fit = fit_origin(interface.trajectory, p, default_origin_window(interface.trajectory))
            rep.character_source = "forward"
    except Exception as ex:
        rep.notes.append(f"fit_origin: {ex}")
    rep.origin_fit = fit
    rep.blowup_character = blowup_character(fit)
    if fit is not None and fit.unresolvable:
        rep.notes.append("origin laws too close to separate by fit")
    return rep


def regime_scan(m: float, sigma_grid, ctrl=None, c_grid=None) -> list:
    ctrl = as_shooting_control(ctrl)
    grid = [float(s) for s in sigma_grid]
    if not grid or any(s <= 0 for s in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParams("sigma grid must be positive and strictly increasing")
    c_grid = default_c_grid() if c_grid is None else c_grid
    inner = ctrl.with_(workers=1)
    return parallel_map(lambda s: _one_sigma(m, s, inner, c_grid), grid, ctrl.workers)


def first_transversal_sigma(reports) -> float:
    """Smallest scanned sigma with a transversal zero among the origin shots."""
    for r in reports:
        if r.has_transversal:
            return r.sigma
    return math.nan
