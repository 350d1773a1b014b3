"""Vector fields and coordinate changes for the profile equation.

Pressure form: v = f^(m-1), w = v'. Phase form: X = (m/alpha) v / xi^2,
Y = (m / (alpha (m-1))) w / xi, Z = xi^sigma / alpha, with a new time eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateState, InvalidParams
from .model import Params, explicit_gamma, sigma_star


@dataclass(frozen=True)
class ProfileState:
    xi: float
    v: float
    w: float

    def f(self, p: Params) -> float:
        return self.v ** (1.0 / (p.m - 1.0))

    def fprime(self, p: Params) -> float:
        return self.v ** ((2.0 - p.m) / (p.m - 1.0)) * self.w / (p.m - 1.0)

    def flux(self, p: Params) -> float:
        """(f^m)'."""
        return p.m / (p.m - 1.0) * self.v ** (1.0 / (p.m - 1.0)) * self.w


@dataclass(frozen=True)
class PhaseState:
    X: float
    Y: float
    Z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z])


@dataclass(frozen=True)
class ReducedState:
    X: float
    Y: float
    W: float


def profile_rhs(p: Params, s: ProfileState) -> tuple[float, float]:
    if not s.v > 0.0:
        raise DegenerateState(f"profile field is singular at v={s.v}")
    m, a, b = p.m, p.alpha, p.beta
    xi, v, w = s.xi, s.v, s.w
    dw = (m - 1.0) / m * (a - xi**p.sigma) - b * xi * w / (m * v) - w * w / ((m - 1.0) * v)
    return w, dw


def profile_residual(p: Params, xi, f, fprime, fm_second):
    """Residual of (f^m)'' - alpha f + beta xi f' + xi^sigma f."""
    xi = np.asarray(xi, dtype=float)
    return fm_second - p.alpha * f + p.beta * xi * fprime + xi**p.sigma * f


def pressure_to_f_derivatives(p: Params, v, dv, d2v):
    """Map (v, v', v'') to (f, f', (f^m)'')."""
    m = p.m
    v = np.asarray(v, dtype=float)
    f = v ** (1.0 / (m - 1.0))
    fp = v ** ((2.0 - m) / (m - 1.0)) * dv / (m - 1.0)
    fmpp = m / (m - 1.0) * (v ** (1.0 / (m - 1.0)) * d2v + v ** ((2.0 - m) / (m - 1.0)) * dv**2 / (m - 1.0))
    return f, fp, fmpp


def phase_rhs(p: Params, s: PhaseState) -> tuple[float, float, float]:
    m, ba = p.m, p.beta / p.alpha
    X, Y, Z = s.X, s.Y, s.Z
    return (
        X * ((m - 1.0) * Y - 2.0 * X),
        -Y * Y - ba * Y + X - X * Y - X * Z,
        p.sigma * Z * X,
    )


def reduced_rhs(p: Params, s: ReducedState) -> tuple[float, float, float]:
    m, ba = p.m, p.beta / p.alpha
    X, Y, W = s.X, s.Y, s.W
    return (
        X * ((m - 1.0) * Y - 2.0 * X),
        -Y * Y - ba * Y + X - X * Y - W,
        W * ((m - 1.0) * Y + (p.sigma - 2.0) * X),
    )


def center_flow_rhs(p: Params, X: float, W: float) -> tuple[float, float]:
    s = p.sigma
    return X * (s * X - (s + 2.0) * W), W * (2.0 * s * X - (s + 2.0) * W)


def center_flow_slope(p: Params, k: float) -> float:
    """dW/dX along the center flow on the ray W = k X."""
    s = p.sigma
    return (2.0 * s * k - (s + 2.0) * k * k) / (s - (s + 2.0) * k)


def center_flow_integral(p: Params, X: float, W: float) -> float:
    if not (X > 0 and W > 0):
        raise InvalidParams("center-flow integral needs X > 0 and W > 0")
    k = W / X
    try:
        return X / k * math.exp((p.sigma + 2.0) / p.sigma * k)
    except OverflowError:
        return math.inf


def profile_to_phase(p: Params, s: ProfileState) -> PhaseState:
    if not s.xi > 0.0:
        raise InvalidParams("xi must be > 0")
    m, a = p.m, p.alpha
    return PhaseState(
        m / a * s.v / s.xi**2,
        m / (a * (m - 1.0)) * s.w / s.xi,
        s.xi**p.sigma / a,
    )


def phase_to_profile(p: Params, s: PhaseState) -> ProfileState:
    m, a = p.m, p.alpha
    xi = (a * s.Z) ** (1.0 / p.sigma)
    return ProfileState(xi, a * s.X * xi * xi / m, a * (m - 1.0) * xi * s.Y / m)


def phase_flux(p: Params, X, Y, Z):
    """(f^m)' written in phase coordinates: alpha xi Y v^(1/(m-1))."""
    m, a = p.m, p.alpha
    xi = (a * np.asarray(Z, dtype=float)) ** (1.0 / p.sigma)
    v = a * np.asarray(X) * xi * xi / m
    return a * xi * np.asarray(Y) * v ** (1.0 / (m - 1.0))


def explicit_line(m: float, X):
    """Image of the explicit profile in phase space at sigma = sigma_*: (Y(X), Z(X))."""
    ss = sigma_star(m)
    X = np.asarray(X, dtype=float)
    g = explicit_gamma(m)
    y = -(m - 1.0) / (ss + 2.0) + (ss + 2.0) / (m - 1.0) * X
    z = g - (m * ss + m + 1.0) * (ss + 2.0) / (m - 1.0) ** 2 * X
    return y, z


def explicit_line_direction(m: float) -> np.ndarray:
    ss = sigma_star(m)
    d = np.array([1.0, (ss + 2.0) / (m - 1.0), -(m * ss + m + 1.0) * (ss + 2.0) / (m - 1.0) ** 2])
    return d / np.linalg.norm(d)


def distance_to_explicit_line(m: float, X, Y, Z):
    """Euclidean distance from phase points to the explicit line."""
    d = explicit_line_direction(m)
    y0, z0 = explicit_line(m, 0.0)
    q = np.stack([np.asarray(X, float), np.asarray(Y, float) - y0, np.asarray(Z, float) - z0], axis=-1)
    along = q @ d
    return np.linalg.norm(q - along[..., None] * d, axis=-1)
