"""Closed-form quantities for self-similar profiles of u_t = (u^m)_xx + |x|^sigma u.

The profile ansatz is u = (T-t)^(-alpha) f(xi) with xi = |x| (T-t)^beta, and f
solves (f^m)'' - alpha f + beta xi f' + xi^sigma f = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParams, OutsideSupport, UnsupportedPoint


@dataclass(frozen=True)
class Params:
    m: float
    sigma: float

    def __post_init__(self):
        m, s = float(self.m), float(self.sigma)
        if not (math.isfinite(m) and m > 1.0):
            raise InvalidParams(f"m must be > 1, got {self.m!r}")
        if not (math.isfinite(s) and s > 0.0):
            raise InvalidParams(f"sigma must be > 0, got {self.sigma!r}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "sigma", s)

    @property
    def alpha(self) -> float:
        return (self.sigma + 2.0) / (self.sigma * (self.m - 1.0))

    @property
    def beta(self) -> float:
        return 1.0 / self.sigma


@dataclass(frozen=True)
class Exponents:
    alpha: float
    beta: float


def exponents(p: Params) -> Exponents:
    return Exponents(p.alpha, p.beta)


def _check_m(m: float) -> float:
    m = float(m)
    if not (math.isfinite(m) and m > 1.0):
        raise InvalidParams(f"m must be > 1, got {m!r}")
    return m


def sigma_star(m: float) -> float:
    """Weight exponent at which the explicit compactly supported profile exists."""
    m = _check_m(m)
    return math.sqrt(2.0 * (m + 1.0))


# ---------------------------------------------------------------------------
# explicit profile
# ---------------------------------------------------------------------------

def explicit_coefficients(m: float) -> tuple[float, float]:
    """Return (a, B) with f_*^(m-1) = xi^2 (a - B xi^sigma_*)_+."""
    m = _check_m(m)
    ss = sigma_star(m)
    a = (m - 1.0) / (2.0 * m * (m + 1.0))
    b = (m - 1.0) ** 2 / (m * (ss + 2.0) * (m * ss + m + 1.0))
    return a, b


def explicit_pressure(m: float, xi):
    """v_* = f_*^(m-1) and its first two derivatives, vectorized over xi."""
    a, b = explicit_coefficients(m)
    ss = sigma_star(m)
    xi = np.asarray(xi, dtype=float)
    inside = (a - b * xi**ss) > 0.0
    v = np.where(inside, xi**2 * (a - b * xi**ss), 0.0)
    dv = np.where(inside, 2.0 * a * xi - (ss + 2.0) * b * xi ** (ss + 1.0), 0.0)
    d2v = np.where(inside, 2.0 * a - (ss + 2.0) * (ss + 1.0) * b * xi**ss, 0.0)
    return v, dv, d2v


def explicit_profile(m: float, xi):
    m = _check_m(m)
    a, b = explicit_coefficients(m)
    ss = sigma_star(m)
    x = np.asarray(xi, dtype=float)
    if np.any(x < 0):
        raise InvalidParams("xi must be >= 0")
    inner = np.clip(a - b * x**ss, 0.0, None)
    out = x ** (2.0 / (m - 1.0)) * inner ** (1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


def explicit_support_edge(m: float) -> float:
    m = _check_m(m)
    a, b = explicit_coefficients(m)
    ss = sigma_star(m)
    xi1 = (a / b) ** (1.0 / ss)
    # same point read off the phase-space line ending at P1^gamma
    alpha = (ss + 2.0) / (ss * (m - 1.0))
    xi1_line = (alpha * explicit_gamma(m)) ** (1.0 / ss)
    if abs(xi1 - xi1_line) > 1e-10 * xi1:
        raise AssertionError(f"support edge mismatch: {xi1} vs {xi1_line}")
    return xi1


def explicit_gamma(m: float) -> float:
    """Z-coordinate of the interface point reached by the explicit line."""
    m = _check_m(m)
    ss = sigma_star(m)
    return (m * ss + m + 1.0) / ss


def psi_coefficient(p: Params) -> float:
    m, s = p.m, p.sigma
    d = (m - 1.0) * s**2 + (3.0 * m + 1.0) * s + 4.0 * (m + 1.0)
    return ((m - 1.0) ** 2 / d) ** (1.0 / (m - 1.0))


# ---------------------------------------------------------------------------
# critical points and linearizations
# ---------------------------------------------------------------------------

class PointTag(str, Enum):
    P0 = "P0"
    P0Gamma = "P0Gamma"
    P1Gamma = "P1Gamma"
    P2 = "P2"
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    Q5 = "Q5"


@dataclass(frozen=True)
class CriticalPoint:
    tag: PointTag
    coords: tuple
    gamma: float | None = None

    @property
    def at_infinity(self) -> bool:
        return self.tag.value.startswith("Q")


def critical_point(p: Params, tag, gamma: float | None = None) -> CriticalPoint:
    tag = PointTag(tag)
    a, b, m = p.alpha, p.beta, p.m
    if tag in (PointTag.P0Gamma, PointTag.P1Gamma):
        if gamma is None or not (math.isfinite(gamma) and gamma > 0):
            raise InvalidParams(f"{tag.value} needs gamma > 0, got {gamma!r}")
        gamma = float(gamma)
    else:
        gamma = None
    if tag is PointTag.P0:
        c = (0.0, 0.0, 0.0)
    elif tag is PointTag.P0Gamma:
        c = (0.0, 0.0, gamma)
    elif tag is PointTag.P1Gamma:
        c = (0.0, -b / a, gamma)
    elif tag is PointTag.P2:
        c = ((m - 1.0) / (2.0 * (m + 1.0) * a), 1.0 / ((m + 1.0) * a), 0.0)
    elif tag is PointTag.Q1:
        c = (1.0, 0.0, 0.0, 0.0)
    elif tag is PointTag.Q2:
        c = (0.0, 1.0, 0.0, 0.0)
    elif tag is PointTag.Q3:
        c = (0.0, -1.0, 0.0, 0.0)
    elif tag is PointTag.Q4:
        c = (0.0, 0.0, 1.0, 0.0)
    else:
        r = math.sqrt(1.0 + m * m)
        c = (m / r, 1.0 / r, 0.0, 0.0)
    return CriticalPoint(tag, c, gamma)


@dataclass(frozen=True)
class Linearization:
    point: CriticalPoint
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns paired with eigenvalues


def p1_eigenvector(p: Params, gamma: float) -> np.ndarray:
    """Eigenvector of M(P1^gamma) for the eigenvalue -(m-1) beta/alpha."""
    a, b, m, s = p.alpha, p.beta, p.m, p.sigma
    return np.array([-1.0, (a * (1.0 - gamma) + b) / (m * b), a * s * gamma / ((m - 1.0) * b)])


def p2_unstable_vector(p: Params) -> np.ndarray:
    """Eigenvector of M(P2) for lambda_3, normalized to unit Z-component."""
    m, s = p.m, p.sigma
    d = (m - 1.0) * s**2 + (3.0 * m + 1.0) * s + 4.0 * (m + 1.0)
    return np.array([-(m - 1.0) ** 2 / d, -(m - 1.0) * (s + 2.0) / d, 1.0])


def linearization_matrix(p: Params, point: CriticalPoint) -> np.ndarray:
    a, b, m, s = p.alpha, p.beta, p.m, p.sigma
    tag = point.tag
    if tag is PointTag.P0:
        return np.array([[0.0, 0.0, 0.0], [1.0, -b / a, 0.0], [0.0, 0.0, 0.0]])
    if tag is PointTag.P1Gamma:
        g = point.gamma
        return np.array([
            [-(m - 1.0) * b / a, 0.0, 0.0],
            [1.0 + b / a - g, b / a, 0.0],
            [s * g, 0.0, 0.0],
        ])
    if tag is PointTag.P2:
        k = 1.0 / (2.0 * (m + 1.0) * a)
        return k * np.array([
            [-2.0 * (m - 1.0), (m - 1.0) ** 2, 0.0],
            [2.0 * (m + 1.0) * a - 2.0, -2.0 * b * (m + 1.0) - (m + 3.0), -(m - 1.0)],
            [0.0, 0.0, s * (m - 1.0)],
        ])
    if tag is PointTag.P0Gamma:
        g = point.gamma
        return np.array([[0.0, 0.0, 0.0], [1.0 - g, -b / a, 0.0], [s * g, 0.0, 0.0]])
    if tag is PointTag.Q5:
        return np.array([
            [1.0, 1.0, b / (m * a) - 1.0],
            [0.0, -(m * s + m + 1.0) / m, 0.0],
            [0.0, 0.0, -(m + 1.0) / m],
        ])
    raise UnsupportedPoint(f"no linearization at {tag.value}")


def linearize(p: Params, point: CriticalPoint) -> Linearization:
    mat = linearization_matrix(p, point)
    vals, vecs = np.linalg.eig(mat)
    vals = vals.astype(complex)
    vecs = vecs.astype(complex)
    if point.tag is PointTag.P1Gamma:
        lam1 = -(p.m - 1.0) * p.beta / p.alpha
        i = int(np.argmin(np.abs(vals - lam1)))
        vals[i] = lam1
        vecs[:, i] = p1_eigenvector(p, point.gamma)
    elif point.tag is PointTag.P2:
        lam3 = p.sigma * (p.m - 1.0) / (2.0 * (p.m + 1.0) * p.alpha)
        i = int(np.argmin(np.abs(vals - lam3)))
        vals[i] = lam3
        vecs[:, i] = p2_unstable_vector(p)
    return Linearization(point, mat, vals, vecs)


# ---------------------------------------------------------------------------
# local series
# ---------------------------------------------------------------------------

class Anchor(str, Enum):
    OriginP0 = "OriginP0"
    OriginP2 = "OriginP2"
    InterfaceP1 = "InterfaceP1"
    TailQ4 = "TailQ4"
    OriginQ5 = "OriginQ5"


@dataclass(frozen=True)
class LocalSeries:
    anchor: Anchor
    params: Params
    coefficient: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "anchor", Anchor(self.anchor))
        if self.anchor is not Anchor.OriginP2:
            c = float(self.coefficient)
            if not (math.isfinite(c) and c > 0):
                raise InvalidParams(f"{self.anchor.value} needs a positive coefficient")

    @property
    def interface_point(self) -> float:
        p = self.params
        return (p.alpha * self.coefficient) ** (1.0 / p.sigma)


def interface_constant(p: Params, gamma: float) -> float:
    """K(gamma) in v ~ K(gamma) - (m-1) xi^2 / (2 m sigma)."""
    return (p.m - 1.0) * (p.alpha * gamma) ** (2.0 / p.sigma) / (2.0 * p.m * p.sigma)


def interface_series_coefficients(p: Params, gamma: float, order: int) -> np.ndarray:
    """Taylor coefficients a_k of v = sum a_k (xi0 - xi)^k at an interface xi0.

    Obtained by matching powers in m(m-1) v v'' = (m-1)^2 v (alpha - xi^sigma)
    - (m-1) beta xi v' - m v'^2; the k-th coefficient enters linearly.
    """
    m, s, al, be = p.m, p.sigma, p.alpha, p.beta
    eta = (al * gamma) ** (1.0 / s)
    n_max = max(int(order), 1)
    g = np.zeros(n_max + 2)  # alpha - xi^sigma in powers of delta
    c = eta**s
    g[0] = al - c
    for j in range(1, n_max + 2):
        c *= (s - j + 1.0) / j * (-1.0 / eta)
        g[j] = -c
    a = np.zeros(n_max + 2)
    a[1] = (m - 1.0) * be * eta / m
    for n in range(1, n_max):
        vd = np.array([(k + 1) * a[k + 1] for k in range(n + 1)])
        vdd = np.array([(k + 2) * (k + 1) * a[k + 2] for k in range(n)])
        pn = sum(a[i] * vdd[n - i] for i in range(1, n + 1))
        qn = sum(vd[i] * vd[n - i] for i in range(n + 1))
        rn = sum(a[i] * g[n - i] for i in range(1, n + 1))
        sn = eta * vd[n] - n * a[n]
        e = m * (m - 1.0) * pn - (m - 1.0) ** 2 * rn - (m - 1.0) * be * sn + m * qn
        a[n + 1] = -e / ((n + 1) * m * a[1] * ((m - 1.0) * n + 1.0))
    return a[: n_max + 1]


def local_series_eval(s: LocalSeries, xi: float, order: int | None = None) -> tuple[float, float]:
    """(v, w) from the truncated series.

    `order` only affects InterfaceP1: None gives the leading-order form
    v = (m-1)(xi0^2 - xi^2)/(2 m sigma); an integer uses that many Taylor terms.
    """
    p = s.params
    m, sg, a = p.m, p.sigma, p.alpha
    xi = float(xi)
    c = s.coefficient
    if s.anchor is Anchor.OriginP0:
        cm = c ** (m - 1.0)
        return cm * xi ** (sg + 2.0), (sg + 2.0) * cm * xi ** (sg + 1.0)
    if s.anchor is Anchor.OriginP2:
        lead = (m - 1.0) / (2.0 * m * (m + 1.0))
        corr = psi_coefficient(p) ** (m - 1.0) / m
        v = lead * xi**2 - corr * xi ** (sg + 2.0)
        w = 2.0 * lead * xi - (sg + 2.0) * corr * xi ** (sg + 1.0)
        return v, w
    if s.anchor is Anchor.InterfaceP1:
        xi0 = (a * c) ** (1.0 / sg)
        if xi > xi0:
            raise OutsideSupport(f"xi={xi} beyond interface {xi0}")
        if order is not None:
            d = xi0 - xi
            co = interface_series_coefficients(p, c, order)
            k = np.arange(len(co))
            v = float(np.sum(co * d**k))
            w = -float(np.sum(k[1:] * co[1:] * d ** (k[1:] - 1)))
            return v, w
        # factored so that v is exactly 0 at xi = xi0
        v = (m - 1.0) * (xi0 - xi) * (xi0 + xi) / (2.0 * m * sg)
        return v, -(m - 1.0) * xi / (m * sg)
    if s.anchor is Anchor.TailQ4:
        e = (sg + 2.0) / (m - 1.0)
        lnv = (m - 1.0) * (math.log(c) + e * math.log(xi) - xi**sg)
        v = math.exp(lnv)
        return v, v * (m - 1.0) * (e / xi - sg * xi ** (sg - 1.0))
    # OriginQ5: f ~ K xi^(1/m)
    cm = c ** (m - 1.0)
    return cm * xi ** ((m - 1.0) / m), ((m - 1.0) / m) * cm * xi ** (-1.0 / m)


def origin_coefficient_to_k(p: Params, c: float) -> float:
    if not (math.isfinite(c) and c > 0):
        raise InvalidParams(f"c must be > 0, got {c!r}")
    return 1.0 / (p.m * c ** (p.m - 1.0))


def k_to_origin_coefficient(p: Params, k: float) -> float:
    return (1.0 / (p.m * k)) ** (1.0 / (p.m - 1.0))


# ---------------------------------------------------------------------------
# tail envelope and the self-similar solution
# ---------------------------------------------------------------------------

def tail_residual(p: Params, xi, f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise InvalidParams("tail residual needs f > 0")
    return tail_residual_log(p, xi, np.log(f))


def tail_residual_log(p: Params, xi, log_f):
    xi = np.asarray(xi, dtype=float)
    r = np.asarray(log_f) + xi**p.sigma - (p.sigma + 2.0) / (p.m - 1.0) * np.log(xi)
    return float(r) if r.ndim == 0 else r


def selfsimilar_eval(profile, T: float, x: float, t: float) -> float:
    """u(x, t) = (T-t)^(-alpha) f(|x| (T-t)^beta) on a computed profile.

    `profile` needs `params` and `f_at(xi)` (a Trajectory does).
    """
    if not t < T:
        raise InvalidParams("need t < T")
    p = profile.params
    tau = T - t
    xi = abs(x) * tau**p.beta
    return tau ** (-p.alpha) * float(profile.f_at(xi))


def explicit_selfsimilar(m: float, T: float, x, t: float):
    """Explicit self-similar solution built on f_*."""
    if not t < T:
        raise InvalidParams("need t < T")
    ss = sigma_star(m)
    a = (ss + 2.0) / (ss * (m - 1.0))
    tau = T - t
    return tau ** (-a) * explicit_profile(m, np.abs(np.asarray(x, dtype=float)) * tau ** (1.0 / ss))
