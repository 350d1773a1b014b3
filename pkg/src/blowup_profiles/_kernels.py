"""Dormand-Prince 5(4) stepping kernels.

The same source runs compiled (numba, nogil) or as plain Python. Set
BLOWUP_PROFILES_PURE=1 to force the plain path; it is also used when numba
is not importable.
"""

import math
import os

import numpy as np

PURE_FLAG = "BLOWUP_PROFILES_PURE"

USE_NUMBA = os.environ.get(PURE_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")
if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


# systems
PROFILE, PHASE, REDUCED, CENTER = 0, 1, 2, 3
DIMS = (2, 3, 3, 2)
NQ = 6

# exit status
ST_EVENT, ST_BUDGET, ST_SINGULAR, ST_NONFINITE = 0, 1, 2, 3

# event rows: [kind, comp, value, direction, c0, c1, c2, extra]
EV_CROSS, EV_NEAR, EV_INTERFACE = 0, 1, 2
EV_WIDTH = 8

# steppers
DOPRI, ROS4 = 0, 1

# Dormand-Prince tableau
C2, C3, C4, C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
A21 = 0.2
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)


@jit
def rhs(sys, par, t, y, out):
    """Vector field; returns False where it is undefined or not finite.

    par = [m, sigma, alpha, beta, log_x, log_z]. With log_x (log_z) set the
    phase system carries ln X (ln Z) in place of X (Z).
    """
    m = par[0]
    s = par[1]
    a = par[2]
    b = par[3]
    if sys == 0:
        v = y[0]
        w = y[1]
        if not (v > 0.0 and t > 0.0):
            return False
        out[0] = w
        out[1] = (m - 1.0) / m * (a - t**s) - b * t * w / (m * v) - w * w / ((m - 1.0) * v)
    elif sys == 1:
        X = math.exp(y[0]) if par[4] != 0.0 else y[0]
        Y = y[1]
        Z = math.exp(y[2]) if par[5] != 0.0 else y[2]
        g = (m - 1.0) * Y - 2.0 * X
        out[0] = g if par[4] != 0.0 else X * g
        out[1] = -Y * Y - b / a * Y + X - X * Y - X * Z
        out[2] = s * X if par[5] != 0.0 else s * Z * X
    elif sys == 2:
        X = y[0]
        Y = y[1]
        W = y[2]
        out[0] = X * ((m - 1.0) * Y - 2.0 * X)
        out[1] = -Y * Y - b / a * Y + X - X * Y - W
        out[2] = W * ((m - 1.0) * Y + (s - 2.0) * X)
    else:
        X = y[0]
        W = y[1]
        out[0] = X * (s * X - (s + 2.0) * W)
        out[1] = W * (2.0 * s * X - (s + 2.0) * W)
    for i in range(y.shape[0]):
        if not math.isfinite(out[i]):
            return False
    return True


@jit
def observe(sys, par, t, y, q):
    """Physical quantities watched by events.

    profile: v, w, (f^m)', xi.  phase: X, Y, Z, v, (f^m)', xi.
    """
    m = par[0]
    s = par[1]
    a = par[2]
    for i in range(q.shape[0]):
        q[i] = 0.0
    if sys == 0:
        v = y[0]
        q[0] = v
        q[1] = y[1]
        if v > 0.0:
            q[2] = m / (m - 1.0) * v ** (1.0 / (m - 1.0)) * y[1]
        q[3] = t
    elif sys == 1:
        X = math.exp(y[0]) if par[4] != 0.0 else y[0]
        Z = math.exp(y[2]) if par[5] != 0.0 else y[2]
        q[0] = X
        q[1] = y[1]
        q[2] = Z
        xi = (a * Z) ** (1.0 / s) if Z > 0.0 else 0.0
        v = a * X * xi * xi / m
        q[3] = v
        if v > 0.0:
            q[4] = a * xi * y[1] * v ** (1.0 / (m - 1.0))
        q[5] = xi
    else:
        for i in range(y.shape[0]):
            q[i] = y[i]


@jit
def dp_step(sys, par, t, y, h, k, ytmp, ynew, yerr):
    """One step of size h (signed); k[0] must hold f(t, y)."""
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * A21 * k[0, i]
    if not rhs(sys, par, t + C2 * h, ytmp, k[1]):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (A31 * k[0, i] + A32 * k[1, i])
    if not rhs(sys, par, t + C3 * h, ytmp, k[2]):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (A41 * k[0, i] + A42 * k[1, i] + A43 * k[2, i])
    if not rhs(sys, par, t + C4 * h, ytmp, k[3]):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (A51 * k[0, i] + A52 * k[1, i] + A53 * k[2, i] + A54 * k[3, i])
    if not rhs(sys, par, t + C5 * h, ytmp, k[4]):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (A61 * k[0, i] + A62 * k[1, i] + A63 * k[2, i] + A64 * k[3, i] + A65 * k[4, i])
    if not rhs(sys, par, t + h, ytmp, k[5]):
        return False
    for i in range(n):
        ynew[i] = y[i] + h * (B1 * k[0, i] + B3 * k[2, i] + B4 * k[3, i] + B5 * k[4, i] + B6 * k[5, i])
    if not rhs(sys, par, t + h, ynew, k[6]):
        return False
    for i in range(n):
        yerr[i] = h * (E1 * k[0, i] + E3 * k[2, i] + E4 * k[3, i] + E5 * k[4, i] + E6 * k[5, i] + E7 * k[6, i])
    return True


# Rosenbrock 4(3), Shampine's parameter set (A-stable)
RGAM = 0.5
RA21 = 2.0
RA31, RA32 = 48.0 / 25.0, 6.0 / 25.0
RC21 = -8.0
RC31, RC32 = 372.0 / 25.0, 12.0 / 5.0
RC41, RC42, RC43 = -112.0 / 125.0, -54.0 / 125.0, -2.0 / 5.0
RB1, RB2, RB3, RB4 = 19.0 / 9.0, 0.5, 25.0 / 108.0, 125.0 / 108.0
RE1, RE2, RE3, RE4 = 17.0 / 54.0, 7.0 / 36.0, 0.0, 125.0 / 108.0


@jit
def jacobian(sys, par, t, y, f0, J, ytmp, ftmp):
    """df/dy; analytic for the phase system, forward differences otherwise."""
    n = y.shape[0]
    if sys == 1:
        # partials in the carried coordinates; d/d(ln X) = X d/dX, no division
        m = par[0]
        s = par[1]
        ba = par[3] / par[2]
        lx = par[4] != 0.0
        lz = par[5] != 0.0
        X = math.exp(y[0]) if lx else y[0]
        Y = y[1]
        Z = math.exp(y[2]) if lz else y[2]
        sx = X if lx else 1.0
        sz = Z if lz else 1.0
        if lx:
            J[0, 0] = -2.0 * X
            J[0, 1] = m - 1.0
        else:
            J[0, 0] = (m - 1.0) * Y - 4.0 * X
            J[0, 1] = (m - 1.0) * X
        J[0, 2] = 0.0
        J[1, 0] = (1.0 - Y - Z) * sx
        J[1, 1] = -2.0 * Y - ba - X
        J[1, 2] = -X * sz
        if lz:
            J[2, 0] = s * sx
            J[2, 1] = 0.0
            J[2, 2] = 0.0
        else:
            J[2, 0] = s * Z * sx
            J[2, 1] = 0.0
            J[2, 2] = s * X
        return True
    for j in range(n):
        for i in range(n):
            ytmp[i] = y[i]
        d = 1e-8 * max(abs(y[j]), 1e-8)
        ytmp[j] = y[j] + d
        if not rhs(sys, par, t, ytmp, ftmp):
            return False
        for i in range(n):
            J[i, j] = (ftmp[i] - f0[i]) / d
    return True


@jit
def lu_factor(a, piv):
    n = a.shape[0]
    for c in range(n):
        p = c
        for r in range(c + 1, n):
            if abs(a[r, c]) > abs(a[p, c]):
                p = r
        piv[c] = p
        if a[p, c] == 0.0:
            return False
        if p != c:
            for j in range(n):
                tmp = a[c, j]
                a[c, j] = a[p, j]
                a[p, j] = tmp
        for r in range(c + 1, n):
            a[r, c] /= a[c, c]
            for j in range(c + 1, n):
                a[r, j] -= a[r, c] * a[c, j]
    return True


@jit
def lu_solve(a, piv, b):
    n = a.shape[0]
    for c in range(n):
        p = piv[c]
        if p != c:
            tmp = b[c]
            b[c] = b[p]
            b[p] = tmp
    for r in range(n):
        for j in range(r):
            b[r] -= a[r, j] * b[j]
    for r in range(n - 1, -1, -1):
        for j in range(r + 1, n):
            b[r] -= a[r, j] * b[j]
        b[r] /= a[r, r]


@jit
def ros_step(sys, par, t, y, h, k, ytmp, ynew, yerr):
    """One linearly implicit step; k[0] must hold f(t, y). Leaves f(t+h, ynew) in k[6]."""
    n = y.shape[0]
    a = np.empty((n, n))
    piv = np.empty(n, dtype=np.int64)
    if not jacobian(sys, par, t, y, k[0], a, ytmp, k[5]):
        return False
    for i in range(n):
        for j in range(n):
            a[i, j] = -a[i, j]
        a[i, i] += 1.0 / (RGAM * h)
    if not lu_factor(a, piv):
        return False
    g1 = k[1]
    g2 = k[2]
    g3 = k[3]
    g4 = k[4]
    fs = k[5]
    for i in range(n):
        g1[i] = k[0, i]
    lu_solve(a, piv, g1)
    for i in range(n):
        ytmp[i] = y[i] + RA21 * g1[i]
    if not rhs(sys, par, t + h, ytmp, fs):
        return False
    for i in range(n):
        g2[i] = fs[i] + RC21 * g1[i] / h
    lu_solve(a, piv, g2)
    for i in range(n):
        ytmp[i] = y[i] + RA31 * g1[i] + RA32 * g2[i]
    if not rhs(sys, par, t + 0.6 * h, ytmp, fs):
        return False
    for i in range(n):
        g3[i] = fs[i] + (RC31 * g1[i] + RC32 * g2[i]) / h
    lu_solve(a, piv, g3)
    for i in range(n):
        g4[i] = fs[i] + (RC41 * g1[i] + RC42 * g2[i] + RC43 * g3[i]) / h
    lu_solve(a, piv, g4)
    for i in range(n):
        ynew[i] = y[i] + RB1 * g1[i] + RB2 * g2[i] + RB3 * g3[i] + RB4 * g4[i]
        yerr[i] = RE1 * g1[i] + RE2 * g2[i] + RE3 * g3[i] + RE4 * g4[i]
    return rhs(sys, par, t + h, ynew, k[6])


@jit
def take_step(method, sys, par, t, y, h, k, ytmp, ynew, yerr):
    if method == ROS4:
        return ros_step(sys, par, t, y, h, k, ytmp, ynew, yerr)
    return dp_step(sys, par, t, y, h, k, ytmp, ynew, yerr)


@jit
def event_value(row, t, q):
    c = int(row[1])
    if c < 0:
        return t - row[2]
    return q[c] - row[2]


@jit
def crossed(direction, g0, g):
    if direction > 0.0:
        return g0 < 0.0 and g >= 0.0
    if direction < 0.0:
        return g0 > 0.0 and g <= 0.0
    return (g0 < 0.0 and g >= 0.0) or (g0 > 0.0 and g <= 0.0)


@jit
def locate(method, sys, par, t, y, f0, h, hdir, row, g0, tol, kk, ytmp, ym, yerr, q):
    """Bisect the step length at which the event function changes sign.

    Each trial re-takes a single step of the trial length from (t, y).
    Returns the length on the crossed side.
    """
    for i in range(y.shape[0]):
        kk[0, i] = f0[i]
    lo = 0.0
    hi = h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if not take_step(method, sys, par, t, y, hdir * mid, kk, ytmp, ym, yerr):
            hi = mid
            continue
        observe(sys, par, t + hdir * mid, ym, q)
        g = event_value(row, t + hdir * mid, q)
        if crossed(row[3], g0, g):
            hi = mid
        else:
            lo = mid
    return hi


@jit
def near_fires(row, q):
    if row[0] == EV_NEAR:
        d2 = 0.0
        for i in range(3):
            c = row[4 + i]
            if math.isfinite(c):
                d2 += (q[i] - c) ** 2
        return math.sqrt(d2) <= row[2]
    # interface approach: Y close to target and (f^m)' small
    return abs(q[1] - row[4]) <= row[2] and abs(q[4]) <= row[5]


@jit
def integrate(sys, par, t0, y0, hdir, rtol, atol, h_init, h_max, hmax_rel, hmin_rel,
              max_steps, ev, event_tol, ts, ys, ds, method=DOPRI):
    """Adaptive integration until an event, the step budget, or a singularity.

    Fills ts, ys, ds (time, state, derivative) and returns
    (n_samples, status, event_index, last_failed_step). `method` picks
    Dormand-Prince or the Rosenbrock stepper for stiff stretches.
    """
    n = y0.shape[0]
    expo = 0.25 if method == ROS4 else 0.2
    nev = ev.shape[0]
    k = np.empty((7, n))
    kk = np.empty((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    yerr = np.empty(n)
    ym = np.empty(n)
    q0 = np.empty(NQ)
    q1 = np.empty(NQ)
    qm = np.empty(NQ)
    g0 = np.zeros(nev)
    g1 = np.zeros(nev)
    y = y0.copy()
    t = t0
    if not rhs(sys, par, t, y, k[0]):
        ts[0] = t
        for i in range(n):
            ys[0, i] = y[i]
            ds[0, i] = 0.0
        return 1, ST_SINGULAR, -1, 0.0
    ts[0] = t
    for i in range(n):
        ys[0, i] = y[i]
        ds[0, i] = k[0, i]
    ns = 1
    observe(sys, par, t, y, q0)
    for e in range(nev):
        if ev[e, 0] == EV_CROSS:
            g0[e] = event_value(ev[e], t, q0)

    h = h_init
    if not h > 0.0:
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k[0, i] / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6 * max(1.0, abs(t))
        else:
            h = 0.01 * d0 / d1
    attempts = 0
    while True:
        if ns > max_steps:
            return ns, ST_BUDGET, -1, 0.0
        attempts += 1
        if attempts > 20 * max_steps:
            return ns, ST_BUDGET, -1, 0.0
        scale = max(1.0, abs(t))
        cap = min(h_max, hmax_rel * scale)
        if h > cap:
            h = cap
        if h < hmin_rel * scale:
            return ns, ST_SINGULAR, -1, h
        if not take_step(method, sys, par, t, y, hdir * h, k, ytmp, ynew, yerr):
            h *= 0.25
            continue
        err = 0.0
        for i in range(n):
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (yerr[i] / sc) ** 2
        err = math.sqrt(err / n)
        if not err <= 1.0:
            if math.isfinite(err):
                h *= max(0.2, 0.9 * err**-expo)
            else:
                h *= 0.25
            continue

        tn = t + hdir * h
        observe(sys, par, tn, ynew, q1)
        best = -1
        best_s = math.inf
        for e in range(nev):
            if ev[e, 0] != EV_CROSS:
                continue
            g1[e] = event_value(ev[e], tn, q1)
            if crossed(ev[e, 3], g0[e], g1[e]):
                tol = event_tol * scale
                s = locate(method, sys, par, t, y, k[0], h, hdir, ev[e], g0[e], tol, kk, ytmp, ym, yerr, qm)
                if s < best_s:
                    best_s = s
                    best = e
        if best >= 0:
            for i in range(n):
                kk[0, i] = k[0, i]
            if best_s < h and take_step(method, sys, par, t, y, hdir * best_s, kk, ytmp, ym, yerr):
                ts[ns] = t + hdir * best_s
                for i in range(n):
                    ys[ns, i] = ym[i]
                    ds[ns, i] = kk[6, i]
            else:
                ts[ns] = tn
                for i in range(n):
                    ys[ns, i] = ynew[i]
                    ds[ns, i] = k[6, i]
            return ns + 1, ST_EVENT, best, 0.0

        t = tn
        for i in range(n):
            y[i] = ynew[i]
            k[0, i] = k[6, i]
            ys[ns, i] = y[i]
            ds[ns, i] = k[0, i]
        ts[ns] = t
        ns += 1
        for e in range(nev):
            g0[e] = g1[e]
            if ev[e, 0] != EV_CROSS and near_fires(ev[e], q1):
                return ns, ST_EVENT, e, 0.0
        if not math.isfinite(t):
            # state still finite: the independent variable ran out, not the state
            return ns, ST_BUDGET, -1, 0.0

        if err == 0.0:
            fac = 5.0
        else:
            fac = min(5.0, max(0.2, 0.9 * err**-expo))
        h *= fac
