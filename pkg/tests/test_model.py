import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blowup_profiles.errors import InvalidParams, OutsideSupport, UnsupportedPoint
from blowup_profiles.model import (
    Anchor,
    LocalSeries,
    Params,
    PointTag,
    critical_point,
    explicit_coefficients,
    explicit_gamma,
    explicit_profile,
    explicit_selfsimilar,
    explicit_support_edge,
    exponents,
    interface_series_coefficients,
    k_to_origin_coefficient,
    linearization_matrix,
    linearize,
    local_series_eval,
    origin_coefficient_to_k,
    p1_eigenvector,
    psi_coefficient,
    selfsimilar_eval,
    sigma_star,
    tail_residual,
)

ms = st.floats(1.01, 6.0)
sigmas = st.floats(0.05, 6.0)


# --- hand-evaluated values ----------------------------------------------------

@pytest.mark.parametrize("m, s, alpha, beta", [(3, 2, 1.0, 0.5), (2, 1, 3.0, 1.0), (4, 4, 0.5, 0.25)])
def test_exponents_values(m, s, alpha, beta):
    e = exponents(Params(m, s))
    assert e.alpha == pytest.approx(alpha, rel=1e-15)
    assert e.beta == pytest.approx(beta, rel=1e-15)


@pytest.mark.parametrize("m, s", [(1.0, 2.0), (0.5, 1.0), (3.0, 0.0), (3.0, -1.0), (math.nan, 1.0), (3.0, math.inf)])
def test_params_rejects(m, s):
    with pytest.raises(InvalidParams):
        Params(m, s)


def test_sigma_star():
    assert sigma_star(7) == 4.0
    assert sigma_star(3) == pytest.approx(2.8284271247461903, rel=1e-15)
    with pytest.raises(InvalidParams):
        sigma_star(1)


def test_explicit_profile_values():
    a, b = explicit_coefficients(3)
    assert b == pytest.approx(4 / (3 * (2 + 2 * math.sqrt(2)) * (4 + 6 * math.sqrt(2))), rel=1e-14)
    assert b == pytest.approx(0.0221175, abs=1e-7)
    assert explicit_profile(3, 0.0) == 0.0
    assert explicit_profile(3, 1.0) == pytest.approx(0.247418, abs=1e-5)
    assert explicit_profile(3, 2.0) == 0.0


def test_support_edge():
    xi1 = explicit_support_edge(3)
    assert xi1 == pytest.approx(1.59836, abs=1e-4)
    assert xi1 ** sigma_star(3) == pytest.approx(3.76777, abs=1e-4)
    assert explicit_profile(3, xi1) == pytest.approx(0.0, abs=1e-7)
    assert explicit_support_edge(7) > 0
    assert explicit_gamma(3) == pytest.approx(4.414214, abs=1e-6)


@pytest.mark.parametrize("m, s, want", [(2, 1, 0.05), (3, 2, math.sqrt(4 / 44))])
def test_psi_values(m, s, want):
    assert psi_coefficient(Params(m, s)) == pytest.approx(want, rel=1e-12)


def test_psi_decreases_to_zero():
    p = lambda s: psi_coefficient(Params(2, s))  # noqa: E731
    assert p(100) < p(1)
    assert p(1e4) < 1e-3
    vals = [psi_coefficient(Params(3, s)) for s in np.linspace(1, 100, 200)]
    assert np.all(np.diff(vals) < 0)


def test_critical_points():
    p = Params(3, 2)
    assert critical_point(p, "P2").coords == pytest.approx((0.25, 0.25, 0.0), abs=1e-15)
    assert critical_point(p, PointTag.P1Gamma, 1.0).coords == pytest.approx((0.0, -0.5, 1.0))
    q5 = critical_point(p, "Q5").coords
    assert q5 == pytest.approx((3 / math.sqrt(10), 1 / math.sqrt(10), 0, 0))
    for tag in ("Q1", "Q2", "Q3", "Q4", "Q5"):
        c = critical_point(p, tag).coords
        assert len(c) == 4 and c[3] == 0 and np.linalg.norm(c) == pytest.approx(1.0)
    with pytest.raises(InvalidParams):
        critical_point(p, "P1Gamma")
    with pytest.raises(InvalidParams):
        critical_point(p, "P0Gamma", -1.0)


def test_linearize_values():
    p = Params(3, 2)
    lam = linearize(p, critical_point(p, "P0")).eigenvalues
    assert sorted(lam.real) == pytest.approx([-0.5, 0.0, 0.0], abs=1e-14)
    lin = linearize(p, critical_point(p, "P2"))
    assert sorted(lin.eigenvalues.real) == pytest.approx([-1.593070, -0.156930, 0.5], abs=1e-6)
    i = int(np.argmin(np.abs(lin.eigenvalues - 0.5)))
    e3 = lin.eigenvectors[:, i].real
    assert np.cross(e3, [-4 / 44, -8 / 44, 1.0]) == pytest.approx(np.zeros(3), abs=1e-14)
    for tag in ("Q1", "Q2", "Q3", "Q4"):
        with pytest.raises(UnsupportedPoint):
            linearize(p, critical_point(p, tag))


def test_local_series_values():
    p = Params(3, 2)
    v, _ = local_series_eval(LocalSeries(Anchor.InterfaceP1, p, 1.0), 0.9)
    assert math.sqrt(v) == pytest.approx(0.177952, abs=1e-5)
    v, _ = local_series_eval(LocalSeries(Anchor.InterfaceP1, p, 1.0), 1.0)
    assert v == 0.0
    v, w = local_series_eval(LocalSeries(Anchor.OriginP0, p, 1.0), 0.1)
    assert (v, w) == pytest.approx((1e-4, 4e-3), rel=1e-12)
    with pytest.raises(OutsideSupport):
        local_series_eval(LocalSeries(Anchor.InterfaceP1, p, 1.0), 1.1)
    with pytest.raises(InvalidParams):
        LocalSeries(Anchor.OriginP0, p, 0.0)


def test_origin_p2_series_reproduces_explicit_profile():
    # at sigma_* the two-term expansion is the explicit profile itself
    m = 3.0
    p = Params(m, sigma_star(m))
    for xi in (0.01, 0.1, 0.5, 1.2):
        v, _ = local_series_eval(LocalSeries(Anchor.OriginP2, p), xi)
        assert v ** 0.5 == pytest.approx(explicit_profile(m, xi), rel=1e-12)


def test_origin_coefficient_to_k():
    assert origin_coefficient_to_k(Params(3, 2), 1.0) == pytest.approx(1 / 3)
    assert origin_coefficient_to_k(Params(2, 2), 2.0) == pytest.approx(0.25)
    assert origin_coefficient_to_k(Params(3, 2), 1e8) < 1e-15
    with pytest.raises(InvalidParams):
        origin_coefficient_to_k(Params(3, 2), 0.0)


def test_tail_residual_exact_tail():
    p = Params(3, 2)
    xi = np.linspace(0.5, 3, 20)
    f = xi ** (4 / 2) * np.exp(-xi**2)
    assert np.max(np.abs(tail_residual(p, xi, f))) < 1e-13
    with pytest.raises(InvalidParams):
        tail_residual(p, 1.0, 0.0)


class _Profile:
    def __init__(self, m):
        self.params = Params(m, sigma_star(m))
        self.m = m

    def f_at(self, xi):
        return explicit_profile(self.m, xi)


def test_selfsimilar_eval():
    prof = _Profile(3.0)
    assert selfsimilar_eval(prof, 1.0, 0.0, 0.0) == 0.0
    for x, t in ((0.3, 0.2), (1.0, 0.5), (0.05, 0.9)):
        want = float(explicit_selfsimilar(3.0, 1.0, x, t))
        assert selfsimilar_eval(prof, 1.0, x, t) == pytest.approx(want, rel=1e-14)
    xi1 = explicit_support_edge(3.0)
    tau = 0.5
    x_out = 1.01 * xi1 * tau ** (-prof.params.beta)
    assert selfsimilar_eval(prof, 1.0, x_out, 0.5) == 0.0
    with pytest.raises(InvalidParams):
        selfsimilar_eval(prof, 1.0, 0.1, 1.0)


# --- properties ---------------------------------------------------------------

@given(ms, sigmas)
def test_exponent_identity(m, s):
    e = exponents(Params(m, s))
    assert e.alpha > 0 and e.beta > 0
    assert abs(e.alpha * (m - 1) - 2 * e.beta - 1) <= 1e-14 * max(1.0, e.alpha * (m - 1))


@given(st.floats(1.001, 10.0))
def test_support_edge_two_formulas(m):
    a, b = explicit_coefficients(m)
    ss = sigma_star(m)
    lhs = ((m - 1) / (2 * m * (m + 1) * b)) ** (1 / ss)
    alpha = (ss + 2) / (ss * (m - 1))
    rhs = (alpha * (m * ss + m + 1) / ss) ** (1 / ss)
    assert lhs == pytest.approx(rhs, rel=1e-10)
    assert explicit_support_edge(m) == pytest.approx(lhs, rel=1e-14)


@given(ms, sigmas)
def test_p2_eigen_identities(m, s):
    p = Params(m, s)
    a, b = p.alpha, p.beta
    lam = linearize(p, critical_point(p, "P2")).eigenvalues
    lam3 = s * (m - 1) / (2 * (m + 1) * a)
    i3 = int(np.argmin(np.abs(lam - lam3)))
    rest = np.delete(lam, i3)
    assert lam[i3].real == pytest.approx(lam3, rel=1e-10)
    assert np.sum(rest).real == pytest.approx(-(3 * m + 1 + 2 * b * (m + 1)) / (2 * (m + 1) * a), rel=1e-10)
    assert np.prod(rest).real == pytest.approx((m - 1) / (2 * (m + 1) * a * a), rel=1e-10)


@given(ms, sigmas, st.sampled_from(["P0", "P2", "Q5"]), st.floats(0.1, 5))
def test_eigenpairs_satisfy_matrix(m, s, tag, gamma):
    p = Params(m, s)
    for pt in (critical_point(p, tag), critical_point(p, "P1Gamma", gamma), critical_point(p, "P0Gamma", gamma)):
        lin = linearize(p, pt)
        for lam, vec in zip(lin.eigenvalues, lin.eigenvectors.T):
            scale = max(np.linalg.norm(lin.matrix), 1.0) * np.linalg.norm(vec)
            assert np.linalg.norm(lin.matrix @ vec - lam * vec) <= 1e-12 * scale


@given(ms, sigmas, st.floats(0.05, 10))
def test_p1_eigenvector_closed_form(m, s, gamma):
    p = Params(m, s)
    mat = linearization_matrix(p, critical_point(p, "P1Gamma", gamma))
    lam1 = -(m - 1) * p.beta / p.alpha
    vals, vecs = np.linalg.eig(mat)
    num = vecs[:, int(np.argmin(np.abs(vals - lam1)))].real
    e1 = p1_eigenvector(p, gamma)
    cos = abs(num @ e1) / (np.linalg.norm(num) * np.linalg.norm(e1))
    assert 1 - cos <= 1e-10


@given(ms, sigmas, st.floats(0.05, 10))
def test_interface_series_vanishes_at_edge(m, s, gamma):
    p = Params(m, s)
    series = LocalSeries(Anchor.InterfaceP1, p, gamma)
    xi0 = series.interface_point
    assert xi0 == pytest.approx((p.alpha * gamma) ** (1 / s), rel=1e-14)
    v, w = local_series_eval(series, xi0)
    assert abs(v) <= 1e-14 * max(1.0, xi0 * xi0)
    assert w == pytest.approx(-(m - 1) * xi0 / (m * s), rel=1e-14)
    # higher-order series: v vanishes at the edge, slope a1 = (m-1) beta xi0 / m
    co = interface_series_coefficients(p, gamma, 6)
    assert co[0] == 0.0
    assert co[1] == pytest.approx((m - 1) * p.beta * xi0 / m, rel=1e-14)


@given(ms, sigmas, st.floats(1e-3, 1e3))
def test_k_and_c_roundtrip(m, s, c):
    p = Params(m, s)
    assert k_to_origin_coefficient(p, origin_coefficient_to_k(p, c)) == pytest.approx(c, rel=1e-12)
