import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, special

from rotators.stationary import (
    MAX_ORDER,
    TWO_PI,
    StationaryProfile,
    bessel_i,
    bessel_i_scaled,
    bessel_i_series,
    c_constant,
    c_constant_quadrature,
    diffusion_coefficient,
    psi_ratio,
    solve_sync_degree,
    tangent_norm,
)

# frozen from scipy.optimize.brentq on special.ive(1, x) / special.ive(0, x)
R_K2 = 0.831462024754257
TANGENT_NORM_K2 = 0.98763260324554


def _r_oracle(K):
    return optimize.brentq(lambda r: special.ive(1, 2 * K * r) / special.ive(0, 2 * K * r) - r,
                           1e-6, 1.0, xtol=1e-15, rtol=1e-15)


@pytest.mark.parametrize("order", [0, 1, 2, 5, 17, 40, 64])
@pytest.mark.parametrize("x", [0.0, 1e-3, 0.5, 3.3, 14.9, 15.1, 40.0, 300.0])
def test_scaled_bessel_matches_scipy(order, x):
    ref = special.ive(order, x)
    got = bessel_i_scaled(order, x)
    if ref < 1e-290:
        assert got < 1e-280
    else:
        assert got == pytest.approx(ref, rel=1e-12, abs=0)


@pytest.mark.parametrize("x", [0.0, 0.7, 5.0, 14.0])
def test_series_and_unscaled(x):
    for k in (0, 1, 3, 10):
        assert bessel_i_series(k, x) == pytest.approx(special.iv(k, x), rel=1e-13, abs=1e-300)
        assert bessel_i(k, x) == pytest.approx(special.iv(k, x), rel=1e-12, abs=1e-300)


def test_bessel_argument_checks():
    with pytest.raises(ValueError):
        bessel_i(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_i(MAX_ORDER + 1, 1.0)
    with pytest.raises(ValueError):
        bessel_i(0, -1.0)
    with pytest.raises(ValueError):
        bessel_i(0, float("nan"))


@given(st.floats(0.0, 200.0))
def test_psi_ratio_range_and_monotone(x):
    a, b = psi_ratio(x), psi_ratio(x + 0.1)
    assert 0.0 <= a < 1.0
    assert b >= a


@pytest.mark.parametrize("K", [1.01, 1.5, 2.0, 5.0, 20.0])
def test_sync_degree_against_brentq(K):
    r = solve_sync_degree(K)
    assert r == pytest.approx(_r_oracle(K), abs=1e-11)
    assert abs(psi_ratio(2 * K * r) - r) < 1e-12


def test_sync_degree_frozen_and_subcritical():
    assert solve_sync_degree(2.0) == pytest.approx(R_K2, abs=1e-13)
    assert solve_sync_degree(1.0) == 0.0
    assert solve_sync_degree(0.3) == 0.0
    with pytest.raises(ValueError):
        solve_sync_degree(0.0)


def test_sync_degree_near_threshold():
    # pitchfork normal form: r ~ sqrt(2 (K - 1)) as K -> 1
    eps = 1e-4
    r = solve_sync_degree(1 + eps)
    assert r == pytest.approx(math.sqrt(2 * eps), rel=1e-2)


@given(st.floats(1.05, 30.0))
@settings(max_examples=30)
def test_sync_degree_increasing(K):
    assert solve_sync_degree(K * 1.01) > solve_sync_degree(K)


@pytest.mark.parametrize("K", [1.5, 2.0, 5.0])
def test_constants_by_quadrature(K):
    q = StationaryProfile.from_coupling(K)
    inv, _ = integrate.quad(lambda t: 1.0 / q(t), 0, TWO_PI, epsabs=0, epsrel=1e-13, limit=200)
    assert c_constant(K) == pytest.approx(TWO_PI / inv, rel=1e-10)
    assert c_constant_quadrature(K) == pytest.approx(TWO_PI / inv, rel=1e-10)
    # primitive of q' is q; centering with weight 1/q leaves q - 2pi / int(1/q)
    norm2 = 1.0 - TWO_PI**2 / inv
    assert tangent_norm(K) == pytest.approx(math.sqrt(norm2), rel=1e-10)
    assert diffusion_coefficient(K) * tangent_norm(K) == pytest.approx(1.0, abs=1e-14)


def test_tangent_norm_frozen():
    assert tangent_norm(2.0) == pytest.approx(TANGENT_NORM_K2, abs=1e-12)


def test_subcritical_constants_rejected():
    for fn in (diffusion_coefficient, c_constant, tangent_norm):
        with pytest.raises(ValueError):
            fn(1.0)


class TestProfile:
    q = StationaryProfile.from_coupling(2.0, psi=0.7)
    theta = np.linspace(0, TWO_PI, 257)

    def test_normalized_and_peaked(self):
        mass, _ = integrate.quad(self.q, 0, TWO_PI, epsabs=0, epsrel=1e-13)
        assert mass == pytest.approx(1.0, abs=1e-12)
        assert self.theta[np.argmax(self.q(self.theta))] == pytest.approx(0.7, abs=TWO_PI / 256)

    def test_derivatives_by_finite_differences(self):
        h = 1e-5
        fd1 = (self.q(self.theta + h) - self.q(self.theta - h)) / (2 * h)
        fd2 = (self.q.derivative(self.theta + h) - self.q.derivative(self.theta - h)) / (2 * h)
        assert np.allclose(self.q.derivative(self.theta), fd1, atol=1e-8)
        assert np.allclose(self.q.second_derivative(self.theta), fd2, atol=1e-8)
        logq = lambda t: np.log(self.q(t))
        fdl = (logq(self.theta + h) - 2 * logq(self.theta) + logq(self.theta - h)) / h**2
        assert np.allclose(self.q.log_second_derivative(self.theta), fdl, atol=1e-4)

    def test_primitive(self):
        for t in (0.3, 2.0, 5.9):
            ref, _ = integrate.quad(self.q, 0, t, epsabs=0, epsrel=1e-13)
            assert float(self.q.primitive(t)) == pytest.approx(ref, abs=1e-12)
        assert float(self.q.primitive(TWO_PI)) == pytest.approx(1.0, abs=1e-13)

    def test_fourier_coefficients_by_fft(self):
        n = 256
        nodes = TWO_PI * np.arange(n) / n
        ref = np.fft.fft(self.q(nodes))[:17] / n
        assert np.allclose(self.q.fourier_coefficients(16), ref, atol=1e-15)

    def test_rotation(self):
        r = self.q.rotated(1.0)
        assert np.allclose(r(self.theta + 1.0), self.q(self.theta), atol=1e-13)

    def test_large_coupling_stays_finite(self):
        q = StationaryProfile.from_coupling(400.0)
        vals = q(self.theta)
        assert np.all(np.isfinite(vals))
        assert TWO_PI * np.mean(q(TWO_PI * np.arange(4096) / 4096)) == pytest.approx(1.0, rel=1e-10)


def test_tiny_arguments_terminate():
    assert psi_ratio(5e-324) == 0.0
    assert bessel_i(1, 1e-300) == pytest.approx(5e-301, rel=1e-12)
