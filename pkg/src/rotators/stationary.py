"""Modified Bessel kernel, synchronization degree and the stationary profiles.

The synchronized stationary densities of the mean-field rotator PDE are

    q_psi(theta) = exp(2 K r cos(theta - psi)) / (2 pi I_0(2 K r))

where ``r`` is the positive root of ``r = I_1(2Kr) / I_0(2Kr)`` (it exists
iff ``K > 1``).  Everything in this module is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "MAX_ORDER",
    "SERIES_CUTOFF",
    "bessel_i",
    "bessel_i_scaled",
    "bessel_i_series",
    "psi_ratio",
    "solve_sync_degree",
    "diffusion_coefficient",
    "c_constant",
    "c_constant_quadrature",
    "tangent_norm",
    "StationaryProfile",
]

MAX_ORDER = 64
SERIES_CUTOFF = 15.0

TWO_PI = 2.0 * np.pi


def _check_args(order, x):
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a non-negative integer, got {order!r}")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds the cap {MAX_ORDER}")
    if not np.isfinite(x) or x < 0:
        raise ValueError(f"x must be finite and non-negative, got {x!r}")


def bessel_i_series(order: int, x: float) -> float:
    """Power series ``sum_m (x/2)^(2m+k) / (m! (m+k)!)``, summed to roundoff.

    All terms are positive so the sum is accurate for any ``x`` that does not
    overflow; it is slow for large ``x`` and is mainly used as a reference.
    """
    _check_args(order, x)
    k = int(order)
    half = 0.5 * x
    if half == 0.0:
        return 1.0 if k == 0 else 0.0
    # log of the leading term avoids overflow of (x/2)^k and k!
    term = math.exp(k * math.log(half) - math.lgamma(k + 1))
    total = term
    quarter = half * half
    m = 0
    while True:
        m += 1
        term *= quarter / (m * (m + k))
        total += term
        if term <= 1e-17 * total and m > half:
            break
    return total


def _quadrature_scaled(k: int, x: float) -> float:
    # trapezoid on a periodic integrand: aliasing error ~ I_{n-k}(x)/I_k(x)
    n = max(64, k + int(math.ceil(math.sqrt(80.0 * x))) + 16)
    n += n % 2
    theta = TWO_PI * np.arange(n) / n
    vals = np.cos(k * theta) * np.exp(x * (np.cos(theta) - 1.0))
    return float(vals.sum() / n)


def _use_series(k, x):
    # quadrature loses a factor ~exp(k^2 / 2x) of relative accuracy to cancellation
    return x < SERIES_CUTOFF or k * k > 2.0 * x


_lgamma = np.vectorize(math.lgamma, otypes=[float])


def _series_scaled_logdomain(k, x):
    half = 0.5 * x
    m = np.arange(int(half + 12.0 * math.sqrt(x) + 60.0))
    log_terms = (2 * m + k) * math.log(half) - _lgamma(m + 1) - _lgamma(m + k + 1)
    return float(np.exp(log_terms - x).sum())


def bessel_i_scaled(order: int, x: float) -> float:
    """Exponentially scaled modified Bessel function ``exp(-x) I_order(x)``."""
    _check_args(order, x)
    if _use_series(order, x):
        if x < 700.0:
            return bessel_i_series(order, x) * math.exp(-x)
        return _series_scaled_logdomain(int(order), float(x))
    return _quadrature_scaled(int(order), float(x))


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function of the first kind of integer order.

    Uses the power series below ``x = 15`` and a scaled trapezoid quadrature of
    ``(1/2pi) int cos(k theta) exp(x cos theta)`` above it, except for high
    orders at moderate ``x`` where the quadrature would cancel and the series
    is kept.

    Raises
    ------
    ValueError
        For negative or non-finite ``x`` or an order above ``MAX_ORDER``.
    """
    _check_args(order, x)
    if _use_series(order, x) and x < 700.0:
        return bessel_i_series(order, x)
    return bessel_i_scaled(order, x) * math.exp(x)


def psi_ratio(x: float) -> float:
    """``I_1(x) / I_0(x)``; increasing and concave on ``[0, inf)`` with values in [0, 1)."""
    if x == 0.0:
        return 0.0
    return bessel_i_scaled(1, x) / bessel_i_scaled(0, x)


def solve_sync_degree(K: float, tol: float = 1e-12) -> float:
    """Synchronization degree ``r(K)``: the positive root of ``Psi(2Kr) = r``.

    Returns exactly 0 for ``K <= 1`` (the flat profile is then the only
    solution).  Bisection is used rather than Newton because the slope of
    ``Psi(2Kr) - r`` vanishes as ``K -> 1``.
    """
    if not K > 0:
        raise ValueError(f"coupling K must be positive, got {K!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if K <= 1.0:
        return 0.0

    def g(r):
        return psi_ratio(2.0 * K * r) - r

    if not g(1.0) < 0.0:
        raise RuntimeError("cannot bracket the fixed point: Psi(2K) >= 1, Bessel kernel defect")
    # g > 0 on (0, r*) by concavity of Psi and Psi'(0) = 1/2
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    if r == 0.0 or abs(g(r)) >= tol:
        raise RuntimeError(f"fixed point not resolved for K={K}: residual {g(r):.3e}")
    return r


def _require_supercritical(K):
    if not K > 1.0:
        raise ValueError(f"undefined for K <= 1 (r = 0), got K={K!r}")
    return solve_sync_degree(K)


def diffusion_coefficient(K: float) -> float:
    """Diffusion coefficient ``D_K = 1 / sqrt(1 - I_0(2Kr)^-2)`` of the phase on time scale N."""
    r = _require_supercritical(K)
    i0 = bessel_i(0, 2.0 * K * r)
    return 1.0 / math.sqrt(1.0 - 1.0 / (i0 * i0))


def c_constant(K: float) -> float:
    """``c = 1 / (2 pi I_0(2Kr)^2)``, the constant making ``1 - c/q`` mean zero."""
    r = _require_supercritical(K)
    i0 = bessel_i(0, 2.0 * K * r)
    return 1.0 / (TWO_PI * i0 * i0)


def c_constant_quadrature(K: float, n_points: int = 512) -> float:
    """Same constant computed as ``2 pi / int 1/q`` by trapezoid quadrature."""
    q = StationaryProfile.from_coupling(K)
    theta = TWO_PI * np.arange(n_points) / n_points
    integral = TWO_PI * np.mean(1.0 / q(theta))
    return TWO_PI / integral


def tangent_norm(K: float) -> float:
    """Closed form of ``||q'||_{-1,1/q} = sqrt(1 - I_0(2Kr)^-2)``."""
    return 1.0 / diffusion_coefficient(K)


@lru_cache(maxsize=256)
def _ratio_table(x, kmax):
    i0 = bessel_i_scaled(0, x)
    table = np.array([bessel_i_scaled(k, x) / i0 for k in range(kmax + 1)])
    table.flags.writeable = False
    return table


@dataclass(frozen=True)
class StationaryProfile:
    """Stationary density ``q_psi`` for coupling ``K`` with degree ``r`` and center ``psi``.

    ``r`` is not re-validated on construction so that perturbed or subcritical
    profiles can be built on purpose; use :meth:`from_coupling` for the
    solved one.
    """

    K: float
    r: float
    psi: float = 0.0

    @classmethod
    def from_coupling(cls, K: float, psi: float = 0.0) -> "StationaryProfile":
        return cls(float(K), solve_sync_degree(K), float(psi) % TWO_PI)

    @property
    def x(self) -> float:
        """Bessel argument ``2 K r``."""
        return 2.0 * self.K * self.r

    @property
    def i0(self) -> float:
        return bessel_i(0, self.x)

    def rotated(self, c: float) -> "StationaryProfile":
        return StationaryProfile(self.K, self.r, (self.psi + c) % TWO_PI)

    def __call__(self, theta):
        return self.evaluate(theta)

    def evaluate(self, theta):
        x = self.x
        # scaled form stays finite for large 2Kr
        return np.exp(x * (np.cos(np.asarray(theta) - self.psi) - 1.0)) / (
            TWO_PI * bessel_i_scaled(0, x)
        )

    def derivative(self, theta):
        theta = np.asarray(theta)
        return -self.x * np.sin(theta - self.psi) * self.evaluate(theta)

    def second_derivative(self, theta):
        theta = np.asarray(theta)
        s = np.sin(theta - self.psi)
        c = np.cos(theta - self.psi)
        return self.x * (self.x * s * s - c) * self.evaluate(theta)

    def log_second_derivative(self, theta):
        """``(log q)'' = -2Kr cos(theta - psi)``."""
        return -self.x * np.cos(np.asarray(theta) - self.psi)

    def bessel_table(self, kmax: int = MAX_ORDER) -> np.ndarray:
        """``I_k(2Kr) / I_0(2Kr)`` for ``k = 0..kmax``."""
        return _ratio_table(self.x, kmax)

    def fourier_coefficients(self, M: int) -> np.ndarray:
        """Coefficients ``c_k = (1/2pi) int q e^{-ik theta}`` for ``k = 0..M``.

        ``c_k = I_k(2Kr) e^{-ik psi} / (2 pi I_0(2Kr))``.  Modes above
        ``MAX_ORDER`` are set to zero, which is checked to be below roundoff.
        """
        kmax = min(M, MAX_ORDER)
        ratios = self.bessel_table(kmax)
        out = np.zeros(M + 1, dtype=complex)
        out[: kmax + 1] = ratios / TWO_PI
        if M > MAX_ORDER and ratios[-1] > 1e-30:
            raise ValueError("Bessel coefficients beyond the order cap are not negligible")
        k = np.arange(M + 1)
        return out * np.exp(-1j * k * self.psi)

    def primitive(self, theta):
        """``Q(theta) = int_0^theta q_psi`` (not reduced mod 2pi: ``Q(theta + 2pi) = Q(theta) + 1``)."""
        theta = np.asarray(theta, dtype=float)
        ratios = self.bessel_table()
        k = np.arange(1, ratios.size)
        phase = np.multiply.outer(theta - self.psi, k)
        series = (np.sin(phase) + np.sin(k * self.psi)) @ (ratios[1:] / k)
        return theta / TWO_PI + series / np.pi
