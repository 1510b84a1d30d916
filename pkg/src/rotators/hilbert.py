"""Weighted negative Sobolev geometry on the circle.

A mean-zero distribution ``u`` is represented by a primitive ``U`` sampled on
a uniform grid.  The weighted norm is

    ||u||_{-1,w}^2 = int w U_c^2,    U_c = U - (int w U) / (int w),

so any primitive can be stored and the centering is done per weight.

Measures are accepted in a few shapes ("measure-like"):

* :class:`EmpiricalMeasure` -- atoms with weight ``1/N``; its primitive is the
  exact piecewise-constant CDF ``mu([0, theta])`` sampled at the nodes;
* :class:`~rotators.stationary.StationaryProfile` -- closed-form primitive;
* a callable ``theta -> density`` or an array of density values on the grid --
  spectral primitive through the FFT (exact for band-limited densities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import optimize

from .stationary import MAX_ORDER, TWO_PI, StationaryProfile, c_constant

__all__ = [
    "FOURIER_TO_PRIMITIVE",
    "CircleGrid",
    "EmpiricalMeasure",
    "HMinusOneElement",
    "ProjectionError",
    "order_parameter",
    "primitive_values",
    "fourier_moments",
    "fourier_coefficients",
    "fourier_hminus_norm",
    "h1w_norm_of_difference",
    "tangent_kernel",
    "tangent_functional",
    "project_to_manifold",
    "second_order_projection",
    "dist_to_manifold",
    "distance_to_projection",
    "empirical_distance_to_density",
]

# ||u||_{-1} (primitive definition) = FOURIER_TO_PRIMITIVE * fourier_hminus_norm(u_m, 1)
# for u_m = (1/2pi) int u e^{-im theta}
FOURIER_TO_PRIMITIVE = TWO_PI

DEFAULT_POINTS = 512


class ProjectionError(RuntimeError):
    """The projection onto the stationary manifold could not be located."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CircleGrid:
    """Uniform grid ``theta_i = 2 pi i / n`` on the circle."""

    n_points: int = DEFAULT_POINTS

    def __post_init__(self):
        if self.n_points < 16 or self.n_points % 2:
            raise ValueError(f"grid needs an even number of points >= 16, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(self.n_points)

    def integrate(self, values) -> float:
        """Trapezoid rule, which for periodic data is ``h * sum``."""
        return self.spacing * np.sum(values, axis=-1)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform-weight atoms on the circle, stored sorted and reduced mod 2pi."""

    atoms: np.ndarray = field(repr=False)

    def __post_init__(self):
        atoms = np.sort(np.mod(np.asarray(self.atoms, dtype=float).ravel(), TWO_PI))
        if atoms.size == 0:
            raise ValueError("empirical measure needs at least one atom")
        atoms.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)

    @property
    def size(self) -> int:
        return self.atoms.size

    def cdf(self, theta):
        """``mu([0, theta])`` for ``theta`` in ``[0, 2pi)``."""
        return np.searchsorted(self.atoms, theta, side="right") / self.atoms.size

    def rotated(self, c: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.atoms + c)


MeasureLike = Union[EmpiricalMeasure, StationaryProfile, Callable, np.ndarray]


def order_parameter(mu) -> tuple[float, float]:
    """Modulus and argument of ``(1/N) sum exp(i phi_j)``.

    The argument is returned in ``[0, 2pi)``, or NaN when the modulus is below
    1e-12 and the center is undefined.
    """
    atoms = mu.atoms if isinstance(mu, EmpiricalMeasure) else np.asarray(mu, dtype=float)
    if atoms.size == 0:
        raise ValueError("order parameter of an empty configuration")
    z = np.mean(np.exp(1j * atoms))
    r = float(abs(z))
    if r < 1e-12:
        return r, float("nan")
    return r, float(np.angle(z) % TWO_PI)


def _spectral_primitive(values: np.ndarray, grid: CircleGrid) -> np.ndarray:
    # F(theta) = int_0^theta p for p sampled on the grid; the Nyquist mode is dropped
    n = grid.n_points
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != n:
        raise ValueError(f"expected {n} grid values, got {values.shape[-1]}")
    coef = np.fft.rfft(values) / n
    k = np.arange(coef.shape[-1])
    integ = np.zeros_like(coef)
    integ[..., 1 : n // 2] = coef[..., 1 : n // 2] / (1j * k[1 : n // 2])
    periodic = np.fft.irfft(integ, n) * n
    periodic -= periodic[..., :1]
    return coef[..., :1].real * grid.nodes + periodic


def _density_values(mu, grid: CircleGrid) -> np.ndarray:
    if isinstance(mu, np.ndarray) or isinstance(mu, (list, tuple)):
        return np.asarray(mu, dtype=float)
    if callable(mu):
        return np.asarray(mu(grid.nodes), dtype=float)
    raise TypeError(f"not a measure-like object: {type(mu).__name__}")


def primitive_values(mu: MeasureLike, grid: CircleGrid) -> np.ndarray:
    """``mu([0, theta_i])`` on the grid nodes."""
    if isinstance(mu, EmpiricalMeasure):
        return mu.cdf(grid.nodes)
    if isinstance(mu, StationaryProfile):
        return mu.primitive(grid.nodes)
    return _spectral_primitive(_density_values(mu, grid), grid)


def _weight_values(weight, grid: CircleGrid) -> np.ndarray:
    if weight is None:
        return np.ones(grid.n_points)
    w = weight(grid.nodes) if callable(weight) else np.asarray(weight, dtype=float)
    w = np.broadcast_to(w, (grid.n_points,))
    if not np.all(w > 0):
        raise ValueError("weight must be strictly positive")
    return w


@dataclass(frozen=True)
class HMinusOneElement:
    """Mean-zero distribution stored through a primitive on a grid.

    ``primitive`` may carry any additive constant.  ``fourier`` optionally
    holds coefficients ``u_m, m = -M..M`` (with ``u_0 = 0``) for callers that
    want the Fourier norm as well.
    """

    grid: CircleGrid
    primitive: np.ndarray = field(repr=False)
    fourier: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_difference(cls, a: MeasureLike, b: MeasureLike, grid: CircleGrid | None = None):
        grid = grid or CircleGrid()
        return cls(grid, primitive_values(a, grid) - primitive_values(b, grid))

    @classmethod
    def from_values(cls, values, grid: CircleGrid | None = None, atol: float = 1e-10):
        """Element with the given mean-zero grid values (smooth functions only)."""
        grid = grid or CircleGrid()
        values = _density_values(values, grid)
        mass = grid.integrate(values)
        if abs(mass) > atol:
            raise ValueError(f"values do not have zero mass (mass {mass:.3e})")
        return cls(grid, _spectral_primitive(values, grid))

    def centered(self, weight=None) -> np.ndarray:
        w = _weight_values(weight, self.grid)
        U = self.primitive
        return U - self.grid.integrate(w * U) / self.grid.integrate(w)

    def inner(self, other: "HMinusOneElement", weight=None) -> float:
        if other.grid != self.grid:
            raise ValueError("elements live on different grids")
        w = _weight_values(weight, self.grid)
        return float(self.grid.integrate(w * self.centered(w) * other.primitive))

    def norm(self, weight=None) -> float:
        w = _weight_values(weight, self.grid)
        U = self.centered(w)
        return math.sqrt(max(float(self.grid.integrate(w * U * U)), 0.0))

    def values(self) -> np.ndarray:
        """Spectral derivative of the primitive (meaningful for smooth elements)."""
        n = self.grid.n_points
        # drop the linear part a mass defect would add
        U = self.primitive
        coef = np.fft.rfft(U)
        k = np.arange(coef.size)
        coef = 1j * k * coef
        if n % 2 == 0:
            coef[-1] = 0.0
        return np.fft.irfft(coef, n)

    def _combine(self, other, sign):
        if other.grid != self.grid:
            raise ValueError("elements live on different grids")
        return HMinusOneElement(self.grid, self.primitive + sign * other.primitive)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar):
        return HMinusOneElement(self.grid, scalar * self.primitive)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def h1w_norm_of_difference(a: MeasureLike, b: MeasureLike, weight=None,
                           grid: CircleGrid | None = None) -> float:
    """``||a - b||_{-1,w}`` for two probability measures (``weight=None`` means ``w = 1``)."""
    return HMinusOneElement.from_difference(a, b, grid).norm(weight)


def fourier_coefficients(values, M: int) -> np.ndarray:
    """``u_m = (1/2pi) int u e^{-im theta}`` for ``m = -M..M`` from grid samples."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if 2 * M >= n:
        raise ValueError("too many modes for the grid")
    c = np.fft.fft(values) / n
    return np.concatenate([c[n - M:], c[: M + 1]])


def fourier_hminus_norm(u_m, s: int = 1, atol: float = 1e-12) -> float:
    """``((1/2pi) sum_{m != 0} |u_m|^2 / m^(2s))^(1/2)`` for ``u_m, m = -M..M``.

    This is the coefficient convention ``u_m = (1/2pi) int u e^{-im theta}``;
    the primitive-based unweighted norm is ``FOURIER_TO_PRIMITIVE`` times it.
    """
    if s not in (1, 2):
        raise ValueError("s must be 1 or 2")
    u_m = np.asarray(u_m, dtype=complex)
    if u_m.ndim != 1 or u_m.size % 2 == 0:
        raise ValueError("coefficients must be indexed m = -M..M")
    M = u_m.size // 2
    if abs(u_m[M]) > atol:
        raise ValueError(f"zero mode must vanish, got {u_m[M]!r}")
    if not np.allclose(u_m[::-1], np.conj(u_m), atol=atol, rtol=0):
        raise ValueError("coefficients are not Hermitian symmetric")
    m = np.arange(-M, M + 1)
    m = np.where(m == 0, 1, m)
    terms = np.abs(u_m) ** 2 / m.astype(float) ** (2 * s)
    terms[M] = 0.0
    return math.sqrt(terms.sum() / TWO_PI)


# -- tangent direction and projection ---------------------------------------

def _profile(K_or_profile, psi=0.0) -> StationaryProfile:
    if isinstance(K_or_profile, StationaryProfile):
        return K_or_profile.rotated(psi - K_or_profile.psi)
    return StationaryProfile.from_coupling(K_or_profile, psi)


def _ratios(profile: StationaryProfile) -> np.ndarray:
    rho = profile.bessel_table()
    if rho[-1] > 1e-17:
        raise ValueError(f"2Kr = {profile.x:.3g} too large for the order-{MAX_ORDER} tangent kernel")
    return rho


def fourier_moments(mu: MeasureLike, kmax: int, grid: CircleGrid | None = None) -> np.ndarray:
    """``S_k = int e^{ik theta} mu(d theta)`` for ``k = 1..kmax``."""
    k = np.arange(1, kmax + 1)
    if isinstance(mu, EmpiricalMeasure):
        z = np.exp(1j * mu.atoms)
        out = np.empty(kmax, dtype=complex)
        zk = np.ones_like(z)
        for i in range(kmax):
            zk = zk * z
            out[i] = zk.mean()
        return out
    if isinstance(mu, StationaryProfile):
        rho = mu.bessel_table(max(kmax, 1))[1 : kmax + 1]
        return rho * np.exp(1j * k * mu.psi)
    grid = grid or CircleGrid()
    p = _density_values(mu, grid)
    return grid.spacing * (np.exp(1j * np.multiply.outer(k, grid.nodes)) @ p)


def tangent_kernel(profile: StationaryProfile, theta):
    """Periodic primitive of ``1 - c/q_psi`` (odd about ``psi``).

    Uses ``1/q = 2 pi I_0 (I_0 + 2 sum (-1)^k I_k cos k(theta - psi))``.
    """
    rho = _ratios(profile)
    k = np.arange(1, rho.size)
    coef = -2.0 * (-1.0) ** k * rho[1:] / k
    return np.sin(np.multiply.outer(np.asarray(theta) - profile.psi, k)) @ coef


def _tangent_from_moments(S, rho, psi):
    psi = np.asarray(psi, dtype=float)
    k = np.arange(1, rho.size)
    b = 2.0 * (-1.0) ** k * rho[1:] / k
    phase = np.exp(-1j * np.multiply.outer(psi, k))
    return np.imag(phase * S[: k.size]) @ b


def tangent_functional(mu: MeasureLike, psi: float, K, grid: CircleGrid | None = None) -> float:
    """``(q'_psi, mu - q_psi)_{-1,1/q_psi} = -int K_psi (d mu - q_psi d theta)``.

    ``K`` may be a coupling strength or a :class:`StationaryProfile` (its
    center is ignored).  The kernel is odd about ``psi`` and ``q_psi`` even,
    so the ``q_psi`` term integrates to zero and only the moments of ``mu``
    enter.
    """
    profile = _profile(K, psi)
    rho = _ratios(profile)
    S = fourier_moments(mu, rho.size - 1, grid)
    return float(_tangent_from_moments(S, rho, profile.psi))


def _circ_dist(a, b):
    return abs((a - b + np.pi) % TWO_PI - np.pi)


def project_to_manifold(mu: MeasureLike, K, guess: float | None = None,
                        grid: CircleGrid | None = None, tol: float = 1e-10,
                        n_scan: int = 64, max_iter: int = 100) -> float:
    """Center ``psi*`` of the point of M that ``mu`` projects onto.

    Solves ``F(psi) = (q'_psi, mu - q_psi)_{-1,1/q_psi} = 0`` where ``F``
    increases through zero, ``F ~ (psi - psi*) ||q'||^2`` (the other zero,
    near the antipode, is a maximum of the distance).  A scan over ``n_scan``
    angles brackets the root closest to ``guess`` (default: the order
    parameter argument); a secant iteration safeguarded by bisection polishes
    it.

    Raises
    ------
    ProjectionError
        If no bracket exists or the iteration stalls above ``tol``.
    """
    profile = _profile(K)
    rho = _ratios(profile)
    S = fourier_moments(mu, rho.size - 1, grid)

    def F(psi):
        return float(_tangent_from_moments(S, rho, psi))

    scan = TWO_PI * np.arange(n_scan) / n_scan
    vals = _tangent_from_moments(S, rho, scan)
    if np.ptp(vals) < tol:
        # F is flat to roundoff (e.g. the uniform measure): no center to pick
        raise ProjectionError("tangent functional is flat", float(np.max(np.abs(vals))))
    nxt = np.roll(vals, -1)
    idx = np.flatnonzero((vals < 0) & (nxt >= 0))
    if idx.size == 0:
        raise ProjectionError("no increasing zero of the tangent functional", float(np.min(np.abs(vals))))
    if guess is None or not np.isfinite(guess):
        # S_1 is the complex order parameter
        guess = float(np.angle(S[0])) if abs(S[0]) > 1e-12 else scan[idx[0]]
    i = idx[np.argmin(_circ_dist(scan[idx] + np.pi / n_scan, guess))]
    a, b = scan[i], scan[i] + TWO_PI / n_scan
    fa, fb = vals[i], nxt[i]
    if fb == 0.0:
        return float(b % TWO_PI)

    x0, f0, x1, f1 = a, fa, b, fb
    for _ in range(max_iter):
        x = x1 - f1 * (x1 - x0) / (f1 - f0) if f1 != f0 else 0.5 * (a + b)
        if not (a < x < b):
            x = 0.5 * (a + b)
        fx = F(x)
        if fx < 0:
            a, fa = x, fx
        else:
            b, fb = x, fx
        x0, f0, x1, f1 = x1, f1, x, fx
        if abs(fx) < tol and (b - a < 1e-12 or abs(x1 - x0) < 1e-13):
            return float(x % TWO_PI)
        if b - a < 4e-16 * TWO_PI:
            break
    if abs(f1) < tol:
        return float(x1 % TWO_PI)
    raise ProjectionError("projection iteration did not converge", abs(f1))


def second_order_projection(mu: MeasureLike, profile: StationaryProfile,
                            grid: CircleGrid | None = None) -> float:
    """Second-order expansion of the projection of ``mu = q_psi + h`` around ``psi``.

    ``psi - a (1 + c b / (q', q'))`` with ``a = (h, q')/(q', q')`` and
    ``b = (h, (log q)'')``, all inner products in ``H_{-1,1/q_psi}``.
    Note ``b = int h / q``.  The sign of the correction follows from expanding
    the tangent functional to second order and is confirmed numerically by the
    cubic decay of the remainder.
    """
    grid = grid or CircleGrid()
    h = HMinusOneElement.from_difference(mu, profile, grid)
    w = 1.0 / profile(grid.nodes)
    dq = HMinusOneElement(grid, profile(grid.nodes))  # primitive of q'
    dlogq = HMinusOneElement(grid, -profile.x * np.sin(grid.nodes - profile.psi))
    qq = dq.norm(w) ** 2
    a = h.inner(dq, w) / qq
    b = h.inner(dlogq, w)
    c = c_constant(profile.K)
    return profile.psi - a * (1.0 + c * b / qq)


def _empirical_energy(mu: EmpiricalMeasure) -> float:
    # ||mu - 1/2pi||_{-1}^2 exactly: 2pi sum_{m != 0} |mu_m|^2 / m^2 with
    # 2 sum_{m>=1} cos(m x)/m^2 = pi^2/3 - pi x + x^2/2 on [0, 2pi], which is
    # symmetric under x -> 2pi - x, so plain |phi_j - phi_l| can be used
    phi = mu.atoms
    N = phi.size
    ranks = 2.0 * np.arange(N) - (N - 1)
    abs_sum = 2.0 * float(np.dot(ranks, phi))
    centred = phi - phi.mean()
    sq_sum = 2.0 * N * float(np.dot(centred, centred))
    total = N * N * math.pi**2 / 3.0 - math.pi * abs_sum + 0.5 * sq_sum
    return total / (TWO_PI * N * N)


class _DistanceObjective:
    """``psi -> ||mu - q_psi||_{-1}^2`` as a trigonometric polynomial in ``psi``.

    With ``A_m`` the Fourier coefficients of the periodic part of the
    primitive of ``mu`` (``A_m = mu_m / (im)``) and ``B_m(psi) =
    rho_m e^{-im psi} / (2 pi i m)`` those of ``Q_psi``,

        ||mu - q_psi||^2 = 2pi sum_{m != 0} |A_m - B_m(psi)|^2.

    Only modes ``m <= kmax`` of ``B`` are non-zero, so the ``psi``-dependence
    sits in a cross term of degree ``kmax``; ``tail`` carries
    ``2pi sum_{|m| > kmax} |A_m|^2``.  For grid data the sums are the grid
    Parseval identity (equal to the trapezoid rule); for empirical measures
    they are the exact series.
    """

    def __init__(self, head, tail, profile):
        rho = profile.bessel_table()
        kmax = min(head.size, int(np.max(np.flatnonzero(rho > 1e-300))))
        m = np.arange(1, kmax + 1)
        self._m = m
        self._A = head[:kmax]
        self._B0 = rho[1 : kmax + 1] / (TWO_PI * 1j * m)
        self._tail = tail + 2.0 * TWO_PI * float(np.sum(np.abs(head[kmax:]) ** 2))
        self._base = self._tail + 2.0 * TWO_PI * float(np.sum(np.abs(self._A) ** 2 + np.abs(self._B0) ** 2))
        self._cross = -8.0 * math.pi * np.conj(self._A) * self._B0

    @classmethod
    def build(cls, mu, profile, grid):
        if isinstance(mu, EmpiricalMeasure):
            kmax = profile.bessel_table().size - 1
            m = np.arange(1, kmax + 1)
            head = np.conj(fourier_moments(mu, kmax)) / (TWO_PI * 1j * m)
            tail = _empirical_energy(mu) - 2.0 * TWO_PI * float(np.sum(np.abs(head) ** 2))
            return cls(head, tail, profile)
        n = grid.n_points
        A = np.fft.rfft(primitive_values(mu, grid) - grid.nodes / TWO_PI) / n
        head = A[1 : n // 2]
        tail = TWO_PI * float(abs(A[n // 2]) ** 2) if n % 2 == 0 else 0.0
        return cls(head, tail, profile)

    def _phase(self, psi):
        return np.exp(-1j * np.multiply.outer(np.atleast_1d(psi), self._m))

    def value(self, psi):
        return self._base + np.real(self._phase(psi) @ self._cross)

    def exact(self, psi):
        """Same value summed as ``|A_m - B_m|^2``, free of the cancellation in :meth:`value`."""
        diff = self._A - self._B0 * np.exp(-1j * self._m * psi)
        return max(self._tail + 2.0 * TWO_PI * float(np.sum(np.abs(diff) ** 2)), 0.0)

    def slope(self, psi):
        return np.real(self._phase(psi) @ (-1j * self._m * self._cross))

    def curvature(self, psi):
        return np.real(self._phase(psi) @ (-(self._m**2) * self._cross))


def dist_to_manifold(mu: MeasureLike, K, grid: CircleGrid | None = None,
                     n_scan: int = 64, return_center: bool = False):
    """``min_psi ||mu - q_psi||_{-1}`` (unweighted).

    Grid data (densities, profiles) go through the grid primitive, so the
    value is the trapezoid norm at that resolution; empirical measures use
    the exact series, which keeps the result rotation invariant.

    Coarse scan over ``n_scan`` centers, golden-section refinement, then a
    Newton polish on the analytic derivative, since the squared distance is
    too flat near its minimum to locate it below ~1e-8 from values alone.
    With ``return_center`` the minimizing ``psi`` is returned too.
    """
    grid = grid or CircleGrid()
    profile = _profile(K)
    obj = _DistanceObjective.build(mu, profile, grid)
    if profile.r == 0.0:
        d = math.sqrt(obj.exact(0.0))
        return (d, float("nan")) if return_center else d
    psis = TWO_PI * np.arange(n_scan) / n_scan
    j = int(np.argmin(obj.value(psis)))
    step = TWO_PI / n_scan

    def objective(psi):
        return float(obj.value(psi)[0])

    try:
        res = optimize.minimize_scalar(objective, bracket=(psis[j] - step, psis[j], psis[j] + step),
                                       method="golden", tol=1e-10)
        best = float(res.x)
    except ValueError:
        # no strict interior minimum on the scan: the objective is flat to roundoff
        best = float(psis[j])
    psi = best
    for _ in range(20):
        curv = float(obj.curvature(psi)[0])
        if curv <= 0 or abs(psi - best) > step:
            break
        nxt = psi - float(obj.slope(psi)[0]) / curv
        if abs(nxt - psi) < 1e-15:
            # converged on the derivative: trust it over the flat objective
            best = nxt if abs(nxt - best) <= step else best
            break
        psi = nxt
    d = math.sqrt(obj.exact(best))
    return (d, best % TWO_PI) if return_center else d


def empirical_distance_to_density(mu: EmpiricalMeasure, coefficients) -> float:
    """Exact ``||mu - p||_{-1}`` (unweighted) for a band-limited density ``p``.

    ``coefficients`` are ``c_k = (1/2pi) int p e^{-ik theta}`` for
    ``k = 0..M`` (``c_0`` is ignored); the empirical side is summed in closed
    form, so no grid enters.
    """
    c = np.asarray(coefficients, dtype=complex)
    M = c.size - 1
    m = np.arange(1, M + 1)
    A = np.conj(fourier_moments(mu, M)) / (TWO_PI * 1j * m)
    B = c[1:] / (1j * m)
    sq = _empirical_energy(mu) + 2.0 * TWO_PI * float(np.sum(np.abs(B) ** 2 - 2.0 * np.real(np.conj(A) * B)))
    return math.sqrt(max(sq, 0.0))


def distance_to_projection(mu: MeasureLike, K, guess: float | None = None,
                           grid: CircleGrid | None = None) -> float:
    """``||mu - q_{p(mu)}||_{-1}`` (unweighted) with ``p`` the weighted projection."""
    grid = grid or CircleGrid()
    psi = project_to_manifold(mu, K, guess=guess, grid=grid)
    return math.sqrt(_DistanceObjective.build(mu, _profile(K), grid).exact(psi))
