"""Fourier-Galerkin solver for the nonlocal Fokker-Planck equation

    d_t p = (1/2) p'' - ((J * p) p)',    J(theta) = -K sin(theta).

With ``p = sum_k c_k e^{ik theta}`` the convolution only sees the first mode,
``J * p = i pi K (c_1 e^{i theta} - c_{-1} e^{-i theta})``, and the equation
becomes the banded system

    dc_k/dt = -(k^2/2) c_k + pi K k (c_1 c_{k-1} - conj(c_1) c_{k+1}),

closed by ``c_{M+1} = 0``.  Only ``k = 0..M`` is stored (``c_{-k} = conj(c_k)``)
and ``c_0 = 1/2pi`` never changes.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .hilbert import CircleGrid, dist_to_manifold
from .stationary import TWO_PI, StationaryProfile

__all__ = [
    "FourierDensity",
    "BlowUpError",
    "NegativeDensityWarning",
    "rhs",
    "rhs_pseudospectral",
    "evolve",
    "trajectory",
    "free_energy",
    "density_on_grid",
    "PDETrajectory",
]

BLOWUP_LIMIT = 10.0
NEGATIVITY_TOL = 1e-8


class BlowUpError(RuntimeError):
    """A Fourier coefficient exceeded the blow-up limit during time stepping."""


class NegativeDensityWarning(RuntimeWarning):
    """Reconstructed density dipped below the ringing tolerance."""


@dataclass(frozen=True)
class FourierDensity:
    """Coefficients ``c_k = (1/2pi) int p e^{-ik theta}``, ``k = 0..M``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("need coefficients c_0..c_M with M >= 1")
        if abs(c[0] - 1.0 / TWO_PI) > 1e-12:
            raise ValueError(f"c_0 must be 1/2pi for a probability density, got {c[0]!r}")
        c[0] = 1.0 / TWO_PI
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def M(self) -> int:
        return self.coefficients.size - 1

    @property
    def c1(self) -> complex:
        return complex(self.coefficients[1])

    @classmethod
    def uniform(cls, M: int = 64) -> "FourierDensity":
        c = np.zeros(M + 1, dtype=complex)
        c[0] = 1.0 / TWO_PI
        return cls(c)

    @classmethod
    def from_profile(cls, profile: StationaryProfile, M: int = 64) -> "FourierDensity":
        return cls(profile.fourier_coefficients(M))

    @classmethod
    def from_function(cls, density: Callable, M: int = 64, n_points: int | None = None) -> "FourierDensity":
        """Project a density onto modes ``0..M`` by the FFT of its samples."""
        n = n_points or max(1024, 4 * M)
        theta = TWO_PI * np.arange(n) / n
        coef = np.fft.fft(np.asarray(density(theta), dtype=float))[: M + 1] / n
        mass = TWO_PI * coef[0].real
        if abs(mass - 1.0) > 1e-8:
            raise ValueError(f"density is not normalized: integral {mass:.12g}")
        coef[0] = 1.0 / TWO_PI
        return cls(coef)

    def rotated(self, c: float) -> "FourierDensity":
        k = np.arange(self.M + 1)
        return FourierDensity(self.coefficients * np.exp(-1j * k * c))

    def __call__(self, theta):
        return density_on_grid(self, theta)


def density_on_grid(c: FourierDensity, grid) -> np.ndarray:
    """``p(theta) = c_0 + 2 Re sum_{k>=1} c_k e^{ik theta}`` at the grid nodes.

    ``grid`` is a :class:`CircleGrid`, an integer number of nodes or an array
    of angles.  Uniform grids with at least ``2M + 1`` nodes use the FFT.
    """
    coef = c.coefficients
    if isinstance(grid, CircleGrid):
        grid = grid.n_points
    if isinstance(grid, (int, np.integer)):
        n = int(grid)
        if n > 2 * c.M:
            full = np.zeros(n, dtype=complex)
            full[: c.M + 1] = coef
            full[n - c.M:] = np.conj(coef[1:][::-1])
            return np.real(np.fft.ifft(full)) * n
        grid = TWO_PI * np.arange(n) / n
    theta = np.asarray(grid, dtype=float)
    k = np.arange(1, c.M + 1)
    return coef[0].real + 2.0 * np.real(np.exp(1j * np.multiply.outer(theta, k)) @ coef[1:])


def _rhs_array(c: np.ndarray, K: float) -> np.ndarray:
    M = c.size - 1
    k = np.arange(M + 1)
    up = np.zeros(M + 1, dtype=complex)
    up[:M] = c[1:]
    down = np.zeros(M + 1, dtype=complex)
    down[1:] = c[:M]
    out = math.pi * K * k * (c[1] * down - np.conj(c[1]) * up)
    out -= 0.5 * k * k * c
    out[0] = 0.0
    return out


def rhs(c: FourierDensity, K: float) -> np.ndarray:
    """Mode derivatives ``dc_k/dt`` for ``k = 0..M`` (the ``k = 0`` entry is 0)."""
    return _rhs_array(c.coefficients, K)


def rhs_pseudospectral(c: FourierDensity, K: float, n_points: int = 1024) -> np.ndarray:
    """Same right-hand side via grid products; a slow cross-check of :func:`rhs`."""
    if n_points <= 2 * c.M + 2:
        raise ValueError("grid too coarse for an alias-free product")
    theta = TWO_PI * np.arange(n_points) / n_points
    p = density_on_grid(c, n_points)
    # J * p from its definition, by quadrature of -K sin(theta - theta') p(theta')
    h = TWO_PI / n_points
    s = np.sin(np.subtract.outer(theta, theta))
    conv = -K * h * (s @ p)
    flux = np.fft.fft(conv * p) / n_points
    dens = np.fft.fft(p) / n_points
    k = np.fft.fftfreq(n_points, 1.0 / n_points)
    out = -0.5 * k * k * dens - 1j * k * flux
    return out[: c.M + 1]


@dataclass
class PDETrajectory:
    """Recorded diagnostics along a PDE run."""

    times: np.ndarray
    c1: np.ndarray
    dist: np.ndarray
    free_energy: np.ndarray
    final: FourierDensity

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "re_c1", "im_c1", "dist_to_manifold", "free_energy"])
            for t, z, d, f in zip(self.times, self.c1, self.dist, self.free_energy):
                writer.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag)),
                                 repr(float(d)), repr(float(f))])


def _etd_factors(M: int, dt: float):
    lam = 0.5 * np.arange(M + 1) ** 2
    decay = np.exp(-lam * dt)
    phi1 = np.empty(M + 1)
    phi1[0] = dt
    phi1[1:] = -np.expm1(-lam[1:] * dt) / lam[1:]
    return decay, phi1


def _check_negativity(c: np.ndarray, n: int):
    p = density_on_grid(FourierDensity(c), n)
    low = float(p.min())
    if low < -NEGATIVITY_TOL:
        warnings.warn(f"density minimum {low:.3e} below -{NEGATIVITY_TOL:g}", NegativeDensityWarning,
                      stacklevel=3)


def evolve(c0: FourierDensity, K: float, t_end: float, dt: float = 1e-3,
           callback: Optional[Callable[[float, np.ndarray], None]] = None,
           callback_every: int = 1) -> FourierDensity:
    """Integrate to ``t_end`` with the first-order exponential time differencing scheme.

    ``c <- e^{-L dt} c + (1 - e^{-L dt}) / L * N(c)`` with ``L = k^2/2``: the
    diffusion is exact and the quadratic coupling explicit.  Unlike the plain
    integrating-factor step this keeps every stationary point of the truncated
    system fixed.  Stable while ``pi K M |c_1| dt`` is small; with
    ``|c_1| <= 1/2pi`` the default ``dt = 1e-3`` is fine up to ``K M ~ 10^3``.

    ``callback(t, c)`` is invoked at ``t = 0`` and every ``callback_every`` steps.

    Raises
    ------
    BlowUpError
        If any ``|c_k|`` exceeds 10.
    """
    n = t_end / dt
    n_steps = int(round(n))
    if abs(n - n_steps) > 1e-9 * max(1.0, n):
        raise ValueError("t_end / dt must be an integer")
    c = np.array(c0.coefficients)
    decay, phi1 = _etd_factors(c0.M, dt)
    if callback is not None:
        callback(0.0, c.copy())
    for i in range(1, n_steps + 1):
        nonlin = _rhs_array(c, K) + 0.5 * np.arange(c.size) ** 2 * c
        c = decay * c + phi1 * nonlin
        c[0] = 1.0 / TWO_PI
        if not np.all(np.abs(c) <= BLOWUP_LIMIT):
            k = int(np.argmax(~(np.abs(c) <= BLOWUP_LIMIT)))
            raise BlowUpError(f"|c_{k}| = {abs(c[k]):.3e} at t = {i * dt:.6g}; reduce dt or M")
        if callback is not None and i % callback_every == 0:
            callback(i * dt, c.copy())
    _check_negativity(c, max(256, 4 * c0.M))
    return FourierDensity(c)


def free_energy(c: FourierDensity, K: float, n_points: int | None = None) -> float:
    """``(1/2) int p log p - (K/2) int int p(theta) cos(theta - theta') p(theta')``.

    The interaction term equals ``(K/2) (2pi)^2 |c_1|^2``.
    """
    n = n_points or max(256, 8 * c.M)
    p = density_on_grid(c, n)
    if np.any(p <= 0):
        raise ValueError(f"free energy needs a positive density (minimum {p.min():.3e})")
    entropy = 0.5 * TWO_PI * np.mean(p * np.log(p))
    return float(entropy - 0.5 * K * TWO_PI**2 * abs(c.coefficients[1]) ** 2)


def trajectory(c0: FourierDensity, K: float, t_end: float, dt: float = 1e-3,
               record_every: int = 100, grid: CircleGrid | None = None,
               with_distance: bool = True) -> PDETrajectory:
    """Evolve and record ``(t, c_1, dist_to_manifold, free_energy)``."""
    grid = grid or CircleGrid()
    rows = []

    def record(t, c):
        dens = FourierDensity(c)
        d = dist_to_manifold(density_on_grid(dens, grid), K, grid) if with_distance else float("nan")
        rows.append((t, c[1], d, free_energy(dens, K)))

    final = evolve(c0, K, t_end, dt, callback=record, callback_every=record_every)
    t, c1, d, f = (np.array(col) for col in zip(*rows))
    return PDETrajectory(t, c1, d, f, final)
