"""Statistical experiments on the rotator system.

* :func:`phase_diffusion_experiment` -- the synchronization center, observed
  on the time scale ``N``, should diffuse with coefficient ``D_K``;
* :func:`fluctuation_scaling` -- distance of the empirical measure to the
  stationary manifold scales like ``N^{-1/2}``;
* :func:`sde_pde_gap` -- empirical measure vs the deterministic PDE solution
  from matched initial data;
* :func:`pde_approach` -- deterministic approach to the manifold and its
  exponential rate;
* :func:`emergence_from_U` -- where the center lands when synchrony emerges
  from the flat state.

Every function returns a dataclass with ``to_dict()`` for JSON output; the
numbers depend only on the arguments (seed included), never on ``threads``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import pde, spectral
from .hilbert import (EmpiricalMeasure, ProjectionError, distance_to_projection,
                      empirical_distance_to_density, project_to_manifold)
from .sde import PhaseEnsemble, SimConfig, UnwrapWarning, make_rng, run_paths, sample_initial
from .stationary import TWO_PI, diffusion_coefficient, solve_sync_degree

__all__ = [
    "DiffusionEstimate",
    "ScalingResult",
    "GapResult",
    "ApproachResult",
    "EmergenceResult",
    "DesynchronizationError",
    "phase_diffusion_experiment",
    "fluctuation_scaling",
    "sde_pde_gap",
    "pde_approach",
    "emergence_from_U",
    "rayleigh_test",
    "write_json",
]


class DesynchronizationError(RuntimeError):
    """Too many paths lost synchrony for the estimate to be meaningful."""


def write_json(path, payload: dict) -> None:
    """UTF-8 JSON with sorted keys (byte-stable for identical inputs)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _linear_slope_through(x, y):
    # least squares slope of y - y[0] against x - x[0], line forced through the first point
    dx = x - x[0]
    dy = y - y[0]
    return float(np.dot(dx, dy) / np.dot(dx, dx))


# -- phase diffusion -----------------------------------------------------------

@dataclass
class DiffusionEstimate:
    K: float
    N: int
    tau_f: float
    dt: float
    n_paths: int
    seed: int
    burn_in: float
    slope: float
    stderr: float
    D_hat: float
    target: float
    drift: float
    drift_stderr: float
    r_squared: float
    lag1_autocorrelation: float
    lag1_samples: int
    excluded_paths: int
    tau: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)
    final_displacements: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if not isinstance(v, np.ndarray)}
        out["final_displacements"] = [float(v) for v in self.final_displacements]
        return out

    def write_variance_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "var_psi"])
            for t, v in zip(self.tau, self.variance):
                writer.writerow([repr(float(t)), repr(float(v))])


def _desynchronized(r_values, r_star, run_length=2):
    low = r_values < 0.5 * r_star
    if run_length <= 1:
        return bool(low.any())
    window = np.convolve(low.astype(int), np.ones(run_length, dtype=int), mode="valid")
    return bool(np.any(window >= run_length))


def _variance_fit(tau, X, burn_in):
    var = X.var(axis=0, ddof=1)
    keep = tau >= burn_in - 1e-12
    t, v = tau[keep], var[keep]
    slope = _linear_slope_through(t, v)
    pred = v[0] + slope * (t - t[0])
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum((v - pred) ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return var, slope, r2


def phase_diffusion_experiment(K: float, N: int, tau_f: float = 1.0, dt: float = 1e-3,
                               n_paths: int = 100, seed: int = 0, threads: int = 1,
                               burn_in: float = 0.1, n_records: int = 100,
                               n_bootstrap: int = 1000) -> DiffusionEstimate:
    """Estimate the diffusion coefficient of the synchronization center.

    Each path starts at the quantiles of ``q_0`` and runs for particle time
    ``tau_f * N``; the unwrapped center is recorded at ``n_records`` equally
    spaced rescaled times.  The across-path variance of ``Psi(tau) - Psi(0)``
    is fitted by a line through its value at ``tau = burn_in``; ``D_hat`` is
    the square root of the slope and its standard error comes from a path
    bootstrap.

    Raises
    ------
    DesynchronizationError
        If 1% or more of the paths lose synchrony (``r_N < r/2`` at two
        consecutive records).
    """
    if not K > 1.0:
        raise ValueError("phase diffusion needs K > 1")
    if n_paths < 2:
        raise ValueError("need at least two paths")
    t_end = tau_f * N
    n_steps = int(round(t_end / dt))
    if n_steps % n_records:
        raise ValueError(f"{n_steps} steps cannot be split into {n_records} records")
    if np.count_nonzero(np.arange(n_records + 1) * tau_f / n_records >= burn_in - 1e-12) < 3:
        raise ValueError(f"need at least 3 records after the burn-in tau = {burn_in}")
    config = SimConfig(K=K, N=N, t_end=t_end, dt=dt, seed=seed, record_stride=n_steps // n_records)
    initial = sample_initial("quantiles_of_q", N, K=K)
    tracks = run_paths(config, initial, n_paths, threads=threads)
    r_star = solve_sync_degree(K)
    good = [tr for tr in tracks if not _desynchronized(tr.r_values, r_star)]
    excluded = n_paths - len(good)
    if excluded and excluded >= 0.01 * n_paths:
        raise DesynchronizationError(f"{excluded} of {n_paths} paths desynchronized")
    tau = tracks[0].times / N
    X = np.array([tr.psi_unwrapped - tr.psi_unwrapped[0] for tr in good])
    var, slope, r2 = _variance_fit(tau, X, burn_in)

    rng = make_rng(np.random.SeedSequence([int(seed), 1]))
    boot = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        sample = X[rng.integers(0, X.shape[0], X.shape[0])]
        _, s, _ = _variance_fit(tau, sample, burn_in)
        boot[b] = math.sqrt(max(s, 0.0))
    final = X[:, -1]

    keep = tau >= burn_in - 1e-12
    inc = np.diff(X[:, keep], axis=1)
    a, b = inc[:, :-1].ravel(), inc[:, 1:].ravel()
    a, b = a - a.mean(), b - b.mean()
    lag1 = float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))

    return DiffusionEstimate(
        K=float(K), N=int(N), tau_f=float(tau_f), dt=float(dt), n_paths=int(n_paths), seed=int(seed),
        burn_in=float(burn_in), slope=slope, stderr=float(boot.std(ddof=1)),
        D_hat=math.sqrt(max(slope, 0.0)), target=diffusion_coefficient(K),
        drift=float(final.mean()), drift_stderr=float(final.std(ddof=1) / math.sqrt(final.size)),
        r_squared=r2, lag1_autocorrelation=lag1, lag1_samples=int(a.size), excluded_paths=int(excluded),
        tau=tau, variance=var, final_displacements=final)


# -- fluctuation scaling --------------------------------------------------------

@dataclass
class ScalingResult:
    K: float
    t_fixed: float
    dt: float
    n_paths: int
    seed: int
    N_values: list
    mean_distance: list
    stderr: list
    slope: float
    intercept: float

    def to_dict(self) -> dict:
        return asdict(self)


def fluctuation_scaling(K: float, t_fixed: float = 5.0, N_list: Sequence[int] = (250, 500, 1000, 2000, 4000),
                        n_paths: int = 20, seed: int = 0, threads: int = 1, dt: float = 1e-3) -> ScalingResult:
    """Mean ``||mu_{N,t} - q_{p(mu_{N,t})}||_{-1}`` at ``t_fixed`` against ``N``.

    Paths start at the quantiles of ``q_0`` (distance ``O(1/N)``) and are
    observed once the fluctuations have equilibrated; the log-log slope is
    fitted by least squares.
    """
    means, errs = [], []
    for i, N in enumerate(N_list):
        config = SimConfig(K=K, N=int(N), t_end=t_fixed, dt=dt, seed=int(seed) + i,
                           record_stride=max(1, int(round(t_fixed / dt)) // 10))
        tracks = run_paths(config, sample_initial("quantiles_of_q", int(N), K=K), n_paths, threads=threads)
        d = np.array([distance_to_projection(EmpiricalMeasure(tr.final.phases), K,
                                             guess=float(tr.psi_unwrapped[-1])) for tr in tracks])
        means.append(float(d.mean()))
        errs.append(float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else float("nan"))
    slope, intercept = np.polyfit(np.log(np.asarray(N_list, dtype=float)), np.log(means), 1)
    return ScalingResult(float(K), float(t_fixed), float(dt), int(n_paths), int(seed),
                         [int(n) for n in N_list], means, errs, float(slope), float(intercept))


# -- SDE vs PDE -------------------------------------------------------------------

def default_initial_density(theta):
    """A generic smooth density outside the unstable set."""
    theta = np.asarray(theta, dtype=float)
    return (1.0 + 0.3 * np.cos(theta - 1.0) + 0.2 * np.sin(2.0 * theta)
            + 0.3 * np.cos(3.0 * theta + 0.5)) / TWO_PI


@dataclass
class GapResult:
    K: float
    N: int
    t: float
    dt: float
    n_paths: int
    seed: int
    distances: list
    mean_distance: float
    max_distance: float
    scaled_max: float  # max_distance * sqrt(N)

    def to_dict(self) -> dict:
        return asdict(self)


def _quantiles_of_density(density, N, n_table=8192):
    theta = TWO_PI * np.arange(n_table + 1) / n_table
    p = density(theta)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(theta))])
    levels = (np.arange(1, N + 1) - 0.5) / N
    return np.interp(levels * cdf[-1], cdf, theta)


def sde_pde_gap(K: float, N: int, t: float = 1.0, n_paths: int = 10, seed: int = 0, threads: int = 1,
                dt: float = 1e-3, density: Callable = default_initial_density, M: int = 64) -> GapResult:
    """``||mu_{N,t} - p_t||_{-1}`` with ``mu_{N,0}`` at the quantiles of ``p_0``."""
    p0 = pde.FourierDensity.from_function(density, M)
    pt = pde.evolve(p0, K, t, dt)
    phases = _quantiles_of_density(density, N)
    config = SimConfig(K=K, N=N, t_end=t, dt=dt, seed=seed, record_stride=max(1, int(round(t / dt))))
    tracks = run_paths(config, PhaseEnsemble(phases), n_paths, threads=threads)
    d = [empirical_distance_to_density(EmpiricalMeasure(tr.final.phases), pt.coefficients) for tr in tracks]
    return GapResult(float(K), int(N), float(t), float(dt), int(n_paths), int(seed), [float(x) for x in d],
                     float(np.mean(d)), float(np.max(d)), float(np.max(d) * math.sqrt(N)))


# -- deterministic approach to the manifold ----------------------------------------

@dataclass
class ApproachResult:
    K: float
    t_end: float
    dt: float
    tolerance: float
    approach_time: float  # first recorded time with distance below tolerance
    rate: float           # fitted exponential decay rate of the distance
    spectral_gap: float
    final_distance: float
    free_energy_max_increase: float
    trajectory: pde.PDETrajectory = field(repr=False)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "trajectory"}


def pde_approach(K: float, density: Callable = default_initial_density, t_end: float = 30.0,
                 dt: float = 1e-3, record_every: int = 100, tolerance: float = 1e-6,
                 fit_window: tuple = (1e-8, 1e-4), M: int = 64) -> ApproachResult:
    """Run the PDE from ``density`` and measure how it approaches the manifold.

    The rate is the least-squares slope of ``log dist`` over the records with
    distance inside ``fit_window``; it is compared with the spectral gap of
    the linearization at the limit profile.
    """
    p0 = pde.FourierDensity.from_function(density, M)
    traj = pde.trajectory(p0, K, t_end, dt, record_every=record_every)
    below = np.flatnonzero(traj.dist < tolerance)
    t_star = float(traj.times[below[0]]) if below.size else float("nan")
    lo, hi = fit_window
    sel = (traj.dist > lo) & (traj.dist < hi)
    rate = float(-np.polyfit(traj.times[sel], np.log(traj.dist[sel]), 1)[0]) if sel.sum() >= 3 else float("nan")
    gap = float(spectral.eigensolve(spectral.assemble(K, M)).eigenvalues[1])
    dF = float(np.max(np.diff(traj.free_energy))) if traj.free_energy.size > 1 else 0.0
    return ApproachResult(float(K), float(t_end), float(dt), float(tolerance), t_star, rate, gap,
                          float(traj.dist[-1]), dF, traj)


# -- emergence from the unstable set ----------------------------------------------

def rayleigh_test(angles) -> tuple[float, float]:
    """Rayleigh statistic ``Z = n R^2`` and its p-value for circular uniformity.

    Uses the second-order small-sample correction of the ``exp(-Z)`` tail.
    """
    angles = np.asarray(angles, dtype=float)
    n = angles.size
    if n < 2:
        raise ValueError("need at least two angles")
    R = abs(np.mean(np.exp(1j * angles)))
    Z = n * R * R
    p = math.exp(-Z) * (1.0 + (2.0 * Z - Z * Z) / (4.0 * n)
                        - (24.0 * Z - 132.0 * Z**2 + 76.0 * Z**3 - 9.0 * Z**4) / (288.0 * n * n))
    return float(Z), float(min(max(p, 0.0), 1.0))


@dataclass
class EmergenceResult:
    K: float
    N: int
    n_paths: int
    seed: int
    dt: float
    threshold: float
    timeout: float
    centers: list       # psi at the hitting time, in [0, 2pi); timed-out paths omitted
    hit_times: list
    timeouts: int
    rayleigh_z: float
    rayleigh_p: float
    histogram: list
    bin_edges: list

    def to_dict(self) -> dict:
        return asdict(self)


def emergence_from_U(K: float, N: int, n_paths: int = 200, seed: int = 0, threads: int = 1,
                     dt: float = 1e-3, offset: float = 0.0, n_bins: int = 12) -> EmergenceResult:
    """Start equally spaced (plus ``offset``), stop when ``r_N`` first reaches ``r/2``.

    The center at that time is the projection onto the manifold (the order
    parameter argument when the projection is undefined).  Paths still below
    the threshold at ``t = 20 log N`` count as timeouts.
    """
    r_star = solve_sync_degree(K)
    if r_star == 0.0:
        raise ValueError("no synchronized state for K <= 1")
    threshold = 0.5 * r_star
    timeout = math.floor(20.0 * math.log(N) / dt) * dt
    config = SimConfig(K=K, N=N, t_end=timeout, dt=dt, seed=seed,
                       record_stride=max(1, int(round(timeout / dt))))
    initial = sample_initial("equally_spaced", N, psi=offset)
    with warnings.catch_warnings():
        # the center of an almost flat configuration jumps around by design
        warnings.simplefilter("ignore", UnwrapWarning)
        results = run_paths(config, initial, n_paths, threads=threads, threshold=threshold)
    centers, times = [], []
    for hit, track in results:
        if not np.isfinite(hit):
            continue
        mu = EmpiricalMeasure(track.final.phases)
        try:
            psi = project_to_manifold(mu, K)
        except ProjectionError:
            psi = float(np.angle(np.mean(np.exp(1j * mu.atoms))) % TWO_PI)
        centers.append(float(psi))
        times.append(float(hit))
    timeouts = n_paths - len(centers)
    z, p = rayleigh_test(centers) if len(centers) >= 2 else (float("nan"), float("nan"))
    hist, edges = np.histogram(np.asarray(centers), bins=n_bins, range=(0.0, TWO_PI))
    return EmergenceResult(float(K), int(N), int(n_paths), int(seed), float(dt), float(threshold),
                           float(timeout), centers, times, int(timeouts), z, p,
                           [int(h) for h in hist], [float(e) for e in edges])
