"""Langevin simulator for N mean-field plane rotators.

    d phi_j = -K r_N sin(phi_j - Psi_N) dt + dW_j

The coupling enters only through the complex order parameter
``r_N e^{i Psi_N} = (1/N) sum e^{i phi_j}``, so a step costs O(N).

Random numbers come from numpy's ``PCG64DXSM`` bit generator: one standard
normal per particle per step, drawn in particle order.  Independent paths get
independent streams spawned from a :class:`numpy.random.SeedSequence`, so a
batch of paths gives the same output whatever the number of worker threads.

The compiled kernel keeps ``cos phi_j`` and ``sin phi_j`` alongside the phases
and rotates them by each step's increment with a short Taylor polynomial
instead of calling the libm trig functions; they are re-synchronised from the
phases every 256 steps and after any large increment.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .stationary import TWO_PI, StationaryProfile

__all__ = [
    "SimConfig",
    "PhaseEnsemble",
    "PhaseTrack",
    "UnwrapWarning",
    "make_rng",
    "spawn_rngs",
    "drift",
    "step",
    "sample_initial",
    "run",
    "run_until",
    "run_paths",
]

UNWRAP_LIMIT = 0.5 * math.pi
RESYNC_MASK = 255
TAYLOR_RADIUS = 0.3


class UnwrapWarning(RuntimeWarning):
    """A recorded increment of Psi_N reached pi/2: the record stride is too coarse."""


@dataclass(frozen=True)
class SimConfig:
    K: float
    N: int
    t_end: float
    dt: float = 1e-3
    seed: int = 0
    record_stride: int = 1
    noise: bool = True  # diagnostic switch: False gives the deterministic drift flow

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"t_end / dt = {n} is not an integer step count")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class PhaseEnsemble:
    """Rotator angles in ``[0, 2pi)`` and the simulation clock."""

    phases: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.phases = np.mod(np.asarray(self.phases, dtype=float).ravel(), TWO_PI)

    @property
    def N(self) -> int:
        return self.phases.size

    def rotated(self, c: float) -> "PhaseEnsemble":
        return PhaseEnsemble(self.phases + c, self.t)


@dataclass
class PhaseTrack:
    """Recorded ``(t, r_N, Psi_N)`` with a continuous lift of ``Psi_N``."""

    times: np.ndarray
    r_values: np.ndarray
    psi_unwrapped: np.ndarray
    final: Optional[PhaseEnsemble] = field(default=None, repr=False)

    def max_increment(self) -> float:
        if self.psi_unwrapped.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.psi_unwrapped))))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "r", "psi_unwrapped"])
            for row in zip(self.times, self.r_values, self.psi_unwrapped):
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "PhaseTrack":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def make_rng(seed) -> np.random.Generator:
    """``PCG64DXSM`` generator seeded through a SeedSequence (or taken as given)."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64DXSM(ss))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-path generators; path ``i`` depends only on ``(seed, i)``."""
    return [make_rng(ss) for ss in np.random.SeedSequence(int(seed)).spawn(n)]


# -- reference (numpy) implementation -----------------------------------------

def drift(phases, K: float) -> np.ndarray:
    """``-K r_N sin(phi_j - Psi_N)`` through the complex mean.

    Written as ``K (Im z cos phi_j - Re z sin phi_j)`` so that ``r_N = 0``
    needs no special case.
    """
    phases = np.asarray(phases, dtype=float)
    c, s = np.cos(phases), np.sin(phases)
    zr, zi = c.mean(), s.mean()
    return K * (zi * c - zr * s)


def step(ensemble: PhaseEnsemble, config: SimConfig, rng: np.random.Generator) -> PhaseEnsemble:
    """One Euler-Maruyama step (reference implementation, not the fast path)."""
    phi = ensemble.phases
    incr = drift(phi, config.K) * config.dt
    if config.noise:
        incr = incr + math.sqrt(config.dt) * rng.standard_normal(phi.size)
    return PhaseEnsemble(phi + incr, ensemble.t + config.dt)


# -- initial data --------------------------------------------------------------

def _invert_profile_cdf(profile: StationaryProfile, levels: np.ndarray) -> np.ndarray:
    # the CDF from psi - pi is increasing on (-pi, pi); bisection is plenty fast
    centered = StationaryProfile(profile.K, profile.r, 0.0)
    base = centered.primitive(-math.pi)
    lo = np.full(levels.shape, -math.pi)
    hi = np.full(levels.shape, math.pi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = centered.primitive(mid) - base < levels
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.mod(0.5 * (lo + hi) + profile.psi, TWO_PI)


def _tabulated_inverse_cdf(density, u, n_table=8192):
    theta = TWO_PI * np.arange(n_table + 1) / n_table
    p = np.asarray(density(theta) if callable(density) else density, dtype=float)
    if p.shape != theta.shape:
        raise ValueError(f"density table must have {n_table + 1} values on [0, 2pi]")
    if np.any(p < 0):
        raise ValueError("density must be non-negative")
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(theta))])
    mass = cdf[-1]
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"density is not normalized: integral {mass:.12g}")
    return np.interp(u * mass, cdf, theta)


def sample_initial(kind: str, N: int, rng=None, *, K: float | None = None, psi: float = 0.0,
                   density: Callable | StationaryProfile | None = None) -> PhaseEnsemble:
    """Initial rotator configuration.

    ``kind`` is one of

    * ``"equally_spaced"``: ``2 pi j / N``, ``j = 0..N-1`` (plus ``psi``);
    * ``"quantiles_of_q"``: particle ``j`` at the ``(j - 1/2)/N`` quantile of
      ``q_psi`` for coupling ``K`` (deterministic);
    * ``"iid_density"``: independent draws from ``density`` (a callable or a
      :class:`StationaryProfile`) by inverse-CDF sampling; needs ``rng``.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if kind == "equally_spaced":
        return PhaseEnsemble(TWO_PI * np.arange(N) / N + psi)
    if kind == "quantiles_of_q":
        if K is None:
            raise ValueError("quantiles_of_q needs K")
        profile = StationaryProfile.from_coupling(K, psi)
        levels = (np.arange(1, N + 1) - 0.5) / N
        if profile.r == 0.0:
            return PhaseEnsemble(TWO_PI * levels - math.pi + psi)
        return PhaseEnsemble(_invert_profile_cdf(profile, levels))
    if kind == "iid_density":
        if rng is None:
            raise ValueError("iid_density needs a random generator")
        if density is None:
            if K is None:
                raise ValueError("iid_density needs a density or K")
            density = StationaryProfile.from_coupling(K, psi)
        u = rng.random(N)
        if isinstance(density, StationaryProfile):
            if density.r == 0.0:
                return PhaseEnsemble(TWO_PI * u)
            return PhaseEnsemble(_invert_profile_cdf(density, u))
        return PhaseEnsemble(_tabulated_inverse_cdf(density, u))
    raise ValueError(f"unknown initial condition kind {kind!r}")


# -- compiled kernel -------------------------------------------------------------

@numba.njit(fastmath=True, cache=True)
def _advance(phi, c, s, d, a, b, sq):
    # d holds the normals on entry and the increments on exit
    twopi = 2.0 * np.pi
    inv = 1.0 / twopi
    for j in range(phi.size):
        inc = (a * c[j] - b * s[j]) + sq * d[j]
        p = phi[j] + inc
        phi[j] = p - twopi * np.floor(p * inv)
        x2 = inc * inc
        sd = inc * (1.0 + x2 * (-1.0 / 6 + x2 * (1.0 / 120 + x2 * (-1.0 / 5040 + x2 * (
            1.0 / 362880 + x2 * (-1.0 / 39916800 + x2 * (1.0 / 6227020800)))))))
        cd = 1.0 + x2 * (-0.5 + x2 * (1.0 / 24 + x2 * (-1.0 / 720 + x2 * (1.0 / 40320 + x2 * (
            -1.0 / 3628800 + x2 * (1.0 / 479001600 + x2 * (-1.0 / 87178291200)))))))
        cj = c[j]
        sj = s[j]
        c[j] = cj * cd - sj * sd
        s[j] = sj * cd + cj * sd
        d[j] = inc


@numba.njit(cache=True)
def _repair(phi, c, s, d, radius):
    for j in range(phi.size):
        if abs(d[j]) >= radius:
            c[j] = np.cos(phi[j])
            s[j] = np.sin(phi[j])


@numba.njit(nogil=True, cache=True)
def _kernel(gen, phi, K, dt, n_steps, stride, sq, threshold, rec):
    """Advance ``phi`` in place; returns the number of steps taken.

    ``rec[m] = (t, r, psi_unwrapped)`` at steps ``m * stride``.  Stops early
    after the first step whose ``r_N`` reaches ``threshold``, recording it.
    """
    N = phi.size
    c = np.cos(phi)
    s = np.sin(phi)
    d = np.zeros(N)
    zr = 0.0
    zi = 0.0
    for j in range(N):
        zr += c[j]
        zi += s[j]
    zr /= N
    zi /= N
    psi_prev = np.arctan2(zi, zr)
    lift = psi_prev
    rec[0, 0] = 0.0
    rec[0, 1] = np.sqrt(zr * zr + zi * zi)
    rec[0, 2] = lift
    m = 1
    if rec[0, 1] >= threshold:
        return 0, m
    for t in range(1, n_steps + 1):
        if sq != 0.0:
            for j in range(N):
                d[j] = gen.standard_normal()
        _advance(phi, c, s, d, K * zi * dt, K * zr * dt, sq)
        if (t & RESYNC_MASK) == 0:
            for j in range(N):
                c[j] = np.cos(phi[j])
                s[j] = np.sin(phi[j])
        else:
            _repair(phi, c, s, d, TAYLOR_RADIUS)
        zr = 0.0
        zi = 0.0
        for j in range(N):
            zr += c[j]
            zi += s[j]
        zr /= N
        zi /= N
        psi = np.arctan2(zi, zr)
        inc = psi - psi_prev
        inc -= 2.0 * np.pi * np.floor((inc + np.pi) / (2.0 * np.pi))
        lift += inc
        psi_prev = psi
        r = np.sqrt(zr * zr + zi * zi)
        hit = r >= threshold
        if t % stride == 0 or hit:
            if m < rec.shape[0]:
                rec[m, 0] = t * dt
                rec[m, 1] = r
                rec[m, 2] = lift
            m += 1
        if hit:
            return t, m
    return n_steps, m


def _simulate(config: SimConfig, initial: PhaseEnsemble, rng, threshold: float) -> tuple[PhaseTrack, int]:
    if initial.N != config.N:
        raise ValueError(f"initial ensemble has {initial.N} rotators, config says N={config.N}")
    gen = make_rng(config.seed if rng is None else rng)
    phi = initial.phases.copy()
    n_steps = config.n_steps
    rec = np.empty((n_steps // config.record_stride + 2, 3))
    sq = math.sqrt(config.dt) if config.noise else 0.0
    taken, m = _kernel(gen, phi, float(config.K), float(config.dt), n_steps,
                       int(config.record_stride), sq, float(threshold), rec)
    rec = rec[:m]
    track = PhaseTrack(initial.t + rec[:, 0], rec[:, 1], rec[:, 2],
                       PhaseEnsemble(phi, initial.t + taken * config.dt))
    inc = track.max_increment()
    if inc >= UNWRAP_LIMIT:
        warnings.warn(f"recorded Psi_N increment {inc:.3f} >= pi/2; reduce record_stride",
                      UnwrapWarning, stacklevel=3)
    return track, taken


def run(config: SimConfig, initial: PhaseEnsemble, rng=None) -> PhaseTrack:
    """Simulate up to ``t_end``; the final configuration is in ``track.final``.

    The lift of ``Psi_N`` is accumulated at every step (increments of the
    argument shifted into ``[-pi, pi)``), so it is valid for any record
    stride; an :class:`UnwrapWarning` is still raised when a recorded
    increment reaches pi/2.  ``rng`` defaults to ``make_rng(config.seed)``.
    """
    return _simulate(config, initial, rng, math.inf)[0]


def run_until(config: SimConfig, initial: PhaseEnsemble, threshold: float, rng=None):
    """Simulate until ``r_N >= threshold`` or ``t_end``.

    Returns ``(hit_time, track)`` with ``hit_time = nan`` on timeout; the
    configuration at the stopping time is ``track.final``.
    """
    track, taken = _simulate(config, initial, rng, threshold)
    hit = track.r_values[-1] >= threshold
    return (float(track.final.t) if hit else float("nan")), track


def run_paths(config: SimConfig, initial: PhaseEnsemble | Sequence[PhaseEnsemble],
              n_paths: int, threads: int = 1, threshold: float | None = None) -> list:
    """Run ``n_paths`` independent copies with streams spawned from ``config.seed``.

    Results are in path order and do not depend on ``threads``.  With a
    ``threshold`` each entry is ``(hit_time, track)`` as in :func:`run_until`.
    """
    rngs = spawn_rngs(config.seed, n_paths)
    inits = list(initial) if isinstance(initial, (list, tuple)) else [initial] * n_paths
    if len(inits) != n_paths:
        raise ValueError("need one initial ensemble per path")

    def one(i):
        if threshold is None:
            return run(config, inits[i], rngs[i])
        return run_until(config, inits[i], threshold, rngs[i])

    if threads <= 1:
        return [one(i) for i in range(n_paths)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n_paths)))
