"""Spectrum of the linearized operator at a stationary profile.

    L_q u = (1/2) u'' - [u J*q + q J*u]'

is self-adjoint in ``H_{-1,1/q}``.  It is discretized by a Ritz-Galerkin
method on the real Fourier basis ``cos k theta, sin k theta`` (``k = 1..M``),
which excludes constants exactly and makes ``J * u`` touch only ``k = 1``.
With ``Phi_i`` the centered primitives of the basis functions,

    G_ij = int Phi_i Phi_j / q,          S_ij = int Phi_i P_j / q,

where ``P_j = (1/2) phi_j' - phi_j J*q - q J*phi_j`` is a primitive of
``L_q phi_j``.  The eigenpairs of ``-L_q`` solve the symmetric pencil
``-S v = lambda G v``.  For ``psi = 0`` the cosine (even) and sine (odd)
blocks decouple and are solved separately, so the nearly degenerate pairs
of the high spectrum never mix parities.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .hilbert import CircleGrid, HMinusOneElement
from .stationary import StationaryProfile

__all__ = [
    "OperatorAssembly",
    "SpectralDecomposition",
    "AssemblyError",
    "assemble",
    "eigensolve",
    "adjoint_eigenfunctions",
    "complex_mode_matrix",
    "index_offset",
    "stated_constant",
    "potential_mean",
    "asymptotics_report",
    "semigroup_apply",
    "write_spectrum_csv",
    "write_eigenfunctions_csv",
]

EVEN, ODD = "even", "odd"


class AssemblyError(RuntimeError):
    """The Gram matrix is not numerically positive definite."""


def _spectral_primitive(values, n):
    # periodic primitive of mean-zero grid data (any additive constant)
    coef = np.fft.rfft(values, axis=0)
    k = np.arange(coef.shape[0])
    coef[1:] /= (1j * k[1:])[:, None] if coef.ndim == 2 else 1j * k[1:]
    coef[0] = 0.0
    if n % 2 == 0:
        coef[-1] = 0.0
    return np.fft.irfft(coef, n, axis=0)


@dataclass(frozen=True)
class OperatorAssembly:
    """Galerkin matrices of ``L_q`` and of the ``H_{-1,1/q}`` Gram form."""

    K: float
    M: int
    profile: StationaryProfile
    grid: CircleGrid
    modes: np.ndarray = field(repr=False)      # k for each basis function
    kinds: np.ndarray = field(repr=False)      # 0 = cos, 1 = sin
    stiffness: np.ndarray = field(repr=False)  # S_ij = (phi_i, L phi_j)
    gram: np.ndarray = field(repr=False)       # G_ij = (phi_i, phi_j)

    @property
    def psi(self) -> float:
        return self.profile.psi

    def symmetry_defect(self) -> float:
        """``||(G^-1 S)^T G - S|| / ||S||``: G-symmetry of the operator matrix."""
        A = linalg.solve(self.gram, self.stiffness, assume_a="pos")
        return float(np.linalg.norm(A.T @ self.gram - self.stiffness) / np.linalg.norm(self.stiffness))

    def basis_values(self, theta=None) -> np.ndarray:
        theta = self.grid.nodes if theta is None else np.asarray(theta)
        arg = np.multiply.outer(theta, self.modes)
        return np.where(self.kinds == 0, np.cos(arg), np.sin(arg))

    def basis_primitives(self, theta=None) -> np.ndarray:
        theta = self.grid.nodes if theta is None else np.asarray(theta)
        arg = np.multiply.outer(theta, self.modes)
        return np.where(self.kinds == 0, np.sin(arg), -np.cos(arg)) / self.modes

    def apply(self, coeffs) -> np.ndarray:
        """Grid values of ``L_q`` applied to the basis combination ``coeffs`` (by its primitive)."""
        P = self._primitive_of_L() @ np.asarray(coeffs)
        return _spectral_derivative(P, self.grid.n_points)

    def _primitive_of_L(self) -> np.ndarray:
        return _primitive_of_L(self.profile, self.grid.nodes, self.modes, self.kinds)


def _spectral_derivative(values, n):
    coef = np.fft.rfft(values, axis=0)
    k = np.arange(coef.shape[0])
    d = 1j * k if coef.ndim == 1 else (1j * k)[:, None]
    coef = coef * d
    if n % 2 == 0:
        coef[-1] = 0.0
    return np.fft.irfft(coef, n, axis=0)


def _primitive_of_L(profile, theta, modes, kinds):
    K, r, psi = profile.K, profile.r, profile.psi
    arg = np.multiply.outer(theta, modes)
    cos, sin = np.cos(arg), np.sin(arg)
    phi = np.where(kinds == 0, cos, sin)
    dphi = np.where(kinds == 0, -sin, cos) * modes
    q = profile(theta)[:, None]
    # J*q = -K r sin(theta - psi); J*cos = -K pi sin, J*sin = K pi cos (mode 1 only)
    jq = (-K * r * np.sin(theta - psi))[:, None]
    ju = np.zeros_like(phi)
    one = modes == 1
    ju[:, one & (kinds == 0)] = (-K * math.pi * np.sin(theta))[:, None]
    ju[:, one & (kinds == 1)] = (K * math.pi * np.cos(theta))[:, None]
    return 0.5 * dphi - phi * jq - q * ju


def assemble(K: float, M: int = 64, psi: float = 0.0, n_grid: int | None = None) -> OperatorAssembly:
    """Galerkin matrices of ``L_{q_psi}`` on modes ``1..M``.

    The quadrature grid has ``max(8M, n_grid)`` nodes; the trapezoid rule is
    then exact up to the (super-exponentially small) tail of ``1/q``.

    Raises
    ------
    ValueError
        For ``K <= 1`` or ``M < 16``.
    AssemblyError
        If ``G`` is not positive definite at this resolution.
    """
    if not K > 1.0:
        raise ValueError(f"the linearization needs K > 1, got {K!r}")
    if M < 16:
        raise ValueError("use at least 16 Fourier modes")
    profile = StationaryProfile.from_coupling(K, psi)
    n = max(8 * M, n_grid or 0)
    n += n % 2
    grid = CircleGrid(n)
    theta = grid.nodes
    modes = np.repeat(np.arange(1, M + 1), 2)
    kinds = np.tile([0, 1], M)
    w = 1.0 / profile(theta)
    Phi = np.where(kinds == 0, np.sin(np.multiply.outer(theta, modes)),
                   -np.cos(np.multiply.outer(theta, modes))) / modes
    Phi = Phi - (w @ Phi) / w.sum()
    P = _primitive_of_L(profile, theta, modes, kinds)
    h = grid.spacing
    G = h * (Phi.T * w) @ Phi
    S = h * (Phi.T * w) @ P
    G = 0.5 * (G + G.T)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"Gram matrix lost positive definiteness on {n} nodes") from exc
    return OperatorAssembly(float(K), M, profile, grid, modes, kinds, S, G)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of ``-L_q`` with grid values.

    ``coeffs[:, j]`` are the basis coefficients of ``e_j`` (G-orthonormal);
    ``values``, ``primitives`` (centered for the weight ``1/q``),
    ``adjoint`` and ``adjoint_derivative`` are grid samples, one column per
    eigenpair.  ``parity`` is ``"even"``/``"odd"`` about ``psi`` or ``None``.
    """

    assembly: OperatorAssembly = field(repr=False)
    eigenvalues: np.ndarray
    coeffs: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    primitives: np.ndarray = field(repr=False)
    adjoint: np.ndarray = field(repr=False)
    adjoint_derivative: np.ndarray = field(repr=False)
    parity: tuple = field(repr=False)

    @property
    def grid(self) -> CircleGrid:
        return self.assembly.grid

    @property
    def profile(self) -> StationaryProfile:
        return self.assembly.profile

    def element(self, j: int) -> HMinusOneElement:
        return HMinusOneElement(self.grid, self.primitives[:, j])

    def biorthogonality(self, n: int | None = None) -> np.ndarray:
        """Matrix ``int f_i e_j`` for ``i, j < n``."""
        n = n or self.eigenvalues.size
        return self.grid.spacing * self.adjoint[:, :n].T @ self.values[:, :n]


def _solve_block(S, G, idx):
    lam, V = linalg.eigh(-S[np.ix_(idx, idx)], G[np.ix_(idx, idx)])
    full = np.zeros((S.shape[0], idx.size))
    full[idx] = V
    return lam, full


def eigensolve(assembly: OperatorAssembly) -> SpectralDecomposition:
    """Generalized symmetric eigenproblem ``-S v = lambda G v``, ascending.

    Signs follow ``e_j(psi) > 0`` for even and ``e_j'(psi) > 0`` for odd
    eigenfunctions (about the center ``psi``); otherwise the first
    non-negligible basis coefficient is made positive.
    """
    S, G = assembly.stiffness, assembly.gram
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(G))):
        raise np.linalg.LinAlgError("non-finite operator matrices")
    if assembly.psi == 0.0:
        parts = [(_solve_block(S, G, np.flatnonzero(assembly.kinds == kind)), label)
                 for kind, label in ((0, EVEN), (1, ODD))]
        lam = np.concatenate([p[0][0] for p in parts])
        V = np.hstack([p[0][1] for p in parts])
        parity = np.array([label for (vals, _), label in parts for _ in vals], dtype=object)
        order = np.argsort(lam, kind="stable")
        lam, V, parity = lam[order], V[:, order], parity[order]
    else:
        try:
            lam, V = linalg.eigh(-S, G)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError(f"pencil solve failed (cond(G) = {np.linalg.cond(G):.3e})") from exc
        parity = np.array([None] * lam.size, dtype=object)

    theta = assembly.grid.nodes
    q = assembly.profile(theta)
    w = 1.0 / q
    values = assembly.basis_values() @ V
    prims = assembly.basis_primitives() @ V
    prims = prims - (w @ prims) / w.sum()

    # sign convention about the center
    arg = assembly.modes * assembly.profile.psi
    at_center = np.where(assembly.kinds == 0, np.cos(arg), np.sin(arg)) @ V
    slope = (np.where(assembly.kinds == 0, -np.sin(arg), np.cos(arg)) * assembly.modes) @ V
    scale = np.maximum(np.abs(V).max(axis=0), 1e-300)
    for j in range(lam.size):
        if parity[j] == EVEN or (parity[j] is None and abs(at_center[j]) > 1e-8 * scale[j]):
            s = at_center[j]
        elif parity[j] == ODD or abs(slope[j]) > 1e-8 * scale[j]:
            s = slope[j]
        else:
            s = V[np.argmax(np.abs(V[:, j])), j]
        if s < 0:
            V[:, j] *= -1
            values[:, j] *= -1
            prims[:, j] *= -1

    f, fprime = _adjoint(prims, q, assembly.grid)
    return SpectralDecomposition(assembly, lam, V, values, prims, f, fprime, tuple(parity))


def _adjoint(prims, q, grid):
    # f' = -E/q with E centered for the weight 1/q, so f' has zero mean
    fprime = -prims / q[:, None]
    f = _spectral_primitive(fprime, grid.n_points)
    f = f - f.mean(axis=0)
    return f, fprime


def adjoint_eigenfunctions(dec: SpectralDecomposition) -> np.ndarray:
    """Grid values of ``f_j`` solving ``-(q f_j')' = e_j`` with ``int f_j = 0``."""
    return dec.adjoint


def complex_mode_matrix(K: float, M: int, r: float | None = None, psi: float = 0.0) -> np.ndarray:
    """Matrix of ``L_q`` on ``e^{ik theta}``, ``k = -M..M``, ``k != 0``.

    ``(L u)_k = -(k^2/2) u_k + pi K k [q_1 u_{k-1} - q_{-1} u_{k+1}
    + q_{k-1} u_1 - q_{k+1} u_{-1}]`` with ``q_k`` the coefficients of the
    profile (``r`` defaults to the solved degree).  An independent oracle.
    """
    r = StationaryProfile.from_coupling(K).r if r is None else r
    prof = StationaryProfile(K, r, psi)
    qpos = prof.fourier_coefficients(M + 1)

    def qc(k):
        return qpos[k] if k >= 0 else np.conj(qpos[-k])

    ks = [k for k in range(-M, M + 1) if k != 0]
    pos = {k: i for i, k in enumerate(ks)}
    A = np.zeros((len(ks), len(ks)), dtype=complex)
    for k in ks:
        i = pos[k]
        A[i, i] += -0.5 * k * k
        for src, coef in ((k - 1, qc(1)), (k + 1, -qc(-1))):
            if src in pos:
                A[i, pos[src]] += math.pi * K * k * coef
        A[i, pos[1]] += math.pi * K * k * qc(k - 1) if abs(k - 1) <= M + 1 else 0.0
        A[i, pos[-1]] += -math.pi * K * k * qc(k + 1) if abs(k + 1) <= M + 1 else 0.0
    return A


def stated_constant(K: float, r: float) -> float:
    """Constant term ``-(Kr)^2/8`` of the high-eigenvalue prediction, as usually quoted."""
    return -((K * r) ** 2) / 8.0


def potential_mean(K: float, r: float) -> float:
    """``(Kr)^2/4``: mean of the potential ``((Kr)^2 sin^2 - Kr cos)/2`` after the
    ``sqrt(q)`` conjugation, which is the constant the computed spectrum
    approaches (``lambda = p^2/2 + (Kr)^2/4 + O(1/p^2)``)."""
    return (K * r) ** 2 / 4.0


def _predicted(K, r, p, constant=None):
    return 0.5 * p * p + (stated_constant(K, r) if constant is None else constant)


def index_offset(dec: SpectralDecomposition, p_values: Sequence[int] = (12, 14, 16, 18, 20),
                 candidates: Sequence[int] = range(-8, 9)) -> int:
    """``l_0`` aligning the pairs ``lambda_{l0+2p}, lambda_{l0+2p+1}`` with ``p^2/2``.

    A wrong offset misses by about ``p`` while the constant term is O(1), so
    matching ``p^2/2`` alone at moderately large ``p`` identifies ``l_0``.
    """
    lam = dec.eigenvalues
    best, best_err = None, math.inf
    for l0 in candidates:
        idx = [(l0 + 2 * p, l0 + 2 * p + 1) for p in p_values]
        if min(min(i) for i in idx) < 0 or max(max(i) for i in idx) >= lam.size:
            continue
        err = sum(abs(lam[i] - 0.5 * p * p) + abs(lam[j] - 0.5 * p * p)
                  for (i, j), p in zip(idx, p_values))
        if err < best_err:
            best, best_err = l0, err
    if best is None:
        raise ValueError("no admissible index offset for these p values")
    return best


def _v_pair(K, r, p, theta):
    bracket = 0.5 * K * r * np.sin(theta) + (K * r) ** 2 / 8.0 * np.sin(2 * theta)
    v1 = np.cos(p * theta) - np.sin(p * theta) / p * bracket
    v2 = np.sin(p * theta) + np.cos(p * theta) / p * bracket
    return v1, v2


def asymptotics_report(dec: SpectralDecomposition, p_values: Sequence[int] = (8, 12, 16, 20),
                       l0: int | None = None, constant: float | None = None) -> list[dict]:
    """Computed vs predicted high eigenvalues and eigenfunctions.

    For each ``p``: the pair ``lambda_{l0+2p}``, ``lambda_{l0+2p+1}``, the
    prediction ``p^2/2 + constant`` (default :func:`stated_constant`; use
    :func:`potential_mean` for the constant the spectrum actually
    approaches), the larger residual, ``p`` times it, and
    the eigenfunction defect: relative L2 distance of each computed ``e`` from
    ``span{sqrt(q) v_1, sqrt(q) v_2}`` (least squares), the larger of the two.
    """
    K, r, psi = dec.assembly.K, dec.profile.r, dec.profile.psi
    l0 = index_offset(dec) if l0 is None else l0
    M = dec.assembly.M
    if 4 * max(p_values) > M:
        warnings.warn(f"M = {M} may not resolve p = {max(p_values)} (want M >= 4p)", RuntimeWarning,
                      stacklevel=2)
    theta = dec.grid.nodes
    sq = np.sqrt(dec.profile(theta))
    rows = []
    for p in p_values:
        i, j = l0 + 2 * p, l0 + 2 * p + 1
        pred = _predicted(K, r, p, constant)
        v1, v2 = _v_pair(K, r, p, theta - psi)
        B = np.column_stack([sq * v1, sq * v2])
        defects = []
        for col in (i, j):
            e = dec.values[:, col]
            coef, *_ = np.linalg.lstsq(B, e, rcond=None)
            defects.append(float(np.linalg.norm(e - B @ coef) / np.linalg.norm(e)))
        res = max(abs(dec.eigenvalues[i] - pred), abs(dec.eigenvalues[j] - pred))
        rows.append({"p": int(p), "index": [int(i), int(j)],
                     "eigenvalues": [float(dec.eigenvalues[i]), float(dec.eigenvalues[j])],
                     "predicted": float(pred), "residual": float(res), "scaled_residual": float(res * p),
                     "defect": max(defects)})
    return rows


def semigroup_apply(dec: SpectralDecomposition, s: float, u: HMinusOneElement) -> HMinusOneElement:
    """``e^{s L_q} u`` by the eigen-expansion ``sum e^{-s lambda_l} (u, e_l) e_l``.

    ``(u, e_l)_{-1,1/q} = int f_l u`` is the pairing of the kernel
    ``sum e^{-s lambda_l} e_l(theta) f_l(theta')``.  Components of ``u``
    outside the span of the ``2M`` retained modes are dropped.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    if u.grid != dec.grid:
        raise ValueError("element must live on the decomposition grid")
    w = 1.0 / dec.profile(dec.grid.nodes)
    a = dec.grid.spacing * (u.centered(w) * w) @ dec.primitives
    decay = np.exp(-s * np.maximum(dec.eigenvalues, 0.0))
    decay[np.abs(dec.eigenvalues) < 1e-12] = 1.0
    return HMinusOneElement(dec.grid, dec.primitives @ (decay * a))


def _pair_index(j, l0):
    return (j - l0) // 2 if j >= l0 + 2 else -1


def write_spectrum_csv(dec: SpectralDecomposition, path, l0: int | None = None) -> None:
    """Columns ``j, lambda, parity, pair`` (pair = p with j in {l0+2p, l0+2p+1}, else -1)."""
    l0 = index_offset(dec) if l0 is None else l0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "lambda", "parity", "pair"])
        for j, lam in enumerate(dec.eigenvalues):
            writer.writerow([j, repr(float(lam)), dec.parity[j] or "", _pair_index(j, l0)])


def write_eigenfunctions_csv(dec: SpectralDecomposition, path, indices: Sequence[int] = (0, 1, 2)) -> None:
    """Columns ``theta, e_j, f_j`` for each requested ``j``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta"] + [f"{name}_{j}" for j in indices for name in ("e", "f")])
        for i, t in enumerate(dec.grid.nodes):
            row = [repr(float(t))]
            for j in indices:
                row += [repr(float(dec.values[i, j])), repr(float(dec.adjoint[i, j]))]
            writer.writerow(row)
