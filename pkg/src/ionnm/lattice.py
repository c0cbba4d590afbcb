"""Equilibria and normal modes of an ion ring near the linear/zig-zag transition.

Units: ion spacing ``a = 1``, mass ``m = 1`` and ``omega_0 = sqrt(Q^2 / m a^3) = 1``.
The chain is periodic (a ring of ``N`` ions); Coulomb interactions are summed over
minimum images, with both images kept for the pair at separation ``N/2`` so the
Hessian reproduces the closed-form dispersions term by term.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import optimize

from .errors import (
    InvalidParameterError,
    SoftModeInstabilityError,
    UnstableEquilibriumError,
    WrongPhaseError,
)

#: Lamb-Dicke parameter used when none is given.
DEFAULT_ETA = 0.5

ZERO_EIGENVALUE = 1e-10
UNSTABLE_EIGENVALUE = -1e-8
_K_TOL = 1e-12


class Branch(str, enum.Enum):
    TRANSVERSE_COS = "transverse_cos"
    TRANSVERSE_SIN = "transverse_sin"
    AXIAL_COS = "axial_cos"
    AXIAL_SIN = "axial_sin"
    ZIGZAG_NUMERIC = "zigzag_numeric"


class Phase(str, enum.Enum):
    LINEAR = "linear"
    ZIGZAG = "zigzag"


def _check_n_ions(n_ions) -> int:
    if isinstance(n_ions, bool) or int(n_ions) != n_ions:
        raise InvalidParameterError(f"n_ions must be an integer, got {n_ions!r}")
    n_ions = int(n_ions)
    if n_ions < 4 or n_ions % 2:
        raise InvalidParameterError(f"n_ions must be even and >= 4, got {n_ions}")
    return n_ions


def _lattice_sum(k, n_ions: int) -> np.ndarray:
    """sum_{j=1}^{N/2} sin^2(j k / 2) / j^3, vectorised over ``k``."""
    j = np.arange(1, n_ions // 2 + 1, dtype=float)
    k = np.asarray(k, dtype=float)
    return (np.sin(np.multiply.outer(k, j) / 2.0) ** 2 / j**3).sum(axis=-1)


def _check_k(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if np.any(k < -_K_TOL) or np.any(k > np.pi + _K_TOL):
        raise InvalidParameterError("wavenumber must lie in [0, pi]")
    return k


def critical_frequency(n_ions: int) -> float:
    """Transverse frequency at which the k = pi mode of the N-ion ring goes soft.

    Uses the finite-N lattice sum, so ``transverse_dispersion(pi, nu_c, N)``
    vanishes exactly for the simulated ring (the N -> inf value is
    ``sqrt(7 zeta(3) / 2) ~ 2.05114``).
    """
    n_ions = _check_n_ions(n_ions)
    j = np.arange(1, n_ions // 2 + 1, dtype=float)
    # correctly rounded, so adding ions never lowers the result
    return 2.0 * math.sqrt(math.fsum(np.sin(j * np.pi / 2.0) ** 2 / j**3))


def axial_dispersion(k, n_ions: int):
    """Axial phonon frequency ``sqrt(8 sum sin^2(jk/2)/j^3)``."""
    n_ions = _check_n_ions(n_ions)
    k = _check_k(k)
    out = np.sqrt(8.0 * _lattice_sum(k, n_ions))
    return float(out) if out.ndim == 0 else out


def transverse_dispersion(k, nu_t: float, n_ions: int):
    """Transverse phonon frequency ``sqrt(nu_t^2 - 4 sum sin^2(jk/2)/j^3)``.

    Raises SoftModeInstabilityError when the radicand is negative, i.e. the
    linear chain is not a stable configuration at this ``nu_t``.
    """
    n_ions = _check_n_ions(n_ions)
    k = _check_k(k)
    if nu_t <= 0:
        raise InvalidParameterError("nu_t must be positive")
    # split as (nu_t^2 - nu_c^2) + 4 (F(pi) - F(k)): exact zero at criticality,
    # no cancellation for the soft mode near it
    nu_c = critical_frequency(n_ions)
    radicand = (nu_t - nu_c) * (nu_t + nu_c) + 4.0 * (
        _lattice_sum(np.pi, n_ions) - _lattice_sum(k, n_ions)
    )
    tol = 1e-12 * nu_t**2
    if np.any(radicand < -tol):
        raise SoftModeInstabilityError(
            f"negative transverse radicand {radicand.min():.3e} at nu_t={nu_t}"
        )
    out = np.sqrt(np.clip(radicand, 0.0, None))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ChainParams:
    """Ring configuration; ``nu_t`` follows from ``delta`` and ``n_ions``."""

    n_ions: int
    delta: float
    eta: float = DEFAULT_ETA
    target_ion: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_ions", _check_n_ions(self.n_ions))
        if not np.isfinite(self.delta) or self.delta <= -1.0:
            raise InvalidParameterError(f"delta must be finite and > -1, got {self.delta}")
        if not self.eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {self.eta}")
        if not 1 <= self.target_ion <= self.n_ions:
            raise InvalidParameterError(f"target_ion out of range: {self.target_ion}")

    @classmethod
    def from_nu_t(cls, n_ions: int, nu_t: float, **kwargs) -> "ChainParams":
        return cls(n_ions, nu_t / critical_frequency(n_ions) - 1.0, **kwargs)

    @property
    def nu_t(self) -> float:
        return (1.0 + self.delta) * critical_frequency(self.n_ions)

    @property
    def phase(self) -> Phase:
        return Phase.LINEAR if self.delta > 0 else Phase.ZIGZAG


@dataclass(frozen=True)
class Mode:
    branch: Branch
    k_index: int
    omega: float
    s1: float


@dataclass(frozen=True)
class ModeTable:
    """Normal modes of one configuration.

    For numerically diagonalised tables ``k_index`` is the position of the
    mode in ascending-eigenvalue order rather than a wavenumber index.
    """

    modes: tuple
    phase: Phase
    params: ChainParams

    @cached_property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @cached_property
    def s1(self) -> np.ndarray:
        return np.array([m.s1 for m in self.modes])

    @property
    def omega_max(self) -> float:
        return float(self.omegas.max())

    def by_branch(self, *branches: Branch) -> list:
        return [m for m in self.modes if m.branch in branches]

    def __len__(self):
        return len(self.modes)


def linear_mode_table(params: ChainParams) -> ModeTable:
    """Closed-form transverse and axial modes of the linear ring (Δ > 0)."""
    if params.delta <= 0:
        raise WrongPhaseError("linear_mode_table requires delta > 0")
    n = params.n_ions
    x1 = float(params.target_ion)
    nu_t = params.nu_t
    n_idx = np.arange(n // 2 + 1)
    ks = 2.0 * np.pi * n_idx / n
    ks[-1] = np.pi
    w_perp = transverse_dispersion(ks, nu_t, n)
    w_par = axial_dispersion(ks, n)

    modes = []
    for i, k, wt, wa in zip(n_idx, ks, w_perp, w_par):
        i = int(i)
        if i in (0, n // 2):
            modes.append(Mode(Branch.TRANSVERSE_COS, i, float(wt), float(np.cos(k * x1) / np.sqrt(n))))
            modes.append(Mode(Branch.AXIAL_COS, i, float(wa), 0.0))
        else:
            amp = np.sqrt(2.0 / n)
            modes.append(Mode(Branch.TRANSVERSE_COS, i, float(wt), float(amp * np.cos(k * x1))))
            modes.append(Mode(Branch.TRANSVERSE_SIN, i, float(wt), float(amp * np.sin(k * x1))))
            modes.append(Mode(Branch.AXIAL_COS, i, float(wa), 0.0))
            modes.append(Mode(Branch.AXIAL_SIN, i, float(wa), 0.0))
    return ModeTable(tuple(modes), Phase.LINEAR, params)


# --- zig-zag ----------------------------------------------------------------

def _odd_image_separations(n_ions: int) -> np.ndarray:
    """Odd axial separations l in [-N/2, N/2] (both images of N/2 counted)."""
    l = np.arange(1, n_ions // 2 + 1)
    l = l[l % 2 == 1]
    return np.concatenate([l, -l]).astype(float)


def _image_separations(n_ions: int) -> np.ndarray:
    l = np.arange(1, n_ions // 2 + 1, dtype=float)
    return np.concatenate([l, -l])


def zigzag_energy(b, nu_t: float, n_ions: int):
    """Potential energy per ion of the staggered ansatz y_j = (-1)^j b/2."""
    b = np.asarray(b, dtype=float)
    l = _image_separations(n_ions)
    odd = (np.abs(l) % 2 == 1)
    r = np.sqrt(l**2 + np.multiply.outer(b**2, odd.astype(float)))
    e = nu_t**2 * b**2 / 8.0 + 0.5 * (1.0 / r).sum(axis=-1)
    return float(e) if e.ndim == 0 else e


def _zigzag_stationarity(b: float, nu_t: float, odd_l: np.ndarray) -> float:
    # d(energy)/db divided by b/4
    return nu_t**2 - 2.0 * np.sum((odd_l**2 + b * b) ** -1.5)


def zigzag_equilibrium(params: ChainParams) -> float:
    """Transverse zig-zag offset ``b`` minimising the staggered-ansatz energy.

    The nonzero stationary point is bracketed and located with Brent's method
    (relative tolerance 1e-12); for ``delta >= 0`` the minimiser is ``b = 0``.
    """
    if params.delta >= 0:
        return 0.0
    nu_t = params.nu_t
    odd_l = _odd_image_separations(params.n_ions)
    g = lambda b: _zigzag_stationarity(b, nu_t, odd_l)  # noqa: E731
    hi = 1e-3
    while g(hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise UnstableEquilibriumError("could not bracket the zig-zag offset")
    return float(optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-12, maxiter=500))


@lru_cache(maxsize=16)
def _pair_images(n_ions: int):
    """Ordered pairs (i, j) and the axial image shift of each interaction."""
    idx = np.arange(n_ions)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    off = ~np.eye(n_ions, dtype=bool)
    ii, jj = ii[off], jj[off]
    d = (jj - ii) % n_ions
    half = n_ions // 2
    sel_a = d <= half
    sel_b = d >= half
    i_all = np.concatenate([ii[sel_a], ii[sel_b]])
    j_all = np.concatenate([jj[sel_a], jj[sel_b]])
    sep = np.concatenate([d[sel_a], d[sel_b] - n_ions])
    shift = sep - (j_all - i_all)
    return i_all, j_all, shift.astype(float)


def pbc_potential(x: np.ndarray, y: np.ndarray, nu_t: float):
    """Energy and gradient of the ring potential in the (x, y) plane.

    Returns ``(energy, grad_x, grad_y)``. Used to validate the staggered ansatz
    against an unconstrained minimisation.
    """
    n = len(x)
    i, j, shift = _pair_images(n)
    dx = x[j] + shift - x[i]
    dy = y[j] - y[i]
    r = np.hypot(dx, dy)
    # each unordered pair-image appears twice in the ordered list
    energy = 0.5 * nu_t**2 * np.sum(y**2) + 0.5 * np.sum(1.0 / r)
    fx = dx / r**3
    fy = dy / r**3
    gx = np.bincount(i, weights=fx, minlength=n)
    gy = nu_t**2 * y + np.bincount(i, weights=fy, minlength=n)
    return energy, gx, gy


def pbc_hessian(x: np.ndarray, y: np.ndarray, nu_t: float) -> np.ndarray:
    """2N x 2N Hessian in the ordering (x_1..x_N, y_1..y_N)."""
    n = len(x)
    i, j, shift = _pair_images(n)
    dx = x[j] + shift - x[i]
    dy = y[j] - y[i]
    r2 = dx**2 + dy**2
    r5 = r2**2.5
    kxx = (3 * dx * dx - r2) / r5
    kyy = (3 * dy * dy - r2) / r5
    kxy = 3 * dx * dy / r5

    h = np.zeros((2 * n, 2 * n))
    for (a, b), kab in {(0, 0): kxx, (1, 1): kyy, (0, 1): kxy, (1, 0): kxy}.items():
        np.add.at(h, (a * n + i, b * n + j), -kab)
        np.add.at(h, (a * n + i, b * n + i), kab)
    h[np.arange(n, 2 * n), np.arange(n, 2 * n)] += nu_t**2
    return 0.5 * (h + h.T)


def ansatz_positions(n_ions: int, b: float):
    j = np.arange(1, n_ions + 1, dtype=float)
    return j, (-1.0) ** j * b / 2.0


def hessian_mode_table(params: ChainParams, b: float, phase: Phase = Phase.ZIGZAG) -> ModeTable:
    """Diagonalise the ring Hessian about the staggered configuration with offset b."""
    n = params.n_ions
    x, y = ansatz_positions(n, b)
    evals, evecs = np.linalg.eigh(pbc_hessian(x, y, params.nu_t))
    if evals[0] < UNSTABLE_EIGENVALUE:
        raise UnstableEquilibriumError(
            f"Hessian eigenvalue {evals[0]:.3e} < {UNSTABLE_EIGENVALUE}"
        )
    zero = evals < ZERO_EIGENVALUE
    omegas = np.sqrt(np.where(zero, 0.0, evals))
    s1 = np.where(zero, 0.0, evecs[n + params.target_ion - 1, :])
    modes = tuple(
        Mode(Branch.ZIGZAG_NUMERIC, idx, float(w), float(s))
        for idx, (w, s) in enumerate(zip(omegas, s1))
    )
    return ModeTable(modes, phase, params)


def zigzag_mode_table(params: ChainParams) -> ModeTable:
    """Numerical normal modes about the zig-zag equilibrium (Δ < 0)."""
    if params.delta >= 0:
        raise WrongPhaseError("zigzag_mode_table requires delta < 0")
    return hessian_mode_table(params, zigzag_equilibrium(params), Phase.ZIGZAG)


def mode_table(params: ChainParams) -> ModeTable:
    """Linear table for Δ > 0, zig-zag table for Δ < 0."""
    if params.delta > 0:
        return linear_mode_table(params)
    if params.delta < 0:
        return zigzag_mode_table(params)
    raise WrongPhaseError("delta = 0 is the critical point; no harmonic description")
