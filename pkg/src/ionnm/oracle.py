"""Brute-force Ramsey protocol for a few modes in a truncated Fock space.

Spin basis is (|e>, |g>). The pulses are instantaneous,

    U_pulse(+-) = exp[-+ i pi/4 (sigma_+ (x) Dall + sigma_- (x) Dall^dag)],

with ``Dall`` the tensor product of single-mode displacements built from
truncated ladder operators, and free evolution ``exp(-i sum_j omega_j n_j t)``
in the frame rotating with the spin splitting. The protocol is
``U(t) = U_pulse(-) U_0(t) U_pulse(+)``.

Two evaluation routes:

* dense -- assemble every operator on the full spin (x) Fock space and
  exponentiate numerically; only for small spaces.
* factorised -- because Dall is unitary on the truncated space, X = sigma_+ Dall
  + h.c. squares to one and each spin block of U is a sum of two tensor
  products of single-mode operators. The environment trace then factorises
  into per-mode traces, which keeps thermal states with ~50 levels per mode
  cheap. The two routes agree to roundoff (see the tests).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import dephasing
from .errors import InvalidParameterError, ResourceLimitError

MAX_MODES = 4
MAX_DENSE_DIM = 6000
MAX_LEVELS = 400
MIN_LEVELS = 10
THERMAL_TAIL = 1e-6
LEAKAGE_TOL = 1e-6


# --- single-mode building blocks ----------------------------------------------

def annihilation(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1)


def displacement(alpha: complex, levels: int) -> np.ndarray:
    """exp(alpha a^dag - alpha* a) on ``levels`` Fock states (exactly unitary)."""
    a = annihilation(levels)
    return expm(alpha * a.T - np.conj(alpha) * a)


def thermal_tail(beta_omega: float, n_max: int) -> float:
    """Unnormalised Boltzmann weight above ``n_max``."""
    if math.isinf(beta_omega):
        return 0.0
    return math.exp(-beta_omega * (n_max + 1)) / -math.expm1(-beta_omega)


def thermal_cutoff(beta_omega: float, tol: float = THERMAL_TAIL) -> int:
    """Smallest ``n_max`` whose thermal tail is below ``tol``."""
    if math.isinf(beta_omega):
        return 0
    if not beta_omega > 0:
        raise InvalidParameterError("beta*omega must be positive")
    n = max(0, int(math.ceil((math.log(1 / tol) - math.log(-math.expm1(-beta_omega))) / beta_omega)) - 1)
    while thermal_tail(beta_omega, n) >= tol:
        n += 1
    while n > 0 and thermal_tail(beta_omega, n - 1) < tol:
        n -= 1
    return n


def displacement_leakage(alpha: complex, support: int, levels: int) -> float:
    """Weight pushed above ``levels - 1`` when states up to ``support`` are
    displaced by ``2|alpha|`` (the largest net kick of the protocol)."""
    pad = 30 + 10 * int(math.ceil(abs(alpha)))
    big = displacement(2 * abs(alpha), levels + pad)
    return float(np.linalg.norm(big[levels:, : support + 1], 2))


# --- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class FockConfig:
    omegas: tuple
    alphas: tuple
    levels: tuple  # Fock states kept per mode (n_max + 1)

    def __post_init__(self):
        if not len(self.omegas) == len(self.alphas) == len(self.levels):
            raise InvalidParameterError("omegas, alphas and levels must match in length")
        if len(self.omegas) > MAX_MODES:
            raise ResourceLimitError(f"at most {MAX_MODES} modes are tractable")
        if any(w <= 0 for w in self.omegas):
            raise InvalidParameterError("mode frequencies must be positive")
        if any(n < 1 or n > MAX_LEVELS for n in self.levels):
            raise ResourceLimitError(f"levels per mode must be in [1, {MAX_LEVELS}]")

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    @property
    def env_dim(self) -> int:
        return int(np.prod(self.levels)) if self.levels else 1

    def couplings(self) -> dephasing.CouplingSet:
        return dephasing.CouplingSet(np.array(self.omegas), np.abs(np.array(self.alphas)) ** 2)

    def check_cutoffs(self, beta: float, tol: float = THERMAL_TAIL):
        for w, n in zip(self.omegas, self.levels):
            if thermal_tail(beta * w, n - 1) >= tol:
                raise InvalidParameterError(
                    f"cutoff {n - 1} too low for mode omega={w:g} at beta={beta:g}"
                )


def make_config(omegas, alphas, beta: float, min_levels: int = MIN_LEVELS) -> FockConfig:
    """Choose per-mode cutoffs from the thermal tail plus displacement headroom.

    Headroom starts at ``4 ceil|alpha|`` and grows until the displacement
    leakage is below ``LEAKAGE_TOL``.
    """
    levels = []
    for w, a in zip(omegas, alphas):
        support = thermal_cutoff(beta * w)
        n = max(min_levels, support + 4 * int(math.ceil(abs(a))) + 1)
        if n > MAX_LEVELS:
            raise ResourceLimitError(f"mode omega={w:g} needs {n} > {MAX_LEVELS} Fock states")
        while displacement_leakage(a, support, n) > LEAKAGE_TOL:
            n += 2
            if n > MAX_LEVELS:
                raise ResourceLimitError("Fock cutoff exceeds MAX_LEVELS")
        levels.append(n)
    return FockConfig(tuple(float(w) for w in omegas), tuple(complex(a) for a in alphas), tuple(levels))


def subsampled_config(table, beta: float, n_modes: int, eta: float | None = None,
                      rescale: bool = True, min_levels: int = MIN_LEVELS) -> FockConfig:
    """The ``n_modes`` most strongly coupled modes of a mode table.

    With ``rescale`` the kept |alpha|^2 are scaled up so their sum equals the
    full table's, keeping the overall decoherence strength comparable.
    """
    c = dephasing.couplings(table, eta)
    eta = table.params.eta if eta is None else eta
    order = np.lexsort((c.omegas, -c.alpha_sq))[:n_modes]
    w = c.omegas[order]
    a2 = c.alpha_sq[order]
    if rescale:
        a2 = a2 * (c.total / a2.sum())
    # alpha_j = i eta sqrt(1 / 2 omega_j) s1_j carries the sign of s1_j
    s1 = table.s1[table.s1 != 0][order]
    alphas = 1j * np.sign(s1) * np.sqrt(a2)
    return make_config(w, alphas, beta, min_levels)


# --- states ---------------------------------------------------------------------

def pure_state(theta: float, phi: float) -> np.ndarray:
    """|phi0><phi0| for cos(theta/2)|e> + e^{i phi} sin(theta/2)|g>."""
    psi = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
    return np.outer(psi, psi.conj())


def check_leakage(beta: float, config: FockConfig, tol: float = LEAKAGE_TOL):
    """Warn if any mode's displacement pushes thermal weight past its cutoff."""
    for w, a, n in zip(config.omegas, config.alphas, config.levels):
        support = min(thermal_cutoff(beta * w), n - 1)
        leak = displacement_leakage(a, support, n)
        if leak > tol:
            warnings.warn(f"displacement leakage {leak:.2e} above {tol:g} for mode "
                          f"omega={w:g}; raise its Fock cutoff", RuntimeWarning, stacklevel=3)


def thermal_populations(beta: float, config: FockConfig) -> list:
    """Per-mode Boltzmann populations, renormalised after truncation."""
    config.check_cutoffs(beta)
    pops = []
    for w, n in zip(config.omegas, config.levels):
        if math.isinf(beta):
            p = np.zeros(n)
            p[0] = 1.0
        else:
            p = np.exp(-beta * w * np.arange(n))
            p /= p.sum()
        pops.append(p)
    return pops


def mean_occupation(populations) -> np.ndarray:
    return np.array([np.arange(len(p)) @ p for p in populations])


def thermal_state(beta: float, config: FockConfig) -> np.ndarray:
    """Dense environment density matrix (tensor product of thermal modes)."""
    if config.env_dim > MAX_DENSE_DIM:
        raise ResourceLimitError(f"environment dimension {config.env_dim} too large for a dense state")
    diag = np.ones(1)
    for p in thermal_populations(beta, config):
        diag = np.kron(diag, p)
    return np.diag(diag).astype(complex)


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10):
    """Raise if ``rho`` is not Hermitian, unit-trace and positive to ``atol``."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidParameterError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise InvalidParameterError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise InvalidParameterError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -atol:
        raise InvalidParameterError("density matrix has negative eigenvalues")


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """Half the trace norm of ``rho1 - rho2``."""
    rho1 = np.asarray(rho1)
    rho2 = np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise InvalidParameterError(f"dimension mismatch {rho1.shape} vs {rho2.shape}")
    return float(0.5 * np.linalg.svd(rho1 - rho2, compute_uv=False).sum())


def trace_distance_batch(rho1: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    """Trace distance along the leading axis of two stacks of matrices."""
    return 0.5 * np.linalg.svd(rho1 - rho2, compute_uv=False).sum(axis=-1)


# --- dense route ------------------------------------------------------------------

def _all_displacement(config: FockConfig) -> np.ndarray:
    d = np.ones((1, 1), dtype=complex)
    for a, n in zip(config.alphas, config.levels):
        d = np.kron(d, displacement(a, n))
    return d


def _check_dense(config: FockConfig):
    if 2 * config.env_dim > MAX_DENSE_DIM:
        raise ResourceLimitError(
            f"dense protocol needs dimension {2 * config.env_dim} > {MAX_DENSE_DIM}"
        )


def pulse_unitary(config: FockConfig, sign: int) -> np.ndarray:
    """exp[-i sign (pi/4)(sigma_+ Dall + sigma_- Dall^dag)] on the full space."""
    _check_dense(config)
    d = _all_displacement(config)
    z = np.zeros_like(d)
    x = np.block([[z, d], [d.conj().T, z]])
    return expm(-1j * sign * (math.pi / 4) * x)


def free_phases(config: FockConfig, t: float) -> np.ndarray:
    """Diagonal of U_0(t) in the spin (x) Fock basis (rotating frame)."""
    occ = np.indices(config.levels).reshape(config.n_modes, -1).T
    energies = occ @ np.array(config.omegas) if config.n_modes else np.zeros(1)
    return np.tile(np.exp(-1j * energies * t), 2)


def protocol_unitary(config: FockConfig, t: float) -> np.ndarray:
    """U(t) = U_pulse(-) U_0(t) U_pulse(+), dense."""
    u1 = pulse_unitary(config, +1)
    u2 = pulse_unitary(config, -1)
    return u2 @ (free_phases(config, t)[:, None] * u1)


def reduced_state_dense(rho_spin: np.ndarray, beta: float, config: FockConfig, t: float,
                        unitary: np.ndarray | None = None) -> np.ndarray:
    """tr_E[U rho_I U^dag] by explicit matrix products (small spaces only)."""
    if unitary is None:
        check_leakage(beta, config)
    u = protocol_unitary(config, t) if unitary is None else unitary
    rho_i = np.kron(rho_spin, thermal_state(beta, config))
    out = u @ rho_i @ u.conj().T
    dim = config.env_dim
    return np.einsum("aibi->ab", out.reshape(2, dim, 2, dim))


# --- factorised route -----------------------------------------------------------------

# per-mode operator kinds; D = single-mode displacement, W = free evolution
_KINDS = ("W", "DWDd", "WD", "DW", "DdW", "WDd", "DdWD")
_K = {k: i for i, k in enumerate(_KINDS)}


def _block_coefficients() -> np.ndarray:
    """C[s, a, kind]: spin block U_{sa} = sum_kind C * (tensor product of kind)."""
    c = np.zeros((2, 2, len(_KINDS)), dtype=complex)
    c[0, 0, _K["W"]] = 0.5
    c[0, 0, _K["DWDd"]] = 0.5
    c[0, 1, _K["WD"]] = -0.5j
    c[0, 1, _K["DW"]] = 0.5j
    c[1, 0, _K["DdW"]] = 0.5j
    c[1, 0, _K["WDd"]] = -0.5j
    c[1, 1, _K["DdWD"]] = 0.5
    c[1, 1, _K["W"]] += 0.5
    return c


def _mode_gram(d: np.ndarray, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """G[t, k, l] = tr(O_k diag(p) O_l^dag) for one mode and a batch of phases w[t, n]."""
    dd = d.conj().T
    ops = np.empty((len(_KINDS), w.shape[0], d.shape[0], d.shape[0]), dtype=complex)
    wr = w[:, None, :]  # scale columns
    wl = w[:, :, None]  # scale rows
    ops[_K["W"]] = 0
    idx = np.arange(d.shape[0])
    ops[_K["W"]][:, idx, idx] = w
    ops[_K["DW"]] = d * wr
    ops[_K["DdW"]] = dd * wr
    ops[_K["WD"]] = wl * d
    ops[_K["WDd"]] = wl * dd
    ops[_K["DWDd"]] = ops[_K["DW"]] @ dd
    ops[_K["DdWD"]] = ops[_K["DdW"]] @ d
    return np.einsum("ktmn,n,ltmn->tkl", ops, p, ops.conj(), optimize=True)


def channel_tensor(config: FockConfig, beta: float, times, chunk: int = 256) -> np.ndarray:
    """E[t, s, s', a, b] with rho_out[s, s'] = sum_ab E[t, s, s', a, b] rho_in[a, b]."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    pops = thermal_populations(beta, config)
    check_leakage(beta, config)
    disps = [displacement(a, n) for a, n in zip(config.alphas, config.levels)]
    coef = _block_coefficients()
    out = np.empty((times.size, 2, 2, 2, 2), dtype=complex)
    for s in range(0, times.size, chunk):
        ts = times[s:s + chunk]
        gram = np.ones((ts.size, len(_KINDS), len(_KINDS)), dtype=complex)
        for w, d, p in zip(config.omegas, disps, pops):
            phases = np.exp(-1j * w * np.multiply.outer(ts, np.arange(d.shape[0])))
            gram *= _mode_gram(d, p, phases)
        out[s:s + chunk] = np.einsum("sak,rbl,tkl->tsrab", coef, coef.conj(), gram)
    return out


def apply_channel(channel: np.ndarray, rho_spin: np.ndarray) -> np.ndarray:
    return np.einsum("tsrab,ab->tsr", channel, rho_spin)


def reduced_state(theta: float, phi: float, beta: float, config: FockConfig, t,
                  method: str = "factorised") -> np.ndarray:
    """Probe state after the protocol for initial Bloch angles (theta, phi).

    Returns a 2x2 matrix for scalar ``t`` or a stack for an array of times.
    """
    rho0 = pure_state(theta, phi)
    if method == "dense":
        if np.ndim(t):
            u1 = pulse_unitary(config, +1)
            u2 = pulse_unitary(config, -1)
            return np.array([
                reduced_state_dense(rho0, beta, config, ti, u2 @ (free_phases(config, ti)[:, None] * u1))
                for ti in np.asarray(t)
            ])
        return reduced_state_dense(rho0, beta, config, float(t))
    if method != "factorised":
        raise InvalidParameterError(f"unknown method {method!r}")
    out = apply_channel(channel_tensor(config, beta, t), rho0)
    return out if np.ndim(t) else out[0]


def plus_minus_distance(config: FockConfig, beta: float, times) -> np.ndarray:
    """Exact trace distance of the |+>, |-> pair over ``times``."""
    channel = channel_tensor(config, beta, times)
    r1 = apply_channel(channel, pure_state(math.pi / 2, 0.0))
    r2 = apply_channel(channel, pure_state(math.pi / 2, math.pi))
    return trace_distance_batch(r1, r2)


@dataclass
class Comparison:
    max_deviation: float
    time_of_max: float
    times: np.ndarray
    oracle: np.ndarray
    analytic: np.ndarray


def compare_analytic(beta: float, config: FockConfig, times, xi_reading: str = "adopted",
                     b_reading: str = "exact") -> Comparison:
    """Max |D_oracle - D_opt| over ``times`` for the |+>, |-> pair.

    ``xi_reading="literal"`` evaluates the closed form with
    :func:`dephasing.xi_literal` instead of the adopted factor;
    ``b_reading`` is passed through to :func:`dephasing.optimal_trace_distance`.
    """
    times = np.asarray(times, dtype=float)
    exact = plus_minus_distance(config, beta, times)
    c = config.couplings()
    if xi_reading == "adopted":
        xi_value = None
    elif xi_reading == "literal":
        xi_value = dephasing.xi_literal(beta, c)
    else:
        raise InvalidParameterError(f"unknown xi reading {xi_reading!r}")
    with warnings.catch_warnings():
        # the subset's own omega_max is not the temperature reference here
        warnings.simplefilter("ignore")
        approx = np.asarray(dephasing.optimal_trace_distance(
            times, beta, c, xi_value=xi_value, b_reading=b_reading))
    dev = np.abs(exact - approx)
    i = int(np.argmax(dev))
    return Comparison(float(dev[i]), float(times[i]), times, exact, approx)


def unitarity_error(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2))
