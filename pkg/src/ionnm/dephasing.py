"""Thermal dephasing of the probe spin and its optimal trace distance.

A ``CouplingSet`` holds, per transverse mode, the frequency ``omega_j`` and the
squared kick amplitude ``|alpha_j|^2 = eta^2 s1_j^2 / (2 omega_j)``. From it we
build

    A(t)  = 2 sum_j |alpha_j|^2 coth(beta omega_j / 2) sin^2(omega_j t / 2)
    B(t)  =   sum_j |alpha_j|^2 coth(beta omega_j / 2) sin(omega_j t)
    xi    = exp(-1/2 sum_j |alpha_j|^2 coth(beta omega_j / 2))
    V(t)  = exp(-A(t))

and the trace distance of the |+>, |-> pair after the Ramsey sequence,

    D = 1/4 |1 + 2 cos B (V - xi^4 / V) + V^4 + 2 xi^4|.

By default D is evaluated with the zero-temperature phase ``B(t, inf)``: the
phase comes from composing displacement operators and does not depend on the
bath state, and with it D agrees with the exact truncated-Fock simulation at
any temperature. ``b_reading="literal"`` uses the coth-weighted ``B(t, beta)``
instead; near criticality that phase grows to hundreds of radians and
produces spurious backflow.

``xi^4 / V`` is evaluated as ``exp(A - 2 S)`` with ``S = sum |alpha|^2 coth`` so
strongly decohered curves neither overflow nor produce nan.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SoftModeDivergenceError
from .lattice import ChainParams, ModeTable, mode_table

log = logging.getLogger(__name__)

#: lowest beta*omega_max the |+-> pair has been checked at; below it the pair
#: is no longer guaranteed to be optimal
MIN_BETA_OMEGA_MAX = 0.3
DEFAULT_DT = 0.01
_CHUNK = 2048


@dataclass(frozen=True)
class CouplingSet:
    omegas: np.ndarray
    alpha_sq: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).reshape(-1)
        a = np.asarray(self.alpha_sq, dtype=float).reshape(-1)
        if w.shape != a.shape:
            raise InvalidParameterError("omegas and alpha_sq must have equal length")
        if np.any(a < 0):
            raise InvalidParameterError("alpha_sq must be nonnegative")
        if np.any(w[a > 0] <= 0):
            raise SoftModeDivergenceError("coupled mode with nonpositive frequency")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "alpha_sq", a)

    @property
    def omega_max(self) -> float:
        coupled = self.omegas[self.alpha_sq > 0]
        return float(coupled.max()) if coupled.size else 0.0

    @property
    def total(self) -> float:
        return float(self.alpha_sq.sum())

    def __len__(self):
        return len(self.omegas)

    def entries(self):
        return list(zip(self.omegas.tolist(), self.alpha_sq.tolist()))


@dataclass(frozen=True)
class ThermalSpec:
    """Temperature given as the dimensionless ``beta * omega_max``."""

    beta_omega_max: float
    omega_max: float

    def __post_init__(self):
        if not self.beta_omega_max > 0:
            raise InvalidParameterError("beta_omega_max must be > 0 (inf for T = 0)")
        if not self.omega_max > 0:
            raise InvalidParameterError("omega_max must be positive")

    @property
    def beta(self) -> float:
        return self.beta_omega_max / self.omega_max

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta_omega_max)


@dataclass
class DephasingCurve:
    times: np.ndarray
    values: np.ndarray
    dt: float
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    V: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return len(self.times)


def couplings(table: ModeTable, eta: float | None = None) -> CouplingSet:
    """Per-mode squared displacement amplitudes ``eta^2 s1^2 / (2 omega)``."""
    if len(table) == 0:
        raise InvalidParameterError("empty mode table")
    eta = table.params.eta if eta is None else eta
    if not eta > 0:
        raise InvalidParameterError("eta must be positive")
    w = table.omegas
    s1 = table.s1
    coupled = s1 != 0
    if np.any(w[coupled] <= 0):
        raise SoftModeDivergenceError(
            "a coupled mode has zero frequency (exactly critical chain?)"
        )
    w = w[coupled]
    return CouplingSet(w, eta**2 * s1[coupled] ** 2 / (2.0 * w))


def thermal_weight(omega, beta):
    """``coth(omega beta / 2)``; exactly 1 at ``beta = inf``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise InvalidParameterError("thermal_weight needs omega > 0")
    if math.isinf(beta):
        out = np.ones_like(omega)
    else:
        if not beta > 0:
            raise InvalidParameterError("beta must be positive")
        out = 1.0 / np.tanh(omega * beta / 2.0)
    return float(out) if out.ndim == 0 else out


def _weights(beta, c: CouplingSet) -> np.ndarray:
    if len(c) == 0:
        return c.alpha_sq
    return c.alpha_sq * thermal_weight(c.omegas, beta)


def _mode_sums(t, omegas, weights, b_weights=None):
    """Return (A, B) for all times, chunked over t to bound memory.

    ``b_weights`` defaults to ``weights``.
    """
    b_weights = weights if b_weights is None else b_weights
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    A = np.empty_like(flat)
    B = np.empty_like(flat)
    for s in range(0, flat.size, _CHUNK):
        phase = np.multiply.outer(flat[s:s + _CHUNK], omegas)
        A[s:s + _CHUNK] = 2.0 * (np.sin(phase / 2.0) ** 2) @ weights
        B[s:s + _CHUNK] = np.sin(phase) @ b_weights
    return A.reshape(t.shape), B.reshape(t.shape)


def _phase_weights(beta, c: CouplingSet, b_reading: str) -> np.ndarray:
    if b_reading == "exact":
        return c.alpha_sq
    if b_reading == "literal":
        return _weights(beta, c)
    raise InvalidParameterError(f"unknown b_reading {b_reading!r}")


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def decay_exponent_A(t, beta, c: CouplingSet):
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError("t must be >= 0")
    return _scalar(_mode_sums(t, c.omegas, _weights(beta, c))[0])


def phase_B(t, beta, c: CouplingSet):
    return _scalar(_mode_sums(t, c.omegas, _weights(beta, c))[1])


def xi(beta, c: CouplingSet) -> float:
    """Time-independent factor ``exp(-1/2 sum |alpha|^2 coth(beta omega / 2))``."""
    return math.exp(-0.5 * float(_weights(beta, c).sum()))


def xi_literal(beta, c: CouplingSet) -> float:
    """Alternative reading with each coth factor outside its mode's exponential.

    ``prod_j exp(-|alpha_j|^2 / 2) coth(beta omega_j / 2)``. Not physical (it
    exceeds 1 at any finite temperature); kept so validation can show the
    exact simulation rejects it.
    """
    if len(c) == 0:
        return 1.0
    return float(np.prod(np.exp(-0.5 * c.alpha_sq) * thermal_weight(c.omegas, beta)))


def visibility_V(t, beta, c: CouplingSet):
    return _scalar(np.exp(-np.asarray(decay_exponent_A(t, beta, c))))


def _assemble(A, B, total_weight, log_xi4=None):
    """Optimal trace distance from A, B and ``S = sum |alpha|^2 coth``."""
    if log_xi4 is None:
        log_xi4 = -2.0 * total_weight
    V = np.exp(-A)
    xi4 = math.exp(log_xi4)
    xi4_over_V = np.exp(log_xi4 + A)
    raw = 0.25 * np.abs(1.0 + 2.0 * np.cos(B) * (V - xi4_over_V) + np.exp(-4.0 * A) + 2.0 * xi4)
    over = np.max(raw, initial=0.0) - 1.0
    if over > 1e-12:
        log.debug("clamping trace distance overshoot of %.3e", over)
    return np.clip(raw, 0.0, 1.0)


def _check_temperature(beta, c: CouplingSet):
    if math.isinf(beta) or len(c) == 0:
        return
    bwm = beta * c.omega_max
    if bwm < MIN_BETA_OMEGA_MAX * (1 - 1e-9):
        warnings.warn(
            f"beta*omega_max = {bwm:.3g} < {MIN_BETA_OMEGA_MAX}: the |+>,|-> pair may "
            "no longer maximise the trace distance; check against the oracle",
            stacklevel=3,
        )


def optimal_trace_distance(t, beta, c: CouplingSet, xi_value: float | None = None,
                           b_reading: str = "exact"):
    """Trace distance of the |+>, |-> pair after the protocol, clamped to [0, 1].

    ``xi_value`` overrides the time-independent factor (validation only).
    """
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError("t must be >= 0")
    _check_temperature(beta, c)
    w = _weights(beta, c)
    A, B = _mode_sums(t, c.omegas, w, _phase_weights(beta, c, b_reading))
    log_xi4 = None if xi_value is None else 4.0 * math.log(xi_value)
    return _scalar(_assemble(A, B, float(w.sum()), log_xi4))


def zero_temperature_trace_distance(t, c: CouplingSet):
    """T = 0 optimal trace distance, computed without any thermal factor."""
    t = np.asarray(t, dtype=float)
    phase = np.multiply.outer(t, c.omegas)
    A = 2.0 * (np.sin(phase / 2.0) ** 2) @ c.alpha_sq
    B = np.sin(phase) @ c.alpha_sq
    return _scalar(_assemble(A, B, c.total))


def time_grid(t_max: float, dt: float) -> np.ndarray:
    if not dt > 0 or not t_max > 0:
        raise InvalidParameterError("t_max and dt must be positive")
    n = int(math.floor(t_max / dt + 1e-9)) + 1
    return dt * np.arange(n)


def curve_from_couplings(c: CouplingSet, thermal: ThermalSpec, t_max: float,
                         dt: float = DEFAULT_DT, meta: dict | None = None,
                         b_reading: str = "exact") -> DephasingCurve:
    times = time_grid(t_max, dt)
    beta = math.inf if thermal.zero_temperature else thermal.beta
    _check_temperature(beta, c)
    w = _weights(beta, c)
    A, B = _mode_sums(times, c.omegas, w, _phase_weights(beta, c, b_reading))
    values = _assemble(A, B, float(w.sum()))
    return DephasingCurve(times, values, dt, A, B, np.exp(-A), dict(meta or {}))


def curve(params: ChainParams, beta_omega_max: float, t_max: float = 200.0,
          dt: float = DEFAULT_DT, table: ModeTable | None = None,
          b_reading: str = "exact") -> DephasingCurve:
    """Sample the optimal trace distance on ``[0, t_max]`` with step ``dt``.

    ``beta_omega_max`` is relative to the largest coupled-mode frequency of the
    configuration's table (``nu_t`` in the linear phase).
    """
    table = mode_table(params) if table is None else table
    c = couplings(table, params.eta)
    thermal = ThermalSpec(beta_omega_max, c.omega_max)
    meta = {
        "n_ions": params.n_ions,
        "delta": params.delta,
        "nu_t": params.nu_t,
        "eta": params.eta,
        "target_ion": params.target_ion,
        "phase": table.phase.value,
        "beta_omega_max": beta_omega_max,
        "omega_max": c.omega_max,
        "beta": thermal.beta,
        "b_reading": b_reading,
    }
    return curve_from_couplings(c, thermal, t_max, dt, meta, b_reading)
