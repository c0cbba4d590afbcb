"""Information backflow: BLP measure, revival detection and parameter sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dephasing, oracle
from .errors import InvalidInputError, InvalidParameterError, IonNMError, ResourceLimitError
from .lattice import DEFAULT_ETA, ChainParams, mode_table

log = logging.getLogger(__name__)

DEFAULT_T_TRUNC = 120.0
REVIVAL_THRESHOLD = 1e-3
MARKOVIAN_TOL = 1e-6
MIN_ABS_DELTA = 1e-5
#: |+> = (theta, phi) = (pi/2, 0); its partner |-> is the antipode
PLUS_MINUS_PAIR = (math.pi / 2, 0.0)


@dataclass(frozen=True)
class NMResult:
    value: float
    truncation_time: float
    pair: tuple = PLUS_MINUS_PAIR
    curve_meta: dict = field(default_factory=dict)

    @property
    def non_markovian(self) -> bool:
        return self.value > MARKOVIAN_TOL


def _check_uniform(curve) -> float:
    t = np.asarray(curve.times, dtype=float)
    if t.size < 2:
        raise InvalidInputError("curve needs at least two samples")
    steps = np.diff(t)
    dt = float(steps.mean())
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise InvalidInputError("curve must be sampled on a uniform increasing grid")
    return dt


def information_flux(curve) -> np.ndarray:
    """dD/dt by central differences (one-sided at the ends)."""
    if len(curve.times) < 3:
        raise InvalidInputError("need at least 3 samples to differentiate")
    dt = _check_uniform(curve)
    return np.gradient(np.asarray(curve.values, dtype=float), dt, edge_order=1)


def positive_backflow(values) -> float:
    """Sum of positive increments, i.e. the integral of the positive part of dD/dt
    for the piecewise-linear interpolant of the samples."""
    d = np.diff(np.asarray(values, dtype=float))
    return float(d[d > 0].sum())


def blp_measure(curve, t_trunc: float = DEFAULT_T_TRUNC) -> NMResult:
    """Positive-flux integral of the |+>, |-> trace distance up to ``t_trunc``."""
    _check_uniform(curve)
    t = np.asarray(curve.times, dtype=float)
    if not 0 < t_trunc <= t[-1] * (1 + 1e-12):
        raise InvalidParameterError(f"t_trunc={t_trunc} outside (0, {t[-1]}]")
    keep = t <= t_trunc * (1 + 1e-12)
    value = positive_backflow(np.asarray(curve.values)[keep])
    return NMResult(value, float(t_trunc), PLUS_MINUS_PAIR, dict(getattr(curve, "meta", {}) or {}))


def revival_time(curve, threshold: float = REVIVAL_THRESHOLD, reference=None):
    """Time at which distinguishability starts flowing back, or None.

    Without ``reference``: the initial decay ends at the first sample where dD/dt
    turns nonnegative; from there positive increments are accumulated and the
    first time the running sum exceeds ``threshold`` is returned. This suits
    curves that decay before recovering (e.g. a single mode).

    With ``reference`` (the same configuration on a much longer ring, see
    :func:`bulk_reference`): the first time the two curves differ by more than
    ``threshold``, i.e. when excitations that travelled around the ring reach
    the probe. Damped oscillatory curves need this form; their early wiggles
    are not revivals.
    """
    if not threshold > 0:
        raise InvalidParameterError("threshold must be positive")
    _check_uniform(curve)
    t = np.asarray(curve.times, dtype=float)
    d = np.asarray(curve.values, dtype=float)
    if reference is not None:
        n = min(len(t), len(reference.times))
        if not np.allclose(t[:n], np.asarray(reference.times)[:n], rtol=0, atol=1e-9):
            raise InvalidInputError("reference curve must share the time grid")
        hit = np.flatnonzero(np.abs(d[:n] - np.asarray(reference.values)[:n]) > threshold)
        return float(t[hit[0]]) if hit.size else None

    inc = np.diff(d)
    falling = np.flatnonzero(inc < 0)
    if falling.size == 0:
        return None
    after = np.flatnonzero(inc[falling[0]:] >= 0)
    if after.size == 0:
        return None
    start = falling[0] + after[0]
    run = np.cumsum(np.clip(inc[start:], 0.0, None))
    hit = np.flatnonzero(run > threshold)
    return float(t[start + hit[0] + 1]) if hit.size else None


def bulk_reference(params: ChainParams, beta_omega_max: float, t_max: float,
                   dt: float = dephasing.DEFAULT_DT, scale: int = 10,
                   b_reading: str = "exact"):
    """Same Δ, η and temperature on a ring ``scale`` times longer.

    Its own revival comes ``scale`` times later, so on ``[0, t_max]`` it stands
    in for the infinite chain.
    """
    big = replace(params, n_ions=params.n_ions * scale)
    return dephasing.curve(big, beta_omega_max, t_max, dt, b_reading=b_reading)


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    delta: float
    beta_omega_max: float
    result: NMResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def _sweep_delta(delta, betas, t_trunc, n_ions, eta, dt, b_reading):
    try:
        if abs(delta) < MIN_ABS_DELTA * (1 - 1e-12):
            raise InvalidParameterError(f"|delta| = {abs(delta):g} < {MIN_ABS_DELTA:g}")
        params = ChainParams(n_ions, delta, eta)
        table = mode_table(params)
    except (IonNMError, ValueError, ArithmeticError) as exc:
        return [SweepPoint(delta, b, None, f"{type(exc).__name__}: {exc}") for b in betas]
    out = []
    for b in betas:
        try:
            c = dephasing.curve(params, b, t_trunc, dt, table=table, b_reading=b_reading)
            out.append(SweepPoint(delta, b, blp_measure(c, t_trunc)))
        except (IonNMError, ValueError, ArithmeticError) as exc:
            out.append(SweepPoint(delta, b, None, f"{type(exc).__name__}: {exc}"))
    return out


def sweep(deltas, beta_omega_maxes, t_trunc: float = DEFAULT_T_TRUNC, *,
          n_ions: int = 100, eta: float = DEFAULT_ETA, dt: float = dephasing.DEFAULT_DT,
          jobs: int = 1, b_reading: str = "exact") -> list:
    """BLP measure on the grid deltas x temperatures.

    Failures are recorded per point and do not stop the sweep. Output is
    sorted by (beta_omega_max, delta) whatever the completion order.
    """
    deltas = [float(d) for d in deltas]
    betas = [float(b) for b in beta_omega_maxes]
    if not deltas or not betas:
        return []
    args = [(d, betas, t_trunc, n_ions, eta, dt, b_reading) for d in deltas]
    if jobs > 1 and len(deltas) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_delta, *zip(*args)))
    else:
        chunks = [_sweep_delta(*a) for a in args]
    points = [p for chunk in chunks for p in chunk]
    for p in points:
        if not p.ok:
            log.warning("sweep point delta=%g bwm=%g failed: %s", p.delta, p.beta_omega_max, p.error)
    return sorted(points, key=lambda p: (p.beta_omega_max, p.delta))


# --- pair maximisation ----------------------------------------------------------

def default_pair_grid(n_theta: int = 16, n_phi: int = 8):
    """theta_i = i pi / n_theta and phi_j = 2 pi j / n_phi.

    With even ``n_theta`` the equator theta = pi/2 is on the grid, so the
    |+>, |-> pair itself is one of the candidates.
    """
    return math.pi * np.arange(n_theta) / n_theta, 2 * math.pi * np.arange(n_phi) / n_phi


@dataclass
class PairScan:
    thetas: np.ndarray
    phis: np.ndarray
    values: np.ndarray  # shape (len(thetas), len(phis))
    truncation_time: float

    @property
    def argmax(self) -> tuple:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.thetas[i]), float(self.phis[j])

    @property
    def max_value(self) -> float:
        return float(self.values.max())


def pair_scan(config: "oracle.FockConfig", beta: float, thetas, phis,
              t_trunc: float = DEFAULT_T_TRUNC, dt: float = 0.05) -> PairScan:
    """BLP measure of every antipodal pure pair on a (theta, phi) grid, exactly.

    The pair (theta, phi) / (pi - theta, phi + pi) is propagated with the
    truncated-Fock oracle; the channel is tabulated once per time.
    """
    if config.n_modes > oracle.MAX_MODES:
        raise ResourceLimitError(f"pair_scan supports at most {oracle.MAX_MODES} modes")
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    times = dephasing.time_grid(t_trunc, dt)
    channel = oracle.channel_tensor(config, beta, times)
    values = np.empty((thetas.size, phis.size))
    for i, th in enumerate(thetas):
        for j, ph in enumerate(phis):
            r1 = oracle.apply_channel(channel, oracle.pure_state(th, ph))
            r2 = oracle.apply_channel(channel, oracle.pure_state(math.pi - th, ph + math.pi))
            dist = oracle.trace_distance_batch(r1, r2)
            values[i, j] = positive_backflow(dist)
    return PairScan(thetas, phis, values, float(t_trunc))
