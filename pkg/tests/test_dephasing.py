import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ionnm import dephasing, lattice
from ionnm.dephasing import CouplingSet, ThermalSpec
from ionnm.errors import InvalidParameterError, SoftModeDivergenceError
from ionnm.lattice import Branch, ChainParams

ONE = CouplingSet([1.0], [0.01])

coupling_sets = st.lists(
    st.tuples(st.floats(0.2, 3.0), st.floats(0.0, 0.3)), min_size=1, max_size=6
).map(lambda rows: CouplingSet([w for w, _ in rows], [a for _, a in rows]))
betas = st.one_of(st.just(math.inf), st.floats(0.1, 20.0))


def test_coupling_single_mode():
    p = ChainParams(4, 0.1)
    m = lattice.Mode(Branch.TRANSVERSE_COS, 0, 1.0, 1.0)
    table = lattice.ModeTable((m,), lattice.Phase.LINEAR, p)
    c = dephasing.couplings(table, eta=0.1)
    assert c.alpha_sq[0] == pytest.approx(0.005, rel=1e-15)


def test_couplings_skip_axial_modes():
    table = lattice.mode_table(ChainParams(10, 0.1))
    c = dephasing.couplings(table)
    assert len(c) == 10
    assert np.all(c.omegas >= table.params.nu_t * 0.2)


def test_soft_mode_dominates_near_criticality():
    table = lattice.mode_table(ChainParams(100, 1e-5))
    c = dephasing.couplings(table)
    soft = lattice.transverse_dispersion(math.pi, table.params.nu_t, 100)
    assert c.omegas[np.argmax(c.alpha_sq)] == pytest.approx(soft, rel=1e-12)


def test_exactly_critical_chain_diverges():
    soft = lattice.Mode(Branch.TRANSVERSE_COS, 5, 0.0, 10**-0.5)
    table = lattice.ModeTable((soft,), lattice.Phase.LINEAR, ChainParams(10, 0.1))
    with pytest.raises(SoftModeDivergenceError):
        dephasing.couplings(table)


def test_coupling_set_validation():
    with pytest.raises(InvalidParameterError):
        CouplingSet([1.0, 2.0], [0.1])
    with pytest.raises(InvalidParameterError):
        CouplingSet([1.0], [-0.1])
    with pytest.raises(SoftModeDivergenceError):
        CouplingSet([0.0], [0.1])


def test_thermal_weight():
    assert dephasing.thermal_weight(1.0, math.inf) == 1.0
    assert dephasing.thermal_weight(2.0, 1.0) == pytest.approx(1.31304, abs=5e-6)
    e2 = math.exp(2)
    assert dephasing.thermal_weight(1.0, 2.0) == pytest.approx((e2 + 1) / (e2 - 1), rel=1e-14)
    x = 1e-6
    assert dephasing.thermal_weight(1.0, x) == pytest.approx(2 / x, rel=1e-9)
    with pytest.raises(InvalidParameterError):
        dephasing.thermal_weight(1.0, -1.0)


def test_A_examples():
    assert dephasing.decay_exponent_A(0.0, 2.0, ONE) == 0.0
    assert dephasing.decay_exponent_A(math.pi, math.inf, ONE) == pytest.approx(0.02, rel=1e-14)
    with pytest.raises(InvalidParameterError):
        dephasing.decay_exponent_A(-1.0, 1.0, ONE)


def test_B_examples():
    assert dephasing.phase_B(0.0, 2.0, ONE) == 0.0
    assert dephasing.phase_B(math.pi / 2, 2.0, ONE) == pytest.approx(0.0131304, abs=5e-8)
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(dephasing.phase_B(t + 2 * math.pi, 1.3, ONE),
                               dephasing.phase_B(t, 1.3, ONE), atol=1e-14)


def test_xi_and_V_examples():
    c = CouplingSet([1.0, 2.0], [0.04, 0.06])
    assert dephasing.xi(math.inf, c) == pytest.approx(math.exp(-0.05), rel=1e-14)
    assert dephasing.xi(math.inf, c) == pytest.approx(0.951229, abs=5e-7)
    assert dephasing.xi(1e-9, c) < 1e-100
    assert dephasing.visibility_V(0.0, 1.0, c) == 1.0
    assert dephasing.visibility_V(math.pi, math.inf, ONE) == pytest.approx(0.980199, abs=5e-7)


def test_literal_xi_exceeds_one_at_finite_temperature():
    c = CouplingSet([1.0, 2.0], [0.04, 0.06])
    assert dephasing.xi_literal(math.inf, c) == pytest.approx(dephasing.xi(math.inf, c))
    assert dephasing.xi_literal(1.0, c) > 1.0


@given(coupling_sets, betas)
def test_trace_distance_starts_at_one(c, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert abs(dephasing.optimal_trace_distance(0.0, beta, c) - 1.0) < 1e-12


@given(coupling_sets, betas, st.floats(0.0, 200.0))
def test_invariants(c, beta, t):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        A = dephasing.decay_exponent_A(t, beta, c)
        assert A >= dephasing.decay_exponent_A(t, math.inf, c) - 1e-15
        V = dephasing.visibility_V(t, beta, c)
        assert dephasing.xi(beta, c) ** 4 <= V * (1 + 1e-12)
        D = dephasing.optimal_trace_distance(t, beta, c)
        assert 0.0 <= D <= 1.0


@given(st.floats(0.3, 3.0), st.floats(0.0, 0.5), betas)
def test_single_mode_full_revival(w, a2, beta):
    c = CouplingSet([w], [a2])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert dephasing.optimal_trace_distance(2 * math.pi / w, beta, c) == pytest.approx(1.0, abs=1e-10)


@given(coupling_sets)
def test_zero_temperature_path(c):
    t = np.linspace(0, 60, 301)
    np.testing.assert_allclose(dephasing.optimal_trace_distance(t, math.inf, c),
                               dephasing.zero_temperature_trace_distance(t, c), rtol=0, atol=1e-14)


def test_strong_decoherence_is_finite():
    c = CouplingSet([0.01, 1.0], [50.0, 1.0])
    d = dephasing.optimal_trace_distance(np.linspace(0, 500, 1001), 0.5, c)
    assert np.all(np.isfinite(d)) and np.all((d >= 0) & (d <= 1))


def test_b_reading_choice():
    c = CouplingSet([0.5, 1.7], [0.2, 0.1])
    t = np.linspace(0, 20, 81)
    exact = dephasing.optimal_trace_distance(t, 1.0, c)
    lit = dephasing.optimal_trace_distance(t, 1.0, c, b_reading="literal")
    assert np.max(np.abs(exact - lit)) > 1e-3
    with pytest.raises(InvalidParameterError):
        dephasing.optimal_trace_distance(t, 1.0, c, b_reading="other")


def test_low_temperature_warning():
    with pytest.warns(UserWarning):
        dephasing.optimal_trace_distance(1.0, 0.1, ONE)


def test_time_grid():
    assert len(dephasing.time_grid(200, 0.01)) == 20001
    assert len(dephasing.time_grid(1.0, 0.3)) == 4
    with pytest.raises(InvalidParameterError):
        dephasing.time_grid(1.0, 0.0)


def test_thermal_spec():
    th = ThermalSpec(0.6, 2.0)
    assert th.beta == pytest.approx(0.3) and not th.zero_temperature
    assert ThermalSpec(math.inf, 2.0).zero_temperature
    with pytest.raises(InvalidParameterError):
        ThermalSpec(0.0, 1.0)


def test_curve_defaults():
    c = dephasing.curve(ChainParams(100, 0.1), 0.3)
    assert len(c) == 20001 and c.values[0] == 1.0
    assert c.meta["omega_max"] == pytest.approx(c.meta["nu_t"], rel=1e-12)
    assert c.meta["phase"] == "linear"


def test_curve_zigzag():
    c = dephasing.curve(ChainParams(20, -0.05), 1.2, t_max=20)
    assert c.values[0] == 1.0 and c.meta["phase"] == "zigzag"


def _extrema(v):
    d = np.diff(v)
    return np.flatnonzero((d[:-1] < 0) & (d[1:] >= 0)) + 1


def test_oscillations_in_phase_across_temperatures():
    params = ChainParams(100, 0.1)
    table = lattice.mode_table(params)
    mins = []
    for bwm in (0.3, 0.7, 1.2, 4.3):
        c = dephasing.curve(params, bwm, 30.0, 0.01, table=table)
        mins.append(c.times[_extrema(c.values)][:5])
    ref = mins[-1]
    period = np.mean(np.diff(ref))
    for m in mins[:-1]:
        assert len(m) == len(ref)
        assert np.max(np.abs(m - ref)) < 0.1 * period


def test_saturation_near_criticality():
    c = dephasing.curve(ChainParams(100, 1e-5), 0.7, t_max=120)
    plateau = c.values[c.times >= 60]
    assert np.all(np.abs(plateau - 0.25) < 0.02)
