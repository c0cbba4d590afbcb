import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionnm import blp, dephasing, lattice, oracle
from ionnm.errors import InvalidParameterError, ResourceLimitError
from ionnm.lattice import ChainParams

PM = [(math.pi / 2, 0.0), (math.pi / 2, math.pi)]


def small_config(beta=math.inf):
    return oracle.make_config([0.8, 1.9], [0.5j, -0.3j], beta)


def test_displacement_unitary_and_coherent():
    d = oracle.displacement(0.7 + 0.2j, 40)
    assert oracle.unitarity_error(d) < 1e-12
    n = np.arange(40)
    from scipy.special import gammaln
    alpha = 0.7 + 0.2j
    coh = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(alpha) - 0.5 * gammaln(n + 1))
    assert np.max(np.abs(d[:20, 0] - coh[:20])) < 1e-10


def test_thermal_state_ground():
    conf = small_config()
    rho = oracle.thermal_state(math.inf, conf)
    assert rho[0, 0] == 1.0 and np.trace(rho) == 1.0


def test_thermal_state_geometric():
    conf = oracle.FockConfig((1.0,), (0j,), (30,))
    beta = math.log(2)
    pops = oracle.thermal_populations(beta, conf)[0]
    assert pops[0] == pytest.approx(0.5, abs=1e-9)
    np.testing.assert_allclose(pops[1:] / pops[:-1], 0.5, rtol=1e-14)
    rho = oracle.thermal_state(beta, conf)
    assert abs(np.trace(rho) - 1) < 1e-15


@pytest.mark.parametrize("bw", [0.3, 1.0, 4.3])
def test_mean_occupation_bose(bw):
    conf = oracle.make_config([1.0], [0.1j], bw)
    nbar = oracle.mean_occupation(oracle.thermal_populations(bw, conf))[0]
    bose = (1 / math.tanh(bw / 2) - 1) / 2
    # truncation error is bounded by the tail weight times the cutoff
    tail = oracle.thermal_tail(bw, conf.levels[0] - 1)
    assert abs(nbar - bose) < max(10 * conf.levels[0] * tail, 1e-15)


def test_cutoff_insufficient():
    conf = oracle.FockConfig((1.0,), (0j,), (13,))
    with pytest.raises(InvalidParameterError):
        oracle.thermal_state(1.0, conf)


def test_resource_limits():
    with pytest.raises(ResourceLimitError):
        oracle.FockConfig((1.0,) * 5, (0j,) * 5, (2,) * 5)
    with pytest.raises(ResourceLimitError):
        oracle.pulse_unitary(oracle.FockConfig((1.0, 2.0), (0j, 0j), (80, 80)), 1)


def test_leakage_warning():
    conf = oracle.FockConfig((1.0,), (2.0j,), (8,))
    with pytest.warns(RuntimeWarning, match="leakage"):
        oracle.reduced_state(*PM[0], math.inf, conf, 1.0)


def test_pulses_compose_to_identity():
    conf = small_config()
    u = oracle.protocol_unitary(conf, 0.0)
    assert oracle.unitarity_error(u) < 1e-9
    assert np.max(np.abs(u - np.eye(u.shape[0]))) < 1e-10


def test_decoupled_limit():
    conf = oracle.FockConfig((1.0, 2.0), (0j, 0j), (4, 4))
    r0 = oracle.reduced_state(0.7, 0.3, math.inf, conf, 0.0)
    for t in (0.5, 3.0, 11.0):
        assert np.max(np.abs(oracle.reduced_state(0.7, 0.3, math.inf, conf, t) - r0)) < 1e-12
    comp = oracle.compare_analytic(math.inf, conf, np.linspace(0, 10, 21))
    assert comp.max_deviation == 0.0


def test_initial_state_recovered():
    conf = small_config(1.5)
    for th, ph in [(0.0, 0.0), (0.9, 2.0), *PM]:
        rho = oracle.reduced_state(th, ph, 1.5, conf, 0.0)
        assert np.max(np.abs(rho - oracle.pure_state(th, ph))) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi), st.floats(0, 40))
def test_reduced_state_valid(theta, phi, t):
    conf = small_config(1.5)
    rho = oracle.reduced_state(theta, phi, 1.5, conf, t)
    oracle.check_density_matrix(rho, atol=1e-9)
    assert np.real(np.trace(rho @ rho)) <= 1 + 1e-12


def test_dense_and_factorised_agree():
    beta = 1.5
    conf = oracle.make_config([0.8, 1.9], [0.5j, -0.3j], beta)
    times = np.array([0.0, 0.7, 3.3, 12.0])
    for th, ph in [(0.0, 0.0), (1.1, 0.4), PM[0]]:
        a = oracle.reduced_state(th, ph, beta, conf, times)
        b = oracle.reduced_state(th, ph, beta, conf, times, method="dense")
        assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("bw", [math.inf, 1.0])
def test_single_mode_echo_visibility(bw):
    # |<W^dag D^dag W D>| over the (thermal) mode state equals V(t, beta)
    w, a2 = 1.3, 0.4
    beta = bw / w
    conf = oracle.make_config([w], [1j * math.sqrt(a2)], beta)
    n = conf.levels[0]
    d = oracle.displacement(conf.alphas[0], n)
    p = oracle.thermal_populations(beta, conf)[0]
    c = dephasing.CouplingSet([w], [a2])
    for t in np.linspace(0.1, 9, 7):
        wt = np.diag(np.exp(-1j * w * t * np.arange(n)))
        echo = wt.conj().T @ d.conj().T @ wt @ d
        assert abs(np.diag(echo) @ p) == pytest.approx(dephasing.visibility_V(t, beta, c), abs=1e-9)


def test_trace_distance_examples():
    e, g = oracle.pure_state(0, 0), oracle.pure_state(math.pi, 0)
    assert oracle.trace_distance(e, e) == 0.0
    assert oracle.trace_distance(e, g) == pytest.approx(1.0, abs=1e-15)
    assert oracle.trace_distance(oracle.pure_state(*PM[0]), oracle.pure_state(*PM[1])) == \
        pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InvalidParameterError):
        oracle.trace_distance(e, np.eye(3) / 3)


def test_antipodal_pairs_start_distinguishable():
    conf = small_config(2.0)
    ch = oracle.channel_tensor(conf, 2.0, [0.0])
    for th, ph in [(0.3, 1.0), (2.0, 4.0)]:
        r1 = oracle.apply_channel(ch, oracle.pure_state(th, ph))
        r2 = oracle.apply_channel(ch, oracle.pure_state(math.pi - th, ph + math.pi))
        assert oracle.trace_distance_batch(r1, r2)[0] == pytest.approx(1.0, abs=1e-10)


def test_subsampled_config_rescaling():
    table = lattice.mode_table(ChainParams(100, 0.1))
    full = dephasing.couplings(table)
    conf = oracle.subsampled_config(table, math.inf, 3)
    assert conf.n_modes == 3
    assert conf.couplings().total == pytest.approx(full.total, rel=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_zero_temperature_exact(m):
    table = lattice.mode_table(ChainParams(100, 0.1))
    conf = oracle.subsampled_config(table, math.inf, m)
    assert 2 * conf.env_dim <= 2 * 11**3
    comp = oracle.compare_analytic(math.inf, conf, np.linspace(0, 50, 501))
    assert comp.max_deviation < 1e-8


def test_finite_temperature_readings(quiet):
    table = lattice.mode_table(ChainParams(100, 0.1))
    omega_max = dephasing.couplings(table).omega_max
    beta = 0.7 / omega_max
    conf = oracle.subsampled_config(table, beta, 2)
    times = np.linspace(0, 50, 251)
    adopted = oracle.compare_analytic(beta, conf, times)
    literal_xi = oracle.compare_analytic(beta, conf, times, xi_reading="literal")
    literal_b = oracle.compare_analytic(beta, conf, times, b_reading="literal")
    assert adopted.max_deviation < 1e-7
    assert literal_xi.max_deviation > 0.1
    assert literal_b.max_deviation > 100 * adopted.max_deviation


def test_oracle_curve_contractive_where_flux_negative():
    conf = small_config(1.5)
    times = dephasing.time_grid(30.0, 0.01)
    d = oracle.plus_minus_distance(conf, 1.5, times)
    curve = dephasing.DephasingCurve(times, d, 0.01)
    inc = np.diff(d)
    sigma = blp.information_flux(curve)
    # every interval the flux marks as decreasing really loses distinguishability
    mask = (sigma[:-1] < 0) & (sigma[1:] < 0)
    assert np.all(inc[mask] <= 1e-12)
    # and the closed form gives the same measure
    c = conf.couplings()
    closed = dephasing.DephasingCurve(times, dephasing.optimal_trace_distance(times, 1.5, c), 0.01)
    assert blp.blp_measure(curve, 30.0).value == pytest.approx(
        blp.blp_measure(closed, 30.0).value, abs=1e-8)


def test_pair_scan_high_temperature_equatorial(quiet):
    table = lattice.mode_table(ChainParams(100, 0.1))
    beta = 0.3 / dephasing.couplings(table).omega_max
    conf = oracle.subsampled_config(table, beta, 2)
    th, ph = blp.default_pair_grid()
    scan = blp.pair_scan(conf, beta, th, ph, t_trunc=40.0)
    assert abs(scan.argmax[0] - math.pi / 2) <= th[1] + 1e-12
