import math

import numpy as np
import pytest

from ionmotion.errors import ContractError, DomainError, UnphysicalRatioError
from ionmotion.fockstate import EXACT, LOWER, UPPER, ground_state, thermal_distribution
from ionmotion.physcore import TWO_PI
from ionmotion.spectroscopy import (FLOP_FIT, PEAK_RATIO, ProbeConfig, correct_detection,
                                   effective_probability, flop_probability, ground_pi_time, measure_nbar,
                                   nbar_from_sideband_ratio, rabi_flop_trace, sideband_grid,
                                   sideband_strength, simulate_detection, synthesize_spectrum)

ETA = 0.116
OMEGA0 = TWO_PI * 100e3
OMEGA_X = TWO_PI * 5.8e6
PI_TIME = math.pi / (ETA * OMEGA0)


def test_flop_probability():
    assert flop_probability(2.0, 0.0, math.pi / 2.0) == pytest.approx(1.0)
    assert flop_probability(0.0, 3.0, 1.0) == 0.0
    assert flop_probability(0.0, 0.0, 1.0) == 0.0
    assert flop_probability(1.0, 0.7, 2.3) == pytest.approx(flop_probability(1.0, -0.7, 2.3))
    # off resonance the transfer never exceeds omega^2 / (omega^2 + delta^2)
    t = np.linspace(0, 50, 1001)
    assert np.max(flop_probability(1.0, 1.0, t)) <= 0.5 + 1e-12
    with pytest.raises(DomainError):
        flop_probability(1.0, 0.0, -1.0)


def _probe(orders, grid, **kwargs):
    return ProbeConfig(detuning_grid=grid, orders=orders, **kwargs)


def test_ground_state_spectrum_has_no_upper_sideband():
    grid = sideband_grid(OMEGA_X, (LOWER, UPPER), TWO_PI * 30e3, 61)
    probe = _probe((LOWER, UPPER), grid, t_probe=PI_TIME)
    spectrum = synthesize_spectrum(ground_state(5), ETA, OMEGA0, probe, OMEGA_X)
    lower = spectrum.peak(-OMEGA_X, TWO_PI * 30e3)
    upper = spectrum.peak(OMEGA_X, TWO_PI * 30e3)
    assert lower[1] == pytest.approx(1.0)
    assert upper[1] < 1e-4
    # peak sits on the sideband resonance
    assert lower[0] == pytest.approx(-OMEGA_X, abs=TWO_PI * 1e3)


def test_thermal_spectrum_peak_ratio():
    dist = thermal_distribution(5.0)
    grid = np.array([-OMEGA_X, OMEGA_X])
    spectrum = synthesize_spectrum(dist, ETA, OMEGA0, _probe((LOWER, UPPER), grid), OMEGA_X)
    lower, upper = spectrum.p_bright
    # the far-detuned other sideband adds a small background
    assert upper / lower == pytest.approx(5 / 6, rel=1e-3)

    isolated = [synthesize_spectrum(dist, ETA, OMEGA0, _probe((s,), [s * OMEGA_X]), OMEGA_X).p_bright[0]
                for s in (UPPER, LOWER)]
    assert isolated[0] / isolated[1] == pytest.approx(5 / 6, rel=1e-6)


def test_spectrum_peaks_at_sideband_frequencies():
    grid = sideband_grid(OMEGA_X, (LOWER, UPPER), TWO_PI * 30e3, 121)
    spectrum = synthesize_spectrum(thermal_distribution(1.0), ETA, OMEGA0,
                                   _probe((LOWER, UPPER), grid, t_probe=PI_TIME), OMEGA_X)
    for s in (LOWER, UPPER):
        position, _ = spectrum.peak(s * OMEGA_X, TWO_PI * 30e3)
        assert position == pytest.approx(s * OMEGA_X, abs=TWO_PI * 0.5e3)


def test_spectrum_saturation_is_clamped(caplog):
    # carrier and both sidebands on top of each other
    probe = _probe((LOWER, 0, UPPER), [0.0], t_probe=PI_TIME)
    spectrum = synthesize_spectrum(thermal_distribution(2.0), ETA, OMEGA0, probe, omega_x=0.0)
    assert spectrum.p_bright[0] == 1.0
    assert "saturates" in caplog.text


def test_zero_pulse_gives_no_transfer():
    dist = thermal_distribution(1.0)
    assert sideband_strength(dist, LOWER, ETA, OMEGA0, 0.0) == 0.0
    trace = rabi_flop_trace(dist, LOWER, ETA, OMEGA0, [0.0])
    assert trace.p_bright[0] == 0.0


def test_finite_shot_spectrum_is_reproducible():
    grid = sideband_grid(OMEGA_X, (LOWER, UPPER), TWO_PI * 30e3, 21)
    probe = _probe((LOWER, UPPER), grid, shots=100)
    a = synthesize_spectrum(thermal_distribution(0.5), ETA, OMEGA0, probe, OMEGA_X, rng=3)
    b = synthesize_spectrum(thermal_distribution(0.5), ETA, OMEGA0, probe, OMEGA_X, rng=3)
    np.testing.assert_array_equal(a.p_bright, b.p_bright)
    assert np.all((a.p_bright >= 0) & (a.p_bright <= 1))
    np.testing.assert_allclose(a.p_bright * 100, np.round(a.p_bright * 100), atol=1e-9)


def test_rabi_flop_trace_ground_state():
    times = np.linspace(0, 5 * PI_TIME, 50)
    lower = rabi_flop_trace(ground_state(3), LOWER, ETA, OMEGA0, times)
    np.testing.assert_allclose(lower.p_bright, np.sin(ETA * OMEGA0 * times / 2) ** 2, atol=1e-14)
    upper = rabi_flop_trace(ground_state(3), UPPER, ETA, OMEGA0, times)
    assert np.all(upper.p_bright == 0.0)
    assert lower.points()[0] == (0.0, 0.0)


def test_rabi_flop_trace_thermal_average():
    times = np.linspace(0, 2000 * PI_TIME, 200001)
    trace = rabi_flop_trace(thermal_distribution(1.0), LOWER, ETA, OMEGA0, times)
    assert trace.p_bright.mean() == pytest.approx(0.5, abs=1e-3)
    # several frequencies: the contrast decays below full transfer
    assert trace.p_bright.max() < 1.0


@pytest.mark.parametrize("nbar", [0.03, 0.205, 1.0, 5.0])
@pytest.mark.parametrize("pi_times", [0.1, 0.5, 1.0, 3.7, 10.0])
def test_thermal_ratio_identity(nbar, pi_times):
    dist = thermal_distribution(nbar)
    t = pi_times * PI_TIME
    for mode in ("lamb_dicke", EXACT):
        ratio = (sideband_strength(dist, UPPER, ETA, OMEGA0, t, mode)
                 / sideband_strength(dist, LOWER, ETA, OMEGA0, t, mode))
        assert ratio == pytest.approx(nbar / (1 + nbar), rel=1e-6)


def test_simulate_detection():
    assert simulate_detection(0.0, math.inf, 0.997) == (pytest.approx(0.003), 0.0)
    assert simulate_detection(0.5, math.inf, 0.9)[0] == pytest.approx(0.5)
    assert effective_probability(1.0, 0.997) == pytest.approx(0.997)
    p_est, sigma = simulate_detection(0.3, 1_000_000, 1.0, np.random.default_rng(1))
    assert p_est == pytest.approx(0.3, abs=3e-3)
    assert sigma == pytest.approx(math.sqrt(0.21 / 1e6), rel=0.01)
    with pytest.raises(ContractError):
        simulate_detection(0.3, 0, 1.0)


def test_detection_error_scales_with_inverse_root_shots():
    spread = []
    for shots in (100, 1600):
        rng = np.random.default_rng(shots)
        estimates = [simulate_detection(0.3, shots, 0.997, rng)[0] for _ in range(400)]
        spread.append(np.std(estimates))
    assert spread[0] / spread[1] == pytest.approx(4.0, rel=0.2)


def test_correct_detection_inverts_effective_probability():
    p, sigma = correct_detection(effective_probability(0.2, 0.997), 0.01, 0.997)
    assert p == pytest.approx(0.2)
    assert sigma == pytest.approx(0.01 / 0.994)
    assert correct_detection(0.0, 0.0, 0.997)[0] == 0.0


@pytest.mark.parametrize("r,nbar", [(0.5, 1.0), (0.0291, 0.030), (5 / 6, 5.0), (0.0, 0.0)])
def test_nbar_from_sideband_ratio(r, nbar):
    assert nbar_from_sideband_ratio(r) == pytest.approx(nbar, abs=1e-3)


def test_nbar_from_sideband_ratio_errors():
    with pytest.raises(UnphysicalRatioError):
        nbar_from_sideband_ratio(1.0)
    with pytest.raises(UnphysicalRatioError):
        nbar_from_sideband_ratio(1.3)
    with pytest.raises(DomainError):
        nbar_from_sideband_ratio(-0.1)


@pytest.mark.parametrize("nbar", [0.01, 0.03, 0.205, 1.0, 5.0, 20.0])
def test_peak_ratio_thermometry_is_exact(nbar):
    probe = ProbeConfig()
    measured, sigma = measure_nbar(thermal_distribution(nbar), ETA, OMEGA0, probe, PEAK_RATIO)
    assert measured == pytest.approx(nbar, rel=1e-4)
    assert sigma == 0.0


def test_peak_ratio_thermometry_small_nbar():
    measured, _ = measure_nbar(thermal_distribution(0.03), ETA, OMEGA0, ProbeConfig(t_probe=PI_TIME))
    assert measured == pytest.approx(0.03, abs=1e-6)


def test_ground_state_thermometry():
    assert measure_nbar(ground_state(10), ETA, OMEGA0, ProbeConfig()) == (0.0, 0.0)


def test_finite_shot_thermometry():
    probe = ProbeConfig(t_probe=PI_TIME, shots=5000)
    measured, sigma = measure_nbar(thermal_distribution(0.5), ETA, OMEGA0, probe, rng=11)
    assert sigma > 0
    assert measured == pytest.approx(0.5, abs=5 * sigma)


def test_flop_fit_thermometry():
    probe = ProbeConfig(t_probe=PI_TIME, flop_times=np.linspace(0, 3 * PI_TIME, 31))
    measured, _ = measure_nbar(thermal_distribution(0.5), ETA, OMEGA0, probe, FLOP_FIT)
    assert measured == pytest.approx(0.5, rel=1e-4)


def test_probe_config_invariants():
    with pytest.raises(ContractError):
        ProbeConfig(t_probe=0.0)
    with pytest.raises(ContractError):
        ProbeConfig(shots=0)
    with pytest.raises(ContractError):
        ProbeConfig(shots=2.5)
    with pytest.raises(ContractError):
        ProbeConfig(detection_fidelity=0.5)
    with pytest.raises(ContractError):
        ProbeConfig(orders=(3,))
    with pytest.raises(ContractError):
        measure_nbar(ground_state(3), ETA, OMEGA0, ProbeConfig(), method="guess")
    assert ProbeConfig(shots=math.inf).noiseless
    assert ProbeConfig().with_shots(10).shots == 10


def test_probe_follows_trap_by_default():
    probe = ProbeConfig()
    assert probe.follows_trap
    assert probe.resolved(ETA, OMEGA0).t_probe == pytest.approx(PI_TIME)
    assert ProbeConfig().resolved(2 * ETA, OMEGA0).t_probe == pytest.approx(PI_TIME / 2)
    # exact couplings carry the Debye-Waller factor
    assert ground_pi_time(ETA, OMEGA0, EXACT) == pytest.approx(PI_TIME * math.exp(ETA ** 2 / 2))
    pinned = ProbeConfig(t_probe=80e-6)
    assert not pinned.follows_trap
    assert pinned.resolved(ETA, OMEGA0) is pinned


def test_peak_ratio_needs_a_resolvable_lower_sideband():
    # a 2 pi pulse on |0> -> |1> leaves almost no lower-sideband transfer
    probe = ProbeConfig(t_probe=2 * PI_TIME)
    with pytest.raises(UnphysicalRatioError, match="probe time"):
        measure_nbar(thermal_distribution(0.005), ETA, OMEGA0, probe)
    measured, _ = measure_nbar(thermal_distribution(0.005), ETA, OMEGA0, ProbeConfig())
    assert measured == pytest.approx(0.005, rel=1e-4)
