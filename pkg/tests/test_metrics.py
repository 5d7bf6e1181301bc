import math

import numpy as np
import pytest
from scipy.constants import Boltzmann, Planck

from modules.channel import synthesize_cir
from modules.errors import InvalidArgumentError, UndefinedMetricError
from modules.metrics import (NoiseKind, NoiseModel, coherence_bandwidth, link_metrics, mean_delay, noise_power,
                             received_energy, received_power, rms_delay_spread, snr, snr_sweep)
from modules.propagation import PathComponent, trace_images
from modules.scene import build_free_space_scene
from utils.helpers import linear_to_db, watts_to_dbm

UNIT = np.array([1.0, 0.0, 0.0])
PLANCK_4K = NoiseModel(NoiseKind.PLANCK_NYQUIST, 4.0, 28e9)
CLASSICAL_4K = NoiseModel(NoiseKind.CLASSICAL_KTB, 4.0, 28e9)
CLASSICAL_300K = NoiseModel(NoiseKind.CLASSICAL_KTB, 300.0, 28e9)


def taps(delays, powers):
    return [PathComponent(d, complex(math.sqrt(p)), 0, UNIT, UNIT) for d, p in zip(delays, powers)]


def test_single_tap_statistics():
    paths = taps([1e-9], [1.0])
    assert mean_delay(paths) == pytest.approx(1e-9)
    assert rms_delay_spread(paths) == 0.0


def test_two_equal_taps():
    paths = taps([0.0, 1e-9], [1.0, 1.0])
    assert mean_delay(paths) == pytest.approx(0.5e-9)
    assert rms_delay_spread(paths) == pytest.approx(0.5e-9)


def test_weighted_taps():
    paths = taps([0.0, 2e-9], [0.75, 0.25])
    assert mean_delay(paths) == pytest.approx(0.5e-9)
    assert rms_delay_spread(paths) == pytest.approx(math.sqrt(0.75) * 1e-9)


def test_threshold_drops_weak_taps():
    paths = taps([0.0, 1e-9, 50e-9], [1.0, 1.0, 1e-5])
    assert rms_delay_spread(paths) == pytest.approx(0.5e-9)
    assert rms_delay_spread(paths, threshold_db=float("-inf")) > 0.5e-9


def test_zero_energy_is_undefined():
    with pytest.raises(UndefinedMetricError):
        mean_delay(taps([1e-9], [0.0]))
    with pytest.raises(UndefinedMetricError):
        rms_delay_spread([])
    with pytest.raises(UndefinedMetricError):
        rms_delay_spread(synthesize_cir([], 5e9))


def test_shift_and_scale_invariance():
    rng = np.random.default_rng(5)
    delays = rng.uniform(0, 10e-9, 12)
    powers = rng.uniform(0.01, 1.0, 12)
    base = taps(delays, powers)
    shifted = taps(delays + 3e-9, powers)
    scaled = taps(delays, powers * 7.5)
    assert rms_delay_spread(shifted) == pytest.approx(rms_delay_spread(base), rel=1e-12)
    assert mean_delay(shifted) == pytest.approx(mean_delay(base) + 3e-9, rel=1e-12)
    assert rms_delay_spread(scaled) == pytest.approx(rms_delay_spread(base), rel=1e-12)
    assert mean_delay(scaled) == pytest.approx(mean_delay(base), rel=1e-12)


def brute_force_moments(delays, powers):
    total = sum(powers)
    mean = sum(p * d for p, d in zip(powers, delays)) / total
    second = sum(p * (d - mean) ** 2 for p, d in zip(powers, delays)) / total
    return mean, math.sqrt(second)


def test_metric_oracle_on_random_tap_lists():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        count = int(rng.integers(2, 7))
        # resolvable taps two nanoseconds apart so pulses never overlap
        delays = np.sort(rng.choice(np.arange(1, 9), size=count, replace=False)) * 2e-9
        powers = rng.uniform(0.1, 1.0, count)
        phases = np.exp(2j * np.pi * rng.uniform(size=count))
        paths = [PathComponent(d, complex(math.sqrt(p) * ph), 0, UNIT, UNIT)
                 for d, p, ph in zip(delays, powers, phases)]
        mean, spread = brute_force_moments(delays.tolist(), powers.tolist())
        everything = float("-inf")
        assert mean_delay(paths, everything) == pytest.approx(mean, rel=1e-12)
        assert rms_delay_spread(paths, everything) == pytest.approx(spread, rel=1e-12)

        cir = synthesize_cir(paths, 5e9)
        assert mean_delay(cir) == pytest.approx(mean, rel=0.02)
        assert rms_delay_spread(cir) == pytest.approx(spread, rel=0.02)


def test_classical_noise_at_4k():
    n = noise_power(CLASSICAL_4K, 1e9)
    assert n == pytest.approx(5.5226e-14, rel=1e-4)
    assert watts_to_dbm(n) == pytest.approx(-102.58, abs=0.01)


def test_planck_noise_at_4k():
    n = noise_power(PLANCK_4K, 1e9)
    x = Planck * 28e9 / (Boltzmann * 4.0)
    assert x == pytest.approx(0.33595, abs=1e-5)
    assert n == pytest.approx(4.6465e-14, rel=1e-3)
    assert watts_to_dbm(n) == pytest.approx(-103.33, abs=0.01)
    ratio = n / noise_power(CLASSICAL_4K, 1e9)
    assert ratio == pytest.approx(x / math.expm1(x), rel=1e-9)
    assert ratio == pytest.approx(0.8414, abs=2e-4)
    assert PLANCK_4K.quantum_ratio == pytest.approx(ratio, rel=1e-12)


def test_planck_reduces_to_classical_for_small_quanta():
    temperature = Planck * 28e9 / (Boltzmann * 1e-6)
    planck = noise_power(NoiseModel("planck_nyquist", temperature, 28e9), 1e9)
    classical = noise_power(NoiseModel("classical_ktb", temperature, 28e9), 1e9)
    assert planck == pytest.approx(classical, rel=1e-4)


def test_planck_always_below_classical():
    rng = np.random.default_rng(9)
    for temperature, frequency in zip(rng.uniform(0.01, 400, 50), rng.uniform(1e9, 300e9, 50)):
        planck = noise_power(NoiseModel("planck_nyquist", temperature, frequency), 1e9)
        classical = noise_power(NoiseModel("classical_ktb", temperature, frequency), 1e9)
        assert planck < classical


def test_noise_figure_scales_noise():
    noisy = NoiseModel(NoiseKind.CLASSICAL_KTB, 4.0, 28e9, noise_figure_db=3.0)
    assert noise_power(noisy, 1e9) / noise_power(CLASSICAL_4K, 1e9) == pytest.approx(10 ** 0.3)
    assert noisy.label == "classical_ktb_4K_nf3dB"


def test_noise_model_validation():
    with pytest.raises(InvalidArgumentError):
        NoiseModel(NoiseKind.CLASSICAL_KTB, 0.0)
    with pytest.raises(InvalidArgumentError):
        NoiseModel(NoiseKind.PLANCK_NYQUIST, 4.0, -1.0)
    with pytest.raises(InvalidArgumentError):
        noise_power(CLASSICAL_4K, 0.0)


def test_snr_of_unit_channel_at_minus_30_dbm():
    assert snr(1.0, 1e-6, PLANCK_4K, 1e9) == pytest.approx(73.3, abs=0.1)


def test_snr_gain_of_cooling():
    delta = snr(1.0, 1e-6, CLASSICAL_4K, 1e9) - snr(1.0, 1e-6, CLASSICAL_300K, 1e9)
    assert delta == pytest.approx(10 * math.log10(300 / 4), abs=1e-9)
    assert delta == pytest.approx(18.75, abs=0.01)


def test_snr_edge_cases_and_monotonicity():
    assert snr(0.0, 1e-6, PLANCK_4K, 1e9) == float("-inf")
    with pytest.raises(InvalidArgumentError):
        snr(1.0, 1e-6, PLANCK_4K, 0.0)
    with pytest.raises(InvalidArgumentError):
        snr(1.0, 0.0, PLANCK_4K, 1e9)
    values = [snr(1e-3, 1e-6, PLANCK_4K, b) for b in (0.5e9, 1e9, 2e9, 5e9)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert snr(1e-3, 2e-6, PLANCK_4K, 1e9) > snr(1e-3, 1e-6, PLANCK_4K, 1e9)


def test_received_power_follows_friis():
    paths = trace_images(build_free_space_scene(), (0, 0, 0), (0.1, 0, 0), 0)
    assert linear_to_db(received_power(paths, 1e-3) / 1e-3) == pytest.approx(-41.39, abs=0.01)
    unit = taps([0.0], [1.0])
    assert received_power(unit, 2e-6) == pytest.approx(2e-6)
    assert received_energy(synthesize_cir(unit, 5e9)) == pytest.approx(1.0, rel=0.01)
    with pytest.raises(InvalidArgumentError):
        received_power(unit, 0.0)


def test_coherence_bandwidth_estimate():
    assert coherence_bandwidth(0.5e-9) == pytest.approx(2e9)
    assert math.isinf(coherence_bandwidth(0.0))


def test_link_metrics_and_empty_link_marker():
    paths = taps([0.0, 1e-9], [1e-4, 1e-4])
    metrics = link_metrics("B1", paths, 1e-6, [PLANCK_4K], [1e9], distance=0.01)
    assert metrics.path_count == 2
    assert metrics.coherence_bandwidth_estimate == pytest.approx(1 / metrics.rms_delay_spread)
    assert metrics.p_rx_w == pytest.approx(2e-10)
    assert metrics.snr_db["snr_db@planck_nyquist_4K@1e+09Hz"] == pytest.approx(snr(2e-4, 1e-6, PLANCK_4K, 1e9))

    empty = link_metrics("B2", [], 1e-6, [PLANCK_4K], [1e9])
    assert not empty.converged
    assert empty.received_energy == 0.0
    assert math.isnan(empty.rms_delay_spread)
    assert empty.snr_db["snr_db@planck_nyquist_4K@1e+09Hz"] == float("-inf")


def test_snr_sweep_table():
    frame = snr_sweep({"B1": 1e-3, "B2": 2e-3}, 1e-6, [PLANCK_4K, CLASSICAL_300K], [1e9, 2e9, 5e9])
    assert len(frame) == 2 * 2 * 3
    for (_, _), group in frame.groupby(["link_label", "noise_model"]):
        assert group["snr_db"].is_monotonic_decreasing
    cold = frame[(frame.noise_model == PLANCK_4K.label) & (frame.link_label == "B1")]["snr_db"].to_numpy()
    warm = frame[(frame.noise_model == CLASSICAL_300K.label) & (frame.link_label == "B1")]["snr_db"].to_numpy()
    assert np.all(cold > warm)
