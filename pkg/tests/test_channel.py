import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from modules.channel import (PulseShape, frequency_grid, frequency_response, pulse_waveform, rrc_pulse,
                             synthesize_cir, transmission_db)
from modules.errors import InvalidArgumentError, TruncationError
from modules.metrics import rms_delay_spread
from modules.propagation import PathComponent

B = 5e9
TS = 1 / B
UNIT = np.array([1.0, 0.0, 0.0])


def tap(delay, amplitude=1.0):
    return PathComponent(delay, complex(amplitude), 0, UNIT, UNIT)


def test_rrc_pulse_has_unit_energy_and_known_peak():
    t = np.linspace(-4 * TS, 4 * TS, 40001)
    p = rrc_pulse(t, TS, 0.25)
    assert trapezoid(p ** 2, t) == pytest.approx(1.0, rel=5e-3)
    assert p[20000] * math.sqrt(TS) == pytest.approx(1 - 0.25 + 1.0 / math.pi)


def test_gaussian_pulse_has_unit_energy():
    t = np.linspace(-4 * TS, 4 * TS, 40001)
    p = pulse_waveform(t, B, PulseShape.GAUSSIAN, 0.0)
    assert trapezoid(p ** 2, t) == pytest.approx(1.0, rel=1e-3)


def test_single_tap_is_one_centered_pulse():
    cir = synthesize_cir([tap(1e-9)], B)
    assert cir.energy == pytest.approx(1.0, rel=0.01)
    peak = cir.times[np.argmax(np.abs(cir.samples))]
    assert abs(peak - 1e-9) <= cir.sample_interval
    assert cir.start_time == pytest.approx(-4 * TS)
    assert cir.sample_interval <= 1 / (2 * B)


def test_two_equal_taps_spread_half_a_nanosecond():
    cir = synthesize_cir([tap(0.0), tap(1e-9)], B)
    pdp = cir.power_delay_profile()
    first = pdp[np.abs(cir.times - 0.0) < 0.29e-9].sum()
    second = pdp[np.abs(cir.times - 1e-9) < 0.29e-9].sum()
    assert first == pytest.approx(second, rel=0.01)
    assert rms_delay_spread(cir) == pytest.approx(0.5e-9, rel=0.02)


def test_parseval_for_resolvable_taps():
    rng = np.random.default_rng(7)
    for _ in range(20):
        count = rng.integers(1, 6)
        delays = rng.choice(np.arange(0, 10), size=count, replace=False) * 1e-9
        amplitudes = rng.uniform(0.2, 1.0, count) * np.exp(2j * np.pi * rng.uniform(size=count))
        paths = [tap(d, a) for d, a in zip(delays, amplitudes)]
        cir = synthesize_cir(paths, B)
        assert cir.energy == pytest.approx(np.sum(np.abs(amplitudes) ** 2), rel=0.01)


def test_duration_too_short_names_the_clipped_path():
    with pytest.raises(TruncationError) as exc:
        synthesize_cir([tap(0.5e-9), tap(2e-9)], B, duration=2.1e-9)
    assert exc.value.path_index == 1
    assert exc.value.delay == 2e-9


def test_synthesis_argument_checks():
    with pytest.raises(InvalidArgumentError):
        synthesize_cir([tap(0.0)], 0.0)
    with pytest.raises(InvalidArgumentError):
        synthesize_cir([tap(0.0)], B, sample_interval=0.2e-9)


def test_unit_tap_at_zero_is_flat():
    response = frequency_response([tap(0.0)], np.linspace(1e9, 40e9, 11))
    assert np.allclose(response.values, 1.0)


def test_single_delay_gives_linear_phase():
    grid = np.linspace(27e9, 29e9, 101)
    response = frequency_response([tap(1e-9)], grid)
    assert np.allclose(np.abs(response.values), 1.0)
    phase = np.unwrap(np.angle(response.values))
    slopes = np.diff(phase) / np.diff(grid)
    assert np.allclose(slopes, -2 * np.pi * 1e-9, rtol=1e-8)


def test_two_tap_interference_nulls():
    paths = [tap(0.0), tap(1e-9)]
    grid = np.array([0.5e9, 1e9, 1.5e9, 2e9])
    power = np.abs(frequency_response(paths, grid).values) ** 2
    assert np.allclose(power, 2 + 2 * np.cos(2 * np.pi * grid * 1e-9), atol=1e-12)
    assert power[0] < 1e-20
    assert power[1] == pytest.approx(4.0)


def test_time_shift_multiplies_by_linear_phase():
    rng = np.random.default_rng(3)
    delays = rng.uniform(0, 5e-9, 8)
    amplitudes = rng.normal(size=8) + 1j * rng.normal(size=8)
    shift = 0.37e-9
    grid = np.linspace(26e9, 30e9, 41)
    base = frequency_response([tap(d, a) for d, a in zip(delays, amplitudes)], grid).values
    moved = frequency_response([tap(d + shift, a) for d, a in zip(delays, amplitudes)], grid).values
    assert np.allclose(moved, base * np.exp(-2j * np.pi * grid * shift), rtol=1e-10, atol=1e-12)


def test_cir_spectrum_matches_discrete_response():
    rng = np.random.default_rng(11)
    fc = 28e9
    delays = rng.uniform(1e-9, 4e-9, 6)
    amplitudes = rng.uniform(0.2, 1.0, 6) * np.exp(2j * np.pi * rng.uniform(size=6))
    paths = [tap(d, a) for d, a in zip(delays, amplitudes)]
    cir = synthesize_cir(paths, B, carrier_frequency=fc)
    offsets = np.array([-1e9, 0.0, 1e9])
    # spectrum of one isolated pulse on the same sampling grid
    t = np.arange(-200, 201) * cir.sample_interval
    pulse = pulse_waveform(t, B, cir.pulse, cir.roll_off)
    pulse_spectrum = np.exp(-2j * np.pi * np.outer(offsets, t)) @ pulse * cir.sample_interval
    expected = frequency_response(paths, fc + offsets, reference_frequency=fc).values * pulse_spectrum
    assert np.allclose(cir.spectrum(offsets), expected, rtol=1e-2, atol=1e-9)


def test_transmission_at_grid_point():
    grid = frequency_grid(28e9, 2e9, 21)
    response = frequency_response([tap(0.0, 0.1)], grid)
    assert transmission_db(response, 28e9) == pytest.approx(-20.0)
    with pytest.raises(InvalidArgumentError):
        transmission_db(response, 40e9)


def test_empty_grid_rejected():
    with pytest.raises(InvalidArgumentError):
        frequency_response([tap(0.0)], [])
