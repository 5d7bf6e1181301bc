"""Band-limited impulse and frequency responses built from path lists.

CIRs are stored at complex baseband about the carrier: path amplitudes
already carry exp(-j 2 pi fc tau), and the passband response is
Re{h_bb(t) exp(j 2 pi fc t)}. Each path contributes one unit-energy pulse
p(t - tau) whose symbol width is 1 / bandwidth.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

import config
from modules.errors import InvalidArgumentError, TruncationError
from modules.propagation import PathComponent

logger = logging.getLogger(__name__)


class PulseShape(Enum):
    RRC = "rrc"
    GAUSSIAN = "gaussian"


def rrc_pulse(t: np.ndarray, symbol_interval: float, roll_off: float) -> np.ndarray:
    """Unit-energy root-raised-cosine, truncated at +-PULSE_HALF_SPAN symbols."""
    x = np.asarray(t, dtype=float) / symbol_interval
    b = roll_off
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sin(np.pi * x * (1 - b)) + 4 * b * x * np.cos(np.pi * x * (1 + b))
        den = np.pi * x * (1 - (4 * b * x) ** 2)
        g = num / den
    g = np.where(np.abs(x) < 1e-12, 1 - b + 4 * b / np.pi, g)
    if b > 0:
        edge = (b / math.sqrt(2)) * ((1 + 2 / np.pi) * math.sin(np.pi / (4 * b))
                                     + (1 - 2 / np.pi) * math.cos(np.pi / (4 * b)))
        g = np.where(np.abs(np.abs(x) - 1 / (4 * b)) < 1e-9, edge, g)
    g = np.where(np.abs(x) <= config.PULSE_HALF_SPAN, g, 0.0)
    return g / math.sqrt(symbol_interval)


def gaussian_pulse(t: np.ndarray, symbol_interval: float) -> np.ndarray:
    sigma = symbol_interval / 2
    t = np.asarray(t, dtype=float)
    p = np.exp(-t ** 2 / (2 * sigma ** 2)) / (math.pi ** 0.25 * math.sqrt(sigma))
    return np.where(np.abs(t) <= config.PULSE_HALF_SPAN * symbol_interval, p, 0.0)


def pulse_waveform(t: np.ndarray, bandwidth: float, shape: PulseShape, roll_off: float) -> np.ndarray:
    if shape is PulseShape.RRC:
        return rrc_pulse(t, 1.0 / bandwidth, roll_off)
    return gaussian_pulse(t, 1.0 / bandwidth)


@lru_cache(maxsize=32)
def pulse_variance(bandwidth: float, shape: PulseShape, roll_off: float) -> float:
    """Second moment of |p(t)|^2, the delay spread a single isolated tap shows."""
    half = config.PULSE_HALF_SPAN / bandwidth
    t = np.linspace(-half, half, 16001)
    power = pulse_waveform(t, bandwidth, shape, roll_off) ** 2
    return float(np.sum(t ** 2 * power) / np.sum(power))


@dataclass(frozen=True, eq=False)
class ChannelImpulseResponse:
    samples: np.ndarray
    sample_interval: float
    start_time: float
    bandwidth: float
    carrier_frequency: float = config.DESIGN_FREQUENCY
    pulse: PulseShape = PulseShape.RRC
    roll_off: float = config.RRC_ROLL_OFF
    source_paths: Tuple[PathComponent, ...] = field(default_factory=tuple)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.sample_interval * np.arange(len(self.samples))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.sample_interval)

    def power_delay_profile(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def pulse_variance(self) -> float:
        return pulse_variance(self.bandwidth, self.pulse, self.roll_off)

    def spectrum(self, frequencies: Sequence[float]) -> np.ndarray:
        """Fourier transform of the sampled baseband record at baseband frequencies."""
        frequencies = np.asarray(frequencies, dtype=float)
        kernel = np.exp(-2j * np.pi * np.outer(frequencies, self.times))
        return kernel @ self.samples * self.sample_interval


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise InvalidArgumentError("frequency grid and values differ in length")

    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.values))


def synthesize_cir(paths: Sequence[PathComponent], bandwidth: float = config.BANDWIDTH,
                   duration: Optional[float] = None, *, sample_interval: Optional[float] = None,
                   start_time: Optional[float] = None, pulse: PulseShape | str | None = None,
                   roll_off: Optional[float] = None,
                   carrier_frequency: float = config.DESIGN_FREQUENCY) -> ChannelImpulseResponse:
    """h(t) = sum_k a_k p(t - tau_k), sampled over [start_time, duration].

    `duration` is the end of the record measured from the transmit instant; it
    must cover the last delay plus the pulse half span.
    """
    if not bandwidth > 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    pulse = PulseShape(pulse or config.PULSE_SHAPE)
    roll_off = config.RRC_ROLL_OFF if roll_off is None else roll_off
    nyquist = 1.0 / (2.0 * bandwidth)
    if sample_interval is None:
        sample_interval = min(config.SAMPLE_INTERVAL, nyquist)
    elif not 0 < sample_interval <= nyquist * (1 + 1e-12):
        raise InvalidArgumentError(f"sample interval {sample_interval:.3e} s exceeds 1/(2B) = {nyquist:.3e} s")

    half_span = config.PULSE_HALF_SPAN / bandwidth
    delays = np.array([p.delay for p in paths], dtype=float)
    amplitudes = np.array([p.amplitude for p in paths], dtype=complex)
    first = min(0.0, float(delays.min())) if len(delays) else 0.0
    last = float(delays.max()) if len(delays) else 0.0
    if start_time is None:
        start_time = first - half_span
    if duration is None:
        duration = last + half_span + sample_interval
    for k, delay in enumerate(delays):
        if delay + half_span > duration:
            raise TruncationError(k, delay, f"pulse ends after the record end {duration:.6e} s")
        if delay - half_span < start_time:
            raise TruncationError(k, delay, f"pulse starts before the record start {start_time:.6e} s")

    count = int(math.floor((duration - start_time) / sample_interval + 1e-9)) + 1
    times = start_time + sample_interval * np.arange(count)
    samples = np.zeros(count, dtype=complex)
    for delay, amplitude in zip(delays, amplitudes):
        lo = max(0, int(math.floor((delay - half_span - start_time) / sample_interval)))
        hi = min(count, int(math.ceil((delay + half_span - start_time) / sample_interval)) + 1)
        samples[lo:hi] += amplitude * pulse_waveform(times[lo:hi] - delay, bandwidth, pulse, roll_off)

    logger.debug("Synthesized CIR: %d paths, %d samples at %.3e s", len(delays), count, sample_interval)
    return ChannelImpulseResponse(samples, sample_interval, start_time, bandwidth, carrier_frequency, pulse,
                                  roll_off, tuple(paths))


def frequency_response(paths: Sequence[PathComponent], grid: Sequence[float],
                       reference_frequency: float = 0.0) -> FrequencyResponse:
    """H(f) = sum_k a_k exp(-j 2 pi (f - f_ref) tau_k).

    Pass the carrier as `reference_frequency` for traced paths, whose
    amplitudes already hold the carrier phase; the result is then the exact
    passband response.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise InvalidArgumentError("frequency grid must be non-empty and strictly positive")
    delays = np.array([p.delay for p in paths], dtype=float)
    amplitudes = np.array([p.amplitude for p in paths], dtype=complex)
    if delays.size == 0:
        return FrequencyResponse(grid, np.zeros(grid.size, dtype=complex))
    values = np.exp(-2j * np.pi * np.outer(grid - reference_frequency, delays)) @ amplitudes
    return FrequencyResponse(grid, values)


def transmission_db(response: FrequencyResponse, frequency: float) -> float:
    """|H| in dB at the grid point nearest `frequency`, the S21 analog of the link"""
    grid = np.asarray(response.grid)
    if not grid.min() <= frequency <= grid.max():
        raise InvalidArgumentError(
            f"{frequency:.6e} Hz lies outside the response grid [{grid.min():.6e}, {grid.max():.6e}] Hz")
    value = response.values[int(np.argmin(np.abs(grid - frequency)))]
    return 20 * math.log10(abs(value)) if abs(value) > 0 else float("-inf")


def frequency_grid(center: float, span: float, points: int) -> np.ndarray:
    if points == 1:
        return np.array([center], dtype=float)
    return np.linspace(center - span / 2, center + span / 2, points)
