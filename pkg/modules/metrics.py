"""Channel metrics: delay statistics, received energy, thermal noise and SNR.

Delay statistics accept either a discrete path list (exact sums) or a sampled
ChannelImpulseResponse. Path lists are thresholded at PDP_THRESHOLD_DB below the
strongest tap; sampled records are used as they are and, by default, have the
pulse's own spread removed from the second moment.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.constants import Boltzmann, Planck

import config
from modules.channel import ChannelImpulseResponse
from modules.errors import InvalidArgumentError, UndefinedMetricError
from modules.propagation import PathComponent
from utils.helpers import db_to_linear, linear_to_db, watts_to_dbm

logger = logging.getLogger(__name__)

Source = Union[ChannelImpulseResponse, Sequence[PathComponent]]


class NoiseKind(Enum):
    CLASSICAL_KTB = "classical_ktb"
    PLANCK_NYQUIST = "planck_nyquist"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind
    temperature: float  # K
    center_frequency: float = config.DESIGN_FREQUENCY
    noise_figure_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not self.temperature > 0:
            raise InvalidArgumentError(f"noise temperature must be positive, got {self.temperature}")
        if not self.center_frequency > 0:
            raise InvalidArgumentError(f"center frequency must be positive, got {self.center_frequency}")
        if self.noise_figure_db < 0:
            raise InvalidArgumentError(f"noise figure must be >= 0 dB, got {self.noise_figure_db}")

    @property
    def label(self) -> str:
        label = f"{self.kind.value}_{self.temperature:g}K"
        return f"{label}_nf{self.noise_figure_db:g}dB" if self.noise_figure_db else label

    @property
    def quantum_ratio(self) -> float:
        """x / (e^x - 1) with x = h f / (k T): Planck floor relative to kTB"""
        x = Planck * self.center_frequency / (Boltzmann * self.temperature)
        return x / math.expm1(x)

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "temperature": self.temperature,
                "center_frequency": self.center_frequency, "noise_figure_db": self.noise_figure_db}


DEFAULT_NOISE_MODELS = (
    NoiseModel(NoiseKind.PLANCK_NYQUIST, 4.0),
    NoiseModel(NoiseKind.CLASSICAL_KTB, 4.0),
    NoiseModel(NoiseKind.CLASSICAL_KTB, 300.0),
)


def noise_power(model: NoiseModel, bandwidth: float) -> float:
    """Thermal noise power in watts over `bandwidth`, scaled by the noise factor."""
    if not bandwidth > 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    if model.kind is NoiseKind.PLANCK_NYQUIST:
        x = Planck * model.center_frequency / (Boltzmann * model.temperature)
        power = Planck * model.center_frequency * bandwidth / math.expm1(x)
    else:
        power = Boltzmann * model.temperature * bandwidth
    return power * db_to_linear(model.noise_figure_db)


def snr(cir_energy: float, p_tx: float, model: NoiseModel, bandwidth: float) -> float:
    """P_TX * energy / N in dB; -inf marks a link that received nothing."""
    if not bandwidth > 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    if cir_energy < 0:
        raise InvalidArgumentError(f"channel energy must be >= 0, got {cir_energy}")
    if not p_tx > 0:
        raise InvalidArgumentError(f"transmit power must be positive, got {p_tx}")
    if cir_energy == 0:
        return float("-inf")
    return 10 * math.log10(p_tx * cir_energy / noise_power(model, bandwidth))


def _weights(source: Source, threshold_db: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(source, ChannelImpulseResponse):
        times, weights = source.times, source.power_delay_profile()
    else:
        times = np.array([p.delay for p in source], dtype=float)
        weights = np.array([p.power for p in source], dtype=float)
        if threshold_db is None:
            threshold_db = config.PDP_THRESHOLD_DB
    if weights.size == 0 or not np.sum(weights) > 0:
        raise UndefinedMetricError("delay statistics are undefined for a zero-energy channel")
    if threshold_db is not None and np.isfinite(threshold_db):
        keep = weights >= weights.max() * 10 ** (threshold_db / 10)
        times, weights = times[keep], weights[keep]
    return times, weights


def mean_delay(source: Source, threshold_db: Optional[float] = None) -> float:
    times, weights = _weights(source, threshold_db)
    return float(np.sum(weights * times) / np.sum(weights))


def rms_delay_spread(source: Source, threshold_db: Optional[float] = None,
                     remove_pulse_spread: bool = True) -> float:
    """Square root of the PDP's second central moment.

    threshold_db=None selects the per-source default (PDP_THRESHOLD_DB for path
    lists, no threshold for sampled records); pass -inf to keep every path.
    """
    times, weights = _weights(source, threshold_db)
    center = np.sum(weights * times) / np.sum(weights)
    variance = float(np.sum(weights * (times - center) ** 2) / np.sum(weights))
    if remove_pulse_spread and isinstance(source, ChannelImpulseResponse):
        variance -= source.pulse_variance()
    return math.sqrt(max(variance, 0.0))


def received_energy(source: Source) -> float:
    if isinstance(source, ChannelImpulseResponse):
        return source.energy
    return float(sum(p.power for p in source))


def received_power(source: Source, p_tx: float) -> float:
    """P_RX = P_TX * sum |a_k|^2, in watts."""
    if not p_tx > 0:
        raise InvalidArgumentError(f"transmit power must be positive, got {p_tx}")
    return p_tx * received_energy(source)


def coherence_bandwidth(delay_spread: float) -> float:
    return 1.0 / delay_spread if delay_spread > 0 else math.inf


def snr_key(model: NoiseModel, bandwidth: float) -> str:
    return f"snr_db@{model.label}@{bandwidth:g}Hz"


@dataclass
class LinkMetrics:
    label: str
    distance: float  # m
    path_count: int
    mean_delay: float
    rms_delay_spread: float
    received_energy: float
    coherence_bandwidth_estimate: float
    p_rx_w: float
    transmission_db: float = float("nan")
    snr_db: Dict[str, float] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.path_count > 0

    def to_row(self) -> Dict[str, object]:
        return {
            "link_label": self.label,
            "distance_m": self.distance,
            "path_count": self.path_count,
            "mean_delay_s": self.mean_delay,
            "ds_rms_s": self.rms_delay_spread,
            "rx_energy": self.received_energy,
            "p_rx_dbm": watts_to_dbm(self.p_rx_w),
            "coherence_bandwidth_hz": self.coherence_bandwidth_estimate,
            "s21_db": self.transmission_db,
            **self.snr_db,
        }


def link_metrics(label: str, paths: Sequence[PathComponent], p_tx: float,
                 noise_models: Sequence[NoiseModel] = DEFAULT_NOISE_MODELS,
                 bandwidths: Sequence[float] = (config.BANDWIDTH,), distance: float = float("nan"),
                 transmission: float = float("nan"), threshold_db: Optional[float] = None) -> LinkMetrics:
    """Metrics for one link from its exact path list; an empty list yields the no-signal marker."""
    energy = received_energy(paths)
    snrs = {snr_key(m, b): snr(energy, p_tx, m, b) for b in bandwidths for m in noise_models}
    if not paths:
        logger.warning("Link %s received no paths; reporting an empty link", label)
        return LinkMetrics(label, distance, 0, float("nan"), float("nan"), 0.0, float("nan"), 0.0,
                           transmission, snrs)
    spread = rms_delay_spread(paths, threshold_db)
    return LinkMetrics(
        label=label,
        distance=distance,
        path_count=len(paths),
        mean_delay=mean_delay(paths, threshold_db),
        rms_delay_spread=spread,
        received_energy=energy,
        coherence_bandwidth_estimate=coherence_bandwidth(spread),
        p_rx_w=received_power(paths, p_tx),
        transmission_db=transmission,
        snr_db=snrs,
    )


SWEEP_COLUMNS = ["link_label", "bandwidth_hz", "noise_model", "temperature_k", "noise_w", "noise_dbm", "snr_db"]


def snr_sweep(energies: Dict[str, float], p_tx: float, noise_models: Sequence[NoiseModel],
              bandwidths: Sequence[float]) -> pd.DataFrame:
    """SNR-versus-bandwidth table for every link and noise model."""
    rows: List[Dict[str, object]] = []
    for link, energy in energies.items():
        for model in noise_models:
            for bandwidth in bandwidths:
                noise = noise_power(model, bandwidth)
                rows.append({
                    "link_label": link,
                    "bandwidth_hz": float(bandwidth),
                    "noise_model": model.label,
                    "temperature_k": model.temperature,
                    "noise_w": noise,
                    "noise_dbm": watts_to_dbm(noise),
                    "snr_db": snr(energy, p_tx, model, bandwidth),
                })
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def power_spread_db(metrics: Sequence[LinkMetrics]) -> float:
    """Max-min received power across converged links, in dB"""
    levels = [linear_to_db(m.received_energy) for m in metrics if m.converged]
    if not levels:
        return float("nan")
    return max(levels) - min(levels)
