"""Dipole sizing and analytic radiation patterns."""
import json
import logging
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import sici

import config
from modules.errors import InvalidArgumentError
from utils.helpers import check_directions

logger = logging.getLogger(__name__)

DESIGN_RECORD_PATH = Path(__file__).resolve().parent.parent / "data" / "dipole_design.json"


def _half_wave_directivity() -> float:
    # D = 4 / Cin(2*pi), Cin(x) = gamma + ln(x) - Ci(x)
    _, ci = sici(2 * math.pi)
    cin = np.euler_gamma + math.log(2 * math.pi) - ci
    return 4.0 / cin


HALF_WAVE_DIPOLE_PEAK = _half_wave_directivity()


class Pattern(Enum):
    ISOTROPIC = "isotropic"
    HALF_WAVE_DIPOLE = "half_wave_dipole"


@dataclass(frozen=True)
class DipoleDesign:
    center_frequency: float
    substrate_relative_permittivity: float
    free_space_wavelength: float
    effective_permittivity: float
    estimated_length: float
    optimized_length: Optional[float] = None
    provenance: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def design_dipole(center_frequency: float, relative_permittivity: float,
                  optimized_length: Optional[float] = None, provenance: str = "") -> DipoleDesign:
    """Initial resonant length L = lambda0 / (2 sqrt(eps_eff)), eps_eff = (eps_r + 1) / 2."""
    if not center_frequency > 0:
        raise InvalidArgumentError(f"center frequency must be positive, got {center_frequency}")
    if not relative_permittivity >= 1.0:
        raise InvalidArgumentError(f"relative permittivity must be >= 1, got {relative_permittivity}")
    wavelength = config.SPEED_OF_LIGHT / center_frequency
    eps_eff = (relative_permittivity + 1.0) / 2.0
    return DipoleDesign(
        center_frequency=center_frequency,
        substrate_relative_permittivity=relative_permittivity,
        free_space_wavelength=wavelength,
        effective_permittivity=eps_eff,
        estimated_length=wavelength / (2.0 * math.sqrt(eps_eff)),
        optimized_length=optimized_length,
        provenance=provenance,
    )


def load_design_record(path: Path = DESIGN_RECORD_PATH) -> DipoleDesign:
    """Design record bundled with the repo, carrying the optimized length and its source"""
    with open(path, "r", encoding="utf-8") as f:
        record = json.load(f)
    design = design_dipole(
        record["center_frequency"],
        record["substrate_relative_permittivity"],
        optimized_length=record.get("optimized_length"),
        provenance=record.get("provenance", ""),
    )
    logger.debug("Loaded dipole design record from %s", path)
    return design


@dataclass(frozen=True, eq=False)
class AntennaModel:
    design: DipoleDesign
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    pattern: Pattern = Pattern.HALF_WAVE_DIPOLE

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise InvalidArgumentError("antenna axis must be non-zero")
        object.__setattr__(self, "axis", axis / norm)
        object.__setattr__(self, "pattern", Pattern(self.pattern))

    @property
    def peak_gain(self) -> float:
        return 1.0 if self.pattern is Pattern.ISOTROPIC else HALF_WAVE_DIPOLE_PEAK


def isotropic_antenna(frequency: float = config.DESIGN_FREQUENCY, axis=(0.0, 0.0, 1.0)) -> AntennaModel:
    return AntennaModel(design_dipole(frequency, 1.0), axis=np.asarray(axis, dtype=float), pattern=Pattern.ISOTROPIC)


def _dipole_pattern(cos_theta: np.ndarray) -> np.ndarray:
    sin_theta = np.sqrt(np.clip(1.0 - cos_theta ** 2, 0.0, 1.0))
    safe = np.where(sin_theta > 1e-12, sin_theta, 1.0)
    shape = (np.cos(0.5 * np.pi * cos_theta) / safe) ** 2
    return np.where(sin_theta > 1e-12, HALF_WAVE_DIPOLE_PEAK * shape, 0.0)


def gain_many(model: AntennaModel, directions: np.ndarray) -> np.ndarray:
    """Linear gain for a batch of unit directions, shape (N, 3)."""
    directions = np.atleast_2d(directions)
    if model.pattern is Pattern.ISOTROPIC:
        return np.ones(len(directions))
    return _dipole_pattern(directions @ model.axis)


def gain(model: AntennaModel, direction) -> float:
    direction = np.asarray(direction, dtype=float)
    check_directions(direction[None, :])
    return float(gain_many(model, direction[None, :])[0])


def pattern_integral(model: AntennaModel) -> float:
    """(1/4pi) of the gain integrated over the sphere; 1 for a normalized pattern."""
    if model.pattern is Pattern.ISOTROPIC:
        return 1.0
    value, _ = integrate.quad(lambda theta: _dipole_pattern(np.array([math.cos(theta)]))[0] * math.sin(theta),
                              0.0, math.pi, limit=200)
    return 2 * math.pi * value / (4 * math.pi)


def link_gain_db(model: AntennaModel, separation: float, angle: float) -> float:
    """Line-of-sight path gain between two copies of `model` with parallel axes.

    `angle` is measured between the link and the shared axis, in radians.
    """
    if not separation > 0:
        raise InvalidArgumentError(f"separation must be positive, got {separation}")
    wavelength = model.design.free_space_wavelength
    pattern = 1.0 if model.pattern is Pattern.ISOTROPIC else _dipole_pattern(np.array([math.cos(angle)]))[0]
    if pattern <= 0:
        return float("-inf")
    return 20.0 * math.log10(wavelength / (4 * math.pi * separation) * pattern)


def bearing_for_link_gain(model: AntennaModel, separation: float, target_db: float) -> float:
    """Smallest angle off the axis at which the line-of-sight gain reaches `target_db`.

    Falls back to broadside when even broadside stays below the target.
    """
    broadside = math.pi / 2
    if model.pattern is Pattern.ISOTROPIC or link_gain_db(model, separation, broadside) <= target_db:
        return broadside
    return optimize.brentq(lambda angle: link_gain_db(model, separation, angle) - target_db, 1e-6, broadside,
                           xtol=1e-12)
