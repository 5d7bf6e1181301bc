"""Temperature-tagged electromagnetic materials and Fresnel reflection.

Permittivity follows the exp(+jwt) convention, so a lossy medium has
eps_c = eps_r - j*sigma/(2*pi*f*eps0). Reflection coefficients are the plane
wave Fresnel amplitudes from vacuum onto a half space of the material. The TM
coefficient uses the sign convention that makes it equal to the TE one at
normal incidence, so a perfect conductor reflects with -1 in both.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict

import numpy as np
from scipy.constants import mu_0

import config
from modules.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

GOOD_CONDUCTOR_RATIO = 100.0


class Polarization(Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class Material:
    name: str
    relative_permittivity: float
    conductivity: float  # S/m
    temperature: float = 4.0  # K

    def __post_init__(self):
        if not self.relative_permittivity >= 1.0:
            raise InvalidArgumentError(
                f"material '{self.name}': relative permittivity must be >= 1, got {self.relative_permittivity}")
        if not self.conductivity >= 0.0:
            raise InvalidArgumentError(
                f"material '{self.name}': conductivity must be >= 0, got {self.conductivity}")
        if not self.temperature > 0.0:
            raise InvalidArgumentError(
                f"material '{self.name}': temperature must be > 0 K, got {self.temperature}")

    @property
    def is_perfect_conductor(self) -> bool:
        return math.isinf(self.conductivity)

    def loss_ratio(self, frequency: float) -> float:
        """sigma / (omega eps0 eps_r)"""
        _check_frequency(frequency)
        return self.conductivity / (2 * math.pi * frequency * config.EPSILON_0 * self.relative_permittivity)

    def is_good_conductor(self, frequency: float) -> bool:
        return self.loss_ratio(frequency) > GOOD_CONDUCTOR_RATIO

    def with_temperature(self, temperature: float) -> "Material":
        # Property values are held fixed across temperature unless overridden
        return replace(self, temperature=temperature)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "relative_permittivity": self.relative_permittivity,
            "conductivity": "inf" if self.is_perfect_conductor else self.conductivity,
            "temperature": self.temperature,
        }


def _check_frequency(frequency: float):
    if not frequency > 0:
        raise InvalidArgumentError(f"frequency must be positive, got {frequency}")


MATERIAL_PRESETS: Dict[str, Material] = {
    "copper_4K": Material("copper_4K", 1.0, 2.9e8, 4.0),
    "silicon_4K": Material("silicon_4K", 11.45, 4.26e-7, 4.0),
    "sio2_4K": Material("sio2_4K", 3.9, 0.0, 4.0),
    "pec": Material("pec", 1.0, float("inf"), 4.0),
    "vacuum": Material("vacuum", 1.0, 0.0, 4.0),
}


def shield_material() -> Material:
    """Thermal shield alloy; copper's cryogenic conductivity unless overridden"""
    return Material("thermal_shield", 1.0, config.SHIELD_CONDUCTIVITY, 4.0)


def get_material(name: str) -> Material:
    if name == "thermal_shield":
        return shield_material()
    try:
        return MATERIAL_PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown material '{name}'; presets are {', '.join(sorted(MATERIAL_PRESETS))}") from None


def material_from_dict(name: str, data: Dict[str, Any]) -> Material:
    """Build a material from a scenario-file block"""
    conductivity = data.get("conductivity", 0.0)
    if isinstance(conductivity, str) and conductivity.lower() in {"inf", "infinity"}:
        conductivity = float("inf")
    return Material(
        name=name,
        relative_permittivity=float(data.get("relative_permittivity", 1.0)),
        conductivity=float(conductivity),
        temperature=float(data.get("temperature", 4.0)),
    )


def complex_permittivity(material: Material, frequency: float) -> complex:
    _check_frequency(frequency)
    if material.is_perfect_conductor:
        return complex(material.relative_permittivity, -math.inf)
    imag = material.conductivity / (2 * math.pi * frequency * config.EPSILON_0)
    return complex(material.relative_permittivity, -imag)


def skin_depth(material: Material, frequency: float) -> float:
    """Skin depth in metres; zero for a perfect conductor, inf for lossless media"""
    _check_frequency(frequency)
    if material.is_perfect_conductor:
        return 0.0
    if material.conductivity == 0:
        return math.inf
    return math.sqrt(2.0 / (2 * math.pi * frequency * mu_0 * material.conductivity))


def surface_resistance(material: Material, frequency: float) -> float:
    depth = skin_depth(material, frequency)
    if depth == 0.0:
        return 0.0
    if math.isinf(depth):
        return math.inf
    return 1.0 / (material.conductivity * depth)


def fresnel_coefficients(material: Material, frequency: float, cos_theta: np.ndarray):
    """Vectorized (TE, TM) coefficients for an array of incidence cosines."""
    cos_theta = np.asarray(cos_theta, dtype=float)
    if material.is_perfect_conductor:
        minus_one = np.full(cos_theta.shape, -1.0 + 0j)
        return minus_one, minus_one.copy()
    eps_c = complex_permittivity(material, frequency)
    sin2 = 1.0 - cos_theta ** 2
    root = np.sqrt(eps_c - sin2 + 0j)
    te = (cos_theta - root) / (cos_theta + root)
    tm = (root - eps_c * cos_theta) / (root + eps_c * cos_theta)
    return te, tm


def reflection_coefficient(material: Material, frequency: float, incidence_angle: float,
                           polarization: Polarization | str) -> complex:
    """Fresnel amplitude reflection coefficient at one incidence angle (radians)."""
    _check_frequency(frequency)
    if not 0.0 <= incidence_angle < math.pi / 2:
        raise InvalidArgumentError(
            f"incidence angle must lie in [0, pi/2), got {incidence_angle}")
    polarization = Polarization(polarization)
    te, tm = fresnel_coefficients(material, frequency, np.array([math.cos(incidence_angle)]))
    return complex((te if polarization is Polarization.TE else tm)[0])
