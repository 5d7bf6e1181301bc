import hashlib
from pathlib import Path
from typing import Sequence

import numpy as np

from modules.errors import InvalidArgumentError


def linear_to_db(value: float) -> float:
    """Power ratio to dB; zero maps to -inf"""
    if value <= 0:
        return float("-inf")
    return 10.0 * np.log10(value)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def watts_to_dbm(power_w: float) -> float:
    """Convert watts to dBm"""
    return linear_to_db(power_w) + 30.0 if power_w > 0 else float("-inf")


def as_vector(value: Sequence[float], name: str = "vector") -> np.ndarray:
    """Coerce a 3-sequence into a float64 array"""
    vec = np.asarray(value, dtype=float)
    if vec.shape != (3,):
        raise InvalidArgumentError(f"{name} must have exactly 3 components, got shape {vec.shape}")
    return vec


def normalize(vec: np.ndarray) -> np.ndarray:
    """Normalize along the last axis"""
    norm = np.linalg.norm(vec, axis=-1, keepdims=True)
    return vec / norm


def check_directions(directions: np.ndarray, tolerance: float = 1e-9):
    norms = np.linalg.norm(directions, axis=-1)
    if np.any(np.abs(norms - 1.0) > tolerance):
        raise InvalidArgumentError(f"ray direction must be a unit vector (within {tolerance:g})")


def format_delay(seconds: float) -> str:
    """Format a delay in the most readable unit"""
    if seconds < 1e-9:
        return f"{seconds * 1e12:.1f} ps"
    elif seconds < 1e-6:
        return f"{seconds * 1e9:.3f} ns"
    return f"{seconds * 1e6:.3f} us"


def format_frequency(hertz: float) -> str:
    if hertz >= 1e9:
        return f"{hertz / 1e9:.3f} GHz"
    elif hertz >= 1e6:
        return f"{hertz / 1e6:.3f} MHz"
    return f"{hertz:.1f} Hz"


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
