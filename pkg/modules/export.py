"""CSV and JSON artifact writers.

Every table goes through pandas with full double precision in scientific
notation and LF line endings, so identical inputs give byte-identical files.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import numpy as np
import pandas as pd

from modules.channel import ChannelImpulseResponse, FrequencyResponse, PulseShape
from modules.metrics import LinkMetrics
from modules.propagation import PathComponent, paths_to_frame

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.16e"
BASEBAND_NOTE = "complex baseband about fc_hz; passband h(t) = Re{h_bb(t) * exp(j*2*pi*fc_hz*t)}"


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("Wrote %s (%d rows)", path, len(frame))
    return path


def write_paths(paths: Sequence[PathComponent], path: Path) -> Path:
    return write_frame(paths_to_frame(paths), path)


def write_cir(cir: ChannelImpulseResponse, path: Path) -> Path:
    """Header comments (fc_hz, bandwidth_hz, dt_s, convention) followed by t_s, re, im rows"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"t_s": cir.times, "re": cir.samples.real, "im": cir.samples.imag})
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# fc_hz={FLOAT_FORMAT % cir.carrier_frequency}\n")
        f.write(f"# bandwidth_hz={FLOAT_FORMAT % cir.bandwidth}\n")
        f.write(f"# dt_s={FLOAT_FORMAT % cir.sample_interval}\n")
        f.write(f"# pulse={cir.pulse.value} roll_off={cir.roll_off:g}\n")
        f.write(f"# {BASEBAND_NOTE}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_cir(path: Path) -> ChannelImpulseResponse:
    """Inverse of write_cir, used to reload exported records"""
    header: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    header[key] = value
    frame = pd.read_csv(path, comment="#")
    dt = float(header["dt_s"])
    return ChannelImpulseResponse(
        samples=frame["re"].to_numpy() + 1j * frame["im"].to_numpy(),
        sample_interval=dt,
        start_time=float(frame["t_s"].iloc[0]) if len(frame) else 0.0,
        bandwidth=float(header["bandwidth_hz"]),
        carrier_frequency=float(header["fc_hz"]),
        pulse=PulseShape(header.get("pulse", "rrc")),
        roll_off=float(header.get("roll_off", "0.25")),
    )


def write_frequency_response(response: FrequencyResponse, path: Path) -> Path:
    frame = pd.DataFrame({"f_hz": response.grid, "re": response.values.real, "im": response.values.imag})
    return write_frame(frame, path)


def metrics_frame(metrics: Iterable[LinkMetrics]) -> pd.DataFrame:
    return pd.DataFrame([m.to_row() for m in metrics])


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan literals
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Path):
        return value.as_posix()
    return value


def write_json(data: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")
    return path
