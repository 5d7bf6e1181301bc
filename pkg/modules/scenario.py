"""Scenario files: JSON documents describing one simulation run.

Top-level keys (all optional except `scene`):

    name, frequency_hz, materials, scene, layout, antenna, engine, channel,
    noise_models, p_tx_w, output_dir

Loading never stops at the first problem; every schema or invariant violation
becomes a Diagnostic carrying the field path and, where it can be found, the
line of the file it came from.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import config
from modules.antenna import AntennaModel, Pattern, design_dipole
from modules.errors import CryoChannelError, Diagnostic, ScenarioError, SceneConstructionError
from modules.materials import MATERIAL_PRESETS, Material, get_material, material_from_dict
from modules.metrics import DEFAULT_NOISE_MODELS, NoiseModel
from modules.propagation import MAX_RX_RADIUS_FRACTION, MIN_RAY_COUNT
from modules.scene import (AntennaLayout, CryostatParameters, Scene, build_box_scene, build_cryostat_scene,
                           build_free_space_scene, build_plane_scene, default_layout, validate_layout)

logger = logging.getLogger(__name__)

SCENE_KINDS = ("cryostat", "box", "freespace", "planes")
ENGINES = ("images", "rays", "both")
TOP_LEVEL_KEYS = {"name", "frequency_hz", "materials", "scene", "layout", "antenna", "engine", "channel",
                  "noise_models", "p_tx_w", "output_dir"}
DEFAULT_P_TX_W = 1e-6  # -30 dBm


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    frequency: float
    materials: Dict[str, Material]
    scene_kind: str
    scene_spec: Dict[str, Any]
    layout: AntennaLayout
    pattern: Pattern = Pattern.HALF_WAVE_DIPOLE
    substrate_relative_permittivity: float = 3.9
    engine: str = "rays"
    max_order: int = 3
    ray_count: int = config.RAY_COUNT
    max_bounces: int = config.MAX_BOUNCES
    rx_radius: Optional[float] = None
    cir_bandwidth: float = config.BANDWIDTH
    bandwidths: Tuple[float, ...] = (config.BANDWIDTH,)
    pulse: str = config.PULSE_SHAPE
    roll_off: float = config.RRC_ROLL_OFF
    sample_interval: Optional[float] = None
    response_span: float = config.BANDWIDTH
    response_points: int = 201
    noise_models: Tuple[NoiseModel, ...] = DEFAULT_NOISE_MODELS
    p_tx: float = DEFAULT_P_TX_W
    output_dir: str = config.OUTPUT_DIR
    cryostat: Optional[CryostatParameters] = None
    source: str = "<memory>"
    digest: str = ""
    defaults: Tuple[str, ...] = ()
    overrides: Dict[str, Any] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        """Deterministic seed derived from the scenario bytes"""
        return int(self.digest[:8], 16) if self.digest else 0

    def build_scene(self) -> Scene:
        if self.scene_kind == "cryostat":
            return build_cryostat_scene(self.cryostat, self.materials)
        if self.scene_kind == "box":
            return build_box_scene(self.scene_spec["dimensions"], self.materials[self.scene_spec["material"]],
                                   self.scene_spec.get("origin", (0.0, 0.0, 0.0)))
        if self.scene_kind == "planes":
            planes = [{**p, "material": self.materials[p["material"]]} for p in self.scene_spec["planes"]]
            return build_plane_scene(planes)
        return build_free_space_scene()

    def antennas(self) -> Tuple[AntennaModel, AntennaModel]:
        design = design_dipole(self.frequency, self.substrate_relative_permittivity)
        model = AntennaModel(design, axis=self.layout.orientation, pattern=self.pattern)
        return model, model

    def with_overrides(self, **overrides) -> "Scenario":
        """Copy with command-line values applied; unset (None) values are ignored."""
        applied = {k: v for k, v in overrides.items() if v is not None}
        if not applied:
            return self
        return replace(self, **applied, overrides={**self.overrides, **applied})

    def resolved(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "frequency_hz": self.frequency,
            "materials": {name: m.to_dict() for name, m in sorted(self.materials.items())},
            "scene": {"kind": self.scene_kind,
                      **({"parameters": self.cryostat.to_dict()} if self.cryostat else self.scene_spec)},
            "layout": self.layout.to_dict(),
            "antenna": {"pattern": self.pattern.value,
                        "substrate_relative_permittivity": self.substrate_relative_permittivity},
            "engine": {"kind": self.engine, "max_order": self.max_order, "ray_count": self.ray_count,
                       "max_bounces": self.max_bounces, "rx_radius": self.rx_radius},
            "channel": {"cir_bandwidth_hz": self.cir_bandwidth, "bandwidths_hz": list(self.bandwidths),
                        "pulse": self.pulse, "roll_off": self.roll_off,
                        "sample_interval_s": self.sample_interval, "response_span_hz": self.response_span,
                        "response_points": self.response_points},
            "noise_models": [m.to_dict() for m in self.noise_models],
            "p_tx_w": self.p_tx,
            "output_dir": self.output_dir,
        }


def _line_of(text: str, location: str) -> Optional[int]:
    """Line of the innermost key of a dotted field path, searched parent first"""
    lines = text.splitlines()
    start, found = 0, None
    for part in location.split("."):
        needle = f'"{part.split("[")[0]}"'
        for number in range(start, len(lines)):
            if needle in lines[number]:
                found, start = number + 1, number
                break
    return found


class _Reader:
    """Typed field access that records diagnostics and filled-in defaults"""

    def __init__(self, text: str):
        self.text = text
        self.diagnostics: List[Diagnostic] = []
        self.defaults: List[str] = []

    def error(self, location: str, message: str):
        line = _line_of(self.text, location)
        prefix = f"line {line}, " if line else ""
        self.diagnostics.append(Diagnostic(f"{prefix}{location}", message))

    def section(self, data: Dict[str, Any], key: str, location: str) -> Dict[str, Any]:
        value = data.get(key, {})
        if not isinstance(value, dict):
            self.error(location, "expected an object")
            return {}
        return value

    def number(self, data: Dict[str, Any], key: str, location: str, default=None, *, positive=False,
               minimum=None, maximum=None, integer=False):
        if key not in data or data[key] is None:
            if default is not None:
                self.defaults.append(location)
            return default
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(location, f"expected a number, got {value!r}")
            return default
        if integer:
            if float(value) != int(value):
                self.error(location, f"expected an integer, got {value!r}")
                return default
            value = int(value)
        if positive and not value > 0:
            self.error(location, f"must be positive, got {value}")
        if minimum is not None and value < minimum:
            self.error(location, f"must be >= {minimum}, got {value}")
        if maximum is not None and value > maximum:
            self.error(location, f"must be <= {maximum}, got {value}")
        return value

    def choice(self, data: Dict[str, Any], key: str, location: str, choices, default):
        if key not in data:
            self.defaults.append(location)
            return default
        value = data[key]
        if value not in choices:
            self.error(location, f"must be one of {', '.join(choices)}, got {value!r}")
            return default
        return value

    def numbers(self, value: Any, location: str, length: Optional[int] = None) -> Optional[Tuple[float, ...]]:
        if (not isinstance(value, (list, tuple)) or (length is not None and len(value) != length)
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            expected = f"{length} numbers" if length is not None else "a list of numbers"
            self.error(location, f"expected {expected}, got {value!r}")
            return None
        return tuple(float(v) for v in value)

    def vector(self, value: Any, location: str) -> Optional[np.ndarray]:
        if (not isinstance(value, (list, tuple)) or len(value) != 3
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            self.error(location, f"expected three numbers, got {value!r}")
            return None
        return np.array(value, dtype=float)


def _read_materials(reader: _Reader, data: Dict[str, Any]) -> Dict[str, Material]:
    materials = dict(MATERIAL_PRESETS)
    materials["thermal_shield"] = get_material("thermal_shield")
    for name, block in reader.section(data, "materials", "materials").items():
        if not isinstance(block, dict):
            reader.error(f"materials.{name}", "expected an object")
            continue
        try:
            materials[name] = material_from_dict(name, block)
        except (CryoChannelError, ValueError, TypeError) as e:
            reader.error(f"materials.{name}", str(e))
    return materials


def _read_layout(reader: _Reader, data: Dict[str, Any], kind: str, cryostat: Optional[CryostatParameters],
                 frequency: float) -> Optional[AntennaLayout]:
    block = reader.section(data, "layout", "layout")
    orientation = np.array([1.0, 0.0, 0.0])
    if "orientation" in block:
        orientation = reader.vector(block["orientation"], "layout.orientation")
        if orientation is not None and not np.linalg.norm(orientation) > 0:
            reader.error("layout.orientation", "must be non-zero")
            orientation = None
    if orientation is None:
        return None

    if "tx" not in block and "rx" not in block:
        if kind != "cryostat":
            reader.error("layout", f"a '{kind}' scene needs explicit tx and rx positions")
            return None
        if cryostat is None:
            return None
        reader.defaults.append("layout")
        return replace(default_layout(cryostat, frequency), orientation=orientation / np.linalg.norm(orientation))

    tx = block.get("tx", {})
    if not isinstance(tx, dict) or "position" not in tx:
        reader.error("layout.tx", "expected an object with a position")
        return None
    tx_position = reader.vector(tx["position"], "layout.tx.position")
    receivers = []
    rx_blocks = block.get("rx", [])
    if not isinstance(rx_blocks, list) or not rx_blocks:
        reader.error("layout.rx", "expected a non-empty list of receivers")
        return None
    for i, rx in enumerate(rx_blocks):
        if not isinstance(rx, dict) or "position" not in rx:
            reader.error(f"layout.rx[{i}]", "expected an object with a position")
            continue
        position = reader.vector(rx["position"], f"layout.rx[{i}].position")
        if position is not None:
            receivers.append((str(rx.get("label", f"B{i + 1}")), position))
    if tx_position is None or len(receivers) != len(rx_blocks):
        return None
    return AntennaLayout(tx_position, tuple(receivers), orientation / np.linalg.norm(orientation),
                         str(tx.get("label", "A")))


CRYOSTAT_LENGTHS = ("shell_radius", "height", "top_plate_z", "plate_radius", "tube_radius", "antenna_plane_z")
CRYOSTAT_MATERIALS = ("shell_material", "plate_material", "tube_material", "pcb_material")


def _read_cryostat(reader: _Reader, params: Dict[str, Any], known_material) -> Optional[CryostatParameters]:
    """Typed cryostat parameters; None when any field is malformed"""
    reported = len(reader.diagnostics)
    for key in sorted(set(params) - set(CryostatParameters.__dataclass_fields__)):
        reader.error(f"scene.parameters.{key}", "unknown cryostat parameter")

    def location(key: str) -> str:
        return f"scene.parameters.{key}"

    values: Dict[str, Any] = {key: reader.number(params, key, location(key), positive=True)
                              for key in CRYOSTAT_LENGTHS}
    values["plate_count"] = reader.number(params, "plate_count", location("plate_count"), integer=True, minimum=0)
    values["antenna_plane_offset"] = reader.number(params, "antenna_plane_offset", location("antenna_plane_offset"))
    values["pcb_depth"] = reader.number(params, "pcb_depth", location("pcb_depth"), minimum=0.0)
    if "include_pcb" in params:
        if isinstance(params["include_pcb"], bool):
            values["include_pcb"] = params["include_pcb"]
        else:
            reader.error(location("include_pcb"), f"expected true or false, got {params['include_pcb']!r}")
    for key, length in (("plate_separations", None), ("pcb_size", 2), ("pcb_center", 2)):
        if key in params:
            values[key] = reader.numbers(params[key], location(key), length)
    for key in CRYOSTAT_MATERIALS:
        if key in params and known_material(params[key], location(key)):
            values[key] = params[key]

    reader.defaults.extend(location(key) for key in CryostatParameters.__dataclass_fields__ if key not in params)
    if len(reader.diagnostics) > reported:
        return None
    return CryostatParameters(**{key: value for key, value in values.items() if value is not None})


def _read_scene(reader: _Reader, data: Dict[str, Any], materials: Dict[str, Material]):
    if "scene" not in data:
        reader.error("scene", "missing required section")
        return "freespace", {}, None
    block = reader.section(data, "scene", "scene")
    kind = reader.choice(block, "kind", "scene.kind", SCENE_KINDS, "cryostat")
    spec: Dict[str, Any] = {}
    cryostat = None

    def known_material(name: Any, location: str) -> bool:
        if not isinstance(name, str) or name not in materials:
            reader.error(location, f"unknown material {name!r}")
            return False
        return True

    if kind == "cryostat":
        params = reader.section(block, "parameters", "scene.parameters")
        cryostat = _read_cryostat(reader, params, known_material)
    elif kind == "box":
        dims = block.get("dimensions")
        if not isinstance(dims, list) or len(dims) != 3 or not all(
                isinstance(d, (int, float)) and d > 0 for d in dims):
            reader.error("scene.dimensions", f"expected three positive lengths, got {dims!r}")
        material = block.get("material", "pec")
        known_material(material, "scene.material")
        spec = {"dimensions": dims, "material": material, "origin": block.get("origin", [0.0, 0.0, 0.0])}
        reader.vector(spec["origin"], "scene.origin")
    elif kind == "planes":
        planes = block.get("planes")
        if not isinstance(planes, list) or not planes:
            reader.error("scene.planes", "expected a non-empty list of planes")
            planes = []
        for i, plane in enumerate(planes):
            if not isinstance(plane, dict):
                reader.error(f"scene.planes[{i}]", "expected an object")
                continue
            reader.vector(plane.get("point"), f"scene.planes[{i}].point")
            normal = reader.vector(plane.get("normal"), f"scene.planes[{i}].normal")
            if normal is not None and not np.linalg.norm(normal) > 0:
                reader.error(f"scene.planes[{i}].normal", "must be non-zero")
            reader.number(plane, "size", f"scene.planes[{i}].size", 100.0, positive=True)
            known_material(plane.get("material"), f"scene.planes[{i}].material")
        spec = {"planes": planes}
    return kind, spec, cryostat


def parse_scenario(text: str, source: str = "<memory>") -> Scenario:
    """Parse and validate scenario JSON; raises ScenarioError listing every violation."""
    reader = _Reader(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError([Diagnostic(f"line {e.lineno}, column {e.colno}", e.msg)]) from None
    if not isinstance(data, dict):
        raise ScenarioError([Diagnostic("line 1", "scenario must be a JSON object")])
    for key in sorted(set(data) - TOP_LEVEL_KEYS):
        reader.error(key, "unknown top-level key")

    frequency = reader.number(data, "frequency_hz", "frequency_hz", config.DESIGN_FREQUENCY, positive=True)
    materials = _read_materials(reader, data)
    kind, spec, cryostat = _read_scene(reader, data, materials)
    layout = _read_layout(reader, data, kind, cryostat, frequency) if frequency and frequency > 0 else None

    antenna = reader.section(data, "antenna", "antenna")
    pattern = reader.choice(antenna, "pattern", "antenna.pattern", [p.value for p in Pattern],
                            Pattern.HALF_WAVE_DIPOLE.value)
    eps_r = reader.number(antenna, "substrate_relative_permittivity", "antenna.substrate_relative_permittivity",
                          3.9, minimum=1.0)

    engine = reader.section(data, "engine", "engine")
    engine_kind = reader.choice(engine, "kind", "engine.kind", ENGINES, "images" if kind != "cryostat" else "rays")
    max_order = reader.number(engine, "max_order", "engine.max_order", 3, integer=True, minimum=0,
                              maximum=config.MAX_IMAGE_ORDER)
    ray_count = reader.number(engine, "ray_count", "engine.ray_count", config.RAY_COUNT, integer=True,
                              minimum=MIN_RAY_COUNT)
    max_bounces = reader.number(engine, "max_bounces", "engine.max_bounces", config.MAX_BOUNCES, integer=True,
                                minimum=0)
    rx_radius = reader.number(engine, "rx_radius", "engine.rx_radius", None, positive=True)

    channel = reader.section(data, "channel", "channel")
    cir_bandwidth = reader.number(channel, "cir_bandwidth_hz", "channel.cir_bandwidth_hz", config.BANDWIDTH,
                                  positive=True)
    bandwidths = channel.get("bandwidths_hz")
    if bandwidths is None:
        reader.defaults.append("channel.bandwidths_hz")
        bandwidths = [0.5e9, 1e9, 2e9, 5e9]
    elif not isinstance(bandwidths, list) or not bandwidths or not all(
            isinstance(b, (int, float)) and b > 0 for b in bandwidths):
        reader.error("channel.bandwidths_hz", f"expected a non-empty list of positive bandwidths, got {bandwidths!r}")
        bandwidths = [config.BANDWIDTH]
    pulse = reader.choice(channel, "pulse", "channel.pulse", ("rrc", "gaussian"), config.PULSE_SHAPE)
    roll_off = reader.number(channel, "roll_off", "channel.roll_off", config.RRC_ROLL_OFF, minimum=0.0, maximum=1.0)
    sample_interval = reader.number(channel, "sample_interval_s", "channel.sample_interval_s", None, positive=True)
    if sample_interval and cir_bandwidth and sample_interval > 1 / (2 * cir_bandwidth):
        reader.error("channel.sample_interval_s", "exceeds 1/(2*cir_bandwidth_hz)")
    response_span = reader.number(channel, "response_span_hz", "channel.response_span_hz", config.BANDWIDTH,
                                  positive=True)
    response_points = reader.number(channel, "response_points", "channel.response_points", 201, integer=True,
                                    minimum=1)
    if frequency and response_span and response_span / 2 >= frequency:
        reader.error("channel.response_span_hz", "frequency grid would reach zero or below")

    noise_models: List[NoiseModel] = []
    if "noise_models" not in data:
        reader.defaults.append("noise_models")
        center = frequency if frequency and frequency > 0 else config.DESIGN_FREQUENCY
        noise_models = [replace(m, center_frequency=center) for m in DEFAULT_NOISE_MODELS]
    elif not isinstance(data["noise_models"], list) or not data["noise_models"]:
        reader.error("noise_models", "expected a non-empty list")
    else:
        for i, block in enumerate(data["noise_models"]):
            try:
                noise_models.append(NoiseModel(block["kind"], float(block["temperature"]),
                                               float(block.get("center_frequency", frequency)),
                                               float(block.get("noise_figure_db", 0.0))))
            except (KeyError, TypeError, ValueError) as e:
                reader.error(f"noise_models[{i}]", f"invalid noise model: {e}")

    p_tx = reader.number(data, "p_tx_w", "p_tx_w", DEFAULT_P_TX_W, positive=True)
    output_dir = data.get("output_dir")
    if output_dir is None:
        reader.defaults.append("output_dir")
        output_dir = config.OUTPUT_DIR
    elif not isinstance(output_dir, str):
        reader.error("output_dir", "expected a string")

    if reader.diagnostics or layout is None:
        if not reader.diagnostics:
            reader.error("layout", "no antenna layout could be resolved")
        raise ScenarioError(reader.diagnostics)

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Scenario(
        name=str(data.get("name", Path(source).stem)),
        frequency=float(frequency),
        materials=materials,
        scene_kind=kind,
        scene_spec=spec,
        layout=layout,
        pattern=Pattern(pattern),
        substrate_relative_permittivity=float(eps_r),
        engine=engine_kind,
        max_order=max_order,
        ray_count=ray_count,
        max_bounces=max_bounces,
        rx_radius=rx_radius,
        cir_bandwidth=float(cir_bandwidth),
        bandwidths=tuple(float(b) for b in bandwidths),
        pulse=pulse,
        roll_off=float(roll_off),
        sample_interval=sample_interval,
        response_span=float(response_span),
        response_points=response_points,
        noise_models=tuple(noise_models),
        p_tx=float(p_tx),
        output_dir=output_dir,
        cryostat=cryostat,
        source=source,
        digest=digest,
        defaults=tuple(reader.defaults),
    )


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_scenario(text, source=str(path))


def check_scenario(scenario: Scenario) -> List[Diagnostic]:
    """Invariant checks that need the built scene: geometry, layout, engine compatibility."""
    diagnostics: List[Diagnostic] = []
    try:
        scene = scenario.build_scene()
    except SceneConstructionError as e:
        return [Diagnostic("scene." + ",".join(e.surfaces), str(e))]
    except (CryoChannelError, TypeError, ValueError) as e:
        return [Diagnostic("scene", str(e))]

    diagnostics.extend(validate_layout(scenario.layout, scene, scenario.cryostat, scenario.frequency))
    if scenario.engine in ("images", "both") and not scene.is_planar:
        diagnostics.append(Diagnostic("engine.kind", f"'{scenario.engine}' needs a scene of planar surfaces only"))
    if scenario.engine in ("rays", "both"):
        if scenario.ray_count < MIN_RAY_COUNT:
            diagnostics.append(Diagnostic("engine.ray_count",
                                          f"{scenario.ray_count} rays is below the minimum of {MIN_RAY_COUNT}"))
        radius = scenario.rx_radius or config.SPEED_OF_LIGHT / scenario.frequency / 2
        if radius > MAX_RX_RADIUS_FRACTION * scene.diameter:
            diagnostics.append(Diagnostic("engine.rx_radius",
                                          f"{radius:.4g} m exceeds 10% of the scene diameter {scene.diameter:.4g} m"))
    return diagnostics


def validate(path: Path | str) -> List[Diagnostic]:
    """Every schema and invariant violation of a scenario file; empty when valid."""
    try:
        scenario = load_scenario(path)
    except ScenarioError as e:
        return e.diagnostics
    return check_scenario(scenario)
