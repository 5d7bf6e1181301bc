"""Multipath resolution between a transmitter and receivers.

Two engines produce the same PathComponent records:

* ImageSourceTracer: exact specular enumeration for planar scenes, used as the
  oracle.
* RayLauncher: shooting and bouncing rays from a Fibonacci sphere grid with
  reception spheres, for scenes with curved surfaces.

Every path amplitude is prod(Gamma_i) * lambda / (4 pi d) * sqrt(G_tx G_rx)
* exp(-j 2 pi d / lambda). Each bounce uses a scalar coefficient that mixes
the TE and TM Fresnel values by the squared projection of the transmit
dipole axis on the TE direction of that bounce.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from modules.antenna import AntennaModel, gain_many, isotropic_antenna
from modules.errors import InvalidArgumentError, UnsupportedSceneError
from modules.materials import fresnel_coefficients
from modules.scene import Scene, Surface
from utils.helpers import as_vector, linear_to_db, normalize

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
MIN_RAY_COUNT = 10_000
MAX_RX_RADIUS_FRACTION = 0.1
_VISIBILITY_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class PathComponent:
    delay: float  # s
    amplitude: complex
    bounce_count: int
    departure: np.ndarray
    arrival: np.ndarray
    surfaces: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2

    @property
    def length(self) -> float:
        return self.delay * config.SPEED_OF_LIGHT


def path_amplitude(length, wavelength: float, reflection, tx_gain, rx_gain):
    length = np.asarray(length, dtype=float)
    spreading = wavelength / (4.0 * np.pi * length)
    phase = np.exp(-2j * np.pi * length / wavelength)
    return reflection * spreading * np.sqrt(tx_gain * rx_gain) * phase


def bounce_coefficients(surface: Surface, frequency: float, directions: np.ndarray,
                        normals: np.ndarray, polarization_axis: np.ndarray) -> np.ndarray:
    """Scalar reflection for rays `directions` meeting `surface`; normals face the incoming rays."""
    cos_incidence = np.clip(-np.sum(directions * normals, axis=1), 0.0, 1.0)
    te, tm = fresnel_coefficients(surface.material, frequency, cos_incidence)
    te_direction = np.cross(directions, normals)
    te_norm = np.linalg.norm(te_direction, axis=1)
    projection = (te_direction @ polarization_axis) / np.where(te_norm > 1e-12, te_norm, 1.0)
    weight = np.where(te_norm > 1e-12, projection ** 2, 1.0)
    return weight * te + (1.0 - weight) * tm


def _facing(normals: np.ndarray, directions: np.ndarray) -> np.ndarray:
    flip = np.sum(normals * directions, axis=1) > 0
    normals = normals.copy()
    normals[flip] *= -1.0
    return normals


def _mirror(point: np.ndarray, plane_point: np.ndarray, normal: np.ndarray) -> np.ndarray:
    return point - 2.0 * ((point - plane_point) @ normal) * normal


def sort_paths(paths: List[PathComponent]) -> List[PathComponent]:
    return sorted(paths, key=lambda p: (p.delay, p.surfaces))


class ImageSourceTracer:
    def __init__(self, scene: Scene, frequency: float = config.DESIGN_FREQUENCY,
                 tx_antenna: Optional[AntennaModel] = None, rx_antenna: Optional[AntennaModel] = None):
        if not scene.is_planar:
            curved = [s.label for s in scene.surfaces if not s.planar]
            raise UnsupportedSceneError(f"image-source engine needs planar surfaces; curved: {', '.join(curved)}")
        self.scene = scene
        self.frequency = frequency
        self.wavelength = config.SPEED_OF_LIGHT / frequency
        self.tx_antenna = tx_antenna or isotropic_antenna(frequency)
        self.rx_antenna = rx_antenna or self.tx_antenna
        self.planes = [s.plane() for s in scene.surfaces]

    def trace(self, tx, rx, max_order: int) -> List[PathComponent]:
        if not 0 <= max_order <= config.MAX_IMAGE_ORDER:
            raise InvalidArgumentError(f"max_order must lie in [0, {config.MAX_IMAGE_ORDER}], got {max_order}")
        tx, rx = as_vector(tx, "tx"), as_vector(rx, "rx")
        if np.linalg.norm(rx - tx) == 0:
            raise InvalidArgumentError("transmitter and receiver coincide")
        paths: List[PathComponent] = []
        stack: List[Tuple[Tuple[int, ...], Tuple[np.ndarray, ...]]] = [((), ())]
        while stack:
            sequence, images = stack.pop()
            path = self._resolve(tx, rx, sequence, images)
            if path is not None:
                paths.append(path)
            if len(sequence) == max_order:
                continue
            source = images[-1] if images else tx
            for j, (point, normal) in enumerate(self.planes):
                if sequence and sequence[-1] == j:
                    continue
                stack.append((sequence + (j,), images + (_mirror(source, point, normal),)))
        logger.debug("Image tracer found %d paths up to order %d", len(paths), max_order)
        return sort_paths(paths)

    def _resolve(self, tx, rx, sequence, images) -> Optional[PathComponent]:
        # back-trace from the receiver through the image chain
        points: List[np.ndarray] = []
        target = rx
        for k in range(len(sequence) - 1, -1, -1):
            surface = self.scene.surfaces[sequence[k]]
            plane_point, normal = self.planes[sequence[k]]
            span = images[k] - target
            denom = span @ normal
            if abs(denom) < 1e-15:
                return None
            t = ((plane_point - target) @ normal) / denom
            if not 1e-12 < t < 1.0 - 1e-12:
                return None
            point = target + t * span
            if not surface.contains_point(point):
                return None
            points.insert(0, point)
            target = point

        vertices = [tx] + points + [rx]
        reflection = 1.0 + 0j
        for i in range(len(vertices) - 1):
            start, end = vertices[i], vertices[i + 1]
            segment = end - start
            seg_len = float(np.linalg.norm(segment))
            if seg_len <= config.GEOMETRY_EPSILON:
                return None
            direction = segment / seg_len
            hit_distance, _ = self.scene.intersect_many(start[None, :], direction[None, :], check=False)
            if hit_distance[0] < seg_len - _VISIBILITY_TOLERANCE:
                return None
            if i < len(points):
                surface = self.scene.surfaces[sequence[i]]
                normal = _facing(surface.normals(end[None, :]), direction[None, :])
                reflection *= bounce_coefficients(surface, self.frequency, direction[None, :], normal,
                                                  self.tx_antenna.axis)[0]

        length = float(np.linalg.norm(rx - (images[-1] if images else tx)))
        departure = (vertices[1] - tx) / np.linalg.norm(vertices[1] - tx)
        arrival = (rx - vertices[-2]) / np.linalg.norm(rx - vertices[-2])
        g_tx = gain_many(self.tx_antenna, departure[None, :])[0]
        g_rx = gain_many(self.rx_antenna, -arrival[None, :])[0]
        amplitude = complex(path_amplitude(length, self.wavelength, reflection, g_tx, g_rx))
        return PathComponent(length / config.SPEED_OF_LIGHT, amplitude, len(sequence), departure, arrival,
                             tuple(sequence))


def trace_images(scene: Scene, tx, rx, max_order: int, *, frequency: float = config.DESIGN_FREQUENCY,
                 tx_antenna: Optional[AntennaModel] = None,
                 rx_antenna: Optional[AntennaModel] = None) -> List[PathComponent]:
    return ImageSourceTracer(scene, frequency, tx_antenna, rx_antenna).trace(tx, rx, max_order)


def fibonacci_directions(count: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Directions start..stop of a `count`-point Fibonacci sphere."""
    stop = count if stop is None else stop
    i = np.arange(start, stop, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
    phi = np.mod(np.arange(start, stop, dtype=float) * GOLDEN_ANGLE, 2 * np.pi)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass
class _Catches:
    ray_ids: np.ndarray
    signatures: np.ndarray
    miss: np.ndarray  # closest-approach distance to the receiver
    travelled: np.ndarray  # unfolded length at closest approach
    departures: np.ndarray
    arrivals: np.ndarray
    reflections: np.ndarray

    @classmethod
    def concat(cls, parts: List["_Catches"], width: int) -> "_Catches":
        if not parts:
            empty = np.zeros((0, 3))
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, width), dtype=np.int32), np.zeros(0),
                       np.zeros(0), empty, empty.copy(), np.zeros(0, dtype=complex))
        return cls(*(np.concatenate([getattr(p, name) for p in parts])
                     for name in ("ray_ids", "signatures", "miss", "travelled", "departures", "arrivals",
                                  "reflections")))


class RayLauncher:
    def __init__(self, scene: Scene, frequency: float = config.DESIGN_FREQUENCY,
                 tx_antenna: Optional[AntennaModel] = None, rx_antenna: Optional[AntennaModel] = None,
                 ray_count: int = config.RAY_COUNT, max_bounces: int = config.MAX_BOUNCES,
                 rx_radius: Optional[float] = None, batch_size: int = config.RAY_BATCH_SIZE,
                 workers: int = config.TRACE_WORKERS):
        self.scene = scene
        self.frequency = frequency
        self.wavelength = config.SPEED_OF_LIGHT / frequency
        self.tx_antenna = tx_antenna or isotropic_antenna(frequency)
        self.rx_antenna = rx_antenna or self.tx_antenna
        self.ray_count = int(ray_count)
        self.max_bounces = int(max_bounces)
        self.rx_radius = self.wavelength / 2 if rx_radius is None else float(rx_radius)
        self.batch_size = max(1, int(batch_size))
        self.workers = max(1, int(workers))

        if self.ray_count < MIN_RAY_COUNT:
            raise InvalidArgumentError(f"ray_count must be >= {MIN_RAY_COUNT}, got {self.ray_count}")
        if self.max_bounces < 0:
            raise InvalidArgumentError(f"max_bounces must be >= 0, got {self.max_bounces}")
        if not self.rx_radius > 0:
            raise InvalidArgumentError(f"rx_radius must be positive, got {self.rx_radius}")
        if self.rx_radius > MAX_RX_RADIUS_FRACTION * scene.diameter:
            raise InvalidArgumentError(
                f"rx_radius {self.rx_radius:.4g} m exceeds 10% of the scene diameter; reception sphere too coarse")

    def trace(self, tx, receivers: Sequence) -> List[List[PathComponent]]:
        """Launch the full ray grid once and resolve paths for every receiver."""
        tx = as_vector(tx, "tx")
        receivers = [as_vector(rx, "rx") for rx in receivers]
        starts = range(0, self.ray_count, self.batch_size)
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            batches = list(executor.map(
                lambda start: self._trace_batch(tx, receivers, start, min(start + self.batch_size, self.ray_count)),
                starts))
        width = max(self.max_bounces, 1)
        results = []
        for r in range(len(receivers)):
            catches = _Catches.concat([b[r] for b in batches if len(b[r].ray_ids)], width)
            paths = self._merge(catches)
            logger.info("Ray launch: %d rays, %d catches, %d paths at receiver %d",
                        self.ray_count, len(catches.ray_ids), len(paths), r)
            results.append(paths)
        return results

    def _trace_batch(self, tx, receivers, start: int, stop: int) -> List[_Catches]:
        directions = fibonacci_directions(self.ray_count, start, stop)
        count = len(directions)
        width = max(self.max_bounces, 1)
        origins = np.tile(tx, (count, 1))
        departures = directions.copy()
        ray_ids = np.arange(start, stop)
        travelled = np.zeros(count)
        reflections = np.ones(count, dtype=complex)
        signatures = np.full((count, width), -1, dtype=np.int32)
        caught: List[List[_Catches]] = [[] for _ in receivers]

        for bounce in range(self.max_bounces + 1):
            distance, index = self.scene.intersect_many(origins, directions, check=False)
            for r, rx in enumerate(receivers):
                offset = rx - origins
                along = np.sum(offset * directions, axis=1)
                miss2 = np.sum(offset * offset, axis=1) - along ** 2
                mask = (along > 0) & (along <= distance) & (miss2 <= self.rx_radius ** 2)
                if np.any(mask):
                    caught[r].append(_Catches(ray_ids[mask], signatures[mask].copy(),
                                              np.sqrt(np.clip(miss2[mask], 0.0, None)),
                                              travelled[mask] + along[mask], departures[mask],
                                              directions[mask].copy(), reflections[mask]))
            if bounce == self.max_bounces:
                break

            alive = np.isfinite(distance)
            if not np.any(alive):
                break
            origins, directions, departures = origins[alive], directions[alive], departures[alive]
            ray_ids, travelled, reflections = ray_ids[alive], travelled[alive], reflections[alive]
            signatures, distance, index = signatures[alive], distance[alive], index[alive]

            points = origins + distance[:, None] * directions
            normals = _facing(self.scene.normals_at(index, points), directions)
            for k in np.unique(index):
                mask = index == k
                reflections[mask] *= bounce_coefficients(self.scene.surfaces[k], self.frequency, directions[mask],
                                                         normals[mask], self.tx_antenna.axis)
            directions = directions - 2.0 * np.sum(directions * normals, axis=1)[:, None] * normals
            directions = normalize(directions)
            origins = points
            travelled = travelled + distance
            signatures[:, bounce] = index

        width = max(self.max_bounces, 1)
        return [_Catches.concat(parts, width) for parts in caught]

    def _merge(self, catches: _Catches) -> List[PathComponent]:
        """One path per bounce signature, keeping the ray that passed closest to the receiver."""
        if len(catches.ray_ids) == 0:
            return []
        order = np.lexsort((catches.ray_ids, catches.miss))
        _, first = np.unique(catches.signatures[order], axis=0, return_index=True)
        chosen = order[first]

        length = np.sqrt(catches.travelled[chosen] ** 2 + catches.miss[chosen] ** 2)
        departures = catches.departures[chosen]
        arrivals = catches.arrivals[chosen]
        g_tx = gain_many(self.tx_antenna, departures)
        g_rx = gain_many(self.rx_antenna, -arrivals)
        amplitudes = path_amplitude(length, self.wavelength, catches.reflections[chosen], g_tx, g_rx)
        paths = []
        for i, k in enumerate(chosen):
            signature = tuple(int(s) for s in catches.signatures[k] if s >= 0)
            paths.append(PathComponent(float(length[i] / config.SPEED_OF_LIGHT), complex(amplitudes[i]),
                                       len(signature), departures[i], arrivals[i], signature))
        return sort_paths(paths)


def trace_rays_multi(scene: Scene, tx, receivers: Sequence, ray_count: int = config.RAY_COUNT,
                     max_bounces: int = config.MAX_BOUNCES, rx_radius: Optional[float] = None,
                     **options) -> List[List[PathComponent]]:
    launcher = RayLauncher(scene, ray_count=ray_count, max_bounces=max_bounces, rx_radius=rx_radius, **options)
    return launcher.trace(tx, receivers)


def trace_rays(scene: Scene, tx, rx, ray_count: int = config.RAY_COUNT, max_bounces: int = config.MAX_BOUNCES,
               rx_radius: Optional[float] = None, **options) -> List[PathComponent]:
    return trace_rays_multi(scene, tx, [rx], ray_count, max_bounces, rx_radius, **options)[0]


PATH_COLUMNS = ["delay_s", "amp_real", "amp_imag", "bounces", "dep_x", "dep_y", "dep_z", "arr_x", "arr_y", "arr_z",
                "surfaces"]


def paths_to_frame(paths: Sequence[PathComponent]) -> pd.DataFrame:
    rows = [{
        "delay_s": p.delay,
        "amp_real": p.amplitude.real,
        "amp_imag": p.amplitude.imag,
        "bounces": p.bounce_count,
        "dep_x": p.departure[0], "dep_y": p.departure[1], "dep_z": p.departure[2],
        "arr_x": p.arrival[0], "arr_y": p.arrival[1], "arr_z": p.arrival[2],
        "surfaces": "-".join(str(s) for s in p.surfaces),
    } for p in paths]
    return pd.DataFrame(rows, columns=PATH_COLUMNS)


def compare_engines(image_paths: List[PathComponent], ray_paths: List[PathComponent],
                    arrivals: int = 5) -> pd.DataFrame:
    """Rank-paired comparison of the earliest arrivals of both engines."""
    rows = []
    for rank in range(min(arrivals, len(image_paths), len(ray_paths))):
        ref, ray = image_paths[rank], ray_paths[rank]
        rows.append({
            "rank": rank + 1,
            "image_delay_s": ref.delay,
            "ray_delay_s": ray.delay,
            "delay_error_s": ray.delay - ref.delay,
            "image_energy_db": linear_to_db(ref.power),
            "ray_energy_db": linear_to_db(ray.power),
            "energy_error_db": linear_to_db(ray.power) - linear_to_db(ref.power),
            "image_bounces": ref.bounce_count,
            "ray_bounces": ray.bounce_count,
        })
    return pd.DataFrame(rows, columns=["rank", "image_delay_s", "ray_delay_s", "delay_error_s", "image_energy_db",
                                       "ray_energy_db", "energy_error_db", "image_bounces", "ray_bounces"])
