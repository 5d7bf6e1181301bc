"""Cryostat geometry and ray-surface queries.

Surfaces answer vectorized queries: `distances(origins, directions)` returns
the distance to the first crossing beyond the self-intersection guard (inf on
a miss) for every ray of a batch. A Scene reduces those per-surface distances
to the nearest hit; equal distances resolve to the surface listed first.
"""
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from modules.antenna import AntennaModel, bearing_for_link_gain, design_dipole
from modules.errors import Diagnostic, SceneConstructionError
from modules.materials import Material, get_material, shield_material
from utils.helpers import as_vector, check_directions

logger = logging.getLogger(__name__)

_PARALLEL = 1e-15


def _tangent_basis(normal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(normal, u)


@dataclass(frozen=True, eq=False)
class Surface:
    material: Material
    label: str

    planar = True
    shape = "surface"

    def distances(self, origins: np.ndarray, directions: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normals(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_points(self) -> np.ndarray:
        """Extreme points used for containment checks"""
        raise NotImplementedError

    def geometry(self) -> Dict[str, Any]:
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "shape": self.shape,
            **self.geometry(),
            "material": self.material.name,
            "relative_permittivity": self.material.relative_permittivity,
            "conductivity": self.material.conductivity,
            "temperature": self.material.temperature,
        }


@dataclass(frozen=True, eq=False)
class PlanarSurface(Surface):
    def plane(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contains_point(self, point: np.ndarray, tolerance: float = 1e-9) -> bool:
        raise NotImplementedError

    def normals(self, points: np.ndarray) -> np.ndarray:
        _, normal = self.plane()
        return np.broadcast_to(normal, np.shape(points)).copy()

    def _plane_hits(self, origins, directions):
        point, normal = self.plane()
        denom = directions @ normal
        ok = np.abs(denom) > _PARALLEL
        t = np.where(ok, ((point - origins) @ normal) / np.where(ok, denom, 1.0), np.inf)
        ok &= t > config.GEOMETRY_EPSILON
        return ok, t


@dataclass(frozen=True, eq=False)
class Disc(PlanarSurface):
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    outer_radius: float = 1.0
    aperture_radius: float = 0.0

    shape = "disc"

    def plane(self):
        return self.center, self.normal

    def distances(self, origins, directions):
        ok, t = self._plane_hits(origins, directions)
        points = origins + np.where(ok, t, 0.0)[:, None] * directions
        rho2 = np.sum((points - self.center) ** 2, axis=1)
        ok &= (rho2 <= self.outer_radius ** 2) & (rho2 >= self.aperture_radius ** 2)
        return np.where(ok, t, np.inf)

    def contains_point(self, point, tolerance=1e-9):
        offset = point - self.center
        if abs(offset @ self.normal) > tolerance:
            return False
        rho = np.linalg.norm(offset)
        return self.aperture_radius - tolerance <= rho <= self.outer_radius + tolerance

    def sample_points(self):
        u, v = _tangent_basis(self.normal)
        angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        return self.center + self.outer_radius * (np.outer(np.cos(angles), u) + np.outer(np.sin(angles), v))

    def geometry(self):
        return {"center": self.center.tolist(), "normal": self.normal.tolist(),
                "outer_radius": self.outer_radius, "aperture_radius": self.aperture_radius}


@dataclass(frozen=True, eq=False)
class Rectangle(PlanarSurface):
    corner: np.ndarray = field(default_factory=lambda: np.zeros(3))
    edge_u: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    edge_v: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    shape = "rectangle"

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.edge_u, self.edge_v)
        return n / np.linalg.norm(n)

    def plane(self):
        return self.corner, self.normal

    def _local(self, points):
        offset = points - self.corner
        s = offset @ self.edge_u / (self.edge_u @ self.edge_u)
        q = offset @ self.edge_v / (self.edge_v @ self.edge_v)
        return s, q

    def distances(self, origins, directions):
        ok, t = self._plane_hits(origins, directions)
        points = origins + np.where(ok, t, 0.0)[:, None] * directions
        s, q = self._local(points)
        ok &= (s >= 0.0) & (s <= 1.0) & (q >= 0.0) & (q <= 1.0)
        return np.where(ok, t, np.inf)

    def contains_point(self, point, tolerance=1e-9):
        if abs((point - self.corner) @ self.normal) > tolerance:
            return False
        s, q = self._local(point[None, :])
        return bool(-tolerance <= s[0] <= 1 + tolerance and -tolerance <= q[0] <= 1 + tolerance)

    def sample_points(self):
        return np.array([self.corner, self.corner + self.edge_u, self.corner + self.edge_v,
                         self.corner + self.edge_u + self.edge_v])

    def geometry(self):
        return {"corner": self.corner.tolist(), "edge_u": self.edge_u.tolist(), "edge_v": self.edge_v.tolist()}


@dataclass(frozen=True, eq=False)
class CylinderShell(Surface):
    """Open finite cylinder along `axis` from `base` over `length`."""
    base: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    radius: float = 1.0
    length: float = 1.0
    inward: bool = True  # normals face the axis

    planar = False
    shape = "cylinder"

    def distances(self, origins, directions):
        w = origins - self.base
        d_ax = directions @ self.axis
        w_ax = w @ self.axis
        dp = directions - d_ax[:, None] * self.axis
        wp = w - w_ax[:, None] * self.axis
        a = np.sum(dp * dp, axis=1)
        b = 2.0 * np.sum(wp * dp, axis=1)
        c = np.sum(wp * wp, axis=1) - self.radius ** 2
        disc = b * b - 4.0 * a * c
        valid = (a > _PARALLEL) & (disc >= 0.0)
        root = np.sqrt(np.where(valid, disc, 0.0))
        two_a = 2.0 * np.where(valid, a, 1.0)
        result = np.full(len(origins), np.inf)
        # far root first so the near one overwrites it
        for t in ((-b + root) / two_a, (-b - root) / two_a):
            z = w_ax + t * d_ax
            ok = valid & (t > config.GEOMETRY_EPSILON) & (z >= 0.0) & (z <= self.length)
            result = np.where(ok, t, result)
        return result

    def normals(self, points):
        v = points - self.base
        radial = v - (v @ self.axis)[:, None] * self.axis
        radial /= np.linalg.norm(radial, axis=1, keepdims=True)
        return -radial if self.inward else radial

    def sample_points(self):
        u, v = _tangent_basis(self.axis)
        angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        ring = self.radius * (np.outer(np.cos(angles), u) + np.outer(np.sin(angles), v))
        return np.vstack([self.base + ring, self.base + self.length * self.axis + ring])

    def geometry(self):
        return {"base": self.base.tolist(), "axis": self.axis.tolist(), "radius": self.radius,
                "length": self.length, "inward": self.inward}


@dataclass(frozen=True)
class Hit:
    surface: Surface
    surface_index: int
    point: np.ndarray
    distance: float
    normal: np.ndarray


@dataclass(frozen=True, eq=False)
class Scene:
    surfaces: Tuple[Surface, ...]
    name: str = "scene"
    bounding_shell: Optional[CylinderShell] = None
    bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None  # axis-aligned interior for boxes

    background = "vacuum"

    @property
    def is_planar(self) -> bool:
        return all(s.planar for s in self.surfaces)

    @property
    def diameter(self) -> float:
        """Cross-section diameter of the bounding shell, largest box extent, inf for open scenes"""
        if self.bounding_shell is not None:
            return 2 * self.bounding_shell.radius
        if self.bounds is not None:
            return float(np.max(self.bounds[1] - self.bounds[0]))
        return math.inf

    def intersect_many(self, origins: np.ndarray, directions: np.ndarray,
                       check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest hit distance and surface index (-1 on escape) for a ray batch."""
        origins = np.atleast_2d(np.asarray(origins, dtype=float))
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if check:
            check_directions(directions)
        if not self.surfaces:
            return np.full(len(origins), np.inf), np.full(len(origins), -1)
        table = np.vstack([s.distances(origins, directions) for s in self.surfaces])
        index = np.argmin(table, axis=0)
        distance = table[index, np.arange(len(origins))]
        index = np.where(np.isfinite(distance), index, -1)
        return distance, index

    def normals_at(self, indices: np.ndarray, points: np.ndarray) -> np.ndarray:
        normals = np.zeros_like(points)
        for k in np.unique(indices):
            if k < 0:
                continue
            mask = indices == k
            normals[mask] = self.surfaces[k].normals(points[mask])
        return normals

    def intersect(self, origin: Sequence[float], direction: Sequence[float]) -> Optional[Hit]:
        origin = as_vector(origin, "origin")
        direction = as_vector(direction, "direction")
        distance, index = self.intersect_many(origin[None, :], direction[None, :])
        if index[0] < 0:
            return None
        k = int(index[0])
        point = origin + distance[0] * direction
        return Hit(self.surfaces[k], k, point, float(distance[0]), self.surfaces[k].normals(point[None, :])[0])

    def contains(self, point: Sequence[float]) -> bool:
        point = as_vector(point, "point")
        if self.bounding_shell is not None:
            shell = self.bounding_shell
            v = point - shell.base
            axial = v @ shell.axis
            radial = np.linalg.norm(v - axial * shell.axis)
            return bool(radial < shell.radius and 0.0 < axial < shell.length)
        if self.bounds is not None:
            lo, hi = self.bounds
            return bool(np.all(point > lo) and np.all(point < hi))
        return True

    def describe(self) -> List[Dict[str, Any]]:
        return [{"index": i, **s.describe()} for i, s in enumerate(self.surfaces)]


@dataclass(frozen=True)
class CryostatParameters:
    shell_radius: float = 0.15
    height: float = 0.70
    plate_count: int = 3
    top_plate_z: float = 0.45
    plate_separations: Tuple[float, ...] = (0.15, 0.10)
    plate_radius: float = 0.135
    tube_radius: float = field(default_factory=lambda: config.TUBE_RADIUS)
    antenna_plane_offset: float = 0.06  # above the second cooling plate
    antenna_plane_z: Optional[float] = None
    include_pcb: bool = True
    pcb_size: Tuple[float, float] = (0.10, 0.10)
    pcb_center: Tuple[float, float] = (0.08, 0.0)
    pcb_depth: float = 0.002  # PCB surface below the antenna plane
    shell_material: str = "thermal_shield"
    plate_material: str = "copper_4K"
    tube_material: str = "copper_4K"
    pcb_material: str = "sio2_4K"

    @property
    def plate_heights(self) -> List[float]:
        """Plate z-coordinates from the top plate down"""
        if self.plate_count == 0:
            return []
        heights = [self.top_plate_z]
        for gap in self.plate_separations[: self.plate_count - 1]:
            heights.append(heights[-1] - gap)
        return heights

    @property
    def plane_z(self) -> float:
        if self.antenna_plane_z is not None:
            return self.antenna_plane_z
        heights = self.plate_heights
        if len(heights) >= 2:
            return heights[1] + self.antenna_plane_offset
        return self.height / 2

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["plate_separations"] = list(self.plate_separations)
        data["pcb_size"] = list(self.pcb_size)
        data["pcb_center"] = list(self.pcb_center)
        return data


def _check_cryostat(params: CryostatParameters):
    for name, label in (("shell_radius", "shell"), ("height", "shell"), ("plate_radius", "plates"),
                        ("tube_radius", "tube")):
        if not getattr(params, name) > 0:
            raise SceneConstructionError(f"{name} must be positive", [label])
    if params.plate_count < 0:
        raise SceneConstructionError("plate_count must be non-negative", ["plates"])
    if params.plate_count > 1 and len(params.plate_separations) < params.plate_count - 1:
        raise SceneConstructionError(
            f"{params.plate_count} plates need {params.plate_count - 1} separations", ["plates"])

    heights = params.plate_heights
    offending = [f"plate_{i}" for i, gap in enumerate(params.plate_separations[: max(params.plate_count - 1, 0)], start=1)
                 if not gap > 0]
    if offending:
        raise SceneConstructionError("overlapping plates (non-positive separation)", offending)
    offending = [f"plate_{i}" for i, z in enumerate(heights) if not 0.0 < z < params.height]
    if offending:
        raise SceneConstructionError("plates outside the shell height", offending)
    if heights and params.plate_radius > params.shell_radius:
        raise SceneConstructionError("plate radius exceeds shell radius",
                                     [f"plate_{i}" for i in range(len(heights))])
    if len(heights) >= 2 and params.tube_radius >= params.plate_radius:
        raise SceneConstructionError("tube radius must be smaller than plate radius", ["tube"])
    if not 0.0 < params.plane_z < params.height:
        raise SceneConstructionError("antenna plane outside the shell height", ["antenna_plane"])
    if params.include_pcb and heights:
        _check_pcb(params)


def _check_pcb(params: CryostatParameters):
    cx, cy = params.pcb_center
    w, h = params.pcb_size
    if w <= 0 or h <= 0:
        raise SceneConstructionError("PCB dimensions must be positive", ["pcb"])
    corners = [(cx + sx * w / 2, cy + sy * h / 2) for sx in (-1, 1) for sy in (-1, 1)]
    if max(math.hypot(x, y) for x, y in corners) >= params.shell_radius:
        raise SceneConstructionError("PCB extends past the shell", ["pcb"])
    # closest point of the PCB to the axis must clear the tube
    nearest = math.hypot(min(max(0.0, cx - w / 2), cx + w / 2), min(max(0.0, cy - h / 2), cy + h / 2))
    if len(params.plate_heights) >= 2 and nearest <= params.tube_radius:
        raise SceneConstructionError("PCB overlaps the central tube", ["pcb", "tube"])


def build_cryostat_scene(params: CryostatParameters | None = None,
                         materials: Dict[str, Material] | None = None) -> Scene:
    """Cylindrical shell, end caps, cooling plates on a central tube, and the antenna PCB."""
    params = params or CryostatParameters()
    _check_cryostat(params)

    def material(name: str) -> Material:
        if materials and name in materials:
            return materials[name]
        return shield_material() if name == "thermal_shield" else get_material(name)

    z_hat = np.array([0.0, 0.0, 1.0])
    shell = CylinderShell(material(params.shell_material), "shell", base=np.zeros(3), axis=z_hat,
                          radius=params.shell_radius, length=params.height, inward=True)
    surfaces: List[Surface] = [
        shell,
        Disc(material(params.shell_material), "bottom_cap", center=np.zeros(3), normal=z_hat,
             outer_radius=params.shell_radius),
        Disc(material(params.shell_material), "top_cap", center=np.array([0.0, 0.0, params.height]),
             normal=-z_hat, outer_radius=params.shell_radius),
    ]
    heights = params.plate_heights
    with_tube = len(heights) >= 2
    aperture = params.tube_radius if with_tube else 0.0
    for i, z in enumerate(heights):
        surfaces.append(Disc(material(params.plate_material), f"plate_{i}", center=np.array([0.0, 0.0, z]),
                             normal=z_hat, outer_radius=params.plate_radius, aperture_radius=aperture))
    if with_tube:
        surfaces.append(CylinderShell(material(params.tube_material), "tube", base=np.array([0.0, 0.0, heights[-1]]),
                                      axis=z_hat, radius=params.tube_radius, length=heights[0] - heights[-1],
                                      inward=False))
    if params.include_pcb and heights:
        cx, cy = params.pcb_center
        w, h = params.pcb_size
        z = params.plane_z - params.pcb_depth
        surfaces.append(Rectangle(material(params.pcb_material), "pcb",
                                  corner=np.array([cx - w / 2, cy - h / 2, z]),
                                  edge_u=np.array([w, 0.0, 0.0]), edge_v=np.array([0.0, h, 0.0])))

    scene = Scene(tuple(surfaces), name="cryostat", bounding_shell=shell)
    outside = [s.label for s in scene.surfaces[1:] if not _inside_shell(shell, s)]
    if outside:
        raise SceneConstructionError("surfaces outside the bounding cylinder", outside)
    logger.debug("Built cryostat scene with %d surfaces", len(surfaces))
    return scene


def _inside_shell(shell: CylinderShell, surface: Surface, tolerance: float = 1e-9) -> bool:
    points = surface.sample_points()
    v = points - shell.base
    axial = v @ shell.axis
    radial = np.linalg.norm(v - axial[:, None] * shell.axis, axis=1)
    return bool(np.all(radial <= shell.radius + tolerance) and np.all(axial >= -tolerance)
                and np.all(axial <= shell.length + tolerance))


def build_box_scene(dimensions: Sequence[float], material: Material,
                    origin: Sequence[float] = (0.0, 0.0, 0.0)) -> Scene:
    """Closed rectangular enclosure with inward normals."""
    lx, ly, lz = (float(x) for x in dimensions)
    if min(lx, ly, lz) <= 0:
        raise SceneConstructionError("box dimensions must be positive", ["box"])
    o = as_vector(origin, "origin")
    ex, ey, ez = np.array([lx, 0, 0.0]), np.array([0, ly, 0.0]), np.array([0, 0, lz])
    walls = [
        Rectangle(material, "floor", corner=o, edge_u=ex, edge_v=ey),
        Rectangle(material, "ceiling", corner=o + ez, edge_u=ey, edge_v=ex),
        Rectangle(material, "wall_x0", corner=o, edge_u=ey, edge_v=ez),
        Rectangle(material, "wall_x1", corner=o + ex, edge_u=ez, edge_v=ey),
        Rectangle(material, "wall_y0", corner=o, edge_u=ez, edge_v=ex),
        Rectangle(material, "wall_y1", corner=o + ey, edge_u=ex, edge_v=ez),
    ]
    return Scene(tuple(walls), name="box", bounds=(o, o + np.array([lx, ly, lz])))


def build_plane_scene(planes: Sequence[Dict[str, Any]]) -> Scene:
    """Square reflectors given by point, normal, side length and material (open scene)."""
    surfaces = []
    for i, spec in enumerate(planes):
        normal = as_vector(spec["normal"], "normal")
        normal = normal / np.linalg.norm(normal)
        side = float(spec.get("size", 100.0))
        u, v = _tangent_basis(normal)
        # order the edges so u x v points along the requested normal
        corner = as_vector(spec["point"], "point") - side / 2 * (u + v)
        surfaces.append(Rectangle(spec["material"], spec.get("label", f"plane_{i}"),
                                  corner=corner, edge_u=side * u, edge_v=side * v))
    return Scene(tuple(surfaces), name="planes")


def build_free_space_scene() -> Scene:
    return Scene((), name="free_space")


@dataclass(frozen=True, eq=False)
class AntennaLayout:
    tx_position: np.ndarray
    rx_positions: Tuple[Tuple[str, np.ndarray], ...]
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    tx_label: str = "A"

    @property
    def rx_labels(self) -> List[str]:
        return [label for label, _ in self.rx_positions]

    def separation(self, label: str) -> float:
        position = dict(self.rx_positions)[label]
        return float(np.linalg.norm(position - self.tx_position))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tx": {"label": self.tx_label, "position": self.tx_position.tolist()},
            "rx": [{"label": label, "position": pos.tolist()} for label, pos in self.rx_positions],
            "orientation": self.orientation.tolist(),
        }


DEFAULT_SEPARATIONS = (0.75, 1.1, 1.5, 1.9, 2.25, 2.6)  # wavelengths
MIN_SEPARATION, MAX_SEPARATION = 0.75, 2.6
DEFAULT_LINK_GAIN_DB = -28.0  # line-of-sight gain shared by every default link


def default_layout(params: CryostatParameters | None = None,
                   frequency: float = config.DESIGN_FREQUENCY) -> AntennaLayout:
    """A on the PCB with B1..B6 on the equal line-of-sight gain contour of x-directed dipoles.

    Each receiver sits at the bearing where the direct path carries
    DEFAULT_LINK_GAIN_DB, nearer receivers closer to the axis null. Receivers
    alternate between the two sides of the axis.
    """
    params = params or CryostatParameters()
    dipole = AntennaModel(design_dipole(frequency, 1.0), axis=np.array([1.0, 0.0, 0.0]))
    wavelength = dipole.design.free_space_wavelength
    z = params.plane_z
    cx, cy = params.pcb_center
    tx = np.array([cx - 0.015, cy - 0.012, z])
    receivers = []
    for i, s in enumerate(DEFAULT_SEPARATIONS):
        bearing = bearing_for_link_gain(dipole, s * wavelength, DEFAULT_LINK_GAIN_DB)
        side = 1.0 if i % 2 == 0 else -1.0
        direction = np.array([math.cos(bearing), side * math.sin(bearing), 0.0])
        receivers.append((f"B{i + 1}", tx + s * wavelength * direction))
    return AntennaLayout(tx_position=tx, rx_positions=tuple(receivers), orientation=dipole.axis.copy())


def validate_layout(layout: AntennaLayout, scene: Scene, params: CryostatParameters | None = None,
                    frequency: float = config.DESIGN_FREQUENCY) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []
    positions = [(layout.tx_label, layout.tx_position)] + list(layout.rx_positions)
    for label, position in positions:
        if not scene.contains(position):
            diagnostics.append(Diagnostic(f"layout.{label}", "position lies outside the enclosure"))
        elif params is not None and abs(position[2] - params.plane_z) > 1e-9:
            diagnostics.append(Diagnostic(
                f"layout.{label}", f"position z={position[2]:.6g} m is off the antenna plane z={params.plane_z:.6g} m"))
    if params is not None:
        wavelength = config.SPEED_OF_LIGHT / frequency
        for label, position in layout.rx_positions:
            planar = np.linalg.norm((position - layout.tx_position)[:2]) / wavelength
            if not MIN_SEPARATION - 1e-9 <= planar <= MAX_SEPARATION + 1e-9:
                diagnostics.append(Diagnostic(
                    f"layout.{label}",
                    f"separation {planar:.3f} wavelengths outside [{MIN_SEPARATION}, {MAX_SEPARATION}]"))
    labels = [label for label, _ in positions]
    if len(set(labels)) != len(labels):
        diagnostics.append(Diagnostic("layout", "antenna labels must be unique"))
    return diagnostics
