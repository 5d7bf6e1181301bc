import math

import numpy as np
import pytest

import config
from modules.antenna import AntennaModel, design_dipole
from modules.errors import InvalidArgumentError, UnsupportedSceneError
from modules.materials import Material, get_material
from modules.propagation import (PATH_COLUMNS, RayLauncher, compare_engines, fibonacci_directions, paths_to_frame,
                                 trace_images, trace_rays, trace_rays_multi)
from modules.scene import (CryostatParameters, build_box_scene, build_cryostat_scene, build_free_space_scene,
                           build_plane_scene, default_layout)
from utils.helpers import linear_to_db

F = 28e9
WAVELENGTH = config.SPEED_OF_LIGHT / F
PEC = get_material("pec")
BOX_TX = (0.08, 0.11, 0.06)
BOX_RX = (0.21, 0.17, 0.09)


def friis_db(distance):
    return 20 * math.log10(WAVELENGTH / (4 * math.pi * distance))


def test_free_space_single_path_matches_friis():
    paths = trace_images(build_free_space_scene(), (0, 0, 0), (0.1, 0, 0), 3)
    assert len(paths) == 1
    assert paths[0].delay == pytest.approx(0.1 / config.SPEED_OF_LIGHT, rel=1e-12)
    assert linear_to_db(paths[0].power) == pytest.approx(-41.39, abs=0.01)
    assert paths[0].bounce_count == 0


@pytest.mark.parametrize("distance", [0.05, 0.1, 0.2])
def test_free_space_ray_launch_matches_friis(distance):
    paths = trace_rays(build_free_space_scene(), (0, 0, 0), (distance, 0, 0), ray_count=100_000, max_bounces=0)
    assert len(paths) == 1
    assert abs(linear_to_db(paths[0].power) - friis_db(distance)) < 0.5
    assert paths[0].delay == pytest.approx(distance / config.SPEED_OF_LIGHT, abs=1e-12)


def ground_plane():
    return build_plane_scene([{"point": [0, 0, 0], "normal": [0, 0, 1], "size": 10.0, "material": PEC,
                               "label": "ground"}])


def test_ground_plane_two_ray_model():
    h, d = 0.05, 0.2
    paths = trace_images(ground_plane(), (0, 0, h), (d, 0, h), 2)
    assert len(paths) == 2
    direct, bounced = paths
    reflected_length = math.sqrt(d ** 2 + 4 * h ** 2)
    assert bounced.delay * config.SPEED_OF_LIGHT == pytest.approx(reflected_length, rel=1e-12)
    assert bounced.surfaces == (0,)
    spreading = WAVELENGTH / (4 * math.pi * reflected_length)
    phase = np.exp(-2j * np.pi * reflected_length / WAVELENGTH)
    assert bounced.amplitude / (spreading * phase) == pytest.approx(-1.0)
    assert direct.power / bounced.power == pytest.approx((reflected_length / d) ** 2)


def test_ground_plane_ray_launch_agrees_with_images():
    h, d = 0.05, 0.2
    images = trace_images(ground_plane(), (0, 0, h), (d, 0, h), 1)
    rays = trace_rays(ground_plane(), (0, 0, h), (d, 0, h), ray_count=100_000, max_bounces=1)
    assert [p.surfaces for p in rays] == [p.surfaces for p in images]
    for ray, image in zip(rays, images):
        assert abs(ray.delay - image.delay) < 1e-12
        assert abs(linear_to_db(ray.power) - linear_to_db(image.power)) < 0.1


def test_parallel_plates_follow_image_series():
    height, z_tx, z_rx, span = 0.1, 0.03, 0.06, 0.3
    plates = build_plane_scene([
        {"point": [0, 0, 0], "normal": [0, 0, 1], "size": 20.0, "material": PEC, "label": "bottom"},
        {"point": [0, 0, height], "normal": [0, 0, -1], "size": 20.0, "material": PEC, "label": "top"},
    ])
    max_order = 4
    expected = []
    for m in range(-3, 4):
        for image_z, order in ((2 * m * height + z_tx, 2 * abs(m)), (2 * m * height - z_tx, abs(2 * m - 1))):
            if order <= max_order:
                expected.append((math.hypot(span, image_z - z_rx), order))
    expected.sort()
    paths = trace_images(plates, (0, 0, z_tx), (span, 0, z_rx), max_order)
    assert len(paths) == len(expected)
    for path, (length, order) in zip(paths, expected):
        assert path.delay * config.SPEED_OF_LIGHT == pytest.approx(length, rel=1e-12)
        assert path.bounce_count == order
        assert np.sign((path.amplitude * np.exp(2j * np.pi * length / WAVELENGTH)).real) == (-1) ** order


def test_box_engines_agree_on_first_arrivals():
    scene = build_box_scene((0.3, 0.3, 0.15), PEC)
    images = trace_images(scene, BOX_TX, BOX_RX, 3)
    rays = trace_rays(scene, BOX_TX, BOX_RX, ray_count=200_000, max_bounces=3)
    report = compare_engines(images, rays, arrivals=5)
    assert len(report) == 5
    assert (report["delay_error_s"].abs() < 1e-12).all()
    assert (report["energy_error_db"].abs() < 1.0).all()
    assert (report["image_bounces"] == report["ray_bounces"]).all()


@pytest.mark.slow
def test_box_engines_agree_at_full_ray_count():
    scene = build_box_scene((0.3, 0.3, 0.15), PEC)
    images = trace_images(scene, BOX_TX, BOX_RX, 3)
    rays = trace_rays(scene, BOX_TX, BOX_RX, ray_count=1_000_000, max_bounces=3)
    report = compare_engines(images, rays, arrivals=5)
    assert (report["delay_error_s"].abs() < 1e-12).all()
    assert (report["energy_error_db"].abs() < 1.0).all()


def test_image_tracer_is_reciprocal_with_lossy_walls():
    scene = build_box_scene((0.3, 0.3, 0.15), get_material("sio2_4K"))
    dipole = AntennaModel(design_dipole(F, 3.9), axis=np.array([1.0, 0.0, 0.0]))
    forward = trace_images(scene, BOX_TX, BOX_RX, 2, tx_antenna=dipole, rx_antenna=dipole)
    backward = {p.surfaces: p for p in trace_images(scene, BOX_RX, BOX_TX, 2, tx_antenna=dipole, rx_antenna=dipole)}
    assert len(forward) == len(backward)
    for a in forward:
        # equal-delay paths may sort differently once their surface order is reversed
        b = backward[tuple(reversed(a.surfaces))]
        assert a.delay == pytest.approx(b.delay, rel=1e-12)
        assert a.amplitude == pytest.approx(b.amplitude, rel=1e-9)


@pytest.mark.parametrize("tile_x, expected", [(0.1, [(), (0,)]), (0.5, [()])])
def test_image_reflection_must_land_on_the_finite_tile(tile_x, expected):
    # the specular point of this link is at x = 0.1
    tile = build_plane_scene([{"point": [tile_x, 0, 0], "normal": [0, 0, 1], "size": 0.1, "material": PEC}])
    paths = trace_images(tile, (0, 0, 0.05), (0.2, 0, 0.05), 2)
    assert [p.surfaces for p in paths] == expected


def test_image_tracer_rejects_curved_scene():
    with pytest.raises(UnsupportedSceneError):
        trace_images(build_cryostat_scene(), (0.05, 0, 0.36), (0.06, 0.01, 0.36), 1)


def test_image_tracer_argument_checks():
    scene = build_box_scene((0.3, 0.3, 0.15), PEC)
    with pytest.raises(InvalidArgumentError):
        trace_images(scene, BOX_TX, BOX_RX, 7)
    with pytest.raises(InvalidArgumentError):
        trace_images(scene, BOX_TX, BOX_TX, 1)


def test_ray_launcher_argument_checks():
    scene = build_box_scene((0.3, 0.3, 0.15), PEC)
    with pytest.raises(InvalidArgumentError):
        RayLauncher(scene, ray_count=100)
    with pytest.raises(InvalidArgumentError):
        RayLauncher(scene, ray_count=100_000, rx_radius=0.05)
    with pytest.raises(InvalidArgumentError):
        RayLauncher(scene, ray_count=100_000, max_bounces=-1)


def test_fibonacci_directions_are_unit_and_batchable():
    full = fibonacci_directions(1000)
    assert np.allclose(np.linalg.norm(full, axis=1), 1.0)
    assert np.allclose(np.vstack([fibonacci_directions(1000, 0, 400), fibonacci_directions(1000, 400)]), full)
    assert abs(full.mean(axis=0)).max() < 1e-2


def test_paths_frame_columns():
    paths = trace_images(ground_plane(), (0, 0, 0.05), (0.2, 0, 0.05), 1)
    frame = paths_to_frame(paths)
    assert list(frame.columns) == PATH_COLUMNS
    assert frame["bounces"].tolist() == [0, 1]


def separated_points(rng, dims):
    while True:
        tx, rx = rng.uniform(0.1, 0.9, size=(2, 3)) * dims
        if np.linalg.norm(rx - tx) > WAVELENGTH:
            return tx, rx


def test_passive_reflections_never_add_energy():
    rng = np.random.default_rng(11)
    dipole = AntennaModel(design_dipole(F, 3.9), axis=np.array([1.0, 0.0, 0.0]))
    for _ in range(6):
        dims = rng.uniform(0.1, 0.4, size=3)
        wall = Material("wall", rng.uniform(1.0, 12.0), 10 ** rng.uniform(-3.0, 8.0))
        tx, rx = separated_points(rng, dims)
        paths = trace_images(build_box_scene(dims, wall), tx, rx, 3, tx_antenna=dipole, rx_antenna=dipole)
        assert paths
        assert sum(p.power for p in paths) <= dipole.peak_gain ** 2


@pytest.mark.parametrize("order", [0, 1, 2])
def test_image_paths_of_lower_order_survive_a_higher_limit(order):
    scene = build_box_scene((0.3, 0.3, 0.15), get_material("sio2_4K"))
    shorter = trace_images(scene, BOX_TX, BOX_RX, order)
    longer = trace_images(scene, BOX_TX, BOX_RX, order + 1)
    kept = [p for p in longer if p.bounce_count <= order]
    assert [p.surfaces for p in kept] == [p.surfaces for p in shorter]
    assert [p.delay for p in kept] == pytest.approx([p.delay for p in shorter], rel=1e-12)
    assert all(p.bounce_count == order + 1 for p in longer if p not in kept)


def test_ray_paths_of_fewer_bounces_survive_a_higher_limit():
    scene = build_box_scene((0.3, 0.3, 0.15), PEC)
    shorter = trace_rays(scene, BOX_TX, BOX_RX, ray_count=100_000, max_bounces=2)
    longer = trace_rays(scene, BOX_TX, BOX_RX, ray_count=100_000, max_bounces=3)
    kept = [p for p in longer if p.bounce_count <= 2]
    assert len(longer) > len(shorter)
    assert [p.surfaces for p in kept] == [p.surfaces for p in shorter]
    assert [p.delay for p in kept] == pytest.approx([p.delay for p in shorter], rel=1e-12)


@pytest.mark.slow
def test_cryostat_energy_converges_with_ray_count():
    params = CryostatParameters()
    layout = default_layout(params)
    dipole = AntennaModel(design_dipole(F, 3.9), axis=layout.orientation)
    scene = build_cryostat_scene(params)
    receivers = [position for _, position in layout.rx_positions]
    energies = []
    for count in (100_000, 200_000):
        per_rx = trace_rays_multi(scene, layout.tx_position, receivers, ray_count=count,
                                  max_bounces=config.MAX_BOUNCES, tx_antenna=dipole, rx_antenna=dipole)
        energies.append([linear_to_db(sum(p.power for p in paths)) for paths in per_rx])
    for coarse, fine in zip(*energies):
        assert abs(fine - coarse) < 0.5
