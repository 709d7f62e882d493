import os
import json

import numpy as np
import pytest

from gsclosure.synthetic import (SurfaceSpec, Sphere, Ellipsoid, BoxShell,
                                 Hemisphere, PlanarPatch, BoxShellMissingFace,
                                 gen_primitive_surface, add_outliers,
                                 gen_benchmark_scene, export_scene,
                                 surface_area, ellipsoid_area, tight_box,
                                 DEFAULT_ROOM)
from gsclosure.splat_io import CropBox
from gsclosure.boxes import OrientedBox, contains_points
from gsclosure.closure import flux_through_box, flux_batch
from gsclosure.surface import SurfaceElements
from gsclosure.exceptions import ConfigError, SceneGenerationError


def test_spec_validation():
    with pytest.raises(ConfigError):
        SurfaceSpec(Sphere(1.), 3)
    with pytest.raises(ConfigError):
        SurfaceSpec(Sphere(-1.), 100)
    with pytest.raises(ConfigError):
        SurfaceSpec(BoxShellMissingFace(1., 1., 1., "inside"), 100)
    with pytest.raises(ConfigError):
        SurfaceSpec((1., 2.), 100)

    spec = SurfaceSpec(BoxShellMissingFace(1., 1., 1., "top"), 100)
    assert spec.shape.face == "+z"
    assert not spec.closed
    assert SurfaceSpec(Ellipsoid(1., 2., 3.), 100).closed


def test_ellipsoid_area_reduces_to_sphere():
    assert ellipsoid_area(2., 2., 2.) == pytest.approx(16 * np.pi)
    # prolate spheroid closed form
    a, c = 1., 2.
    e = np.sqrt(1 - a ** 2 / c ** 2)
    prolate = 2 * np.pi * a ** 2 * (1 + c / (a * e) * np.arcsin(e))
    assert ellipsoid_area(a, a, c) == pytest.approx(prolate)


@pytest.mark.parametrize("shape", [
    Sphere(0.7), Ellipsoid(0.3, 0.5, 0.2), BoxShell(0.4, 0.6, 0.3),
    Hemisphere(0.5), PlanarPatch(0.4, 0.3),
    BoxShellMissingFace(0.4, 0.5, 0.6, "front"),
])
def test_elements_partition_surface_area(shape):
    elements, _, box = gen_primitive_surface(SurfaceSpec(shape, 2000))

    assert elements.total_area == pytest.approx(surface_area(shape),
                                                rel=1e-12)
    assert np.allclose(np.linalg.norm(elements.normals, axis=1), 1.)
    assert np.all(contains_points(box, elements.positions))


def test_closed_sphere_analytic_flux():
    elements, analytic, box = gen_primitive_surface(
        SurfaceSpec(Sphere(1.), 10000))

    assert analytic == 0.
    assert flux_through_box(elements, box).normalized_flux <= 1e-3


def test_closed_ellipsoid_flux():
    elements, analytic, box = gen_primitive_surface(
        SurfaceSpec(Ellipsoid(0.5, 0.3, 0.2), 10000, center=(1., 1., 0.5),
                    seed=3, yaw=0.4))

    assert analytic == 0.
    assert flux_through_box(elements, box).normalized_flux <= 1e-3


def test_hemisphere_analytic_flux():
    _, analytic, _ = gen_primitive_surface(SurfaceSpec(Hemisphere(1.),
                                                       10000))
    assert analytic == pytest.approx(np.pi / np.sqrt(3.))


def test_missing_top_face_analytic_flux():
    _, analytic, _ = gen_primitive_surface(
        SurfaceSpec(BoxShellMissingFace(1., 1., 1., "top"), 600))
    assert analytic == pytest.approx(-1. / np.sqrt(3.))


def test_yawed_missing_face_matches_analytic():
    spec = SurfaceSpec(BoxShellMissingFace(0.4, 0.6, 0.5, "+x"), 3000,
                       center=(0.5, -0.2, 1.), yaw=0.7)
    elements, analytic, box = gen_primitive_surface(spec)

    assert box == tight_box(spec)
    assert flux_through_box(elements, box).flux == pytest.approx(
        analytic, abs=1e-9)


def test_seed_rotates_the_lattice():
    a, _, _ = gen_primitive_surface(SurfaceSpec(Sphere(1.), 500, seed=1))
    b, _, _ = gen_primitive_surface(SurfaceSpec(Sphere(1.), 500, seed=1))
    c, _, _ = gen_primitive_surface(SurfaceSpec(Sphere(1.), 500, seed=2))

    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_add_outliers_zero_is_identity(unit_sphere):
    elements, _ = unit_sphere
    assert add_outliers(elements, 0, DEFAULT_ROOM, seed=0) is elements


def test_add_outliers_is_seeded(unit_sphere):
    elements, _ = unit_sphere
    bounds = CropBox((-2., -2., -2.), (2., 2., 2.))

    a = add_outliers(elements, 1000, bounds, seed=42)
    b = add_outliers(elements, 1000, bounds, seed=42)

    assert len(a) == len(elements) + 1000
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.normals, b.normals)
    assert np.array_equal(a.areas, b.areas)
    assert np.all(bounds.contains(a.positions[len(elements):]))


def test_outliers_do_not_close():
    bounds = CropBox((0., 0., 0.), (1., 1., 1.))
    box = OrientedBox((0.5, 0.5, 0.5), (1., 1., 1.))

    values = []
    for seed in range(20):
        outliers = add_outliers(SurfaceElements.empty(), 1000, bounds,
                                seed=seed, reference_area=1e-3)
        values.append(flux_through_box(outliers, box).normalized_flux)

    assert np.median(values) > 5e-3


def test_add_outliers_needs_reference_area():
    with pytest.raises(ConfigError):
        add_outliers(SurfaceElements.empty(), 10, DEFAULT_ROOM)


def test_benchmark_scene_is_reproducible():
    a = gen_benchmark_scene(n_objects=3, clutter=0.5, seed=7,
                            elements_per_object=500)
    b = gen_benchmark_scene(n_objects=3, clutter=0.5, seed=7,
                            elements_per_object=500)
    c = gen_benchmark_scene(n_objects=3, clutter=0.5, seed=8,
                            elements_per_object=500)

    assert a == b
    assert not a == c


def test_benchmark_gt_boxes_are_closed():
    scene = gen_benchmark_scene(n_objects=3, seed=1,
                                elements_per_object=10000)

    assert len(scene.gt_boxes) == 3
    assert np.all(scene.analytic_flux == 0.)
    for report in flux_batch(scene.elements, scene.gt_boxes):
        assert report.normalized_flux <= 1e-3
    for k in range(3):
        assert scene.enclosure_ratio(k) == 1.


def test_benchmark_element_bookkeeping():
    scene = gen_benchmark_scene(n_objects=2, clutter=1., seed=3,
                                elements_per_object=400)
    meta = scene.metadata

    assert meta["n_fragments"] == 2
    assert len(scene.fragment_boxes) == 2
    assert len(scene.object_ids) == len(scene.elements)
    assert all(np.sum(scene.object_ids == k) >= 0.9 * 400 for k in (0, 1))
    assert meta["n_outliers"] == 400
    assert np.all(DEFAULT_ROOM.contains(scene.elements.positions))


def test_fragments_are_open():
    scene = gen_benchmark_scene(n_objects=3, n_fragments=3, seed=5,
                                elements_per_object=2000)

    assert len(scene.fragment_boxes) == 3
    assert np.sum(scene.object_ids == -1) >= 3 * 16
    reports = flux_batch(scene.elements, scene.fragment_boxes)
    for report, analytic in zip(reports, scene.fragment_flux):
        assert report.enclosed_count >= 16
        assert report.flux == pytest.approx(analytic, rel=0.05, abs=1e-3)


def test_jitter_keeps_ground_truth():
    clean = gen_benchmark_scene(n_objects=3, seed=11,
                                elements_per_object=1000)
    noisy = gen_benchmark_scene(n_objects=3, jitter=0.07, seed=11,
                                elements_per_object=1000)

    # the noise stream is separate, so the layout does not move
    assert noisy.gt_boxes == clean.gt_boxes
    assert np.array_equal(noisy.elements.areas, clean.elements.areas)
    assert not np.array_equal(noisy.elements.positions,
                              clean.elements.positions)
    for k in range(3):
        assert noisy.enclosure_ratio(k) == 1.


@pytest.mark.parametrize("seed", [0, 1, 2, 5, 8])
def test_jitter_sweep_raises_flux(seed):
    fluxes = []
    for jitter in (0., 0.01, 0.03, 0.07):
        scene = gen_benchmark_scene(n_objects=3, jitter=jitter, seed=seed,
                                    elements_per_object=2000)
        fluxes.append([r.normalized_flux
                       for r in flux_batch(scene.elements, scene.gt_boxes)])
    # end for

    fluxes = np.array(fluxes)
    assert np.all(np.diff(fluxes, axis=0) > 0)
    assert np.all(np.diff(fluxes.mean(axis=1)) > 0)


def test_jitter_keeps_normals_facing_out():
    scene = gen_benchmark_scene(n_objects=3, jitter=0.07, seed=3,
                                elements_per_object=1000)
    for k, box in enumerate(scene.gt_boxes):
        index = scene.object_ids == k
        offset = scene.elements.positions[index] - np.asarray(box.center)
        normals = scene.elements.normals[index]

        assert np.all(np.sum(offset * normals, axis=1) > 0)
        assert np.allclose(np.linalg.norm(normals, axis=1), 1.)


def test_room_too_small():
    room = CropBox((0., 0., 0.), (0.3, 0.3, 0.3))
    with pytest.raises(SceneGenerationError):
        gen_benchmark_scene(n_objects=2, seed=0, room=room)


def test_negative_arguments():
    with pytest.raises(ConfigError):
        gen_benchmark_scene(n_objects=-1)
    with pytest.raises(ConfigError):
        gen_benchmark_scene(jitter=-0.1)


def test_export_scene(tmp_path):
    scene = gen_benchmark_scene(n_objects=2, n_fragments=1, seed=2,
                                elements_per_object=200)
    out = str(tmp_path / "scene")
    export_scene(scene, out)

    assert sorted(os.listdir(out)) == [
        "distractors.json", "elements.csv", "gt_boxes.json",
        "metadata.json", "object_ids.csv"]

    with open(os.path.join(out, "gt_boxes.json")) as f:
        boxes = [OrientedBox.from_dict(r) for r in json.load(f)]
    assert boxes == scene.gt_boxes

    with open(os.path.join(out, "elements.csv")) as f:
        elements = SurfaceElements.from_csv(f.read())
    assert np.array_equal(elements.positions, scene.elements.positions)


def test_export_scene_failure_leaves_nothing(tmp_path, monkeypatch):
    import gsclosure.synthetic as synthetic

    scene = gen_benchmark_scene(n_objects=1, seed=2, elements_per_object=200)
    written = []

    def failing_write(path, data):
        if len(written) == 2:
            raise OSError("disk full")
        written.append(path)
        with open(path, "w") as f:
            f.write(data)

    monkeypatch.setattr(synthetic, "atomic_write", failing_write)
    with pytest.raises(OSError):
        export_scene(scene, str(tmp_path / "scene"))

    assert len(written) == 2
    assert os.listdir(str(tmp_path)) == []
