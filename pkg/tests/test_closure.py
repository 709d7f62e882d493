import time

import numba
import numpy as np
import pytest

from gsclosure.closure import (FluxField, FluxReport, closure_score,
                               flux_through_box, flux_batch)
from gsclosure.boxes import OrientedBox
from gsclosure.surface import (SurfaceElements, CenterAligned,
                               FirstElementRandomFlip)
from gsclosure.synthetic import (SurfaceSpec, Sphere, Hemisphere,
                                 BoxShell, BoxShellMissingFace,
                                 gen_primitive_surface, add_outliers)
from gsclosure.splat_io import CropBox
from gsclosure.exceptions import ConfigError, GeometryError

from conftest import T_DIAG


def test_default_field():
    field = FluxField()
    assert np.allclose(field.T, T_DIAG)
    assert abs(np.linalg.norm(field.T) - 1.) <= 1e-12


def test_field_must_be_unit():
    with pytest.raises(GeometryError):
        FluxField([1., 1., 0.])
    assert np.allclose(FluxField([0., 3., 4.], normalize=True).T,
                       [0., 0.6, 0.8])
    with pytest.raises(GeometryError):
        FluxField([0., 0., 0.], normalize=True)


def test_closure_score_examples():
    assert closure_score(0., 0.5) == 1.
    assert closure_score(2., 0.5) == pytest.approx(np.exp(-1.))
    assert closure_score(1., 1.) == pytest.approx(0.367879, abs=1e-6)


def test_closure_score_vectorized_and_monotone():
    scores = closure_score(np.linspace(0., 10., 21), 0.5)
    assert scores.shape == (21,)
    assert np.all(np.diff(scores) < 0)
    assert np.all((scores > 0) & (scores <= 1))


def test_closure_score_keeps_rank_and_smaller_gamma_dominates(random_state):
    flux = random_state.exponential(size=200)
    strict = closure_score(flux, 0.8)
    loose = closure_score(flux, 0.2)

    assert np.array_equal(np.argsort(-strict, kind="stable"),
                          np.argsort(flux, kind="stable"))
    assert np.array_equal(np.argsort(-loose, kind="stable"),
                          np.argsort(flux, kind="stable"))
    assert np.all(loose >= strict)


def test_closure_score_domain():
    for gamma in (0., -0.1, 1.5):
        with pytest.raises(ConfigError):
            closure_score(1., gamma)
    with pytest.raises(ConfigError):
        closure_score(-1., 0.5)


def test_closed_sphere_has_vanishing_flux(unit_sphere):
    elements, box = unit_sphere
    report = flux_through_box(elements, box)

    assert report.enclosed_count == 10000
    assert report.total_area == pytest.approx(4 * np.pi)
    assert report.normalized_flux <= 1e-3


def test_sphere_flux_converges():
    values = []
    for n in (100, 1000, 10000):
        elements, _, box = gen_primitive_surface(SurfaceSpec(Sphere(1.), n))
        values.append(flux_through_box(elements, box).normalized_flux)

    # fitted convergence exponent over the decades
    slope = np.polyfit(np.log10([100, 1000, 10000]),
                       np.log10(np.maximum(values, 1e-300)), 1)[0]
    assert slope <= -0.4


def test_open_hemisphere_flux():
    elements, analytic, box = gen_primitive_surface(
        SurfaceSpec(Hemisphere(1.), 10000))
    report = flux_through_box(elements, box)

    assert analytic == pytest.approx(np.pi / np.sqrt(3.))
    assert report.flux == pytest.approx(np.pi / np.sqrt(3.), rel=0.01)


def test_missing_face_flux():
    closed, _, box = gen_primitive_surface(
        SurfaceSpec(BoxShell(1., 1., 1.), 6000))
    opened, analytic, _ = gen_primitive_surface(
        SurfaceSpec(BoxShellMissingFace(1., 1., 1., "top"), 6000))

    assert abs(flux_through_box(closed, box).flux) <= 1e-9
    assert analytic == pytest.approx(-1. / np.sqrt(3.))
    assert flux_through_box(opened, box).flux == pytest.approx(
        -1. / np.sqrt(3.), rel=0.01)


def test_single_element():
    elements = SurfaceElements([[0., 0., 0.]], [T_DIAG], [2.])
    box = OrientedBox((0., 0., 0.), (1., 1., 1.))
    report = flux_through_box(elements, box)

    assert report.flux == pytest.approx(2.)
    assert report.enclosed_count == 1
    assert report.normalized_flux == pytest.approx(1.)


def test_empty_enclosure():
    elements = SurfaceElements([[5., 5., 5.]], [[0., 0., 1.]], [1.])
    report = flux_through_box(elements, OrientedBox((0., 0., 0.),
                                                    (1., 1., 1.)))
    assert report == FluxReport(0., 0, 0., 0.)

    assert flux_through_box(SurfaceElements.empty(),
                            OrientedBox((0., 0., 0.), (1., 1., 1.))
                            ).enclosed_count == 0


def test_center_orientation_ignores_stored_sign(unit_sphere):
    elements, box = unit_sphere
    flipped = SurfaceElements(elements.positions, -elements.normals,
                              elements.areas)
    a = flux_through_box(elements, box)
    b = flux_through_box(flipped, box, orientation=CenterAligned())
    assert a.flux == b.flux


def test_random_flip_inverts_whole_instances():
    elements, _, box = gen_primitive_surface(
        SurfaceSpec(Hemisphere(1.), 2000))
    strategy = FirstElementRandomFlip(seed=11)

    values = [flux_through_box(elements, box, orientation=strategy,
                               instance=k).flux for k in range(8)]
    # each instance differs from the others by its sign only
    assert np.allclose(np.abs(values), abs(values[0]))


def test_batch_matches_single_and_keeps_order(unit_sphere):
    elements, box = unit_sphere
    boxes = [box, OrientedBox((0.5, 0., 0.), (1., 1., 1.), 0.3),
             OrientedBox((10., 0., 0.), (1., 1., 1.)), box.scaled(0.5)]

    batch = flux_batch(elements, boxes)
    assert len(batch) == len(boxes)
    for b, report in zip(boxes, batch):
        assert report == flux_through_box(elements, b)

    assert flux_batch(elements, []) == []


def test_batch_is_deterministic(unit_sphere):
    elements, box = unit_sphere
    boxes = [box.scaled(f) for f in np.linspace(0.2, 1.2, 17)]
    assert flux_batch(elements, boxes) == flux_batch(elements, boxes)


def test_report_units():
    report = FluxReport.from_sums(-0.02, 40, 0.5)

    assert report.abs_flux == 0.02
    assert report.flux_dm2(1.) == pytest.approx(-2.)
    assert report.exceeds_unit_dm2(1.)
    assert not report.exceeds_unit_dm2(0.1)

    record = report.to_dict(gamma=0.5)
    assert record["closure_score"] == pytest.approx(np.exp(-0.01))
    assert record["enclosed_count"] == 40


def _random_boxes(random_state, n, spread=1.):
    return [OrientedBox(random_state.uniform(-spread, spread, 3),
                        random_state.uniform(0.3, 2.5, 3),
                        random_state.uniform(-np.pi, np.pi))
            for _ in range(n)]


def test_flux_is_translation_invariant(unit_sphere, random_state):
    elements, _ = unit_sphere
    shift = np.array([0.5, -1.25, 2.])
    moved = SurfaceElements(elements.positions + shift, elements.normals,
                            elements.areas)

    for box in _random_boxes(random_state, 20):
        a = flux_through_box(elements, box)
        b = flux_through_box(moved, OrientedBox(np.add(box.center, shift),
                                                box.size, box.yaw))
        assert b.enclosed_count == a.enclosed_count
        assert b.flux == pytest.approx(a.flux, rel=1e-9, abs=1e-12)


def test_flux_bounded_by_area(unit_sphere, random_state):
    elements, _ = unit_sphere
    strategy = FirstElementRandomFlip(seed=3)
    boxes = _random_boxes(random_state, 50)

    for orientation in (None, strategy):
        for report in flux_batch(elements, boxes, orientation=orientation):
            assert abs(report.flux) <= report.total_area * (1. + 1e-12)
            assert report.normalized_flux <= 1. + 1e-12


@pytest.mark.slow
def test_batch_throughput_and_thread_independence(random_state):
    room = CropBox((0., 0., 0.), (10., 10., 3.))
    elements = add_outliers(SurfaceElements.empty(), 10 ** 6, room, seed=0,
                            reference_area=1e-4)
    boxes = [OrientedBox(random_state.uniform((1., 1., 0.5), (9., 9., 2.5)),
                         random_state.uniform(0.2, 1.5, size=3),
                         random_state.uniform(-np.pi, np.pi))
             for _ in range(100)]

    # compile outside of the timed region
    flux_batch(elements.take(np.arange(10)), boxes[:1])

    threads = numba.config.NUMBA_NUM_THREADS
    try:
        numba.set_num_threads(1)
        single = flux_batch(elements, boxes)

        numba.set_num_threads(threads)
        tic = time.perf_counter()
        parallel = flux_batch(elements, boxes)
        elapsed = time.perf_counter() - tic
    finally:
        numba.set_num_threads(threads)

    assert parallel == single
    # two seconds on eight cores
    assert elapsed <= 2. * max(1., 8. / threads)
