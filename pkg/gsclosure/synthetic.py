"""Synthetic element sets with analytically known flux.

Closed shapes (spheres, ellipsoids, box shells) have zero flux through any
enclosing box; open shapes (hemispheres, planar patches, box shells with a
face removed) have flux `T . a` where `a` is the vector area of the shape.
Benchmark scenes place closed objects, open fragments and random outliers in
a desk-scale room, together with ground-truth boxes.
"""
import os
import logging
from math import pi, sqrt, cos, sin
from collections import namedtuple

import numpy as np
import tqdm
from scipy.special import elliprg
from sklearn.utils import check_random_state

from .boxes import OrientedBox, contains_points
from .closure import FluxField
from .splat_io import CropBox
from .surface import SurfaceElements
from .exceptions import ConfigError, SceneGenerationError
from .utils import atomic_directory, atomic_write, dumps_json

logger = logging.getLogger(__name__)


Sphere = namedtuple("Sphere", ["r"])
Ellipsoid = namedtuple("Ellipsoid", ["a", "b", "c"])
BoxShell = namedtuple("BoxShell", ["w", "l", "h"])
Hemisphere = namedtuple("Hemisphere", ["r"])
PlanarPatch = namedtuple("PlanarPatch", ["w", "l"])
BoxShellMissingFace = namedtuple("BoxShellMissingFace",
                                 ["w", "l", "h", "face"])

CLOSED_SHAPES = (Sphere, Ellipsoid, BoxShell)
OPEN_SHAPES = (Hemisphere, PlanarPatch, BoxShellMissingFace)

# outward face normals in the shape frame
FACES = {
    "+x": (1., 0., 0.), "-x": (-1., 0., 0.),
    "+y": (0., 1., 0.), "-y": (0., -1., 0.),
    "+z": (0., 0., 1.), "-z": (0., 0., -1.),
}
FACE_ALIASES = {"top": "+z", "bottom": "-z", "front": "+x", "back": "-x",
                "left": "+y", "right": "-y"}

GOLDEN_ANGLE = pi * (3. - sqrt(5.))

# relative padding of tight boxes, so boundary elements stay enclosed
TIGHT_PAD = 1e-6

MIN_ELEMENTS = 4


class SurfaceSpec(object):
    """What to tessellate, and where.

    Parameters
    ----------
    shape : one of the shape tuples
        `Sphere(r)`, `Ellipsoid(a, b, c)`, `BoxShell(w, l, h)`,
        `Hemisphere(r)`, `PlanarPatch(w, l)` or
        `BoxShellMissingFace(w, l, h, face)`.

    element_count : int
        Requested number of elements, at least 4. Box shells and patches use
        the nearest grid, so their actual count may differ slightly.

    center : 3-sequence of float, optional

    seed : int or None, optional
        Rotates spherical lattices by a random phase; `None` keeps the
        canonical lattice.

    yaw : float, optional
        Heading of the shape about the vertical axis.
    """

    def __init__(self, shape, element_count, center=(0., 0., 0.), seed=None,
                 yaw=0.):
        if not isinstance(shape, CLOSED_SHAPES + OPEN_SHAPES):
            raise ConfigError("""Unknown shape %r.""" % (shape,))

        dims = [v for v in shape if not isinstance(v, str)]
        if not all(np.isfinite(dims)) or min(dims) <= 0:
            raise ConfigError("""Shape dimensions must be positive, """
                              """got %r.""" % (shape,))

        if element_count < MIN_ELEMENTS:
            raise ConfigError(
                """At least %d elements are needed to tile a surface, """
                """got %d.""" % (MIN_ELEMENTS, element_count))

        if isinstance(shape, BoxShellMissingFace):
            face = FACE_ALIASES.get(shape.face, shape.face)
            if face not in FACES:
                raise ConfigError("""Unknown face `%s`.""" % shape.face)
            shape = shape._replace(face=face)

        self.shape = shape
        self.element_count = int(element_count)
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        self.seed = seed
        self.yaw = float(yaw)

    @property
    def closed(self):
        return isinstance(self.shape, CLOSED_SHAPES)

    def __repr__(self):
        return "SurfaceSpec(%r, element_count=%d, center=%r, yaw=%g)" % (
            self.shape, self.element_count, self.center.tolist(), self.yaw)


def fibonacci_sphere(n, phase=0.):
    """Unit vectors of an `n`-point Fibonacci lattice on the sphere.

    Point `i` sits at height `1 - (2i + 1) / n`, so every point represents
    an equal-area band.
    """
    i = np.arange(n, dtype=np.float64)
    z = 1. - (2. * i + 1.) / n
    rho = np.sqrt(np.maximum(0., 1. - z * z))
    phi = i * GOLDEN_ANGLE + phase
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def fibonacci_hemisphere(n, phase=0.):
    """Unit vectors of an `n`-point lattice on the upper hemisphere."""
    i = np.arange(n, dtype=np.float64)
    z = 1. - (i + 0.5) / n
    rho = np.sqrt(np.maximum(0., 1. - z * z))
    phi = i * GOLDEN_ANGLE + phase
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def ellipsoid_area(a, b, c):
    """Surface area of the ellipsoid with semi-axes `a, b, c`."""
    return 4. * pi * a * b * c * float(elliprg(1. / a**2, 1. / b**2,
                                               1. / c**2))


def surface_area(shape):
    """Analytic surface area of a shape."""
    if isinstance(shape, Sphere):
        return 4. * pi * shape.r ** 2
    if isinstance(shape, Ellipsoid):
        return ellipsoid_area(shape.a, shape.b, shape.c)
    if isinstance(shape, Hemisphere):
        return 2. * pi * shape.r ** 2
    if isinstance(shape, PlanarPatch):
        return shape.w * shape.l
    if isinstance(shape, BoxShell):
        return 2. * (shape.w * shape.l + shape.w * shape.h
                     + shape.l * shape.h)
    if isinstance(shape, BoxShellMissingFace):
        return surface_area(BoxShell(shape.w, shape.l, shape.h)) \
            - _face_area(shape, shape.face)
    raise ConfigError("""Unknown shape %r.""" % (shape,))


def vector_area(shape):
    """The integral of `n dA` over the shape, in the shape frame."""
    if isinstance(shape, CLOSED_SHAPES):
        return np.zeros(3)
    if isinstance(shape, Hemisphere):
        return np.array([0., 0., pi * shape.r ** 2])
    if isinstance(shape, PlanarPatch):
        return np.array([0., 0., shape.w * shape.l])
    if isinstance(shape, BoxShellMissingFace):
        return -np.asarray(FACES[shape.face]) * _face_area(shape, shape.face)
    raise ConfigError("""Unknown shape %r.""" % (shape,))


def _face_area(shape, face):
    w, l, h = shape.w, shape.l, shape.h
    return {"x": l * h, "y": w * h, "z": w * l}[face[1]]


def _rotate_z(vectors, yaw):
    c, s = cos(yaw), sin(yaw)
    rot = np.array([[c, -s, 0.], [s, c, 0.], [0., 0., 1.]])
    return np.dot(vectors, rot.T)


def _grid(u_len, v_len, count):
    """Cell centers of a near-square grid with about `count` cells."""
    nu = max(1, int(round(sqrt(count * u_len / v_len))))
    nv = max(1, int(round(count / float(nu))))
    u = (np.arange(nu) + 0.5) / nu * u_len - 0.5 * u_len
    v = (np.arange(nv) + 0.5) / nv * v_len - 0.5 * v_len
    uu, vv = np.meshgrid(u, v, indexing="ij")
    return uu.ravel(), vv.ravel()


def _box_faces(w, l, h, count, skip=None):
    """Per-face grids of a box shell; every face is partitioned exactly."""
    total = 2. * (w * l + w * h + l * h)
    half = np.array([w, l, h]) / 2.
    positions, normals, areas = [], [], []
    for face, normal in sorted(FACES.items()):
        if face == skip:
            continue

        axis = "xyz".index(face[1])
        u_axis, v_axis = [k for k in range(3) if k != axis]
        dims = np.array([w, l, h])
        face_area = dims[u_axis] * dims[v_axis]
        n_face = max(1, int(round(count * face_area / total)))

        u, v = _grid(dims[u_axis], dims[v_axis], n_face)
        points = np.zeros((len(u), 3))
        points[:, axis] = normal[axis] * half[axis]
        points[:, u_axis], points[:, v_axis] = u, v

        positions.append(points)
        normals.append(np.tile(normal, (len(u), 1)))
        areas.append(np.full(len(u), face_area / len(u)))

    return (np.concatenate(positions), np.concatenate(normals),
            np.concatenate(areas))


def _tessellate(shape, count, phase):
    """Positions, outward normals and areas in the shape frame."""
    if isinstance(shape, Sphere):
        p = fibonacci_sphere(count, phase)
        return shape.r * p, p, np.full(count, surface_area(shape) / count)

    if isinstance(shape, Ellipsoid):
        p = fibonacci_sphere(count, phase)
        radii = np.array([shape.a, shape.b, shape.c])
        normals = p / radii
        stretch = np.linalg.norm(normals, axis=1)
        normals /= stretch[:, np.newaxis]
        # cell areas follow the map of the sphere onto the ellipsoid
        areas = stretch * (surface_area(shape) / stretch.sum())
        return p * radii, normals, areas

    if isinstance(shape, Hemisphere):
        p = fibonacci_hemisphere(count, phase)
        return shape.r * p, p, np.full(count, surface_area(shape) / count)

    if isinstance(shape, PlanarPatch):
        u, v = _grid(shape.w, shape.l, count)
        points = np.column_stack([u, v, np.zeros(len(u))])
        normals = np.tile([0., 0., 1.], (len(u), 1))
        return points, normals, np.full(len(u), shape.w * shape.l / len(u))

    if isinstance(shape, BoxShell):
        return _box_faces(shape.w, shape.l, shape.h, count)

    if isinstance(shape, BoxShellMissingFace):
        full = surface_area(BoxShell(shape.w, shape.l, shape.h))
        # keep the element density of the complete shell
        count = int(round(count * full / surface_area(shape)))
        return _box_faces(shape.w, shape.l, shape.h, count, skip=shape.face)

    raise ConfigError("""Unknown shape %r.""" % (shape,))


def _tight_extent(shape):
    """Center offset and size of the tight box in the shape frame."""
    if isinstance(shape, Sphere):
        return np.zeros(3), np.full(3, 2. * shape.r)
    if isinstance(shape, Ellipsoid):
        return np.zeros(3), 2. * np.array([shape.a, shape.b, shape.c])
    if isinstance(shape, Hemisphere):
        return np.array([0., 0., shape.r / 2.]), \
            np.array([2. * shape.r, 2. * shape.r, shape.r])
    if isinstance(shape, PlanarPatch):
        return np.zeros(3), \
            np.array([shape.w, shape.l, 0.1 * min(shape.w, shape.l)])
    return np.zeros(3), np.array([shape.w, shape.l, shape.h])


def tight_box(spec):
    """The ground-truth box of a shape placed by `spec`."""
    offset, size = _tight_extent(spec.shape)
    center = spec.center + _rotate_z(offset, spec.yaw)
    return OrientedBox(center, size * (1. + TIGHT_PAD), spec.yaw)


def gen_primitive_surface(spec, field=None):
    """Tessellate a shape.

    Parameters
    ----------
    spec : SurfaceSpec

    field : FluxField, optional
        Field of the analytic flux, `(1, 1, 1) / sqrt(3)` by default.

    Returns
    -------
    elements : SurfaceElements
        Outward unit normals; element areas partition the analytic surface
        area exactly: equal areas on spheres, per face for box shells and
        weighted by the local stretch of the lattice on ellipsoids.

    analytic_flux : float
        `T . (vector area)`: zero for closed shapes.

    tight_box : OrientedBox
    """
    field = FluxField() if field is None else field

    phase = 0.
    if spec.seed is not None:
        phase = check_random_state(spec.seed).uniform(0., 2. * pi)

    positions, normals, areas = _tessellate(spec.shape, spec.element_count,
                                            phase)
    positions = _rotate_z(positions, spec.yaw) + spec.center
    normals = _rotate_z(normals, spec.yaw)

    elements = SurfaceElements(positions, normals, areas,
                               flatness=np.zeros(len(areas)) + 1e-3)
    analytic = float(np.dot(field.T, _rotate_z(vector_area(spec.shape),
                                                spec.yaw)))
    return elements, analytic, tight_box(spec)


def random_unit_vectors(n, random_state=None):
    random_state = check_random_state(random_state)
    v = random_state.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def add_outliers(elements, count, bounds, seed=None, reference_area=None):
    """Append `count` random elements inside `bounds`.

    Positions are uniform in the crop box, normals uniform on the sphere and
    areas log-uniform in `[0.1, 10]` times the median area of `elements` (or
    `reference_area` when there are none).
    """
    if count < 0:
        raise ConfigError("""`count` must be nonnegative.""")

    if not isinstance(bounds, CropBox):
        bounds = CropBox(*bounds)

    if count == 0:
        return elements

    if reference_area is None:
        if len(elements) == 0:
            raise ConfigError("""A reference area is required when """
                              """there are no elements.""")
        reference_area = float(np.median(elements.areas))

    random_state = check_random_state(seed)
    positions = random_state.uniform(bounds.min, bounds.max, size=(count, 3))
    normals = random_unit_vectors(count, random_state)
    areas = reference_area * 10. ** random_state.uniform(-1., 1., size=count)

    outliers = SurfaceElements(positions, normals, areas,
                               flatness=np.ones(count))
    return SurfaceElements.concatenate([elements, outliers])


class LabeledScene(object):
    """A synthetic scene with ground truth.

    Attributes
    ----------
    elements : SurfaceElements

    gt_boxes : list of OrientedBox
        One per closed object.

    object_ids : int array, shape (n_elements,)
        Index of the owning object, `-1` for fragments and outliers.

    analytic_flux : float array, shape (n_objects,)

    fragment_boxes : list of OrientedBox
        Tight boxes of the open fragments (distractors).

    fragment_flux : float array, shape (n_fragments,)

    metadata : dict
    """

    def __init__(self, elements, gt_boxes, object_ids, analytic_flux,
                 fragment_boxes=(), fragment_flux=(), metadata=None):
        self.elements = elements
        self.gt_boxes = list(gt_boxes)
        self.object_ids = np.asarray(object_ids, dtype=np.int64)
        self.analytic_flux = np.asarray(analytic_flux, dtype=np.float64)
        self.fragment_boxes = list(fragment_boxes)
        self.fragment_flux = np.asarray(fragment_flux, dtype=np.float64)
        self.metadata = dict(metadata or {})

        assert len(self.object_ids) == len(elements), \
            """One object id per element is required."""
        assert len(self.analytic_flux) == len(self.gt_boxes), \
            """One analytic flux per object is required."""

    def enclosure_ratio(self, index):
        """Share of object `index`'s elements inside its ground-truth box."""
        mask = self.object_ids == index
        if not np.any(mask):
            return 1.
        inside = contains_points(self.gt_boxes[index],
                                 self.elements.positions[mask])
        return float(inside.mean())

    def __eq__(self, other):
        if not isinstance(other, LabeledScene):
            return NotImplemented
        return (self.gt_boxes == other.gt_boxes
                and self.fragment_boxes == other.fragment_boxes
                and np.array_equal(self.object_ids, other.object_ids)
                and np.array_equal(self.elements.positions,
                                   other.elements.positions)
                and np.array_equal(self.elements.normals,
                                   other.elements.normals)
                and np.array_equal(self.elements.areas,
                                   other.elements.areas))

    __hash__ = None


DEFAULT_ROOM = CropBox((0., 0., 0.), (3., 3., 1.2))


def _random_closed_shape(random_state):
    kind = random_state.randint(3)
    if kind == 0:
        return Sphere(random_state.uniform(0.15, 0.3))
    if kind == 1:
        return Ellipsoid(*random_state.uniform(0.12, 0.3, size=3))
    return BoxShell(*random_state.uniform(0.25, 0.55, size=3))


def _random_open_shape(random_state):
    kind = random_state.randint(3)
    if kind == 0:
        return Hemisphere(random_state.uniform(0.15, 0.3))
    if kind == 1:
        return PlanarPatch(*random_state.uniform(0.25, 0.5, size=2))
    face = sorted(FACES)[random_state.randint(len(FACES))]
    return BoxShellMissingFace(*random_state.uniform(0.25, 0.5, size=3),
                               face=face)


def _footprint_radius(shape):
    offset, size = _tight_extent(shape)
    return 0.5 * np.hypot(size[0], size[1])


def _place(shapes, room, margin, random_state, max_retries):
    """Non-overlapping random poses resting on the room floor."""
    placed = []
    for shape in shapes:
        offset, size = _tight_extent(shape)
        radius = _footprint_radius(shape)

        lo, hi = room.min[:2] + radius, room.max[:2] - radius
        if np.any(lo > hi) or size[2] > room.max[2] - room.min[2]:
            raise SceneGenerationError(
                """Shape %r does not fit into the room.""" % (shape,))

        for _ in range(max_retries):
            yaw = random_state.uniform(-pi, pi)
            xy = random_state.uniform(lo, hi)
            if all(np.hypot(*(xy - other_xy)) > radius + other_r + margin
                   for other_xy, other_r, _, _ in placed):
                break
        else:
            raise SceneGenerationError(
                """Could not place %r without overlap after %d retries."""
                % (shape, max_retries))

        z = room.min[2] + 0.5 * size[2] - offset[2]
        placed.append((xy, radius, np.r_[xy, z], yaw))

    return [(center, yaw) for _, _, center, yaw in placed]


# tangential tilt of a jittered normal, relative to `jitter`; matches the
# expected length of a 2-d tangent noise vector with unit deviation
NORMAL_TILT = sqrt(2.)


def _unit_rows(vectors):
    norm = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norm, out=np.zeros_like(vectors),
                     where=norm > 1e-12)


def _tangent(vectors, normals):
    return vectors - np.sum(vectors * normals, axis=1, keepdims=True) * normals


def _pull_into(box, positions):
    """Scale points toward the box center until they lie in the unpadded
    box; the direction from the center is unchanged."""
    c, s = cos(box.yaw), sin(box.yaw)
    center = np.asarray(box.center)
    rel = positions - center
    local = np.column_stack([c * rel[:, 0] + s * rel[:, 1],
                             -s * rel[:, 0] + c * rel[:, 1], rel[:, 2]])
    half = 0.5 * np.asarray(box.size) / (1. + TIGHT_PAD)
    with np.errstate(divide="ignore"):
        reach = np.min(half / np.abs(local), axis=1)
    return center + rel * np.minimum(reach, 1.)[:, np.newaxis]


def _jitter(elements, box, jitter, noise, field):
    """Zero-mean perturbation of normals and positions, kept inside `box`.

    Every normal is tilted by the same angle `arctan(NORMAL_TILT * jitter)`
    toward a random tangent direction orthogonal to the offset from the box
    center, and every position moves by `jitter` times a noise vector in the
    plane of its new normal, then is pulled back into the box. The side of
    the center each normal faces never changes, and the tilts are signed so
    that their flux adds to the residual flux of the tessellation: the
    absolute flux of the box grows with `jitter` for one and the same noise.
    """
    if jitter <= 0:
        return elements

    d_pos, d_nrm = noise
    normals = elements.normals
    offset = _unit_rows(_tangent(elements.positions - np.asarray(box.center),
                                 normals))

    direction = _tangent(d_nrm, normals)
    direction = _unit_rows(_tangent(direction, offset))

    residual = np.dot(elements.areas, normals @ field.T)
    drift = np.dot(elements.areas, direction @ field.T)
    if residual * drift < 0:
        direction = -direction

    tilt = NORMAL_TILT * jitter
    normals = (normals + tilt * direction) / np.sqrt(
        1. + tilt ** 2 * np.sum(direction ** 2, axis=1, keepdims=True))

    positions = elements.positions + jitter * _tangent(d_pos, normals)
    positions = _pull_into(box, positions)

    return SurfaceElements(positions, normals, elements.areas,
                           elements.flatness)


def gen_benchmark_scene(n_objects=3, clutter=0., jitter=0., seed=None,
                        n_fragments=None, elements_per_object=2000,
                        fragment_share=0.5, room=DEFAULT_ROOM, margin=0.05,
                        max_retries=200, field=None, verbose=False):
    """A reproducible desk-scale scene with closed objects and clutter.

    Parameters
    ----------
    n_objects : int, optional (default=3)
        Closed objects, each with a ground-truth box.

    clutter : float, optional (default=0)
        Clutter elements as a multiple of the object elements; a share
        `fragment_share` of them forms open fragments, the rest are random
        outliers.

    jitter : float, optional (default=0)
        Scale of the zero-mean noise added to element normals and positions.
        The noise is drawn from its own stream, so sweeping `jitter` with a
        fixed seed scales one and the same perturbation, and the flux of
        every ground-truth box grows with it.

    seed : int or None

    n_fragments : int, optional
        Number of open fragments; by default `n_objects` when the clutter
        budget has fragment elements, otherwise zero.

    elements_per_object : int, optional (default=2000)

    Returns
    -------
    scene : LabeledScene
    """
    if n_objects < 0 or clutter < 0 or jitter < 0:
        raise ConfigError("""`n_objects`, `clutter` and `jitter` must be """
                          """nonnegative.""")

    if not (0. <= fragment_share <= 1.):
        raise ConfigError("""`fragment_share` must lie in [0, 1].""")

    field = FluxField() if field is None else field
    random_state = check_random_state(seed)
    noise_state = np.random.RandomState(random_state.randint(2 ** 31 - 1))

    clutter_elements = int(round(clutter * n_objects * elements_per_object))
    fragment_elements = int(round(fragment_share * clutter_elements))
    n_outliers = clutter_elements - fragment_elements

    if n_fragments is None:
        n_fragments = n_objects if fragment_elements > 0 else 0
    per_fragment = elements_per_object // 2
    if n_fragments > 0 and fragment_elements > 0:
        per_fragment = max(16, fragment_elements // n_fragments)

    shapes = [_random_closed_shape(random_state) for _ in range(n_objects)]
    shapes += [_random_open_shape(random_state) for _ in range(n_fragments)]
    poses = _place(shapes, room, margin, random_state, max_retries)

    parts, ids = [], []
    gt_boxes, analytic, fragment_boxes, fragment_flux = [], [], [], []
    for k, (shape, (center, yaw)) in enumerate(tqdm.tqdm(
            list(zip(shapes, poses)), disable=not verbose)):
        count = elements_per_object if k < n_objects else per_fragment
        spec = SurfaceSpec(shape, count, center=center,
                           seed=random_state.randint(2 ** 31 - 1), yaw=yaw)
        elements, flux, box = gen_primitive_surface(spec, field)

        noise = (noise_state.normal(size=(len(elements), 3)),
                 noise_state.normal(size=(len(elements), 3)))
        elements = _jitter(elements, box, jitter, noise, field)

        parts.append(elements)
        if k < n_objects:
            ids.append(np.full(len(elements), k))
            gt_boxes.append(box)
            analytic.append(flux)
        else:
            ids.append(np.full(len(elements), -1))
            fragment_boxes.append(box)
            fragment_flux.append(flux)
    # end for

    elements = SurfaceElements.concatenate(parts)
    object_ids = np.concatenate(ids) if ids else np.zeros(0, dtype=int)

    if n_outliers > 0:
        reference = float(np.median(elements.areas)) if len(elements) \
            else 1e-3
        elements = add_outliers(elements, n_outliers, room,
                                seed=random_state.randint(2 ** 31 - 1),
                                reference_area=reference)
        object_ids = np.r_[object_ids, np.full(n_outliers, -1)]

    metadata = {
        "seed": seed, "n_objects": n_objects, "n_fragments": n_fragments,
        "clutter": clutter, "jitter": jitter,
        "elements_per_object": elements_per_object,
        "fragment_share": fragment_share, "n_outliers": n_outliers,
        "room": {"min": room.min.tolist(), "max": room.max.tolist()},
        "field": field.T.tolist(),
        "shapes": [{"type": type(s).__name__, "params": list(s)}
                   for s in shapes],
        "analytic_flux": list(analytic),
        "fragment_flux": list(fragment_flux),
    }
    logger.info("generated scene with %d objects, %d fragments and %d "
                "elements", n_objects, n_fragments, len(elements))

    return LabeledScene(elements, gt_boxes, object_ids, analytic,
                        fragment_boxes, fragment_flux, metadata)


def export_scene(scene, out_dir):
    """Write `elements.csv`, `gt_boxes.json`, `distractors.json`,
    `object_ids.csv` and `metadata.json` into `out_dir`.

    The files are staged in a sibling directory that replaces `out_dir` only
    once all of them are written, so a failed export leaves no partial scene.
    """
    files = {
        "elements.csv": scene.elements.to_csv(),
        "gt_boxes.json": dumps_json([b.to_dict() for b in scene.gt_boxes]),
        "distractors.json": dumps_json([b.to_dict()
                                        for b in scene.fragment_boxes]),
        "object_ids.csv": "object_id\n" + "".join(
            "%d\n" % i for i in scene.object_ids),
        "metadata.json": dumps_json(scene.metadata),
    }
    with atomic_directory(out_dir) as staging:
        for name in sorted(files):
            atomic_write(os.path.join(staging, name), files[name])
        # end for
