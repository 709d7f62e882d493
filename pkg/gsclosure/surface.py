"""Surface elements from Gaussian primitives.

A Gaussian with covariance `R S S' R'` is read as a small planar patch: its
position is the mean, its normal the principal axis of the smallest scale
and its area the largest cross-section of the ellipsoid, `pi * s1 s2 s3 /
min(s)`.
"""
import logging
import warnings
from collections import namedtuple

import numpy as np

from .exceptions import GeometryError, ElementError, DegenerateNormalWarning
from .utils import rows_to_csv

logger = logging.getLogger(__name__)


# relative gap below which the two smallest scales are considered tied
DEGENERACY_RTOL = 1e-6

QUATERNION_ATOL = 1e-6

CSV_COLUMNS = ("x", "y", "z", "nx", "ny", "nz", "area", "flatness")


SurfaceElement = namedtuple("SurfaceElement", ["x", "n", "area", "flatness"])

PrincipalNormal = namedtuple("PrincipalNormal",
                             ["normal", "flatness", "degenerate"])


def quaternion_to_matrix(q):
    """Rotation matrices of unit quaternions `(w, x, y, z)`, shape (..., 3, 3).
    """
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]

    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _check_scales(scales):
    scales = np.asarray(scales, dtype=np.float64)
    if scales.shape[-1:] != (3,):
        raise GeometryError("""Scales must be 3-vectors.""")

    if not np.all(np.isfinite(scales)) or np.any(scales <= 0):
        raise GeometryError(
            """Scales must be finite and positive, got %r."""
            % (scales.tolist(),))

    return scales


def _check_quaternion(rotation, atol=QUATERNION_ATOL):
    rotation = np.asarray(rotation, dtype=np.float64)
    if rotation.shape[-1:] != (4,):
        raise GeometryError("""Rotations must be quaternions (w, x, y, z).""")

    norm = np.linalg.norm(rotation, axis=-1)
    if np.any(abs(norm - 1.) > atol):
        raise GeometryError(
            """Quaternion must have unit norm within %g.""" % atol)

    return rotation


def covariance_from_params(scales, rotation):
    """Covariance `R S S' R'` of a Gaussian.

    Parameters
    ----------
    scales : array-like, shape (3,)
        Positive standard deviations along the principal axes.

    rotation : array-like, shape (4,)
        Unit quaternion `(w, x, y, z)`.

    Returns
    -------
    sigma : array, shape (3, 3)
        Exactly symmetric positive semidefinite matrix.
    """
    scales = _check_scales(scales)
    rotation = _check_quaternion(rotation)

    A = quaternion_to_matrix(rotation) * scales
    sigma = np.dot(A, A.T)
    return 0.5 * (sigma + sigma.T)


def _smallest_axis(scales):
    """Index of the smallest scale, ties resolved to the lowest index."""
    smallest = scales.min(axis=-1, keepdims=True)
    tied = scales - smallest <= DEGENERACY_RTOL * scales
    return np.argmax(tied, axis=-1)


def _flatness_and_degeneracy(scales):
    ordered = np.sort(scales, axis=-1)
    flatness = ordered[..., 0] / ordered[..., 1]
    degenerate = ordered[..., 1] - ordered[..., 0] \
        <= DEGENERACY_RTOL * ordered[..., 1]
    return flatness, degenerate


def principal_normal(scales, rotation):
    """Unoriented unit normal of a Gaussian.

    The eigenvectors of `R S S' R'` are the columns of `R` with eigenvalues
    `s_i^2`, so the normal is the column of the smallest scale; no generic
    eigensolver is involved.

    Returns
    -------
    result : PrincipalNormal
        `(normal, flatness, degenerate)`, where `flatness` is the ratio of the
        smallest to the median scale and `degenerate` flags a tie between the
        two smallest scales (relative 1e-6), in which case the axis with the
        lowest index is returned.
    """
    scales = _check_scales(scales)
    rotation = _check_quaternion(rotation)

    R = quaternion_to_matrix(rotation)
    normal = R[:, _smallest_axis(scales)]
    normal = normal / np.linalg.norm(normal)

    flatness, degenerate = _flatness_and_degeneracy(scales)
    return PrincipalNormal(normal, float(flatness), bool(degenerate))


def cross_section_area(scales):
    """Largest cross-section area of the ellipsoid, `pi * s1 s2 s3 / min(s)`.

    Evaluated as `pi` times the product of the two largest scales.
    """
    scales = _check_scales(scales)
    ordered = np.sort(scales, axis=-1)
    return np.pi * ordered[..., 1] * ordered[..., 2]


class OrientationStrategy(object):
    """Resolves the sign of unoriented normals."""

    def orient(self, normals, positions, instance=0):
        """Orient an (n, 3) array of unit normals at `positions`."""
        raise NotImplementedError("""Derived classes must implement this.""")


class CenterAligned(OrientationStrategy):
    """Point every normal away from `reference_center`.

    A position coinciding with the center leaves its normal unflipped.
    """

    def __init__(self, reference_center=(0., 0., 0.)):
        self.reference_center = np.asarray(reference_center,
                                           dtype=np.float64).reshape(3)

    def orient(self, normals, positions, instance=0):
        normals = np.atleast_2d(normals)
        offsets = np.atleast_2d(positions) - self.reference_center
        dots = np.einsum("ij,ij->i", normals, offsets)
        return np.where((dots < 0)[:, np.newaxis], -normals, normals)

    def at(self, reference_center):
        """The same strategy re-anchored at another center."""
        return CenterAligned(reference_center)

    def __repr__(self):
        return "CenterAligned(%r)" % (self.reference_center.tolist(),)


class FirstElementRandomFlip(OrientationStrategy):
    """Canonical sign followed by a seeded instance-level inversion.

    Each normal is first flipped so that its first nonzero component is
    nonnegative; then all normals of one instance are inverted together with
    probability 0.5. The coin of instance `k` is drawn from a generator seeded
    with `(seed, k)`, so results do not depend on evaluation order.
    """

    def __init__(self, seed=0):
        self.seed = int(seed)

    def instance_sign(self, instance=0):
        rng = np.random.RandomState([self.seed, int(instance)])
        return -1. if rng.uniform() < 0.5 else 1.

    def orient(self, normals, positions=None, instance=0):
        return self.instance_sign(instance) * canonical_sign(normals)

    def __repr__(self):
        return "FirstElementRandomFlip(seed=%d)" % self.seed


def canonical_sign(normals):
    """Flip rows so that the first nonzero component is nonnegative."""
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    nonzero = normals != 0
    first = np.argmax(nonzero, axis=1)
    lead = normals[np.arange(len(normals)), first]
    return np.where((lead < 0)[:, np.newaxis], -normals, normals)


def orient_normal(n, mean, strategy):
    """Orient a single unit normal located at `mean`."""
    n = np.asarray(n, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(n) - 1.) > 1e-6:
        raise GeometryError("""The normal must have unit length.""")

    return strategy.orient(n[np.newaxis], np.reshape(mean, (1, 3)))[0]


class SurfaceElements(object):
    """A structure-of-arrays set of surface elements.

    Attributes
    ----------
    positions : array, shape (n, 3)

    raw_normals : array, shape (n, 3)
        Unoriented unit normals; re-orientation is a sign flip of these.

    normals : array, shape (n, 3)
        Normals oriented by the strategy the set was built with.

    areas : array, shape (n,)

    flatness : array, shape (n,)

    degenerate : bool array, shape (n,)
    """

    def __init__(self, positions, normals, areas, flatness=None,
                 degenerate=None, raw_normals=None):
        self.positions = np.ascontiguousarray(positions, dtype=np.float64) \
            .reshape(-1, 3)
        n = len(self.positions)

        self.normals = np.ascontiguousarray(normals, dtype=np.float64) \
            .reshape(n, 3)
        self.raw_normals = self.normals if raw_normals is None else \
            np.ascontiguousarray(raw_normals, dtype=np.float64).reshape(n, 3)

        self.areas = np.ascontiguousarray(areas, dtype=np.float64).reshape(n)
        self.flatness = np.ones(n) if flatness is None else \
            np.asarray(flatness, dtype=np.float64).reshape(n)
        self.degenerate = np.zeros(n, dtype=bool) if degenerate is None else \
            np.asarray(degenerate, dtype=bool).reshape(n)

        if np.any(self.areas < 0):
            raise GeometryError("""Element areas must be nonnegative.""")

        for array in (self.positions, self.normals, self.raw_normals,
                      self.areas, self.flatness, self.degenerate):
            array.flags.writeable = False

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, index):
        return SurfaceElement(self.positions[index], self.normals[index],
                              float(self.areas[index]),
                              float(self.flatness[index]))

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    def take(self, index):
        """A subset, by integer index or boolean mask."""
        return SurfaceElements(self.positions[index], self.normals[index],
                               self.areas[index], self.flatness[index],
                               self.degenerate[index],
                               self.raw_normals[index])

    def reoriented(self, strategy, instance=0):
        """Normals re-oriented from the cached unoriented ones."""
        return strategy.orient(self.raw_normals, self.positions,
                               instance=instance)

    @staticmethod
    def concatenate(parts):
        parts = list(parts)
        if not parts:
            return SurfaceElements.empty()

        return SurfaceElements(
            np.concatenate([p.positions for p in parts]),
            np.concatenate([p.normals for p in parts]),
            np.concatenate([p.areas for p in parts]),
            np.concatenate([p.flatness for p in parts]),
            np.concatenate([p.degenerate for p in parts]),
            np.concatenate([p.raw_normals for p in parts]))

    @property
    def total_area(self):
        return float(self.areas.sum())

    def to_csv(self):
        """CSV text with columns x,y,z,nx,ny,nz,area,flatness."""
        rows = np.column_stack([self.positions, self.normals,
                                self.areas, self.flatness])
        return rows_to_csv(CSV_COLUMNS, rows.tolist())

    def to_records(self):
        """One dict per element, for JSON export."""
        return [dict(zip(CSV_COLUMNS, row)) for row in np.column_stack(
            [self.positions, self.normals, self.areas,
             self.flatness]).tolist()]

    @classmethod
    def from_csv(cls, text):
        lines = text.strip().splitlines()
        header = tuple(lines[0].split(","))
        if header != CSV_COLUMNS:
            raise GeometryError(
                """Unexpected element CSV header %r.""" % (header,))

        if len(lines) == 1:
            return cls.empty()

        rows = np.array([[float(v) for v in line.split(",")]
                         for line in lines[1:]])
        return cls(rows[:, 0:3], rows[:, 3:6], rows[:, 6], rows[:, 7])

    def __repr__(self):
        return "SurfaceElements(n=%d, total_area=%g)" % (len(self),
                                                         self.total_area)


def build_surface_elements(scene, strategy=None):
    """Surface elements of every primitive of `scene`, in order.

    Parameters
    ----------
    scene : SceneSplat

    strategy : OrientationStrategy, optional
        Defaults to `CenterAligned` at the center of the scene bounds.

    Returns
    -------
    elements : SurfaceElements
    """
    if len(scene) == 0:
        return SurfaceElements.empty()

    log_scales = scene.log_scales
    with np.errstate(over="ignore", under="ignore"):
        scales = np.exp(log_scales)

    bad = ~np.all(np.isfinite(scales) & (scales > 0), axis=1)
    if np.any(bad):
        index = int(np.flatnonzero(bad)[0])
        raise ElementError(index, GeometryError(
            """scales %r are not finite and positive"""
            % (scales[index].tolist(),)))

    if strategy is None:
        lo, hi = scene.bounds
        strategy = CenterAligned(0.5 * (lo + hi))

    R = quaternion_to_matrix(scene.rotations)
    axis = _smallest_axis(scales)
    raw = R[np.arange(len(scales)), :, axis]
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)

    flatness, degenerate = _flatness_and_degeneracy(scales)
    ordered = np.sort(scales, axis=-1)
    areas = np.pi * ordered[:, 1] * ordered[:, 2]

    if np.any(degenerate):
        warnings.warn("""%d of %d primitives are near-isotropic; their """
                      """normals were tie-broken to the lowest axis."""
                      % (degenerate.sum(), len(degenerate)),
                      DegenerateNormalWarning)

    positions = scene.means
    normals = strategy.orient(raw, positions)
    logger.debug("built %d surface elements (%d degenerate)",
                 len(positions), int(degenerate.sum()))

    return SurfaceElements(positions, normals, areas, flatness,
                           degenerate, raw_normals=raw)
