"""Surface closure: flux of a constant field through the elements in a box.

By the divergence theorem the flux of a constant field through a closed
surface vanishes, so for the elements enclosed by a candidate box the
quadrature

    flux = sum_i  T . n_i  A_i

is close to zero when they form a closed object and grows with missing or
spurious surface. The closure score `exp(-gamma |flux|)` turns it into a
support (near 1) or suppression (near 0) weight.
"""
import logging
from collections import namedtuple

import numpy as np

from .ops import op_flux, op_flux_batch, ORIENT_CENTER, ORIENT_FIXED
from .surface import CenterAligned, FirstElementRandomFlip, canonical_sign
from .exceptions import GeometryError, ConfigError

logger = logging.getLogger(__name__)


DEFAULT_GAMMA = 0.5

# |flux| above one square decimetre is marked in reports
UNIT_DM2 = 1.


class FluxField(object):
    """A constant unit test field `T`, by default `(1, 1, 1) / sqrt(3)`."""

    def __init__(self, T=None, normalize=False):
        if T is None:
            T = np.full(3, 1. / np.sqrt(3.))

        T = np.asarray(T, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(T)
        if normalize:
            if norm == 0:
                raise GeometryError("""The test field must be nonzero.""")
            T, norm = T / norm, 1.

        if abs(norm - 1.) > 1e-12:
            raise GeometryError(
                """The test field must have unit norm, got %r.""" % norm)

        self.T = T
        self.T.flags.writeable = False

    def __repr__(self):
        return "FluxField(%r)" % (self.T.tolist(),)


class FluxReport(namedtuple("FluxReport", [
        "flux", "enclosed_count", "total_area", "normalized_flux"])):
    """Closure evidence of one box.

    Attributes
    ----------
    flux : float
        Signed flux estimate, in squared scene units.

    enclosed_count : int
        Number of enclosed elements.

    total_area : float
        Sum of the enclosed element areas.

    normalized_flux : float
        `|flux| / total_area`, zero for an empty enclosure.
    """
    __slots__ = ()

    @classmethod
    def from_sums(cls, flux, count, area):
        normalized = abs(flux) / area if area > 0 else 0.
        return cls(float(flux), int(count), float(area), float(normalized))

    @property
    def abs_flux(self):
        return abs(self.flux)

    def flux_dm2(self, meters_per_unit=1.):
        """The flux in square decimetres."""
        return self.flux * (meters_per_unit ** 2) * 100.

    def exceeds_unit_dm2(self, meters_per_unit=1.):
        return abs(self.flux_dm2(meters_per_unit)) > UNIT_DM2

    def to_dict(self, gamma=None, meters_per_unit=1.):
        record = {"flux": self.flux,
                  "enclosed_count": self.enclosed_count,
                  "total_area": self.total_area,
                  "normalized_flux": self.normalized_flux,
                  "flux_dm2": self.flux_dm2(meters_per_unit),
                  "exceeds_unit_dm2": self.exceeds_unit_dm2(meters_per_unit)}
        if gamma is not None:
            record["closure_score"] = closure_score(self.abs_flux, gamma)
        return record


def closure_score(flux_abs, gamma=DEFAULT_GAMMA):
    """The closure weight `exp(-gamma |flux|)`.

    Parameters
    ----------
    flux_abs : float or array-like
        Nonnegative absolute flux.

    gamma : float, optional (default=0.5)
        Flexibility coefficient in `(0, 1]`.

    Returns
    -------
    score : float or array, in (0, 1]
    """
    if not (0. < gamma <= 1.):
        raise ConfigError(
            """`gamma` must lie in (0, 1], got %r.""" % (gamma,))

    flux_abs = np.asarray(flux_abs, dtype=np.float64)
    if np.any(~np.isfinite(flux_abs)) or np.any(flux_abs < 0):
        raise ConfigError("""`flux_abs` must be finite and nonnegative.""")

    score = np.exp(-gamma * flux_abs)
    return float(score) if score.ndim == 0 else score


def _kernel_inputs(elements, orientation, n_boxes, instances=None):
    """Normals, mode and per-box signs for the flux kernels."""
    if orientation is None or isinstance(orientation, CenterAligned):
        return elements.raw_normals, ORIENT_CENTER, np.ones(n_boxes)

    if isinstance(orientation, FirstElementRandomFlip):
        if instances is None:
            instances = range(n_boxes)
        signs = np.array([orientation.instance_sign(k) for k in instances],
                         dtype=np.float64)
        normals = np.ascontiguousarray(canonical_sign(elements.raw_normals))
        return normals, ORIENT_FIXED, signs

    raise ConfigError("""Unsupported orientation strategy %r."""
                      % (orientation,))


def flux_through_box(elements, box, field=None, orientation=None,
                     instance=0):
    """Flux through the elements whose position lies in `box`.

    Parameters
    ----------
    elements : SurfaceElements

    box : OrientedBox

    field : FluxField, optional
        Defaults to `(1, 1, 1) / sqrt(3)`.

    orientation : OrientationStrategy, optional
        `CenterAligned` (the default) orients every normal away from the box
        center regardless of the strategy's own reference;
        `FirstElementRandomFlip` uses canonical normals with the coin of
        `instance`.

    Returns
    -------
    report : FluxReport
    """
    field = FluxField() if field is None else field
    if len(elements) == 0:
        return FluxReport.from_sums(0., 0, 0.)

    normals, mode, signs = _kernel_inputs(elements, orientation, 1,
                                          instances=[instance])
    flux, count, area = op_flux(elements.positions, normals, elements.areas,
                                field.T, box.vector, mode, signs[0])
    return FluxReport.from_sums(flux, count, area)


def flux_batch(elements, boxes, field=None, orientation=None):
    """Flux reports for many boxes against one element set.

    Boxes are evaluated in parallel; each report only depends on its own box,
    so the results do not depend on the number of threads. With a random-flip
    orientation, box `k` uses the coin of instance `k`.
    """
    field = FluxField() if field is None else field
    boxes = list(boxes)
    if not boxes:
        return []

    if len(elements) == 0:
        return [FluxReport.from_sums(0., 0, 0.) for _ in boxes]

    normals, mode, signs = _kernel_inputs(elements, orientation, len(boxes))
    vectors = np.ascontiguousarray([b.vector for b in boxes])
    flux, count, area = op_flux_batch(elements.positions, normals,
                                      elements.areas, field.T, vectors,
                                      mode, signs)
    logger.debug("evaluated flux of %d boxes against %d elements",
                 len(boxes), len(elements))
    return [FluxReport.from_sums(f, c, a)
            for f, c, a in zip(flux, count, area)]
