"""Yaw-oriented 3D boxes: containment, IoU and non-maximum suppression."""
import json
from math import pi, cos, sin
from collections import namedtuple

import numpy as np

from .ops import op_contains
from .exceptions import GeometryError, ConfigError, SchemaError
from .utils import dumps_json


# boxes thinner than this (in volume) have IoU 0 with everything
VOLUME_EPS = 1e-12

IOU_MODES = ("yaw", "axis")


def wrap_angle(angle):
    """Wrap an angle (or array of angles) into `[-pi, pi)`.

    Angles already in range are returned bit for bit.
    """
    angle = np.asarray(angle, dtype=np.float64)
    inside = (angle >= -pi) & (angle < pi)
    return np.where(inside, angle, (angle + pi) % (2 * pi) - pi)


class OrientedBox(namedtuple("OrientedBox", ["center", "size", "yaw"])):
    """A 3D box with a heading angle about the vertical axis.

    Parameters
    ----------
    center : 3-sequence of float

    size : 3-sequence of float
        Positive extents `(w, l, h)` along the box axes; `w` lies along the
        heading, `h` is vertical.

    yaw : float
        Heading in radians, wrapped into `[-pi, pi)`.
    """
    __slots__ = ()

    def __new__(cls, center, size, yaw=0.):
        center = tuple(float(v) for v in np.reshape(center, 3))
        size = tuple(float(v) for v in np.reshape(size, 3))
        yaw = float(yaw)
        if not (all(np.isfinite(center)) and all(np.isfinite(size))
                and np.isfinite(yaw)):
            raise GeometryError("""Box parameters must be finite.""")

        if min(size) <= 0:
            raise GeometryError(
                """Box size must be positive, got %r.""" % (size,))

        return super(OrientedBox, cls).__new__(
            cls, center, size, float(wrap_angle(yaw)))

    @classmethod
    def from_vector(cls, vector):
        """From `[x, y, z, w, l, h, yaw]`."""
        vector = np.asarray(vector, dtype=np.float64).reshape(7)
        return cls(vector[:3], vector[3:6], vector[6])

    @property
    def vector(self):
        return np.array(self.center + self.size + (self.yaw,))

    @property
    def volume(self):
        w, l, h = self.size
        return w * l * h

    @property
    def bottom(self):
        return self.center[2] - 0.5 * self.size[2]

    @property
    def top(self):
        return self.center[2] + 0.5 * self.size[2]

    def footprint(self):
        """Counter-clockwise footprint corners, shape (4, 2)."""
        hw, hl = 0.5 * self.size[0], 0.5 * self.size[1]
        local = np.array([[hw, hl], [-hw, hl], [-hw, -hl], [hw, -hl]])
        c, s = cos(self.yaw), sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return np.dot(local, rot.T) + np.array(self.center[:2])

    def axis_aligned(self):
        """The smallest axis-aligned box enclosing this one."""
        corners = self.footprint()
        lo, hi = corners.min(axis=0), corners.max(axis=0)
        return OrientedBox(((lo + hi) / 2).tolist() + [self.center[2]],
                           (hi - lo).tolist() + [self.size[2]], 0.)

    def scaled(self, factor):
        """The same box with every extent multiplied by `factor`."""
        return OrientedBox(self.center, np.multiply(self.size, factor),
                           self.yaw)

    def to_dict(self):
        return {"center": list(self.center), "size": list(self.size),
                "yaw": self.yaw}

    @classmethod
    def from_dict(cls, record):
        try:
            return cls(record["center"], record["size"],
                       record.get("yaw", 0.))
        except (KeyError, TypeError, ValueError) as err:
            if isinstance(err, GeometryError):
                raise
            raise SchemaError("""Bad box record %r: %s""" % (record, err))


class Detection(namedtuple("Detection", ["box", "score", "label",
                                         "report"])):
    """A scored box with an optional class label and closure report."""
    __slots__ = ()

    def __new__(cls, box, score, label=None, report=None):
        score = float(score)
        if not (0. <= score <= 1.):
            raise GeometryError(
                """Detection score must lie in [0, 1], got %r.""" % score)

        return super(Detection, cls).__new__(cls, box, score, label, report)

    def to_dict(self):
        record = self.box.to_dict()
        record["score"] = self.score
        if self.label is not None:
            record["label"] = int(self.label)
        if self.report is not None:
            record["closure"] = self.report
        return record

    @classmethod
    def from_dict(cls, record):
        box = OrientedBox.from_dict(record)
        try:
            return cls(box, record.get("score", 1.), record.get("label"))
        except (TypeError, ValueError) as err:
            if isinstance(err, GeometryError):
                raise
            raise SchemaError("""Bad detection record %r: %s"""
                              % (record, err))


def load_detections(text):
    """Parse a JSON array of box/detection records."""
    try:
        records = json.loads(text)
    except ValueError as err:
        raise SchemaError("""Detections are not valid JSON: %s""" % err)

    if not isinstance(records, list):
        raise SchemaError("""Detections must be a JSON array.""")

    return [Detection.from_dict(record) for record in records]


def dumps_detections(detections):
    return dumps_json([d.to_dict() for d in detections])


def contains(box, point):
    """Whether `point` lies in the closed box."""
    point = np.asarray(point, dtype=np.float64).reshape(1, 3)
    return bool(op_contains(point, box.vector)[0])


def contains_points(box, points):
    """Closed containment mask of an (n, 3) array of points."""
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    return op_contains(points, box.vector)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _intersect(s, e, cp1, cp2):
    """Intersection of segment `s -> e` with the line through `cp1, cp2`."""
    ds, de = _cross(cp1, cp2, s), _cross(cp1, cp2, e)
    t = ds / (ds - de)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


def clip_polygon(subject, clip):
    """Sutherland-Hodgman clipping of `subject` by the convex CCW `clip`.

    Both polygons are sequences of `(x, y)` vertices; points on a clipping
    edge count as inside.
    """
    output = [tuple(p) for p in subject]
    clip = [tuple(p) for p in clip]
    cp1 = clip[-1]
    for cp2 in clip:
        if not output:
            return []

        candidates, output = output, []
        s = candidates[-1]
        for e in candidates:
            if _cross(cp1, cp2, e) >= 0:
                if _cross(cp1, cp2, s) < 0:
                    output.append(_intersect(s, e, cp1, cp2))
                output.append(e)
            elif _cross(cp1, cp2, s) >= 0:
                output.append(_intersect(s, e, cp1, cp2))
            s = e
        cp1 = cp2

    return output


def polygon_area(polygon):
    """Shoelace area of a simple polygon."""
    if len(polygon) < 3:
        return 0.
    xy = np.asarray(polygon, dtype=np.float64)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def intersection_volume(a, b):
    """Volume of the intersection of two yaw-oriented boxes."""
    dz = min(a.top, b.top) - max(a.bottom, b.bottom)
    if dz <= 0:
        return 0.

    overlap = clip_polygon(a.footprint(), b.footprint())
    return polygon_area(overlap) * dz


def iou_3d(a, b, mode="yaw"):
    """Intersection over union of two boxes.

    Parameters
    ----------
    a, b : OrientedBox

    mode : {"yaw", "axis"}, optional (default="yaw")
        `"yaw"` intersects the rotated footprints; `"axis"` replaces each box
        by its axis-aligned bounding box first.

    Returns
    -------
    iou : float in [0, 1]
        Zero when either box has (near) zero volume.
    """
    if mode not in IOU_MODES:
        raise ConfigError("""Unknown IoU mode `%s`.""" % mode)

    if mode == "axis":
        a, b = a.axis_aligned(), b.axis_aligned()

    if a.volume <= VOLUME_EPS or b.volume <= VOLUME_EPS:
        return 0.

    if a == b:
        return 1.

    inter = intersection_volume(a, b)
    union = a.volume + b.volume - inter
    if union <= VOLUME_EPS:
        return 0.

    return float(min(1., max(0., inter / union)))


def iou_matrix(boxes_a, boxes_b, mode="yaw"):
    """Pairwise IoU, shape (len(boxes_a), len(boxes_b))."""
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou_3d(a, b, mode=mode)
    return out


def score_order(scores):
    """Indices by descending score, ties broken by lower index first."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(len(scores)), -scores))


def nms_3d(detections, iou_threshold=0.25, mode="yaw"):
    """Greedy 3D non-maximum suppression.

    A detection is suppressed when its IoU with an already kept detection
    exceeds `iou_threshold`.

    Returns
    -------
    kept : list of Detection
        Sorted by descending score.
    """
    if not (0. <= iou_threshold <= 1.):
        raise ConfigError(
            """`iou_threshold` must lie in [0, 1], got %r."""
            % (iou_threshold,))

    detections = list(detections)
    kept = []
    for index in score_order([d.score for d in detections]):
        candidate = detections[index]
        if all(iou_3d(candidate.box, other.box, mode=mode) <= iou_threshold
               for other in kept):
            kept.append(candidate)

    return kept
