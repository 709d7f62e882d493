"""Reading, writing and preprocessing of 3D Gaussian Splatting PLY files.

PLY headers and payloads are handled by `plyfile`. Only binary
little-endian files with a single `vertex` element of scalar properties are
accepted. The vertex records are kept exactly as stored (raw logits,
log-scales and quaternions), so that writing a parsed scene reproduces the
input payload byte for byte; decoded quantities such as opacities, scales
and unit quaternions are derived on access.
"""
import io
import logging
from collections import namedtuple

import numpy as np
from plyfile import (PlyData, PlyElement, PlyListProperty,
                     PlyHeaderParseError, PlyElementParseError)
from scipy.special import expit, logit
from sklearn.utils import check_random_state

from .exceptions import (MalformedHeaderError, MissingPropertyError,
                         TruncatedPayloadError, NonFiniteValueError,
                         PlyFormatError, GeometryError, ConfigError)
from .utils import atomic_write

logger = logging.getLogger(__name__)


MEAN_PROPS = ("x", "y", "z")
NORMAL_PROPS = ("nx", "ny", "nz")
DC_PROPS = ("f_dc_0", "f_dc_1", "f_dc_2")
SCALE_PROPS = ("scale_0", "scale_1", "scale_2")
ROT_PROPS = ("rot_0", "rot_1", "rot_2", "rot_3")
OPACITY_PROP = "opacity"

REQUIRED_PROPS = MEAN_PROPS + DC_PROPS + (OPACITY_PROP,) \
    + SCALE_PROPS + ROT_PROPS

# quaternions further than this from unit norm are rejected
QUAT_TOL = 1e-3


class InvalidQuaternionError(PlyFormatError):
    """A stored quaternion is zero or too far from unit norm."""


class GaussianPrimitive(namedtuple("GaussianPrimitive", [
        "mean", "log_scale", "rotation", "opacity_logit",
        "color_dc", "color_rest"])):
    """A single decoded splat.

    `rotation` is the unit quaternion `(w, x, y, z)`; `color_rest` holds the
    higher-order SH coefficients as stored.
    """
    __slots__ = ()

    @property
    def scales(self):
        return np.exp(self.log_scale)

    @property
    def opacity(self):
        return float(expit(self.opacity_logit))


class CropBox(object):
    """Axis-aligned closed cuboid used to crop a scene."""

    def __init__(self, min, max):
        self.min = np.asarray(min, dtype=np.float64).reshape(3)
        self.max = np.asarray(max, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(self.min))
                and np.all(np.isfinite(self.max))):
            raise GeometryError("""Crop box bounds must be finite.""")

        if np.any(self.min > self.max):
            raise GeometryError(
                """Inverted crop box: min %r exceeds max %r."""
                % (self.min.tolist(), self.max.tolist()))

    def contains(self, points):
        """Closed containment mask for an (n, 3) array of points."""
        points = np.atleast_2d(points)
        return np.all((points >= self.min) & (points <= self.max), axis=1)

    def __repr__(self):
        return "CropBox(min=%r, max=%r)" % (self.min.tolist(),
                                           self.max.tolist())


def splat_dtype(n_rest=0, with_normals=True):
    """The reference 3D-GS exporter vertex layout."""
    names = list(MEAN_PROPS)
    if with_normals:
        names.extend(NORMAL_PROPS)
    names.extend(DC_PROPS)
    names.extend("f_rest_%d" % i for i in range(n_rest))
    names.append(OPACITY_PROP)
    names.extend(SCALE_PROPS)
    names.extend(ROT_PROPS)
    return np.dtype([(name, "<f4") for name in names])


class SceneSplat(object):
    """An immutable set of Gaussian primitives backed by raw PLY records.

    Parameters
    ----------
    vertices : structured array, shape (n,)
        The vertex records, one scalar field per PLY property, in file order.

    comments, obj_info : sequence of str, optional
        Header `comment` and `obj_info` texts, re-emitted on write.

    source_path : str, optional
        Where the scene was read from.
    """

    def __init__(self, vertices, comments=(), obj_info=(), source_path="",
                 quat_tol=QUAT_TOL):
        vertices = np.array(vertices, copy=True)
        missing = [p for p in REQUIRED_PROPS
                   if p not in (vertices.dtype.names or ())]
        if missing:
            raise MissingPropertyError(
                """Required vertex property is missing.""", prop=missing[0])

        vertices.flags.writeable = False
        self.vertices = vertices
        self.comments = tuple(comments)
        self.obj_info = tuple(obj_info)
        self.source_path = source_path

        self._rotations = _normalize_quaternions(
            _columns(vertices, ROT_PROPS), quat_tol)

    @classmethod
    def from_arrays(cls, means, log_scales, rotations, opacity_logits,
                    color_dc=None, color_rest=None, source_path=""):
        """Build a scene in the reference exporter layout.

        Values are stored as float32, as a 3D-GS exporter would write them.
        """
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        n = means.shape[0] if means.size else 0
        means = means.reshape(n, 3)

        if color_dc is None:
            color_dc = np.zeros((n, 3))

        if color_rest is None:
            color_rest = np.zeros((n, 0))
        color_rest = np.asarray(color_rest, dtype=np.float64)
        if color_rest.ndim != 2:
            color_rest = color_rest.reshape(n, -1)

        vertices = np.zeros(n, dtype=splat_dtype(color_rest.shape[1]))
        _assign(vertices, MEAN_PROPS, means)
        _assign(vertices, DC_PROPS, np.reshape(color_dc, (n, 3)))
        _assign(vertices, ["f_rest_%d" % i
                           for i in range(color_rest.shape[1])], color_rest)
        vertices[OPACITY_PROP] = np.reshape(opacity_logits, n)
        _assign(vertices, SCALE_PROPS, np.reshape(log_scales, (n, 3)))
        _assign(vertices, ROT_PROPS, np.reshape(rotations, (n, 4)))

        return cls(vertices, source_path=source_path)

    def __len__(self):
        return len(self.vertices)

    def __getitem__(self, index):
        return GaussianPrimitive(
            mean=self.means[index], log_scale=self.log_scales[index],
            rotation=self.rotations[index],
            opacity_logit=float(self.opacity_logits[index]),
            color_dc=self.color_dc[index], color_rest=self.color_rest[index])

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    @property
    def primitives(self):
        return list(self)

    @property
    def property_names(self):
        return self.vertices.dtype.names

    @property
    def means(self):
        return _columns(self.vertices, MEAN_PROPS)

    @property
    def log_scales(self):
        return _columns(self.vertices, SCALE_PROPS)

    @property
    def scales(self):
        return np.exp(self.log_scales)

    @property
    def raw_rotations(self):
        return _columns(self.vertices, ROT_PROPS)

    @property
    def rotations(self):
        """Unit quaternions `(w, x, y, z)`, one row per primitive."""
        return self._rotations

    @property
    def opacity_logits(self):
        return self.vertices[OPACITY_PROP].astype(np.float64)

    @property
    def opacities(self):
        return expit(self.opacity_logits)

    @property
    def color_dc(self):
        return _columns(self.vertices, DC_PROPS)

    @property
    def color_rest(self):
        names = [p for p in self.property_names if p.startswith("f_rest_")]
        names.sort(key=lambda p: int(p[len("f_rest_"):]))
        return _columns(self.vertices, names)

    @property
    def bounds(self):
        """Tight axis-aligned bounds of the means, or None when empty."""
        if len(self) == 0:
            return None
        means = self.means
        return means.min(axis=0), means.max(axis=0)

    def select(self, mask_or_index):
        """A new scene with a subset of the primitives, order preserved."""
        return SceneSplat(self.vertices[mask_or_index],
                          comments=self.comments, obj_info=self.obj_info,
                          source_path=self.source_path, quat_tol=None)

    def __eq__(self, other):
        if not isinstance(other, SceneSplat):
            return NotImplemented
        return (self.vertices.dtype == other.vertices.dtype
                and self.vertices.tobytes() == other.vertices.tobytes())

    __hash__ = None

    def __repr__(self):
        return "SceneSplat(n=%d, source_path=%r)" % (len(self),
                                                     self.source_path)


def _columns(vertices, names):
    if len(names) == 0:
        return np.zeros((len(vertices), 0))
    return np.stack([vertices[name].astype(np.float64) for name in names],
                    axis=-1)


def _assign(vertices, names, values):
    for j, name in enumerate(names):
        vertices[name] = values[:, j]


def _normalize_quaternions(quats, tol):
    norms = np.linalg.norm(quats, axis=-1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise InvalidQuaternionError(
            """Zero quaternion at primitive %d.""" % bad, prop="rot_0")

    if tol is not None and np.any(abs(norms - 1.) > tol):
        bad = int(np.flatnonzero(abs(norms - 1.) > tol)[0])
        raise InvalidQuaternionError(
            """Quaternion of primitive %d has norm %g, beyond tolerance %g."""
            % (bad, norms[bad], tol), prop="rot_0")

    return quats / norms[:, np.newaxis]


def _header_lines(data):
    """Byte offset and text of every header line, and the header length
    (None without an `end_header` line)."""
    lines, offset = [], 0
    for raw in io.BytesIO(data):
        line = raw.rstrip(b"\r\n")
        lines.append((offset, line))
        offset += len(raw)
        if line == b"end_header":
            return lines, offset
    # end for
    return lines, None


def _line_offset(lines, prefix):
    """Offset of the first header line starting with `prefix`."""
    for offset, line in lines:
        if line.startswith(prefix):
            return offset
    return None


def _check_format(lines):
    offset = _line_offset(lines, b"format")
    if offset is None:
        raise MalformedHeaderError("""Missing `format` line.""", offset=4)

    line = dict(lines)[offset]
    if line.split() != [b"format", b"binary_little_endian", b"1.0"]:
        raise MalformedHeaderError(
            """Unsupported format `%s`."""
            % line.decode("ascii", "replace"), offset=offset)


def _check_vertex_element(ply, lines, header_len):
    names = [element.name for element in ply.elements]
    if names != ["vertex"]:
        extra = [name for name in names if name != "vertex"]
        if extra:
            raise MalformedHeaderError(
                """Unsupported element `%s`.""" % extra[0],
                offset=_line_offset(lines, b"element " + extra[0].encode()))
        raise MalformedHeaderError("""Missing vertex element.""",
                                   offset=header_len)

    properties = ply["vertex"].properties
    for prop in properties:
        if isinstance(prop, PlyListProperty):
            raise MalformedHeaderError(
                """List properties are not supported.""",
                offset=_line_offset(lines, b"property list"), prop=prop.name)
    # end for

    kinds = {prop.name: np.dtype(prop.val_dtype).kind for prop in properties}
    for name in REQUIRED_PROPS:
        if name not in kinds:
            raise MissingPropertyError(
                """Required vertex property is missing.""",
                offset=header_len, prop=name)
        if kinds[name] != "f":
            raise MalformedHeaderError(
                """Required property must be floating point.""",
                offset=header_len, prop=name)
    # end for


def _check_finite(vertices, header_len, stage):
    for name in vertices.dtype.names:
        column = vertices[name]
        if column.dtype.kind != "f":
            continue

        bad = np.flatnonzero(~np.isfinite(column))
        if len(bad):
            index = int(bad[0])
            offset = None
            if header_len is not None:
                offset = (header_len + index * vertices.dtype.itemsize
                          + vertices.dtype.fields[name][1])
            raise NonFiniteValueError(
                """Non-finite value %s at vertex %d.""" % (stage, index),
                offset=offset, prop=name)


def _truncated(err, data, header_len):
    """`TruncatedPayloadError` at the first incomplete vertex record."""
    itemsize = err.element.dtype("<").itemsize
    available = len(data) - header_len
    row = err.row if err.row is not None else available // itemsize
    return TruncatedPayloadError(
        """Header declares %d vertices (%d bytes) but the payload holds """
        """%d bytes.""" % (err.element.count, err.element.count * itemsize,
                           available),
        offset=header_len + row * itemsize,
        prop=getattr(err.prop, "name", None))


def parse_splat_ply(data, source_path="", quat_tol=QUAT_TOL):
    """Decode a binary little-endian splat PLY.

    Parameters
    ----------
    data : bytes
        The complete file contents.

    source_path : str, optional
        Recorded on the resulting scene.

    quat_tol : float or None, optional (default=1e-3)
        Maximal deviation of the stored quaternion norm from one. Quaternions
        within the tolerance are normalized; `None` disables the check.

    Returns
    -------
    scene : SceneSplat
        One primitive per vertex, in file order.

    Raises
    ------
    MalformedHeaderError, MissingPropertyError, TruncatedPayloadError,
    NonFiniteValueError, InvalidQuaternionError
    """
    data = bytes(data)
    lines, header_len = _header_lines(data)
    stream = io.BytesIO(data)
    try:
        ply = PlyData.read(stream)

    except PlyHeaderParseError as err:
        line = max(1, err.line or 1)
        offset = lines[line - 1][0] if line <= len(lines) else len(data)
        raise MalformedHeaderError(
            """Invalid PLY header: %s""" % err, offset=offset)

    except UnicodeDecodeError:
        raise MalformedHeaderError(
            """Non-ASCII header line.""",
            offset=next((offset for offset, line in lines
                         if not line.isascii()), None))

    except PlyElementParseError as err:
        _check_format(lines)
        raise _truncated(err, data, header_len)

    _check_format(lines)
    _check_vertex_element(ply, lines, header_len)

    consumed = stream.tell()
    if consumed < len(data):
        raise PlyFormatError(
            """%d trailing bytes after the vertex payload."""
            % (len(data) - consumed), offset=consumed)

    vertices = ply["vertex"].data
    _check_finite(vertices, header_len, "decoded")

    scene = SceneSplat(vertices, comments=ply.comments,
                       obj_info=ply.obj_info, source_path=source_path,
                       quat_tol=quat_tol)
    logger.debug("parsed %d primitives with %d properties from %r",
                 len(scene), len(vertices.dtype.names),
                 source_path or "<bytes>")
    return scene


def write_splat_ply(scene):
    """Encode a scene as binary little-endian PLY bytes.

    The header lists the stored properties in their original order and
    type, and the stored records are written verbatim.
    """
    _check_finite(scene.vertices, None, "to encode")

    little = scene.vertices.dtype.newbyteorder("<")
    element = PlyElement.describe(scene.vertices.astype(little, copy=False),
                                  "vertex")
    ply = PlyData([element], text=False, byte_order="<",
                  comments=list(scene.comments),
                  obj_info=list(scene.obj_info))

    stream = io.BytesIO()
    ply.write(stream)
    return stream.getvalue()


def read_splat_ply(path, quat_tol=QUAT_TOL):
    """Read and decode a splat PLY file."""
    with open(path, "rb") as f:
        data = f.read()
    return parse_splat_ply(data, source_path=str(path), quat_tol=quat_tol)


def write_splat_ply_file(scene, path):
    """Write a scene to `path` atomically."""
    atomic_write(path, write_splat_ply(scene))


def filter_scene(scene, opacity_min=0.3, crop=None):
    """Keep the primitives with opacity at least `opacity_min` inside `crop`.

    The threshold is compared in logit space after encoding it the way the
    file stores opacities (float32), so a primitive stored with exactly the
    threshold opacity is kept.

    Parameters
    ----------
    scene : SceneSplat

    opacity_min : float, optional (default=0.3)
        Minimal opacity in `[0, 1]`.

    crop : CropBox, optional
        Closed cuboid the means must lie in.

    Returns
    -------
    scene : SceneSplat
        A new scene; the input is left untouched.
    """
    if not (0. <= opacity_min <= 1.):
        raise ConfigError(
            """`opacity_min` must lie in [0, 1], got %r.""" % (opacity_min,))

    if crop is not None and not isinstance(crop, CropBox):
        crop = CropBox(*crop)

    with np.errstate(divide="ignore"):
        threshold = np.float32(logit(opacity_min))

    keep = scene.vertices[OPACITY_PROP] >= threshold
    if crop is not None:
        keep &= crop.contains(scene.means)

    logger.info("kept %d of %d primitives (opacity >= %g%s)",
                int(keep.sum()), len(scene), opacity_min,
                "" if crop is None else ", cropped")
    return scene.select(keep)


def subsample_scene(scene, n_primitives=40000, random_state=None):
    """Uniform random subset of at most `n_primitives`, order preserved."""
    if n_primitives < 0:
        raise ConfigError("""`n_primitives` must be nonnegative.""")

    if len(scene) <= n_primitives:
        return scene

    random_state = check_random_state(random_state)
    index = random_state.choice(len(scene), n_primitives, replace=False)
    return scene.select(np.sort(index))
