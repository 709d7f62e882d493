"""Pipeline configuration and its TOML/JSON loader."""
import os
import json
import logging
from math import radians

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from ..boxes import IOU_MODES
from ..exceptions import ConfigError

logger = logging.getLogger(__name__)


ORIENTATIONS = ("center", "random_flip")

# keys of the nested `[refine]` table and the flat fields they map to
REFINE_KEYS = {
    "enabled": "refine",
    "center_step": "center_step",
    "size_step": "size_step",
    "yaw_step_deg": "yaw_step_deg",
    "max_sweeps": "max_sweeps",
    "coverage_weight": "coverage_weight",
    "cluster_margin": "cluster_margin",
    "min_improvement": "min_improvement",
}


class PipelineConfig(object):
    """Knobs of closure-aware rescoring, refinement and NMS.

    Parameters
    ----------
    gamma : float (default=0.5)
        Closure flexibility in `(0, 1]`; the score is `exp(-gamma |flux|)`.

    min_support : int (default=16)
        Proposals enclosing fewer elements get a zero final score.

    use_normalized_flux : bool (default=False)
        Score `exp(-gamma * kappa * |flux| / area)` instead of the raw flux,
        which makes the score independent of the scene unit.

    normalized_scale : float (default=10.0)
        The factor `kappa` of the normalized mode.

    use_closure : bool (default=True)
        When off, every closure score is 1 and only the support gate acts.

    orientation : {"center", "random_flip"} (default="center")
        How normals are oriented before summation.

    orientation_seed : int (default=0)
        Seed of the random-flip orientation.

    refine : bool (default=False)
        Whether to run coordinate-descent box refinement.

    center_step, size_step : float (default=0.05)
        Refinement steps as a fraction of the initial box size.

    yaw_step_deg : float (default=2.0)

    max_sweeps : int (default=50)

    coverage_weight : float (default=0.5)
        Weight `lambda_cov` of the coverage term in the refinement objective.

    cluster_margin : float (default=1.5)
        The local cluster of a proposal is what lies in its box scaled by
        this factor.

    min_improvement : float (default=1e-6)

    nms_iou : float (default=0.25)

    iou_mode : {"yaw", "axis"} (default="yaw")

    opacity_min : float (default=0.3)
        Opacity threshold applied when a splat file is the input.

    alpha : float (default=0.1)
        Residual weight of the variational numerics.

    meters_per_unit : float (default=1.0)
        Scene-unit length in metres, for the square-decimetre flux.
    """

    def __init__(self,
                 gamma=0.5,
                 min_support=16,
                 use_normalized_flux=False,
                 normalized_scale=10.0,
                 use_closure=True,
                 orientation="center",
                 orientation_seed=0,
                 refine=False,
                 center_step=0.05,
                 size_step=0.05,
                 yaw_step_deg=2.0,
                 max_sweeps=50,
                 coverage_weight=0.5,
                 cluster_margin=1.5,
                 min_improvement=1e-6,
                 nms_iou=0.25,
                 iou_mode="yaw",
                 opacity_min=0.3,
                 alpha=0.1,
                 meters_per_unit=1.0):
        self.gamma = gamma
        self.min_support = min_support
        self.use_normalized_flux = use_normalized_flux
        self.normalized_scale = normalized_scale
        self.use_closure = use_closure
        self.orientation = orientation
        self.orientation_seed = orientation_seed
        self.refine = refine
        self.center_step = center_step
        self.size_step = size_step
        self.yaw_step_deg = yaw_step_deg
        self.max_sweeps = max_sweeps
        self.coverage_weight = coverage_weight
        self.cluster_margin = cluster_margin
        self.min_improvement = min_improvement
        self.nms_iou = nms_iou
        self.iou_mode = iou_mode
        self.opacity_min = opacity_min
        self.alpha = alpha
        self.meters_per_unit = meters_per_unit

        self.validate()

    @classmethod
    def field_names(cls):
        code = cls.__init__.__code__
        return code.co_varnames[1:code.co_argcount]

    @property
    def yaw_step(self):
        return radians(self.yaw_step_deg)

    def validate(self):
        """Raise `ConfigError` if any field is out of range."""
        checks = [
            (0. < self.gamma <= 1., "gamma", "(0, 1]"),
            (int(self.min_support) == self.min_support
             and self.min_support >= 0, "min_support",
             "nonnegative integers"),
            (self.normalized_scale > 0, "normalized_scale", "(0, inf)"),
            (self.orientation in ORIENTATIONS, "orientation",
             "%r" % (ORIENTATIONS,)),
            (self.center_step > 0, "center_step", "(0, inf)"),
            (self.size_step > 0, "size_step", "(0, inf)"),
            (0. < self.yaw_step_deg < 180., "yaw_step_deg", "(0, 180)"),
            (int(self.max_sweeps) == self.max_sweeps
             and self.max_sweeps >= 0, "max_sweeps", "nonnegative integers"),
            (0. <= self.coverage_weight <= 1., "coverage_weight", "[0, 1]"),
            (self.cluster_margin >= 1., "cluster_margin", "[1, inf)"),
            (self.min_improvement >= 0, "min_improvement", "[0, inf)"),
            (0. <= self.nms_iou <= 1., "nms_iou", "[0, 1]"),
            (self.iou_mode in IOU_MODES, "iou_mode", "%r" % (IOU_MODES,)),
            (0. <= self.opacity_min <= 1., "opacity_min", "[0, 1]"),
            (self.alpha >= 0, "alpha", "[0, inf)"),
            (self.meters_per_unit > 0, "meters_per_unit", "(0, inf)"),
        ]
        for ok, name, domain in checks:
            if not ok:
                raise ConfigError("""`%s` must lie in %s, got %r."""
                                  % (name, domain, getattr(self, name)))

        return self

    def to_dict(self):
        return {name: getattr(self, name) for name in self.field_names()}

    @classmethod
    def from_dict(cls, record):
        """Build from a flat mapping; a nested `refine` table is flattened."""
        record = _flatten(record)
        unknown = sorted(set(record) - set(cls.field_names()))
        if unknown:
            raise ConfigError("""Unknown configuration keys: %s."""
                              % ", ".join(unknown))

        try:
            return cls(**record)
        except TypeError as err:
            raise ConfigError("""Bad configuration value: %s""" % err)

    def replace(self, **overrides):
        """A copy with some fields changed; `None` values are ignored."""
        record = self.to_dict()
        record.update(_flatten({k: v for k, v in overrides.items()
                                if v is not None}))
        return type(self).from_dict(record)

    def __eq__(self, other):
        if not isinstance(other, PipelineConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def __repr__(self):
        return "PipelineConfig(%s)" % ", ".join(
            "%s=%r" % item for item in sorted(self.to_dict().items()))


def _flatten(record):
    if not isinstance(record, dict):
        raise ConfigError("""A configuration must be a mapping.""")

    record = dict(record)
    refine = record.get("refine")
    if isinstance(refine, dict):
        del record["refine"]
        for key, value in refine.items():
            if key not in REFINE_KEYS:
                raise ConfigError(
                    """Unknown refine configuration key `%s`.""" % key)
            record[REFINE_KEYS[key]] = value

    return record


def read_config_text(text, suffix):
    """Parse configuration text as TOML (`.toml`) or JSON (anything else)."""
    if suffix.lower() == ".toml":
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError("""Invalid TOML configuration: %s""" % err)

    try:
        return json.loads(text)
    except ValueError as err:
        raise ConfigError("""Invalid JSON configuration: %s""" % err)


def load_config(path, base=None):
    """Read a `PipelineConfig` from a TOML or JSON file.

    Keys in the file override the fields of `base` (the defaults when
    omitted).
    """
    with open(path, "r") as f:
        text = f.read()

    record = read_config_text(text, os.path.splitext(path)[1])
    config = (base or PipelineConfig()).replace(**_flatten(record))
    logger.debug("loaded configuration from %s", path)
    return config
