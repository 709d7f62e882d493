"""Closure-guided box refinement by coordinate descent.

The objective of a box is

    J = lambda_cov * coverage + (1 - lambda_cov) * closure

where coverage is the share of the local cluster's area enclosed by the box
and closure the closure score of the enclosed elements. The local cluster
holds the elements inside the initial box scaled by `cluster_margin`.
"""
import logging
import warnings
from collections import namedtuple

import numpy as np

from ..boxes import OrientedBox, contains_points
from ..closure import FluxField, flux_batch
from ..exceptions import NoSupportWarning

from .config import PipelineConfig
from .rescoring import closure_scores, make_orientation

logger = logging.getLogger(__name__)


# parameter order of a coordinate sweep: center, yaw, then size
SWEEP_ORDER = (0, 1, 2, 6, 3, 4, 5)

# bound on consecutive accepted steps along one coordinate
MAX_LINE_STEPS = 25


RefineInfo = namedtuple("RefineInfo", [
    "objective", "initial_objective", "n_sweeps", "n_steps", "noop"])


class RefinementObjective(object):
    """The objective `J` of boxes against one local cluster."""

    def __init__(self, cluster, config, field=None):
        self.cluster = cluster
        self.config = config
        self.field = FluxField() if field is None else field
        self.cluster_area = cluster.total_area

    def coverage(self, reports):
        if self.cluster_area <= 0:
            return np.zeros(len(reports))
        return np.array([r.total_area for r in reports]) / self.cluster_area

    def __call__(self, boxes):
        """Objective values of a list of boxes."""
        reports = flux_batch(self.cluster, boxes, self.field,
                             orientation=make_orientation(self.config))
        weight = self.config.coverage_weight
        return weight * self.coverage(reports) \
            + (1. - weight) * closure_scores(reports, self.config)


def local_cluster(box, elements, margin=1.5):
    """Elements whose position lies in `box` scaled by `margin`."""
    if len(elements) == 0:
        return elements
    return elements.take(contains_points(box.scaled(margin),
                                         elements.positions))


def _steps(box, config):
    size = np.asarray(box.size)
    return np.r_[config.center_step * size, config.size_step * size,
                 config.yaw_step]


def _candidate(vector, k, delta):
    if k in (3, 4, 5) and vector[k] + delta <= 0:
        return None
    vector = vector.copy()
    vector[k] += delta
    return OrientedBox.from_vector(vector)


def _descend(vector, objective, steps, config, verbose=False):
    """Sweeps of single-coordinate line searches from `vector`."""
    best = float(objective([OrientedBox.from_vector(vector)])[0])
    n_sweeps, n_steps = 0, 0
    for n_sweeps in range(1, config.max_sweeps + 1):
        improved = False
        for k in SWEEP_ORDER:
            for _ in range(MAX_LINE_STEPS):
                candidates = [c for c in (_candidate(vector, k, +steps[k]),
                                          _candidate(vector, k, -steps[k]))
                              if c is not None]
                values = objective(candidates)
                j = int(np.argmax(values))
                if values[j] <= best + config.min_improvement:
                    break

                vector, best = candidates[j].vector, float(values[j])
                improved, n_steps = True, n_steps + 1
            # end for
        # end for

        if verbose:
            logger.info("sweep %d: J = %.6f", n_sweeps, best)

        if not improved:
            break
    # end for

    return vector, best, n_sweeps, n_steps


def refine_box(box, elements, config=None, field=None, return_info=False,
               verbose=False):
    """Coordinate descent on a box to increase coverage and closure.

    Every sweep visits the center, the heading and the extents; along each
    coordinate it keeps stepping in the better direction while the objective
    improves by more than `min_improvement`. Steps are fixed fractions of the
    box size and `yaw_step_deg` for the heading.

    The descent is restarted from its result, with the local cluster and the
    steps of the refined box, until a restart makes no step. The output is
    then a fixed point: refining it again returns it unchanged. A restart
    whose result would lower the objective on the input's cluster is
    discarded, and at most `max_sweeps` restarts are run.

    Parameters
    ----------
    box : OrientedBox

    elements : SurfaceElements

    config : PipelineConfig, optional

    return_info : bool, optional (default=False)
        Whether to also return a `RefineInfo`.

    Returns
    -------
    box : OrientedBox
        Never has a lower objective than the input. A box enclosing no
        elements is returned unchanged with `info.noop` set.

    info : RefineInfo
        Only if `return_info` is set. Objectives are measured on the local
        cluster of the input box.
    """
    config = PipelineConfig() if config is None else config

    cluster = local_cluster(box, elements, config.cluster_margin)
    enclosed = contains_points(box, cluster.positions) if len(cluster) \
        else np.zeros(0, dtype=bool)

    if not np.any(enclosed):
        warnings.warn("""The box %r encloses no elements; refinement """
                      """skipped.""" % (box,), NoSupportWarning)
        info = RefineInfo(0., 0., 0, 0, True)
        return (box, info) if return_info else box

    objective = RefinementObjective(cluster, config, field)
    vector, best, n_sweeps, n_steps = _descend(
        box.vector, objective, _steps(box, config), config, verbose)
    initial = float(objective([box])[0])

    for _ in range(config.max_sweeps):
        if n_steps == 0:
            break

        current = OrientedBox.from_vector(vector)
        restart = RefinementObjective(
            local_cluster(current, elements, config.cluster_margin),
            config, field)
        moved, _, sweeps, steps = _descend(
            vector, restart, _steps(current, config), config, verbose)
        if steps == 0:
            break

        value = float(objective([OrientedBox.from_vector(moved)])[0])
        if value < initial:
            logger.debug("restart discarded: J %.6f below %.6f",
                         value, initial)
            break

        vector, best = moved, value
        n_sweeps, n_steps = n_sweeps + sweeps, n_steps + steps
    # end for

    refined = OrientedBox.from_vector(vector)
    assert best >= initial, """Refinement must not decrease the objective."""

    logger.debug("refined box in %d sweeps and %d steps: J %.6f -> %.6f",
                 n_sweeps, n_steps, initial, best)

    info = RefineInfo(best, initial, n_sweeps, n_steps, False)
    return (refined, info) if return_info else refined


def box_objective(box, elements, config=None, field=None, cluster_box=None):
    """The refinement objective of `box`, with the cluster of `cluster_box`
    (`box` itself by default)."""
    config = PipelineConfig() if config is None else config
    cluster = local_cluster(box if cluster_box is None else cluster_box,
                            elements, config.cluster_margin)
    return float(RefinementObjective(cluster, config, field)([box])[0])
