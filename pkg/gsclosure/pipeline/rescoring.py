"""Support or suppression of proposals by their surface closure."""
import logging
import warnings
from collections import namedtuple

import numpy as np

from ..boxes import Detection, OrientedBox, score_order
from ..closure import FluxField, closure_score, flux_batch
from ..surface import CenterAligned, FirstElementRandomFlip
from ..exceptions import ConfigError, NoSupportWarning

from .config import PipelineConfig

logger = logging.getLogger(__name__)


class Proposal(namedtuple("Proposal", [
        "box", "base_score", "report", "closure_score", "final_score",
        "label"])):
    """A candidate box with its objectness, closure evidence and final score.

    Attributes
    ----------
    box : OrientedBox

    base_score : float in [0, 1]

    report : FluxReport or None
        `None` until the proposal has been scored.

    closure_score : float in (0, 1]

    final_score : float in [0, 1]
        `base_score * closure_score`, or zero without enough support.

    label : int or None
    """
    __slots__ = ()

    def __new__(cls, box, base_score, report=None, closure_score=1.,
                final_score=None, label=None):
        if not isinstance(box, OrientedBox):
            box = OrientedBox(*box)

        base_score = float(base_score)
        if not (0. <= base_score <= 1.):
            raise ConfigError("""`base_score` must lie in [0, 1], got %r."""
                              % base_score)

        if final_score is None:
            final_score = base_score * closure_score

        return super(Proposal, cls).__new__(
            cls, box, base_score, report, float(closure_score),
            float(final_score), label)

    @classmethod
    def from_detection(cls, detection):
        return cls(detection.box, detection.score, label=detection.label)

    @property
    def enclosed_count(self):
        return 0 if self.report is None else self.report.enclosed_count

    def to_detection(self, meters_per_unit=1.):
        record = None
        if self.report is not None:
            record = self.report.to_dict(meters_per_unit=meters_per_unit)
            record["closure_score"] = self.closure_score
            record["base_score"] = self.base_score
        return Detection(self.box, self.final_score, self.label, record)


def as_proposals(candidates):
    """Accept `Proposal`, `Detection` or `OrientedBox` (base score 1)."""
    proposals = []
    for candidate in candidates:
        if isinstance(candidate, Proposal):
            proposals.append(candidate)
        elif isinstance(candidate, Detection):
            proposals.append(Proposal.from_detection(candidate))
        elif isinstance(candidate, OrientedBox):
            proposals.append(Proposal(candidate, 1.))
        else:
            raise TypeError("""Cannot make a proposal from %r."""
                            % (candidate,))
    return proposals


def make_orientation(config):
    if config.orientation == "random_flip":
        return FirstElementRandomFlip(config.orientation_seed)
    return CenterAligned()


def closure_scores(reports, config):
    """Closure weights of flux reports under `config`."""
    if not config.use_closure:
        return np.ones(len(reports))

    if config.use_normalized_flux:
        values = [r.normalized_flux * config.normalized_scale
                  for r in reports]
    else:
        values = [r.abs_flux for r in reports]

    return np.atleast_1d(closure_score(np.asarray(values, dtype=np.float64),
                                       config.gamma))


def rescore_proposals(proposals, elements, config=None, field=None):
    """Weigh proposals by the closure of the surface they enclose.

    Parameters
    ----------
    proposals : sequence of Proposal, Detection or OrientedBox

    elements : SurfaceElements

    config : PipelineConfig, optional

    field : FluxField, optional

    Returns
    -------
    proposals : list of Proposal
        With fresh flux reports, sorted by descending final score (ties by
        input order). Proposals enclosing fewer than `min_support` elements
        have a zero final score.
    """
    config = PipelineConfig() if config is None else config
    field = FluxField() if field is None else field
    proposals = as_proposals(proposals)
    if not proposals:
        return []

    reports = flux_batch(elements, [p.box for p in proposals], field,
                         orientation=make_orientation(config))
    scores = closure_scores(reports, config)

    rescored, n_gated = [], 0
    for proposal, report, score in zip(proposals, reports, scores):
        final = proposal.base_score * score
        if report.enclosed_count < config.min_support:
            final, n_gated = 0., n_gated + 1

        rescored.append(proposal._replace(
            report=report, closure_score=float(score),
            final_score=float(min(1., max(0., final)))))
    # end for

    if n_gated:
        warnings.warn("""%d of %d proposals enclose fewer than %d elements """
                      """and were scored zero.""" % (
                          n_gated, len(proposals), config.min_support),
                      NoSupportWarning)

    logger.debug("rescored %d proposals, %d without support",
                 len(proposals), n_gated)

    order = score_order([p.final_score for p in rescored])
    return [rescored[i] for i in order]
