"""Rescore, refine, recompute and suppress: the full post-processing chain."""
import logging

import tqdm

from ..boxes import nms_3d
from ..closure import FluxField

from .config import PipelineConfig
from .rescoring import rescore_proposals, as_proposals
from .refinement import refine_box

logger = logging.getLogger(__name__)


class ClosurePipeline(object):
    """Closure-aware post-processing of candidate boxes.

    Parameters
    ----------
    config : PipelineConfig, optional

    field : FluxField, optional
        Constant test field, `(1, 1, 1) / sqrt(3)` by default.

    verbose : bool (default=False)
        Show progress over the refined proposals.

    Attributes
    ----------
    proposals_ : list of Proposal
        Scored proposals of the last run, before suppression.

    refine_info_ : list of RefineInfo
        One per refined proposal, empty when refinement is off.
    """

    def __init__(self, config=None, field=None, verbose=False):
        self.config = config
        self.field = field
        self.verbose = verbose

    def _check_params(self):
        config = PipelineConfig() if self.config is None else self.config
        field = FluxField() if self.field is None else self.field
        return config.validate(), field

    def rescore(self, elements, candidates):
        config, field = self._check_params()
        return rescore_proposals(candidates, elements, config, field)

    def refine(self, elements, proposals):
        """Refine every supported proposal, then score the new boxes."""
        config, field = self._check_params()

        refined, self.refine_info_ = [], []
        for proposal in tqdm.tqdm(proposals, disable=not self.verbose):
            if proposal.enclosed_count < config.min_support:
                refined.append(proposal)
                continue

            box, info = refine_box(proposal.box, elements, config, field,
                                   return_info=True)
            self.refine_info_.append(info)
            refined.append(proposal._replace(box=box))
        # end for

        return rescore_proposals(refined, elements, config, field)

    def run(self, elements, candidates):
        """Final detections, sorted by descending score.

        Proposals without enough support never reach the output.
        """
        config, field = self._check_params()

        self.refine_info_ = []
        proposals = self.rescore(elements, as_proposals(candidates))
        if config.refine:
            proposals = self.refine(elements, proposals)

        self.proposals_ = proposals
        supported = [p.to_detection(config.meters_per_unit)
                     for p in proposals
                     if p.enclosed_count >= config.min_support]

        detections = nms_3d(supported, config.nms_iou, mode=config.iou_mode)
        logger.info("kept %d of %d candidates (%d supported)",
                    len(detections), len(proposals), len(supported))
        return detections


def run_pipeline(elements, candidates, config=None, field=None,
                 verbose=False):
    """Rescore, optionally refine, recompute closure and apply 3D NMS.

    Parameters
    ----------
    elements : SurfaceElements

    candidates : sequence of Detection
        Base scores are the detection scores.

    config : PipelineConfig, optional

    Returns
    -------
    detections : list of Detection
        Scores are final scores; each carries its closure report.
    """
    return ClosurePipeline(config, field, verbose).run(elements, candidates)
