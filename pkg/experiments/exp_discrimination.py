"""Closed objects against open fragments at equal base scores.

Each scene holds 3 closed objects and 3 open fragments; all six boxes are
proposed with the same base score. We record, per scene, whether every
object outranks every fragment after rescoring, and the AP@0.25 of the base
ranking and of the rescored ranking on all scenes pooled side by side.
"""
import warnings

import numpy as np

from tqdm import tqdm
from sklearn.model_selection import ParameterGrid

from gsclosure.boxes import Detection
from gsclosure.synthetic import gen_benchmark_scene
from gsclosure.pipeline import PipelineConfig, rescore_proposals
from gsclosure.evaluation import average_precision
from gsclosure.exceptions import NoSupportWarning
from gsclosure.utils import save

from utils import prepare_output, shift_box, equal_score_candidates

warnings.simplefilter("ignore", NoSupportWarning)

PATH_DATA = prepare_output("discrimination")

random_state = np.random.RandomState(0x0BADCAFE)

grid_scene = ParameterGrid({
    "seed": np.arange(50),
    "n_objects": [3],
    "n_fragments": [3],
    "elements_per_object": [2000],
})

# scenes sit this far apart along x when pooled
POOL_OFFSET = 10.

config = PipelineConfig(gamma=0.5)

results, pooled_base, pooled_rescored, pooled_gt = [], [], [], []
for k, par_scene in enumerate(tqdm(grid_scene)):
    scene = gen_benchmark_scene(**par_scene)
    candidates = equal_score_candidates(scene, 0.5, random_state)

    proposals = rescore_proposals(candidates, scene.elements, config)
    objects = [p.final_score for p in proposals
               if any(p.box == b for b in scene.gt_boxes)]
    fragments = [p.final_score for p in proposals
                 if not any(p.box == b for b in scene.gt_boxes)]

    offset = k * POOL_OFFSET
    pooled_base.extend(Detection(shift_box(c.box, offset), c.score)
                       for c in candidates)
    pooled_rescored.extend(Detection(shift_box(p.box, offset),
                                     p.final_score) for p in proposals)
    pooled_gt.extend(shift_box(b, offset) for b in scene.gt_boxes)

    results.append({"seed": par_scene["seed"],
                    "separated": min(objects) > max(fragments),
                    "object_scores": objects,
                    "fragment_scores": fragments})
# end for

summary = {
    "separated_share": np.mean([r["separated"] for r in results]),
    "ap_base": average_precision(pooled_base, pooled_gt, 0.25),
    "ap_rescored": average_precision(pooled_rescored, pooled_gt, 0.25),
}
print("objects outrank fragments in %.1f%% of scenes"
      % (100 * summary["separated_share"]))
print("AP@0.25 base %.4f, rescored %.4f" % (summary["ap_base"],
                                             summary["ap_rescored"]))

save({"results": results, "summary": summary}, PATH_DATA,
     filename="discrimination", gz=4)
