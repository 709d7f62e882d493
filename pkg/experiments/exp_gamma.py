"""Sweep the closure flexibility `gamma` and the flux mode.

For every setting the pooled AP@0.25 of rescored equal-score candidates is
recorded, together with the mean score gap between objects and fragments.
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

PATH_DATA = prepare_output("gamma")

random_state = np.random.RandomState(0x0BADCAFE)

grid_model = ParameterGrid({
    "gamma": [0.1, 0.25, 0.5, 0.75, 1.],
    "use_normalized_flux": [False, True],
})

scenes = [gen_benchmark_scene(n_objects=3, n_fragments=3, seed=seed,
                              clutter=0.25, elements_per_object=2000)
          for seed in tqdm(range(20), desc="scenes")]
candidates = [equal_score_candidates(scene, 0.5, random_state)
              for scene in scenes]

results = []
for par_mdl in tqdm(grid_model):
    config = PipelineConfig(**par_mdl)

    pooled, pooled_gt, gaps = [], [], []
    for k, (scene, boxes) in enumerate(zip(scenes, candidates)):
        proposals = rescore_proposals(boxes, scene.elements, config)
        is_object = np.array([any(p.box == b for b in scene.gt_boxes)
                              for p in proposals])
        scores = np.array([p.final_score for p in proposals])
        gaps.append(scores[is_object].mean() - scores[~is_object].mean())

        pooled.extend(Detection(shift_box(p.box, 10. * k), p.final_score)
                      for p in proposals)
        pooled_gt.extend(shift_box(b, 10. * k) for b in scene.gt_boxes)
    # end for

    results.append(dict(par_mdl, ap_25=average_precision(pooled, pooled_gt),
                        score_gap=float(np.mean(gaps))))
    print("%r: AP@0.25 %.4f, gap %.4f" % (par_mdl, results[-1]["ap_25"],
                                          results[-1]["score_gap"]))
# end for

save(results, PATH_DATA, filename="gamma", gz=4)
