"""Normalized flux of ground-truth boxes as element noise grows.

The noise stream of `gen_benchmark_scene` is separate from the layout, so a
fixed seed scales one perturbation across the sweep.
"""
import os

import numpy as np

from tqdm import tqdm
from sklearn.model_selection import ParameterGrid

from gsclosure.synthetic import gen_benchmark_scene
from gsclosure.closure import flux_batch
from gsclosure.evaluation import flux_histogram
from gsclosure.plotting import use_headless_backend, plot_flux_histogram
from gsclosure.utils import save

from utils import prepare_output

PATH_DATA = prepare_output("jitter")

grid = ParameterGrid({
    "seed": np.arange(20),
    "jitter": [0., 0.01, 0.03, 0.07],
})

results = []
for par in tqdm(grid):
    scene = gen_benchmark_scene(n_objects=3, elements_per_object=2000,
                                **par)
    for k, report in enumerate(flux_batch(scene.elements, scene.gt_boxes)):
        results.append({"seed": par["seed"], "jitter": par["jitter"],
                        "object": k,
                        "normalized_flux": report.normalized_flux})
    # end for
# end for

jitters = sorted(set(r["jitter"] for r in results))
means = [np.mean([r["normalized_flux"] for r in results
                  if r["jitter"] == j]) for j in jitters]
for jitter, mean in zip(jitters, means):
    print("jitter %.2f: mean normalized flux %.5f" % (jitter, mean))
print("monotone: %s" % bool(np.all(np.diff(means) > 0)))

# histograms of the clean and the noisiest scenes of the first seed
use_headless_backend()
histograms = [
    flux_histogram(scene.elements, scene.gt_boxes, bins=10, range_max=0.5)
    for scene in (gen_benchmark_scene(n_objects=3, seed=0, jitter=j)
                  for j in (jitters[0], jitters[-1]))]
plot_flux_histogram(histograms, ["jitter %g" % j for j in (jitters[0],
                                                           jitters[-1])],
                    path=os.path.join(PATH_DATA, "jitter_hist.png"))

save(results, PATH_DATA, filename="jitter", gz=4)
