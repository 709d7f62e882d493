"""Wall time of batch flux against the thread count.

100 boxes against a million elements; the reports must not depend on the
number of threads.
"""
import time

import numpy as np
import numba

from tqdm import tqdm
from sklearn.model_selection import ParameterGrid

from gsclosure.boxes import OrientedBox
from gsclosure.splat_io import CropBox
from gsclosure.surface import SurfaceElements
from gsclosure.synthetic import add_outliers
from gsclosure.closure import flux_batch
from gsclosure.utils import save

from utils import prepare_output

PATH_DATA = prepare_output("timing")

random_state = np.random.RandomState(0x0BADCAFE)

room = CropBox((0., 0., 0.), (10., 10., 3.))
elements = add_outliers(SurfaceElements.empty(), 10 ** 6, room, seed=0,
                        reference_area=1e-4)
boxes = [OrientedBox(random_state.uniform((1., 1., 0.5), (9., 9., 2.5)),
                     random_state.uniform(0.2, 1.5, size=3),
                     random_state.uniform(-np.pi, np.pi))
         for _ in range(100)]

# compile outside of the timed region
flux_batch(elements.take(np.arange(10)), boxes[:1])

grid = ParameterGrid({
    "threads": sorted(set([1, 2, 4, numba.config.NUMBA_NUM_THREADS])),
    "repeat": np.arange(3),
})

results, reference = [], None
for par in tqdm(grid):
    numba.set_num_threads(int(par["threads"]))
    tic = time.perf_counter()
    reports = flux_batch(elements, boxes)
    toc = time.perf_counter()

    fluxes = np.array([r.flux for r in reports])
    if reference is None:
        reference = fluxes

    results.append({"threads": par["threads"], "seconds": toc - tic,
                    "identical": bool(np.array_equal(fluxes, reference))})
    print("%2d threads: %.3f s" % (par["threads"], toc - tic))
# end for

save(results, PATH_DATA, filename="timing", gz=4)
