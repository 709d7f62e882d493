import numpy as np

from gsclosure.plotting import (use_headless_backend, plot_flux_histogram,
                                plot_precision_recall)
from gsclosure.evaluation import FluxHistogram, PRPoint


use_headless_backend()


def test_flux_histogram_figure(tmp_path):
    hist = FluxHistogram(np.linspace(0., 1., 5), np.array([4, 1, 0, 1]),
                         "normalized")
    path = tmp_path / "hist.png"
    fig = plot_flux_histogram([hist, hist], ["a", "b"], max_cols=1,
                              path=str(path))

    assert path.exists()
    assert len(fig.axes) == 2


def test_precision_recall_figure(tmp_path):
    curve = [PRPoint(0.5, 1., 0.9), PRPoint(1., 2. / 3., 0.7)]
    path = tmp_path / "pr.png"
    fig = plot_precision_recall([curve], ["rescored"], path=str(path))

    assert path.exists()
    assert fig.axes[0].get_xlabel() == "recall"
