"""Matplotlib figures of flux histograms and precision-recall curves."""
import numpy as np
import matplotlib
import matplotlib.pyplot as plt

UNIT_LABELS = {"scene2": "|flux| (scene units$^2$)",
               "dm2": "|flux| (dm$^2$)",
               "normalized": "|flux| / area"}


def _grid(n_plots, fig_size, max_cols):
    if not isinstance(max_cols, int):
        n_rows, n_cols = 1, n_plots
    else:
        n_cols = min(max_cols, n_plots)
        n_rows = (n_plots + n_cols - 1) // n_cols

    fig = plt.figure(figsize=(fig_size * n_cols, fig_size * n_rows))
    return fig, n_rows, n_cols


def _finish(fig, path, show):
    fig.tight_layout()
    if path is not None:
        fig.savefig(path)
    if show:
        plt.show()
    plt.close(fig)
    return fig


def plot_flux_histogram(histograms, titles, fig_size=4, max_cols=None,
                        path=None, show=False, **kwargs):
    """Bar plots of one or more `FluxHistogram`s, one panel each."""
    assert len(histograms) == len(titles), \
        """One title per histogram is required."""

    fig, n_rows, n_cols = _grid(len(histograms), fig_size, max_cols)

    # remove potentially troublesome arguments
    kwargs.pop("xlabel", None)
    kwargs.pop("title", None)

    for i, (hist, title) in enumerate(zip(histograms, titles)):
        ax = fig.add_subplot(n_rows, n_cols, i + 1, title=title,
                             xlabel=UNIT_LABELS.get(hist.unit, hist.unit),
                             ylabel="boxes", **kwargs)
        edges = np.asarray(hist.bin_edges)
        ax.bar(edges[:-1], hist.counts, width=np.diff(edges), align="edge",
               color="red", edgecolor="black")

    return _finish(fig, path, show)


def plot_precision_recall(curves, labels, fig_size=4, path=None, show=False):
    """Precision against recall for lists of `PRPoint`s on shared axes."""
    assert len(curves) == len(labels), \
        """One label per curve is required."""

    fig = plt.figure(figsize=(fig_size, fig_size))
    ax = fig.add_subplot(111, xlabel="recall", ylabel="precision",
                         xlim=(0, 1), ylim=(0, 1.05))
    for curve, label in zip(curves, labels):
        recall = [0.] + [p.recall for p in curve]
        precision = [1.] + [p.precision for p in curve]
        ax.step(recall, precision, where="post", linewidth=2, label=label)

    ax.legend(loc="lower left")
    return _finish(fig, path, show)


def use_headless_backend():
    """Select the non-interactive Agg backend for file output."""
    matplotlib.use("Agg")
