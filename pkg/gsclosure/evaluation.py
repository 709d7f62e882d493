"""Class-agnostic detection metrics and flux statistics."""
import logging
from collections import namedtuple

import numpy as np

from .boxes import Detection, OrientedBox, iou_matrix, score_order, wrap_angle
from .closure import FluxField, flux_batch
from .exceptions import ConfigError
from .utils import rows_to_csv

logger = logging.getLogger(__name__)


IOU_THRESHOLDS = (0.25, 0.5)

FLUX_UNITS = ("scene2", "dm2", "normalized")


PRPoint = namedtuple("PRPoint", ["recall", "precision", "score_threshold"])


def _as_detections(items):
    return [item if isinstance(item, Detection) else Detection(item, 1.)
            for item in items]


def match_detections(detections, gt_boxes, iou_threshold=0.25, mode="yaw"):
    """Greedy matching in descending score order.

    Each detection takes the unmatched ground-truth box with the highest IoU,
    if that IoU reaches `iou_threshold`.

    Returns
    -------
    order : int array
        Detection indices by descending score, ties by lower index.

    is_tp : bool array
        Whether the detection at each rank is a true positive.

    n_matched : int
    """
    detections = _as_detections(detections)
    order = score_order([d.score for d in detections])
    is_tp = np.zeros(len(order), dtype=bool)
    if not detections or not gt_boxes:
        return order, is_tp, 0

    iou = iou_matrix([d.box for d in detections], list(gt_boxes), mode=mode)
    matched = np.zeros(len(gt_boxes), dtype=bool)
    for rank, index in enumerate(order):
        overlaps = np.where(matched, -1., iou[index])
        best = int(np.argmax(overlaps))
        if overlaps[best] >= iou_threshold:
            matched[best] = is_tp[rank] = True
    # end for

    return order, is_tp, int(matched.sum())


def precision_recall_curve(detections, gt_boxes, iou_threshold=0.25,
                           mode="yaw"):
    """One `PRPoint` per detection, in descending score order."""
    detections = _as_detections(detections)
    order, is_tp, _ = match_detections(detections, gt_boxes, iou_threshold,
                                       mode)
    if len(order) == 0:
        return []

    tp = np.cumsum(is_tp)
    fp = np.cumsum(~is_tp)
    n_gt = max(1, len(gt_boxes))
    recall = tp / float(n_gt) if gt_boxes else np.zeros(len(tp))
    precision = tp / np.maximum(tp + fp, 1.)

    return [PRPoint(float(r), float(p), detections[i].score)
            for r, p, i in zip(recall, precision, order)]


def average_precision(detections, gt_boxes, iou_threshold=0.25, mode="yaw"):
    """All-point interpolated area under the precision-recall curve.

    With no ground truth the AP is 0 when there are detections and 1 when
    there are none.
    """
    if not gt_boxes:
        return 0. if len(detections) else 1.

    curve = precision_recall_curve(detections, gt_boxes, iou_threshold, mode)
    if not curve:
        return 0.

    recall = np.r_[0., [p.recall for p in curve], 1.]
    precision = np.r_[0., [p.precision for p in curve], 0.]

    # precision envelope, non-increasing in recall
    precision = np.maximum.accumulate(precision[::-1])[::-1]

    steps = np.flatnonzero(recall[1:] != recall[:-1])
    return float(np.sum((recall[steps + 1] - recall[steps])
                        * precision[steps + 1]))


def average_recall(proposals, gt_boxes, iou_threshold=0.25, mode="yaw"):
    """Share of ground-truth boxes matched by a proposal; 1 without any."""
    if not gt_boxes:
        return 1.

    _, _, n_matched = match_detections(proposals, gt_boxes, iou_threshold,
                                       mode)
    return n_matched / float(len(gt_boxes))


def l2_box_loss(pred, gt):
    """Squared L2 distance of the 7-parameter box vectors, yaw wrapped."""
    diff = pred.vector - gt.vector
    diff[6] = wrap_angle(diff[6])
    return float(np.dot(diff, diff))


def evaluate_detections(detections, gt_boxes, mode="yaw"):
    """The metrics report: AP and AR at IoU 0.25 and 0.5, and the counts."""
    gt_boxes = list(gt_boxes)
    report = {"num_gt": len(gt_boxes), "num_det": len(detections)}
    for threshold in IOU_THRESHOLDS:
        suffix = "%d" % round(100 * threshold)
        report["ap_" + suffix] = average_precision(detections, gt_boxes,
                                                   threshold, mode)
        report["ar_" + suffix] = average_recall(detections, gt_boxes,
                                                threshold, mode)

    logger.info("evaluated %d detections against %d boxes: AP25 %.4f",
                len(detections), len(gt_boxes), report["ap_25"])
    return report


class FluxHistogram(namedtuple("FluxHistogram", [
        "bin_edges", "counts", "unit"])):
    """Counts of per-box absolute flux in `len(counts)` bins."""
    __slots__ = ()

    @property
    def total(self):
        return int(np.sum(self.counts))

    def fraction_in_first_bin(self):
        return self.counts[0] / float(self.total) if self.total else 0.

    def to_csv(self):
        """Rows `edge,count`, one per bin with its left edge."""
        return rows_to_csv(("edge", "count"), [
            (float(edge), int(count))
            for edge, count in zip(self.bin_edges[:-1], self.counts)])

    def to_dict(self):
        return {"bin_edges": list(map(float, self.bin_edges)),
                "counts": list(map(int, self.counts)), "unit": self.unit}


def flux_values(reports, unit="normalized", meters_per_unit=1.):
    if unit not in FLUX_UNITS:
        raise ConfigError("""Unknown flux unit `%s`.""" % unit)

    if unit == "normalized":
        return np.array([r.normalized_flux for r in reports])
    if unit == "dm2":
        return np.array([abs(r.flux_dm2(meters_per_unit)) for r in reports])
    return np.array([r.abs_flux for r in reports])


def flux_histogram(elements, boxes, bins=10, unit="normalized",
                   range_max=None, field=None, orientation=None,
                   meters_per_unit=1.):
    """Histogram of the absolute flux of each box.

    Parameters
    ----------
    elements : SurfaceElements

    boxes : sequence of OrientedBox or Detection

    bins : int (default=10)

    unit : {"scene2", "dm2", "normalized"} (default="normalized")

    range_max : float, optional
        Upper edge of the last bin; values above it are counted in the last
        bin. Defaults to the largest value (or 1 if all values are zero).

    Returns
    -------
    histogram : FluxHistogram
        Its counts sum to the number of boxes.
    """
    if int(bins) != bins or bins < 1:
        raise ConfigError("""`bins` must be a positive integer.""")

    boxes = [b.box if isinstance(b, Detection) else b for b in boxes]
    assert all(isinstance(b, OrientedBox) for b in boxes), \
        """`boxes` must be oriented boxes or detections."""

    if unit not in FLUX_UNITS:
        raise ConfigError("""Unknown flux unit `%s`.""" % unit)

    reports = flux_batch(elements, boxes, field or FluxField(), orientation)
    values = flux_values(reports, unit, meters_per_unit)

    upper = range_max
    if upper is None:
        upper = float(values.max()) if len(values) else 0.
    if upper <= 0:
        upper = 1.

    edges = np.linspace(0., upper, int(bins) + 1)
    counts, _ = np.histogram(np.minimum(values, upper), bins=edges)
    return FluxHistogram(edges, counts.astype(np.int64), unit)
