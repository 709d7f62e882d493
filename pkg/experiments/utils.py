"""Various utility functions to help with experimentation."""
import os
import time

import numpy as np

from gsclosure.boxes import OrientedBox, Detection


PATH_DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def prepare_output(name):
    """Path of the results archive `name`; an older archive is moved aside
    into `data/archive` with a timestamp."""
    path_archive = os.path.join(PATH_DATA, "archive")
    if not os.path.isdir(path_archive):
        os.makedirs(path_archive)

    filename = os.path.join(PATH_DATA, name + ".gz")
    if os.path.exists(filename):
        mdttm = time.strftime("%Y%m%d_%H%M%S")
        os.rename(filename, os.path.join(path_archive, "%s%s.gz"
                                         % (mdttm, name)))

    return PATH_DATA


def shift_box(box, offset):
    """The same box moved by `offset` along x, to pool scenes side by side."""
    return OrientedBox(np.add(box.center, (offset, 0., 0.)), box.size,
                       box.yaw)


def equal_score_candidates(scene, score, random_state):
    """Ground-truth and fragment boxes with one base score, shuffled."""
    boxes = list(scene.gt_boxes) + list(scene.fragment_boxes)
    order = random_state.permutation(len(boxes))
    return [Detection(boxes[i], score) for i in order]


def translate_by_radius(box, fraction, random_state):
    """Move `box` by `fraction` of its half-diagonal in a random horizontal
    direction."""
    radius = 0.5 * np.linalg.norm(box.size)
    angle = random_state.uniform(-np.pi, np.pi)
    step = fraction * radius * np.array([np.cos(angle), np.sin(angle), 0.])
    return OrientedBox(np.add(box.center, step), box.size, box.yaw)
