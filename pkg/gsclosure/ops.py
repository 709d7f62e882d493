"""Compiled kernels for containment and flux quadrature.

Every kernel walks the elements in index order and accumulates with
Neumaier's compensated summation, so per-box results do not depend on
the number of threads used by the batch entry points.
"""
from math import cos, sin

import numpy as np
from numba import njit, prange


ORIENT_CENTER = 0
ORIENT_FIXED = 1


@njit(cache=True)
def _to_box_frame(x, y, z, cx, cy, cz, c, s):
    dx, dy, dz = x - cx, y - cy, z - cz
    return c * dx + s * dy, -s * dx + c * dy, dz


@njit(cache=True)
def _inside(x, y, z, box):
    cx, cy, cz, w, l, h, yaw = box[0], box[1], box[2], \
        box[3], box[4], box[5], box[6]
    c, s = cos(yaw), sin(yaw)
    lx, ly, lz = _to_box_frame(x, y, z, cx, cy, cz, c, s)
    return abs(lx) <= 0.5 * w and abs(ly) <= 0.5 * l and abs(lz) <= 0.5 * h


@njit(cache=True)
def op_contains(points, box):
    """Closed containment mask of `points` (n x 3) in a 7-parameter box."""
    n = points.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        out[i] = _inside(points[i, 0], points[i, 1], points[i, 2], box)
    return out


@njit(cache=True)
def op_flux(positions, normals, areas, field, box, mode, sign):
    """Flux of a constant `field` through the elements inside `box`.

    With `mode == ORIENT_CENTER` every normal is flipped to point away from
    the box center; with `mode == ORIENT_FIXED` the supplied normals are
    used as they are, multiplied by `sign`.

    Returns
    -------
    flux, count, area : float, int, float
    """
    cx, cy, cz = box[0], box[1], box[2]
    tx, ty, tz = field[0], field[1], field[2]

    flux, flux_c = 0., 0.
    area, area_c = 0., 0.
    count = 0
    for i in range(positions.shape[0]):
        x, y, z = positions[i, 0], positions[i, 1], positions[i, 2]
        if not _inside(x, y, z, box):
            continue

        nx, ny, nz = normals[i, 0], normals[i, 1], normals[i, 2]
        if mode == ORIENT_CENTER:
            # the tie (position at the center) keeps the normal unflipped
            if nx * (x - cx) + ny * (y - cy) + nz * (z - cz) < 0:
                nx, ny, nz = -nx, -ny, -nz
        else:
            nx, ny, nz = sign * nx, sign * ny, sign * nz

        a = areas[i]
        term = (tx * nx + ty * ny + tz * nz) * a

        # Neumaier summation
        t = flux + term
        if abs(flux) >= abs(term):
            flux_c += (flux - t) + term
        else:
            flux_c += (term - t) + flux
        flux = t

        t = area + a
        if abs(area) >= abs(a):
            area_c += (area - t) + a
        else:
            area_c += (a - t) + area
        area = t

        count += 1

    return flux + flux_c, count, area + area_c


@njit(parallel=True, cache=True)
def op_flux_batch(positions, normals, areas, field, boxes, mode, signs):
    """Evaluate `op_flux` for every row of `boxes` (k x 7) in parallel."""
    k = boxes.shape[0]
    flux = np.zeros(k, dtype=np.float64)
    count = np.zeros(k, dtype=np.int64)
    area = np.zeros(k, dtype=np.float64)
    for j in prange(k):
        f, c, a = op_flux(positions, normals, areas, field, boxes[j],
                          mode, signs[j])
        flux[j], count[j], area[j] = f, c, a

    return flux, count, area


@njit(cache=True)
def op_compensated_sum(values):
    """Neumaier-compensated sum of a flat array in index order."""
    total, comp = 0., 0.
    for i in range(values.shape[0]):
        v = values[i]
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp
