"""Desk-scale parallel-beam tomographic projector.

Rays are traced through a square pixel grid with the classical
crossing-point method: for each ray the intersection parameters with all
horizontal and vertical gridlines are merged and sorted, and every
resulting segment contributes its length as the weight of the pixel it
traverses.  The image occupies ``[-n/2, n/2]^2`` with unit pixels; each
of the equidistant angles in ``[0, 2*pi)`` gets one detector bin per
pixel column, offset so that axis-aligned rays pass through pixel
centers.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .operators import SparseOperator

_PARALLEL_EPS = 1e-12
_MIN_SEGMENT = 1e-12


def _trace_ray(p0x: float, p0y: float, dx: float, dy: float, n: int):
    """Pixel indices and intersection lengths of one ray through the grid.

    The ray is ``p(t) = p0 + t * (dx, dy)`` with a unit direction vector,
    so parameter differences are Euclidean lengths.
    """
    h = 0.5 * n
    # Slab intersection with the image square.
    t_enter, t_exit = -np.inf, np.inf
    for p, d in ((p0x, dx), (p0y, dy)):
        if abs(d) < _PARALLEL_EPS:
            if not -h <= p <= h:
                return np.empty(0, dtype=np.int64), np.empty(0)
        else:
            t1, t2 = (-h - p) / d, (h - p) / d
            t_enter = max(t_enter, min(t1, t2))
            t_exit = min(t_exit, max(t1, t2))
    if not t_exit - t_enter > _MIN_SEGMENT:
        return np.empty(0, dtype=np.int64), np.empty(0)

    lines = np.arange(n + 1) - h
    ts = [np.array([t_enter, t_exit])]
    for p, d in ((p0x, dx), (p0y, dy)):
        if abs(d) >= _PARALLEL_EPS:
            t = (lines - p) / d
            ts.append(t[(t > t_enter) & (t < t_exit)])
    t_all = np.unique(np.concatenate(ts))

    dt = np.diff(t_all)
    keep = dt > _MIN_SEGMENT
    t_mid = 0.5 * (t_all[:-1] + t_all[1:])[keep]
    cols = np.clip(np.floor(p0x + t_mid * dx + h).astype(np.int64), 0, n - 1)
    rows = np.clip(np.floor(p0y + t_mid * dy + h).astype(np.int64), 0, n - 1)
    return rows * n + cols, dt[keep]


def build_projector(
    n_side: int, n_angles: int | None = None, undersampling: float = 0.2
) -> SparseOperator:
    """Assemble the sparse line-integral matrix.

    Parameters
    ----------
    n_side : int
        Image side length in pixels (>= 4); also the detector count per angle.
    n_angles : int, optional
        Number of view angles.  Defaults to ``round(undersampling * n_side)``
        so that the measurement count is about ``undersampling * n_side**2``.
    undersampling : float
        Target ratio of measurements to unknowns when ``n_angles`` is not given.

    Rays that miss the image produce all-zero rows and are dropped, so the
    returned operator maps strictly positive images to strictly positive data.
    """
    if n_side < 4:
        raise ValueError(f"n_side must be at least 4, got {n_side}")
    if n_angles is None:
        if not 0.0 < undersampling <= 1.0:
            raise ValueError(f"undersampling must be in (0, 1], got {undersampling}")
        n_angles = max(1, round(undersampling * n_side))
    if n_angles < 1:
        raise ValueError(f"n_angles must be positive, got {n_angles}")

    n_det = n_side
    offsets = np.arange(n_det) - 0.5 * (n_det - 1)
    row_idx, col_idx, vals = [], [], []
    for a in range(n_angles):
        theta = 2.0 * np.pi * a / n_angles
        dx, dy = np.cos(theta), np.sin(theta)
        for d, u in enumerate(offsets):
            pix, w = _trace_ray(-u * dy, u * dx, dx, dy, n_side)
            if pix.size:
                row = a * n_det + d
                row_idx.append(np.full(pix.size, row, dtype=np.int64))
                col_idx.append(pix)
                vals.append(w)

    m_full = n_angles * n_det
    a = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(row_idx), np.concatenate(col_idx))),
        shape=(m_full, n_side * n_side),
    ).tocsr()
    nonzero_rows = np.diff(a.indptr) > 0
    return SparseOperator(a[nonzero_rows])
