"""Uniform spatial hash over a rectangular region.

Objects are bucketed in CSR form (``cell_start`` / ``cell_items``) so the
arrays can be handed straight to compiled kernels.
"""

from __future__ import annotations

import math

import numpy as np


class SpatialGrid:
    """Bucket grid of point indices.

    Queries are conservative: they return every point geometrically inside
    the queried shape, possibly with extra points from partially covered
    cells.
    """

    def __init__(self, xs, ys, bounds, cell_size: float = 10.0):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        x0, y0, x1, y1 = (float(b) for b in bounds)
        self.cell_size = float(cell_size)
        self.x0, self.y0 = x0, y0
        self.x1, self.y1 = x1, y1
        self.nx = max(1, int(math.ceil((x1 - x0) / cell_size)))
        self.ny = max(1, int(math.ceil((y1 - y0) / cell_size)))
        ix = np.clip(((xs - x0) // cell_size).astype(np.int64), 0, self.nx - 1)
        iy = np.clip(((ys - y0) // cell_size).astype(np.int64), 0, self.ny - 1)
        cell = iy * self.nx + ix
        order = np.argsort(cell, kind="stable")
        counts = np.bincount(cell, minlength=self.nx * self.ny)
        self.cell_start = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cell_start[1:])
        self.cell_items = order.astype(np.int64)
        for a in (self.cell_start, self.cell_items):
            a.setflags(write=False)
        self._xs, self._ys = xs, ys

    def _cell_range(self, lo: float, hi: float, origin: float, end: float, n: int):
        if hi < origin or lo > end or hi < lo:
            return 0, -1
        a = int(math.floor((lo - origin) / self.cell_size))
        b = int(math.floor((hi - origin) / self.cell_size))
        return min(max(a, 0), n - 1), min(max(b, 0), n - 1)

    def query_box(self, xmin, ymin, xmax, ymax) -> np.ndarray:
        """Indices of points in cells overlapping the box."""
        ia, ib = self._cell_range(xmin, xmax, self.x0, self.x1, self.nx)
        ja, jb = self._cell_range(ymin, ymax, self.y0, self.y1, self.ny)
        out = []
        for j in range(ja, jb + 1):
            for i in range(ia, ib + 1):
                c = j * self.nx + i
                out.append(self.cell_items[self.cell_start[c]:self.cell_start[c + 1]])
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(out))

    def query_annulus(self, center, r_min: float, r_max: float) -> np.ndarray:
        """Indices of points in cells that may intersect the annulus.

        Cells lying entirely inside the inner circle or entirely outside
        the outer circle are skipped.
        """
        cx, cy = float(center[0]), float(center[1])
        r_min = max(float(r_min), 0.0)
        ia, ib = self._cell_range(cx - r_max, cx + r_max, self.x0, self.x1, self.nx)
        ja, jb = self._cell_range(cy - r_max, cy + r_max, self.y0, self.y1, self.ny)
        cs = self.cell_size
        # Slack covers rounding between floor-division binning and cell edges.
        slack = 1e-9 * cs
        out = []
        for j in range(ja, jb + 1):
            ylo = self.y0 + j * cs
            yhi = ylo + cs
            for i in range(ia, ib + 1):
                xlo = self.x0 + i * cs
                xhi = xlo + cs
                nearx = min(max(cx, xlo), xhi) - cx
                neary = min(max(cy, ylo), yhi) - cy
                if math.hypot(nearx, neary) > r_max + slack:
                    continue
                farx = max(abs(cx - xlo), abs(cx - xhi))
                fary = max(abs(cy - ylo), abs(cy - yhi))
                if math.hypot(farx, fary) < r_min - slack:
                    continue
                c = j * self.nx + i
                out.append(self.cell_items[self.cell_start[c]:self.cell_start[c + 1]])
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(out))
