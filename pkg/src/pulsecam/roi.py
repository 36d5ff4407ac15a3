"""Block partitioning of planar regions and per-block intensity traces.

Pixel membership is pixel-center-in-quad: pixel (row j, col i) covers the
unit cell [i, i+1) x [j, j+1) and belongs to a quad when its center
(i + 0.5, j + 0.5) lies inside or on the boundary.  Evaluated per frame on
the warped quad; no resampling, so the rule is exact and deterministic.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels

DEFAULT_BLOCK = 20


@dataclass
class Roi:
    roi_id: str
    region_label: str
    quad: np.ndarray  # (4, 2) corners, counter-clockwise
    block_size: float


@dataclass
class RoiGrid:
    rois: list

    def __len__(self):
        return len(self.rois)

    def quads(self):
        if not self.rois:
            return np.zeros((0, 4, 2))
        return np.stack([r.quad for r in self.rois])

    def ids(self):
        return [r.roi_id for r in self.rois]


def points_in_polygon(points, polygon):
    """Boundary-inclusive even-odd test for points against a simple polygon.

    points: (n, 2); polygon: (m, 2), m >= 3.  Returns a boolean array.
    """
    pts = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polygon, dtype=np.float64)
    px = pts[:, 0]
    py = pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    scale = max(1.0, float(np.abs(poly).max()))
    tol = 1e-9 * scale
    m = len(poly)
    for e in range(m):
        x1, y1 = poly[e]
        x2, y2 = poly[(e + 1) % m]
        # on-segment check
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        dot = (px - x1) * (x2 - x1) + (py - y1) * (y2 - y1)
        seg2 = (x2 - x1) ** 2 + (y2 - y1) ** 2
        on_edge |= (np.abs(cross) <= tol * max(1.0, np.sqrt(seg2))) & (dot >= -tol) & (dot <= seg2 + tol)
        # ray casting, half-open in y to count shared vertices once
        crosses = (y1 > py) != (y2 > py)
        if np.any(crosses):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < xint)
    return inside | on_edge


def grid_regions(regions, block=DEFAULT_BLOCK):
    """Tile each region polygon with axis-aligned blocks fully inside it.

    ``regions`` maps label -> polygon.  Tiling is anchored at the polygon's
    bounding-box minimum corner; candidate blocks keep all four corners
    inside (or on) the polygon, others are discarded.  A region too small to
    hold one block yields zero blocks and a warning.
    """
    if block < 4:
        raise ValueError("block size must be at least 4 px")
    rois = []
    for label, poly in regions.items():
        poly = np.asarray(poly, dtype=np.float64)
        x0, y0 = poly.min(axis=0)
        x1, y1 = poly.max(axis=0)
        nx = int(np.floor((x1 - x0) / block + 1e-9))
        ny = int(np.floor((y1 - y0) / block + 1e-9))
        added = 0
        for j in range(ny):
            for i in range(nx):
                bx = x0 + i * block
                by = y0 + j * block
                corners = np.array(
                    [[bx, by], [bx + block, by], [bx + block, by + block], [bx, by + block]]
                )
                if points_in_polygon(corners, poly).all():
                    rois.append(
                        Roi(
                            roi_id=f"{label}/{j}-{i}",
                            region_label=label,
                            quad=corners,
                            block_size=block,
                        )
                    )
                    added += 1
        if added == 0:
            warnings.warn(f"region {label!r} too small for a {block}x{block} block", stacklevel=2)
    return RoiGrid(rois=rois)


def average_quads(frame, quads):
    """Mean intensity per quad; invalid (False) where no pixel is covered."""
    frame = np.ascontiguousarray(frame, dtype=np.float64)
    quads = np.ascontiguousarray(quads, dtype=np.float64)
    means, counts = _kernels.roi_means(frame, quads)
    return means, counts > 0


def average_roi(seq, quad, t):
    """Spatial average of one (possibly warped) quad in frame ``t``.

    Returns (value, valid); valid is False when the quad covers no pixel
    center, e.g. after drifting outside the frame.
    """
    means, valid = average_quads(seq.pixels[t], np.asarray(quad, dtype=np.float64)[None])
    return float(means[0]), bool(valid[0])
