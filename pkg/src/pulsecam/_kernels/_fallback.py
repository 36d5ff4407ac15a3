"""Pure-numpy reference implementations of the hot kernels.

Semantics are kept identical to the compiled versions in ``_native.pyx``:
pixel (row j, col i) occupies the unit cell [i, i+1) x [j, j+1) with its
center at (i + 0.5, j + 0.5), and bilinear sampling happens in index space
(index = cell coordinate - 0.5).
"""

import numpy as np


def roi_means(frame, quads):
    """Mean intensity of pixels whose centers fall inside each convex quad.

    Parameters
    ----------
    frame : float64 array (H, W)
    quads : float64 array (N, 4, 2), corner coordinates in cell space

    Returns
    -------
    means : float64 array (N,), 0.0 where no pixel is covered
    counts : int64 array (N,), number of covered pixels
    """
    frame = np.asarray(frame, dtype=np.float64)
    quads = np.asarray(quads, dtype=np.float64)
    h, w = frame.shape
    n = quads.shape[0]
    means = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    for k in range(n):
        q = quads[k]
        # orientation via shoelace; zero area means a degenerate quad
        area2 = 0.0
        for e in range(4):
            x1, y1 = q[e]
            x2, y2 = q[(e + 1) % 4]
            area2 += x1 * y2 - x2 * y1
        if area2 == 0.0:
            continue
        orient = 1.0 if area2 > 0.0 else -1.0
        ix0 = max(0, int(np.floor(q[:, 0].min() - 0.5)))
        ix1 = min(w - 1, int(np.ceil(q[:, 0].max() - 0.5)))
        iy0 = max(0, int(np.floor(q[:, 1].min() - 0.5)))
        iy1 = min(h - 1, int(np.ceil(q[:, 1].max() - 0.5)))
        if ix1 < ix0 or iy1 < iy0:
            continue
        cx = np.arange(ix0, ix1 + 1) + 0.5
        cy = np.arange(iy0, iy1 + 1) + 0.5
        gx, gy = np.meshgrid(cx, cy)
        inside = np.ones(gx.shape, dtype=bool)
        for e in range(4):
            x1, y1 = q[e]
            x2, y2 = q[(e + 1) % 4]
            cross = (x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)
            inside &= cross * orient >= 0.0
        c = int(inside.sum())
        counts[k] = c
        if c:
            means[k] = frame[iy0 : iy1 + 1, ix0 : ix1 + 1][inside].sum() / c
    return means, counts


def _window_ok(u, v, half, w, h):
    return (u - half >= 0.0) and (v - half >= 0.0) and (u + half < w - 1) and (v + half < h - 1)


def _patch(img, u, v, half):
    # all window samples share one fractional offset, so a weighted blend of
    # four integer-aligned slices reproduces per-sample bilinear interpolation
    x0 = int(np.floor(u))
    y0 = int(np.floor(v))
    fx = u - x0
    fy = v - y0
    a = img[y0 - half : y0 + half + 1, x0 - half : x0 + half + 1]
    b = img[y0 - half : y0 + half + 1, x0 - half + 1 : x0 + half + 2]
    c = img[y0 - half + 1 : y0 + half + 2, x0 - half : x0 + half + 1]
    d = img[y0 - half + 1 : y0 + half + 2, x0 - half + 1 : x0 + half + 2]
    return (1 - fx) * (1 - fy) * a + fx * (1 - fy) * b + (1 - fx) * fy * c + fx * fy * d


def lk_level(prev, nxt, gx, gy, pts, guess, alive, half, max_iters, eps, final):
    """One pyramid level of iterative Lucas-Kanade, updating in place.

    ``pts`` are template positions in ``prev`` and ``guess`` the current
    position estimates in ``nxt``, both in cell coordinates at this level.
    On the final (full-resolution) level, points whose window leaves the
    image, whose gradient matrix is singular, or which fail to converge are
    marked dead; coarser levels just leave the guess untouched, since the
    window may legitimately not fit there.
    """
    h, w = prev.shape
    n = pts.shape[0]
    for i in range(n):
        if not alive[i]:
            continue
        u0 = pts[i, 0] - 0.5
        v0 = pts[i, 1] - 0.5
        if not _window_ok(u0, v0, half, w, h):
            if final:
                alive[i] = 0
            continue
        t = _patch(prev, u0, v0, half)
        gxa = _patch(gx, u0, v0, half)
        gya = _patch(gy, u0, v0, half)
        gxx = float((gxa * gxa).sum())
        gxy = float((gxa * gya).sum())
        gyy = float((gya * gya).sum())
        det = gxx * gyy - gxy * gxy
        if det < 1e-12:
            if final:
                alive[i] = 0
            continue
        converged = False
        for _ in range(max_iters):
            u1 = guess[i, 0] - 0.5
            v1 = guess[i, 1] - 0.5
            if not _window_ok(u1, v1, half, w, h):
                if final:
                    alive[i] = 0
                break
            p = _patch(nxt, u1, v1, half)
            diff = t - p
            bx = float((diff * gxa).sum())
            by = float((diff * gya).sum())
            ddx = (gyy * bx - gxy * by) / det
            ddy = (gxx * by - gxy * bx) / det
            guess[i, 0] += ddx
            guess[i, 1] += ddy
            if ddx * ddx + ddy * ddy < eps * eps:
                converged = True
                break
        if final and alive[i] and not converged:
            alive[i] = 0
