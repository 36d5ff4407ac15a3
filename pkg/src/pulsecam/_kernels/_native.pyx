# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror ``_fallback`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor


cdef inline double _bilinear(double[:, ::1] img, double u, double v) nogil:
    cdef Py_ssize_t x0 = <Py_ssize_t>floor(u)
    cdef Py_ssize_t y0 = <Py_ssize_t>floor(v)
    cdef double fx = u - x0
    cdef double fy = v - y0
    return (img[y0, x0] * (1.0 - fx) * (1.0 - fy)
            + img[y0, x0 + 1] * fx * (1.0 - fy)
            + img[y0 + 1, x0] * (1.0 - fx) * fy
            + img[y0 + 1, x0 + 1] * fx * fy)


cdef inline bint _window_ok(double u, double v, int half, Py_ssize_t w, Py_ssize_t h) nogil:
    return (u - half >= 0.0) and (v - half >= 0.0) and (u + half < w - 1) and (v + half < h - 1)


def roi_means(double[:, ::1] frame, double[:, :, ::1] quads):
    """Mean of pixels whose centers fall inside each convex quad."""
    cdef Py_ssize_t h = frame.shape[0]
    cdef Py_ssize_t w = frame.shape[1]
    cdef Py_ssize_t n = quads.shape[0]
    means_arr = np.zeros(n, dtype=np.float64)
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] means = means_arr
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t k, e, ix, iy, ix0, ix1, iy0, iy1
    cdef double area2, orient, xmin, xmax, ymin, ymax
    cdef double x1, y1, x2, y2, cx, cy, cross, s
    cdef long long c
    cdef bint inside
    with nogil:
        for k in range(n):
            area2 = 0.0
            for e in range(4):
                x1 = quads[k, e, 0]
                y1 = quads[k, e, 1]
                x2 = quads[k, (e + 1) % 4, 0]
                y2 = quads[k, (e + 1) % 4, 1]
                area2 += x1 * y2 - x2 * y1
            if area2 == 0.0:
                continue
            orient = 1.0 if area2 > 0.0 else -1.0
            xmin = quads[k, 0, 0]
            xmax = xmin
            ymin = quads[k, 0, 1]
            ymax = ymin
            for e in range(1, 4):
                if quads[k, e, 0] < xmin:
                    xmin = quads[k, e, 0]
                if quads[k, e, 0] > xmax:
                    xmax = quads[k, e, 0]
                if quads[k, e, 1] < ymin:
                    ymin = quads[k, e, 1]
                if quads[k, e, 1] > ymax:
                    ymax = quads[k, e, 1]
            ix0 = <Py_ssize_t>floor(xmin - 0.5)
            ix1 = <Py_ssize_t>ceil(xmax - 0.5)
            iy0 = <Py_ssize_t>floor(ymin - 0.5)
            iy1 = <Py_ssize_t>ceil(ymax - 0.5)
            if ix0 < 0:
                ix0 = 0
            if iy0 < 0:
                iy0 = 0
            if ix1 > w - 1:
                ix1 = w - 1
            if iy1 > h - 1:
                iy1 = h - 1
            s = 0.0
            c = 0
            for iy in range(iy0, iy1 + 1):
                cy = iy + 0.5
                for ix in range(ix0, ix1 + 1):
                    cx = ix + 0.5
                    inside = True
                    for e in range(4):
                        x1 = quads[k, e, 0]
                        y1 = quads[k, e, 1]
                        x2 = quads[k, (e + 1) % 4, 0]
                        y2 = quads[k, (e + 1) % 4, 1]
                        cross = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
                        if cross * orient < 0.0:
                            inside = False
                            break
                    if inside:
                        s += frame[iy, ix]
                        c += 1
            counts[k] = c
            if c > 0:
                means[k] = s / c
    return means_arr, counts_arr


def lk_level(double[:, ::1] prev, double[:, ::1] nxt,
             double[:, ::1] gx, double[:, ::1] gy,
             double[:, ::1] pts, double[:, ::1] guess,
             unsigned char[::1] alive, int half, int max_iters, double eps,
             bint final):
    """One pyramid level of iterative Lucas-Kanade, updating in place.

    Kill rules (window out of bounds, singular gradients, non-convergence)
    apply only on the final level; coarser levels skip instead.
    """
    cdef Py_ssize_t h = prev.shape[0]
    cdef Py_ssize_t w = prev.shape[1]
    cdef Py_ssize_t n = pts.shape[0]
    cdef int win = 2 * half + 1
    t_arr = np.empty(win * win, dtype=np.float64)
    gxa_arr = np.empty(win * win, dtype=np.float64)
    gya_arr = np.empty(win * win, dtype=np.float64)
    cdef double[::1] t = t_arr
    cdef double[::1] gxa = gxa_arr
    cdef double[::1] gya = gya_arr
    cdef Py_ssize_t i, j, dx, dy
    cdef int it
    cdef double u0, v0, u1, v1, gxx, gxy, gyy, det, bx, by, ddx, ddy, diff
    cdef bint converged
    with nogil:
        for i in range(n):
            if not alive[i]:
                continue
            u0 = pts[i, 0] - 0.5
            v0 = pts[i, 1] - 0.5
            if not _window_ok(u0, v0, half, w, h):
                if final:
                    alive[i] = 0
                continue
            j = 0
            gxx = 0.0
            gxy = 0.0
            gyy = 0.0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    t[j] = _bilinear(prev, u0 + dx, v0 + dy)
                    gxa[j] = _bilinear(gx, u0 + dx, v0 + dy)
                    gya[j] = _bilinear(gy, u0 + dx, v0 + dy)
                    gxx += gxa[j] * gxa[j]
                    gxy += gxa[j] * gya[j]
                    gyy += gya[j] * gya[j]
                    j += 1
            det = gxx * gyy - gxy * gxy
            if det < 1e-12:
                if final:
                    alive[i] = 0
                continue
            converged = False
            for it in range(max_iters):
                u1 = guess[i, 0] - 0.5
                v1 = guess[i, 1] - 0.5
                if not _window_ok(u1, v1, half, w, h):
                    if final:
                        alive[i] = 0
                    break
                bx = 0.0
                by = 0.0
                j = 0
                for dy in range(-half, half + 1):
                    for dx in range(-half, half + 1):
                        diff = t[j] - _bilinear(nxt, u1 + dx, v1 + dy)
                        bx += diff * gxa[j]
                        by += diff * gya[j]
                        j += 1
                ddx = (gyy * bx - gxy * by) / det
                ddy = (gxx * by - gxy * bx) / det
                guess[i, 0] += ddx
                guess[i, 1] += ddy
                if ddx * ddx + ddy * ddy < eps * eps:
                    converged = True
                    break
            if final and alive[i] and not converged:
                alive[i] = 0
