# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: dominance filtering and exact 2-D/3-D hypervolume.

Mirrors the contracts of ``_fallback.py``; inputs are float64 matrices
oriented to maximization.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "native"


def nondominated_mask(object points):
    pts_arr = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] pts = pts_arr
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t m = pts.shape[1]
    mask_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] mask = mask_arr
    cdef Py_ssize_t i, j, k
    cdef bint ge_all, gt_any
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ge_all = True
            gt_any = False
            for k in range(m):
                if pts[j, k] < pts[i, k]:
                    ge_all = False
                    break
                if pts[j, k] > pts[i, k]:
                    gt_any = True
            if ge_all and gt_any:
                mask[i] = 0
                break
    return mask_arr.astype(bool)


def hv2d(object gains):
    g_arr = np.ascontiguousarray(gains, dtype=np.float64)
    cdef Py_ssize_t n = g_arr.shape[0]
    if n == 0:
        return 0.0
    order = np.lexsort((-g_arr[:, 1], -g_arr[:, 0]))
    g_arr = np.ascontiguousarray(g_arr[order])
    cdef double[:, ::1] g = g_arr
    cdef double total = 0.0
    cdef double best_y = 0.0
    cdef double x_next
    cdef Py_ssize_t k
    for k in range(n):
        x_next = g[k + 1, 0] if k + 1 < n else 0.0
        if g[k, 1] > best_y:
            best_y = g[k, 1]
        total += (g[k, 0] - x_next) * best_y
    return float(total)


cdef double _staircase_area(double[:, ::1] g, Py_ssize_t upto, double[::1] buf_x, double[::1] buf_y):
    """Area of the union of 2-D boxes [0, g[i, :2]] over i < upto.

    ``g`` rows are already sorted by descending x (then descending y), so a
    single pass with a running y-max integrates the envelope.
    """
    cdef double total = 0.0
    cdef double best_y = 0.0
    cdef double x_next
    cdef Py_ssize_t k
    for k in range(upto):
        x_next = buf_x[k + 1] if k + 1 < upto else 0.0
        if buf_y[k] > best_y:
            best_y = buf_y[k]
        total += (buf_x[k] - x_next) * best_y
    return total


def hv3d(object gains):
    g_arr = np.ascontiguousarray(gains, dtype=np.float64)
    cdef Py_ssize_t n = g_arr.shape[0]
    if n == 0:
        return 0.0
    order = np.lexsort((-g_arr[:, 1], -g_arr[:, 0], -g_arr[:, 2]))
    g_arr = np.ascontiguousarray(g_arr[order])
    cdef double[:, ::1] g = g_arr
    cdef double total = 0.0
    cdef double z_hi, z_lo
    cdef Py_ssize_t k, i, j, cnt
    # prefix re-sorted by x desc for the 2-D staircase at each slab
    x_buf_arr = np.empty(n, dtype=np.float64)
    y_buf_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x_buf = x_buf_arr
    cdef double[::1] y_buf = y_buf_arr
    cdef double xv, yv
    for k in range(n):
        z_hi = g[k, 2]
        z_lo = g[k + 1, 2] if k + 1 < n else 0.0
        # insert point k into the x-desc sorted prefix buffers
        xv = g[k, 0]
        yv = g[k, 1]
        i = k
        while i > 0 and (x_buf[i - 1] < xv or (x_buf[i - 1] == xv and y_buf[i - 1] < yv)):
            x_buf[i] = x_buf[i - 1]
            y_buf[i] = y_buf[i - 1]
            i -= 1
        x_buf[i] = xv
        y_buf[i] = yv
        if z_hi > z_lo:
            total += (z_hi - z_lo) * _staircase_area(g, k + 1, x_buf, y_buf)
    return float(total)
