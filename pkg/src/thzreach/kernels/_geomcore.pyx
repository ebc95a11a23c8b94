# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels. Must match kernels.pure bit for bit."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

BACKEND_NAME = "compiled"


cdef inline double _dot3(double x0, double x1, double x2,
                         double y0, double y1, double y2) nogil:
    # Same association order as the numpy fallback: ((x+y)+z).
    return x0 * y0 + x1 * y1 + x2 * y2


def segment_occluded(const double[:, ::1] corner, const double[:, ::1] edge_u,
                     const double[:, ::1] edge_v, const double[:, ::1] normal,
                     const double[::1] len2_u, const double[::1] len2_v,
                     const double[::1] inv_len_u, const double[::1] inv_len_v,
                     const double[::1] a, const double[::1] b,
                     double graze_eps, double bounds_eps,
                     const unsigned char[::1] skip):
    cdef Py_ssize_t s = corner.shape[0]
    cdef Py_ssize_t i
    cdef double da, db, t, seg_len, hx, hy, hz, wx, wy, wz, u, v
    cdef double sx = b[0] - a[0]
    cdef double sy = b[1] - a[1]
    cdef double sz = b[2] - a[2]
    seg_len = sqrt(sx * sx + sy * sy + sz * sz)
    for i in range(s):
        if skip[i]:
            continue
        da = _dot3(normal[i, 0], normal[i, 1], normal[i, 2],
                   a[0] - corner[i, 0], a[1] - corner[i, 1], a[2] - corner[i, 2])
        db = _dot3(normal[i, 0], normal[i, 1], normal[i, 2],
                   b[0] - corner[i, 0], b[1] - corner[i, 1], b[2] - corner[i, 2])
        if not (da * db < 0.0):
            continue
        t = da / (da - db)
        if t * seg_len <= graze_eps:
            continue
        if (1.0 - t) * seg_len <= graze_eps:
            continue
        hx = a[0] + t * sx
        hy = a[1] + t * sy
        hz = a[2] + t * sz
        wx = hx - corner[i, 0]
        wy = hy - corner[i, 1]
        wz = hz - corner[i, 2]
        u = _dot3(wx, wy, wz, edge_u[i, 0], edge_u[i, 1], edge_u[i, 2]) / len2_u[i]
        v = _dot3(wx, wy, wz, edge_v[i, 0], edge_v[i, 1], edge_v[i, 2]) / len2_v[i]
        if u < -bounds_eps * inv_len_u[i]:
            continue
        if u > 1.0 + bounds_eps * inv_len_u[i]:
            continue
        if v < -bounds_eps * inv_len_v[i]:
            continue
        if v > 1.0 + bounds_eps * inv_len_v[i]:
            continue
        return True
    return False


def segments_occluded_from(const double[:, ::1] corner, const double[:, ::1] edge_u,
                           const double[:, ::1] edge_v, const double[:, ::1] normal,
                           const double[::1] len2_u, const double[::1] len2_v,
                           const double[::1] inv_len_u, const double[::1] inv_len_v,
                           const double[::1] p, const double[:, ::1] targets,
                           double graze_eps, double bounds_eps):
    cdef Py_ssize_t s = corner.shape[0]
    cdef Py_ssize_t n = targets.shape[0]
    cdef Py_ssize_t i, j
    cdef double da, db, t, seg_len, sx, sy, sz, hx, hy, hz, wx, wy, wz, u, v
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] out_v = out
    for j in range(n):
        sx = targets[j, 0] - p[0]
        sy = targets[j, 1] - p[1]
        sz = targets[j, 2] - p[2]
        seg_len = sqrt(sx * sx + sy * sy + sz * sz)
        for i in range(s):
            da = _dot3(normal[i, 0], normal[i, 1], normal[i, 2],
                       p[0] - corner[i, 0], p[1] - corner[i, 1],
                       p[2] - corner[i, 2])
            db = _dot3(normal[i, 0], normal[i, 1], normal[i, 2],
                       targets[j, 0] - corner[i, 0], targets[j, 1] - corner[i, 1],
                       targets[j, 2] - corner[i, 2])
            if not (da * db < 0.0):
                continue
            t = da / (da - db)
            if t * seg_len <= graze_eps:
                continue
            if (1.0 - t) * seg_len <= graze_eps:
                continue
            hx = p[0] + t * sx
            hy = p[1] + t * sy
            hz = p[2] + t * sz
            wx = hx - corner[i, 0]
            wy = hy - corner[i, 1]
            wz = hz - corner[i, 2]
            u = _dot3(wx, wy, wz, edge_u[i, 0], edge_u[i, 1], edge_u[i, 2]) / len2_u[i]
            v = _dot3(wx, wy, wz, edge_v[i, 0], edge_v[i, 1], edge_v[i, 2]) / len2_v[i]
            if u < -bounds_eps * inv_len_u[i]:
                continue
            if u > 1.0 + bounds_eps * inv_len_u[i]:
                continue
            if v < -bounds_eps * inv_len_v[i]:
                continue
            if v > 1.0 + bounds_eps * inv_len_v[i]:
                continue
            out_v[j] = 1
            break
    return out
