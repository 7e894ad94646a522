# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused tanh jet kernels over component-first (10, ...) float64 arrays."""
import numpy as np
from libc.math cimport tanh


def tanh_forward(c):
    cdef double[:, ::1] src = np.ascontiguousarray(c, dtype=np.float64).reshape(10, -1)
    out = np.empty((10, src.shape[1]))
    cdef double[:, ::1] dst = out
    cdef Py_ssize_t n = src.shape[1], k
    cdef double t, d1, d2, gx, gy, gt
    with nogil:
        for k in range(n):
            t = tanh(src[0, k])
            d1 = 1.0 - t * t
            d2 = -2.0 * t * d1
            gx = src[1, k]
            gy = src[2, k]
            gt = src[3, k]
            dst[0, k] = t
            dst[1, k] = d1 * gx
            dst[2, k] = d1 * gy
            dst[3, k] = d1 * gt
            dst[4, k] = d1 * src[4, k] + d2 * gx * gx
            dst[5, k] = d1 * src[5, k] + d2 * gx * gy
            dst[6, k] = d1 * src[6, k] + d2 * gx * gt
            dst[7, k] = d1 * src[7, k] + d2 * gy * gy
            dst[8, k] = d1 * src[8, k] + d2 * gy * gt
            dst[9, k] = d1 * src[9, k] + d2 * gt * gt
    return out.reshape(np.shape(c))


def tanh_backward(c, out, gbar):
    shape = np.shape(c)
    cdef double[:, ::1] src = np.ascontiguousarray(c, dtype=np.float64).reshape(10, -1)
    cdef double[:, ::1] o = np.ascontiguousarray(out, dtype=np.float64).reshape(10, -1)
    cdef double[:, ::1] gb = np.ascontiguousarray(gbar, dtype=np.float64).reshape(10, -1)
    res = np.empty((10, src.shape[1]))
    cdef double[:, ::1] r = res
    cdef Py_ssize_t n = src.shape[1], k
    cdef double t, d1, d2, d3, gx, gy, gt
    cdef double hxx, hxy, hxt, hyy, hyt, htt
    with nogil:
        for k in range(n):
            t = o[0, k]
            d1 = 1.0 - t * t
            d2 = -2.0 * t * d1
            d3 = -2.0 * d1 * d1 + 4.0 * t * t * d1
            gx = src[1, k]
            gy = src[2, k]
            gt = src[3, k]
            hxx = gb[4, k]
            hxy = gb[5, k]
            hxt = gb[6, k]
            hyy = gb[7, k]
            hyt = gb[8, k]
            htt = gb[9, k]
            r[0, k] = (gb[0, k] * d1
                       + d2 * (gb[1, k] * gx + gb[2, k] * gy + gb[3, k] * gt)
                       + hxx * (d2 * src[4, k] + d3 * gx * gx)
                       + hxy * (d2 * src[5, k] + d3 * gx * gy)
                       + hxt * (d2 * src[6, k] + d3 * gx * gt)
                       + hyy * (d2 * src[7, k] + d3 * gy * gy)
                       + hyt * (d2 * src[8, k] + d3 * gy * gt)
                       + htt * (d2 * src[9, k] + d3 * gt * gt))
            r[1, k] = gb[1, k] * d1 + d2 * (2.0 * hxx * gx + hxy * gy + hxt * gt)
            r[2, k] = gb[2, k] * d1 + d2 * (hxy * gx + 2.0 * hyy * gy + hyt * gt)
            r[3, k] = gb[3, k] * d1 + d2 * (hxt * gx + hyt * gy + 2.0 * htt * gt)
            r[4, k] = hxx * d1
            r[5, k] = hxy * d1
            r[6, k] = hxt * d1
            r[7, k] = hyy * d1
            r[8, k] = hyt * d1
            r[9, k] = htt * d1
    return res.reshape(shape)
