# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled element kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

from .quadrature import DPHI, PHI, TRI_POINTS, TRI_WEIGHTS

cnp.import_array()

cdef double[:, :, ::1] _DPHI = np.ascontiguousarray(DPHI)
cdef double[:, ::1] _PHI = np.ascontiguousarray(PHI)
cdef double[:, ::1] _LAM = np.ascontiguousarray(TRI_POINTS)
cdef double[::1] _W = np.ascontiguousarray(TRI_WEIGHTS)
cdef int NQ = TRI_WEIGHTS.shape[0]


cdef inline void _gradients(const double[:, :, ::1] grads, Py_ssize_t t, int q,
                            double[:, ::1] g) noexcept nogil:
    cdef int i, k
    for i in range(6):
        g[i, 0] = 0.0
        g[i, 1] = 0.0
        for k in range(3):
            g[i, 0] += _DPHI[q, i, k] * grads[t, k, 0]
            g[i, 1] += _DPHI[q, i, k] * grads[t, k, 1]


def stokes_local(grads_in, area_in):
    cdef const double[:, :, ::1] grads = np.ascontiguousarray(grads_in, dtype=np.float64)
    cdef const double[::1] area = np.ascontiguousarray(area_in, dtype=np.float64)
    cdef Py_ssize_t T = area.shape[0], t
    out_arr = np.zeros((T, 12, 12))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] g = np.zeros((6, 2))
    cdef int q, i, j, a, b
    cdef double wq, dot
    with nogil:
        for t in range(T):
            for q in range(NQ):
                _gradients(grads, t, q, g)
                wq = 2.0 * area[t] * _W[q]
                for i in range(6):
                    for j in range(6):
                        dot = g[i, 0] * g[j, 0] + g[i, 1] * g[j, 1]
                        for a in range(2):
                            out[t, a * 6 + i, a * 6 + j] += wq * dot
                            for b in range(2):
                                out[t, a * 6 + i, b * 6 + j] += wq * g[j, a] * g[i, b]
    return out_arr


def divergence_local(grads_in, area_in):
    cdef const double[:, :, ::1] grads = np.ascontiguousarray(grads_in, dtype=np.float64)
    cdef const double[::1] area = np.ascontiguousarray(area_in, dtype=np.float64)
    cdef Py_ssize_t T = area.shape[0], t
    out_arr = np.zeros((T, 3, 12))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] g = np.zeros((6, 2))
    cdef int q, p, j, b
    cdef double wq
    with nogil:
        for t in range(T):
            for q in range(NQ):
                _gradients(grads, t, q, g)
                wq = area[t] * _W[q]
                for p in range(3):
                    for b in range(2):
                        for j in range(6):
                            out[t, p, b * 6 + j] += wq * _LAM[q, p] * g[j, b]
    return out_arr


def convection_local(grads_in, area_in, wloc_in):
    cdef const double[:, :, ::1] grads = np.ascontiguousarray(grads_in, dtype=np.float64)
    cdef const double[::1] area = np.ascontiguousarray(area_in, dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(wloc_in, dtype=np.float64).reshape(-1, 12)
    cdef Py_ssize_t T = area.shape[0], t
    adv_arr = np.zeros((T, 12, 12))
    react_arr = np.zeros((T, 12, 12))
    cdef double[:, :, ::1] adv = adv_arr
    cdef double[:, :, ::1] react = react_arr
    cdef double[:, ::1] g = np.zeros((6, 2))
    cdef double wval[2]
    cdef double gw[2][2]
    cdef int q, i, j, a, b
    cdef double wq, s, pij
    with nogil:
        for t in range(T):
            for q in range(NQ):
                _gradients(grads, t, q, g)
                wq = area[t] * _W[q]
                for a in range(2):
                    wval[a] = 0.0
                    gw[a][0] = 0.0
                    gw[a][1] = 0.0
                    for i in range(6):
                        wval[a] += _PHI[q, i] * w[t, a * 6 + i]
                        gw[a][0] += w[t, a * 6 + i] * g[i, 0]
                        gw[a][1] += w[t, a * 6 + i] * g[i, 1]
                for i in range(6):
                    for j in range(6):
                        s = wq * _PHI[q, i] * (wval[0] * g[j, 0] + wval[1] * g[j, 1])
                        adv[t, i, j] += s
                        adv[t, 6 + i, 6 + j] += s
                        pij = wq * _PHI[q, i] * _PHI[q, j]
                        for a in range(2):
                            for b in range(2):
                                react[t, a * 6 + i, b * 6 + j] += pij * gw[a][b]
    return adv_arr, react_arr
