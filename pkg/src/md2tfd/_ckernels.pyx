# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the pair-sum and reduced-system kernels.

Same signatures and results as md2tfd._kernels_py; the pair sums fuse the
three contractions into one pass over the mode axis.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


def pair_sums(Z, w, c):
    cdef double[:, ::1] zr = np.ascontiguousarray(Z.real, dtype=np.float64)
    cdef double[:, ::1] zi = np.ascontiguousarray(Z.imag, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t M = zr.shape[0], K = zr.shape[1]
    Q = np.empty((M, M), dtype=np.complex128)
    E = np.empty((M, M), dtype=np.complex128)
    y = np.empty(M, dtype=np.complex128)
    cdef cplx[:, ::1] q = Q
    cdef cplx[:, ::1] e = E
    cdef cplx[::1] yv = y
    cdef Py_ssize_t i, j, n
    # real arithmetic throughout: C complex multiply goes through a slow
    # inf/nan-aware helper
    cdef double qr, qi, er, ei, yr, yi, pr, pi
    for i in range(M):
        yr = 0.0
        yi = 0.0
        for n in range(K):
            yr += cv[n] * zr[i, n]
            yi += cv[n] * zi[i, n]
        yv[i].real = yr
        yv[i].imag = yi
    for j in range(M):
        for i in range(j, M):
            qr = 0.0
            qi = 0.0
            er = 0.0
            ei = 0.0
            for n in range(K):
                pr = zr[j, n] * zr[i, n] + zi[j, n] * zi[i, n]
                pi = zr[j, n] * zi[i, n] - zi[j, n] * zr[i, n]
                qr += pr
                qi += pi
                er += wv[n] * pr
                ei += wv[n] * pi
            q[j, i].real = qr
            q[j, i].imag = qi
            e[j, i].real = er
            e[j, i].imag = ei
            q[i, j].real = qr
            q[i, j].imag = -qi
            e[i, j].real = er
            e[i, j].imag = -ei
    return Q, E, y


def pair_sums_sq(Z, w, c):
    cdef double[:, ::1] zr = np.ascontiguousarray(Z.real, dtype=np.float64)
    cdef double[:, ::1] zi = np.ascontiguousarray(Z.imag, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t M = zr.shape[0], K = zr.shape[1]
    E2 = np.empty((M, M), dtype=np.complex128)
    u = np.empty(M, dtype=np.complex128)
    cdef cplx[:, ::1] e2 = E2
    cdef cplx[::1] uv = u
    cdef Py_ssize_t i, j, n
    cdef double ar, ai, w2
    for i in range(M):
        ar = 0.0
        ai = 0.0
        for n in range(K):
            ar += wv[n] * cv[n] * zr[i, n]
            ai += wv[n] * cv[n] * zi[i, n]
        uv[i].real = ar
        uv[i].imag = ai
    for j in range(M):
        for i in range(j, M):
            ar = 0.0
            ai = 0.0
            for n in range(K):
                w2 = wv[n] * wv[n]
                ar += w2 * (zr[j, n] * zr[i, n] + zi[j, n] * zi[i, n])
                ai += w2 * (zr[j, n] * zi[i, n] - zi[j, n] * zr[i, n])
            e2[j, i].real = ar
            e2[j, i].imag = ai
            e2[i, j].real = ar
            e2[i, j].imag = -ai
    return E2, u


def reduced_matrix(S, W, Q, A, B, double eps):
    cdef cplx[:, ::1] s = np.ascontiguousarray(S, dtype=np.complex128)
    cdef cplx[:, ::1] wm = np.ascontiguousarray(W, dtype=np.complex128)
    cdef cplx[:, ::1] qm = np.ascontiguousarray(Q, dtype=np.complex128)
    cdef cplx[::1] a = np.ascontiguousarray(A, dtype=np.complex128)
    cdef cplx[::1] b = np.ascontiguousarray(B, dtype=np.complex128)
    cdef Py_ssize_t M = s.shape[0]
    cdef Py_ssize_t MM = M * M
    cdef Py_ssize_t n = MM + 2 * M
    G = np.zeros((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] g = G
    cdef Py_ssize_t l, k, j, row
    cdef cplx ak, bk, qs
    for l in range(M):
        for k in range(M):
            row = l * M + k
            ak = a[k].real - 1j * a[k].imag
            bk = b[k].real - 1j * b[k].imag
            for j in range(M):
                g[row, l * M + j] += wm[k, j]
                g[row, k * M + j] += qm[l, j] * wm[k, j]
                qs = qm[l, j] * s[k, j]
                g[row, MM + j] = ak * qs
                g[row, MM + M + j] = bk * qs
            g[row, l * M + k] += eps
    for j in range(M):
        for k in range(M):
            g[MM + j, MM + k] = s[j, k]
            g[MM + M + j, MM + M + k] = s[j, k]
            g[MM + j, j * M + k] = s[j, k] * a[k]
            g[MM + M + j, j * M + k] = s[j, k] * b[k]
        g[MM + j, MM + j] += eps
        g[MM + M + j, MM + M + j] += eps
    return G
