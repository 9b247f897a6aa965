# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element assembly kernels (same contract as _kernels_py)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def assemble_quads(conn, hx, hy, a, cx, cy, cq, cm):
    cdef const long long[:, ::1] c = np.ascontiguousarray(conn, dtype=np.int64)
    cdef const double[::1] vhx = np.ascontiguousarray(hx, dtype=float)
    cdef const double[::1] vhy = np.ascontiguousarray(hy, dtype=float)
    cdef const double[::1] va = np.ascontiguousarray(a, dtype=float)
    cdef const double complex[::1] vcx = np.ascontiguousarray(cx, dtype=complex)
    cdef const double complex[::1] vcy = np.ascontiguousarray(cy, dtype=complex)
    cdef const double complex[::1] vcq = np.ascontiguousarray(cq, dtype=complex)
    cdef const double complex[::1] vcm = np.ascontiguousarray(cm, dtype=complex)
    cdef Py_ssize_t n = c.shape[0]
    rows_a = np.empty(16 * n, dtype=np.int64)
    cols_a = np.empty(16 * n, dtype=np.int64)
    av_a = np.empty(16 * n, dtype=complex)
    bv_a = np.empty(16 * n, dtype=complex)
    cdef long long[::1] rows = rows_a
    cdef long long[::1] cols = cols_a
    cdef double complex[::1] av = av_a
    cdef double complex[::1] bv = bv_a
    cdef double K1[2][2]
    cdef double M1[2][2]
    cdef double R1[2][2]
    K1[0][0] = 1.0; K1[0][1] = -1.0; K1[1][0] = -1.0; K1[1][1] = 1.0
    M1[0][0] = 2.0 / 6.0; M1[0][1] = 1.0 / 6.0; M1[1][0] = 1.0 / 6.0; M1[1][1] = 2.0 / 6.0
    R1[0][0] = 0.0; R1[0][1] = 1.0; R1[1][0] = -1.0; R1[1][1] = 0.0
    cdef Py_ssize_t e, i, j, ix, iy, jx, jy, p
    cdef double h1, h2, aa, mx, my, ky
    cdef double complex X, A, mass
    for e in range(n):
        h1 = vhx[e]
        h2 = vhy[e]
        aa = va[e]
        p = 16 * e
        for i in range(4):
            ix = i % 2
            iy = i // 2
            for j in range(4):
                jx = j % 2
                jy = j // 2
                mx = M1[ix][jx] * h1
                my = M1[iy][jy] * h2
                ky = K1[iy][jy] / h2
                X = K1[ix][jx] / h1 + aa * aa * M1[ix][jx] * h1 + 1j * aa * R1[ix][jx]
                mass = mx * my
                A = vcx[e] * my * X + vcy[e] * ky * mx + vcq[e] * mass
                rows[p] = c[e, i]
                cols[p] = c[e, j]
                av[p] = A
                bv[p] = vcm[e] * mass
                p += 1
    return rows_a, cols_a, av_a, bv_a


def assemble_tris(conn, xy, cs, cm):
    cdef const long long[:, ::1] c = np.ascontiguousarray(conn, dtype=np.int64)
    cdef const double[:, :, ::1] P = np.ascontiguousarray(xy, dtype=float)
    cdef const double complex[::1] vcs = np.ascontiguousarray(cs, dtype=complex)
    cdef const double complex[::1] vcm = np.ascontiguousarray(cm, dtype=complex)
    cdef Py_ssize_t n = c.shape[0]
    rows_a = np.empty(9 * n, dtype=np.int64)
    cols_a = np.empty(9 * n, dtype=np.int64)
    av_a = np.empty(9 * n, dtype=complex)
    bv_a = np.empty(9 * n, dtype=complex)
    cdef long long[::1] rows = rows_a
    cdef long long[::1] cols = cols_a
    cdef double complex[::1] av = av_a
    cdef double complex[::1] bv = bv_a
    cdef double g[3][2]
    cdef double d1x, d1y, d2x, d2y, det, area, kij, mij
    cdef Py_ssize_t e, i, j, p
    for e in range(n):
        d1x = P[e, 1, 0] - P[e, 0, 0]
        d1y = P[e, 1, 1] - P[e, 0, 1]
        d2x = P[e, 2, 0] - P[e, 0, 0]
        d2y = P[e, 2, 1] - P[e, 0, 1]
        det = d1x * d2y - d1y * d2x
        area = 0.5 * (det if det > 0 else -det)
        g[1][0] = d2y / det
        g[1][1] = -d2x / det
        g[2][0] = -d1y / det
        g[2][1] = d1x / det
        g[0][0] = -g[1][0] - g[2][0]
        g[0][1] = -g[1][1] - g[2][1]
        p = 9 * e
        for i in range(3):
            for j in range(3):
                kij = (g[i][0] * g[j][0] + g[i][1] * g[j][1]) * area
                mij = area / 12.0 * (2.0 if i == j else 1.0)
                rows[p] = c[e, i]
                cols[p] = c[e, j]
                av[p] = vcs[e] * kij
                bv[p] = vcm[e] * mij
                p += 1
    return rows_a, cols_a, av_a, bv_a
