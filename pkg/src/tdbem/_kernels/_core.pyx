# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the assembly hot kernel.

Mirrors the pure-NumPy fallback: per-pair Galerkin contributions for one
reference quadrature rule, with the packed piecewise Chebyshev temporal
weight tables evaluated pointwise via Clenshaw recurrence.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double _INV4PI = 1.0 / (4.0 * 3.14159265358979323846264338327950288)


cdef inline double _clenshaw(const double* c, int deg, double x) noexcept nogil:
    cdef double b1 = 0.0, b2 = 0.0, tmp
    cdef int k
    for k in range(deg, 0, -1):
        tmp = 2.0 * x * b1 - b2 + c[k]
        b2 = b1
        b1 = tmp
    return x * b1 - b2 + c[0]


cdef inline double _eval_table(const double[:, :, ::1] coeffs, int t, double lo,
                               double width, long nsub, double a) noexcept nogil:
    cdef long idx
    cdef double x, hi = lo + nsub * width
    cdef int deg = coeffs.shape[2] - 1
    if a < lo or a > hi:
        return 0.0
    idx = <long>((a - lo) / width)
    if idx > nsub - 1:
        idx = nsub - 1
    x = 2.0 * (a - lo - idx * width) / width - 1.0
    if x < -1.0:
        x = -1.0
    elif x > 1.0:
        x = 1.0
    return _clenshaw(&coeffs[t, idx, 0], deg, x)


def pair_block_contributions(cnp.ndarray cx, cnp.ndarray cy, cnp.ndarray a2x,
                             cnp.ndarray a2y, cnp.ndarray ndot, cnp.ndarray curly,
                             cnp.ndarray curlx, cnp.ndarray xhat, cnp.ndarray yhat,
                             cnp.ndarray wq, pack):
    """See tdbem._kernels: returns (npair, p+1, p+1, 3, 3) contributions."""
    cdef const double[:, :, ::1] cxv = np.ascontiguousarray(cx, dtype=np.float64)
    cdef const double[:, :, ::1] cyv = np.ascontiguousarray(cy, dtype=np.float64)
    cdef const double[::1] a2xv = np.ascontiguousarray(a2x, dtype=np.float64)
    cdef const double[::1] a2yv = np.ascontiguousarray(a2y, dtype=np.float64)
    cdef const double[::1] ndotv = np.ascontiguousarray(ndot, dtype=np.float64)
    cdef const double[:, :, ::1] curlyv = np.ascontiguousarray(curly, dtype=np.float64)
    cdef const double[:, :, ::1] curlxv = np.ascontiguousarray(curlx, dtype=np.float64)
    cdef const double[:, ::1] xh = np.ascontiguousarray(xhat, dtype=np.float64)
    cdef const double[:, ::1] yh = np.ascontiguousarray(yhat, dtype=np.float64)
    cdef const double[::1] wqv = np.ascontiguousarray(wq, dtype=np.float64)

    cdef int np1 = pack.p + 1
    cdef double delta = pack.delta
    cdef const double[::1] lo = np.ascontiguousarray(pack.lo, dtype=np.float64)
    cdef const double[::1] width = np.ascontiguousarray(pack.width, dtype=np.float64)
    cdef const long[::1] nsub = np.ascontiguousarray(pack.nsub, dtype=np.int64)
    cdef const double[:, :, ::1] coeffs = np.ascontiguousarray(pack.coeffs, dtype=np.float64)
    cdef const double[::1] sp = np.ascontiguousarray(pack.sp, dtype=np.float64)
    cdef const double[::1] sn = np.ascontiguousarray(pack.sn, dtype=np.float64)
    cdef const cnp.uint8_t[::1] fold = np.ascontiguousarray(pack.fold, dtype=np.uint8)
    cdef const cnp.uint8_t[::1] active = np.ascontiguousarray(pack.active, dtype=np.uint8)

    cdef Py_ssize_t npair = cxv.shape[0], nq = xh.shape[0]
    out_arr = np.zeros((npair, np1, np1, 3, 3))
    cdef double[:, :, :, :, ::1] out = out_arr

    # barycentric shape values at the reference points
    shx_arr = np.column_stack([1.0 - xhat[:, 0], xhat[:, 0] - xhat[:, 1], xhat[:, 1]])
    shy_arr = np.column_stack([1.0 - yhat[:, 0], yhat[:, 0] - yhat[:, 1], yhat[:, 1]])
    cdef const double[:, ::1] shx = np.ascontiguousarray(shx_arr)
    cdef const double[:, ::1] shy = np.ascontiguousarray(shy_arr)

    cdef Py_ssize_t p_, q_, a_, b_, d_
    cdef int m1, m2, t, tt, nt = 2 * np1 * np1
    cdef double X0, X1, X2, Y0, Y1, Y2, r, common, av, aa, psi, psit, cp, nd
    cdef double cdot[3][3]
    cdef double amin = 1e300, amax = -1e300, thi

    # union of the table supports in offset space, for a per-point early out
    for t in range(nt):
        if not active[t]:
            continue
        thi = lo[t] + nsub[t] * width[t]
        if fold[t]:
            if -thi < amin:
                amin = -thi
        elif lo[t] < amin:
            amin = lo[t]
        if thi > amax:
            amax = thi

    with nogil:
        for p_ in range(npair):
            nd = ndotv[p_]
            for a_ in range(3):
                for b_ in range(3):
                    cdot[a_][b_] = (curlyv[p_, a_, 0] * curlxv[p_, b_, 0]
                                    + curlyv[p_, a_, 1] * curlxv[p_, b_, 1]
                                    + curlyv[p_, a_, 2] * curlxv[p_, b_, 2])
            for q_ in range(nq):
                X0 = cxv[p_, 0, 0] + xh[q_, 0] * (cxv[p_, 1, 0] - cxv[p_, 0, 0]) \
                    + xh[q_, 1] * (cxv[p_, 2, 0] - cxv[p_, 1, 0])
                X1 = cxv[p_, 0, 1] + xh[q_, 0] * (cxv[p_, 1, 1] - cxv[p_, 0, 1]) \
                    + xh[q_, 1] * (cxv[p_, 2, 1] - cxv[p_, 1, 1])
                X2 = cxv[p_, 0, 2] + xh[q_, 0] * (cxv[p_, 1, 2] - cxv[p_, 0, 2]) \
                    + xh[q_, 1] * (cxv[p_, 2, 2] - cxv[p_, 1, 2])
                Y0 = cyv[p_, 0, 0] + yh[q_, 0] * (cyv[p_, 1, 0] - cyv[p_, 0, 0]) \
                    + yh[q_, 1] * (cyv[p_, 2, 0] - cyv[p_, 1, 0])
                Y1 = cyv[p_, 0, 1] + yh[q_, 0] * (cyv[p_, 1, 1] - cyv[p_, 0, 1]) \
                    + yh[q_, 1] * (cyv[p_, 2, 1] - cyv[p_, 1, 1])
                Y2 = cyv[p_, 0, 2] + yh[q_, 0] * (cyv[p_, 1, 2] - cyv[p_, 0, 2]) \
                    + yh[q_, 1] * (cyv[p_, 2, 2] - cyv[p_, 1, 2])
                r = sqrt((X0 - Y0) ** 2 + (X1 - Y1) ** 2 + (X2 - Y2) ** 2)
                av = r + delta
                if av < amin or av > amax:
                    continue
                common = _INV4PI * a2xv[p_] * a2yv[p_] * wqv[q_] / r
                aa = fabs(av)
                for m2 in range(np1):
                    for m1 in range(np1):
                        t = (m2 * np1 + m1) * 2
                        psi = 0.0
                        psit = 0.0
                        for tt in range(t, t + 2):
                            if not active[tt]:
                                continue
                            if fold[tt]:
                                cp = _eval_table(coeffs, tt, lo[tt], width[tt],
                                                 nsub[tt], aa)
                                cp = sp[tt] * cp if av >= 0.0 else sn[tt] * cp
                            else:
                                cp = _eval_table(coeffs, tt, lo[tt], width[tt],
                                                 nsub[tt], av)
                            if tt == t:
                                psi = cp
                            else:
                                psit = cp
                        if psi == 0.0 and psit == 0.0:
                            continue
                        psi = common * psi * nd
                        psit = common * psit
                        for a_ in range(3):
                            for b_ in range(3):
                                out[p_, m2, m1, a_, b_] += (
                                    psi * shy[q_, a_] * shx[q_, b_]
                                    + psit * cdot[a_][b_]
                                )
    return out_arr
