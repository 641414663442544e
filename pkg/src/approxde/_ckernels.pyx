# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def eval_terms(const double[:, ::1] X, const double[::1] coef, const cnp.int64_t[::1] out,
               const cnp.int64_t[::1] ptr, const cnp.int64_t[::1] fvar,
               const cnp.int64_t[::1] fexp, Py_ssize_t nout):
    cdef Py_ssize_t B = X.shape[0]
    cdef Py_ssize_t T = coef.shape[0]
    cdef Py_ssize_t b, t, f, e
    cdef double val, x
    res_arr = np.zeros((B, nout), dtype=np.float64)
    cdef double[:, ::1] res = res_arr
    for b in range(B):
        for t in range(T):
            val = coef[t]
            for f in range(ptr[t], ptr[t + 1]):
                x = X[b, fvar[f]]
                for e in range(fexp[f]):
                    val *= x
            res[b, out[t]] += val
    return res_arr


def max_pair_norm(double[:, :, ::1] lam, double[:, :, ::1] inv, int chunk=64):
    cdef int K = lam.shape[0]
    cdef int n = lam.shape[1]
    cdef int i, j0, jn, r, c, rows, mm, kk
    cdef double s, best = -1.0
    cdef int bi = 0, bj = 0
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'N'
    buf_arr = np.empty((chunk * n, n), dtype=np.float64)
    cdef double[:, ::1] buf = buf_arr
    if K == 0 or n == 0:
        return best, bi, bj
    mm = n
    kk = n
    for i in range(K):
        j0 = i
        while j0 < K:
            jn = min(chunk, K - j0)
            rows = jn * n
            # row-major buf = lam[j0:j0+jn] @ inv[i], as column-major inv^T * lam^T
            dgemm(&trans, &trans, &mm, &rows, &kk, &one, &inv[i, 0, 0], &mm,
                  &lam[j0, 0, 0], &kk, &zero, &buf[0, 0], &mm)
            for r in range(rows):
                s = 0.0
                for c in range(n):
                    s += fabs(buf[r, c])
                if s > best:
                    best = s
                    bi = i
                    bj = j0 + r // n
            j0 += jn
    return best, bi, bj
