# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the scoring hot kernels.

Same contracts as the NumPy fallback in kernels.py: independent per-trial
dot products and per-utterance top-n cohort statistics with the top slice
reduced in descending order, so the statistics are exactly invariant under
permutation of the cohort.
"""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _dot(const double* a, const double* b, Py_ssize_t d) noexcept nogil:
    # four independent accumulators so the compiler can vectorize; the
    # combination order is fixed, keeping each result deterministic
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t l = 0
    while l + 4 <= d:
        s0 += a[l] * b[l]
        s1 += a[l + 1] * b[l + 1]
        s2 += a[l + 2] * b[l + 2]
        s3 += a[l + 3] * b[l + 3]
        l += 4
    while l < d:
        s0 += a[l] * b[l]
        l += 1
    return (s0 + s1) + (s2 + s3)


cdef void _sift_down(double* h, Py_ssize_t start, Py_ssize_t end) noexcept nogil:
    # min-heap: after heapsort the array is descending
    cdef Py_ssize_t root = start, child
    cdef double tmp
    while 2 * root + 1 <= end:
        child = 2 * root + 1
        if child + 1 <= end and h[child + 1] < h[child]:
            child += 1
        if h[child] < h[root]:
            tmp = h[root]
            h[root] = h[child]
            h[child] = tmp
            root = child
        else:
            return


cdef void _heapsort_desc(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t start, end
    cdef double tmp
    if n < 2:
        return
    start = (n - 2) // 2
    while start >= 0:
        _sift_down(a, start, n - 1)
        start -= 1
    end = n - 1
    while end > 0:
        tmp = a[end]
        a[end] = a[0]
        a[0] = tmp
        _sift_down(a, 0, end - 1)
        end -= 1


def pair_scores(double[:, ::1] unit, long[::1] enroll_idx, long[::1] test_idx):
    cdef Py_ssize_t m = enroll_idx.shape[0]
    cdef Py_ssize_t d = unit.shape[1]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(m):
            out[i] = _dot(&unit[enroll_idx[i], 0], &unit[test_idx[i], 0], d)
    return out_arr


def cohort_stats(double[:, ::1] unit, double[:, ::1] cohort, int top_n):
    cdef Py_ssize_t n = unit.shape[0]
    cdef Py_ssize_t c = cohort.shape[0]
    cdef Py_ssize_t d = unit.shape[1]
    cdef Py_ssize_t k = top_n if top_n < c else c
    mu_arr = np.empty(n, dtype=np.float64)
    sig_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] mu = mu_arr
    cdef double[::1] sig = sig_arr
    cdef double* scores = <double*> malloc(c * sizeof(double))
    if scores == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef double mean, var, dev
    try:
        with nogil:
            for i in range(n):
                for j in range(c):
                    scores[j] = _dot(&cohort[j, 0], &unit[i, 0], d)
                _heapsort_desc(scores, c)
                mean = 0.0
                for j in range(k):
                    mean += scores[j]
                mean /= k
                var = 0.0
                for j in range(k):
                    dev = scores[j] - mean
                    var += dev * dev
                var /= k
                mu[i] = mean
                sig[i] = sqrt(var)
    finally:
        free(scores)
    return mu_arr, sig_arr
