# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-search kernel.

Bit-identical counterpart of ``_split_py``: stable mergesort for the value
ordering, sequential prefix sums, the same gain expression and the same
strictly-greater tie handling.  Compile with ``-ffp-contract=off`` so the
compiler cannot fuse multiply-adds into FMAs and change rounding.
"""

from libc.stdlib cimport free, malloc


cdef void _merge(const double* xs, Py_ssize_t* order, Py_ssize_t* buf,
                 Py_ssize_t lo, Py_ssize_t mid, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t i = lo, j = mid, k = lo
    while i < mid and j < hi:
        if xs[order[j]] < xs[order[i]]:
            buf[k] = order[j]
            j += 1
        else:
            buf[k] = order[i]
            i += 1
        k += 1
    while i < mid:
        buf[k] = order[i]
        i += 1
        k += 1
    while j < hi:
        buf[k] = order[j]
        j += 1
        k += 1
    for k in range(lo, hi):
        order[k] = buf[k]


cdef void _stable_argsort(const double* xs, Py_ssize_t* order, Py_ssize_t* buf,
                          Py_ssize_t m) noexcept nogil:
    # bottom-up stable mergesort; equal values keep original index order,
    # matching numpy's kind="stable" permutation exactly
    cdef Py_ssize_t width = 1, lo, mid, hi, i
    for i in range(m):
        order[i] = i
    while width < m:
        lo = 0
        while lo + width < m:
            mid = lo + width
            hi = mid + width
            if hi > m:
                hi = m
            _merge(xs, order, buf, lo, mid, hi)
            lo = hi
        width *= 2


def best_split(double[:, ::1] X, double[::1] y,
               long long[::1] samples, Py_ssize_t start, Py_ssize_t end,
               long long[::1] features, Py_ssize_t min_leaf):
    cdef Py_ssize_t m = end - start
    if m < 2:
        return -1, 0.0, 0.0
    cdef Py_ssize_t k = features.shape[0]

    cdef double* xs = <double*> malloc(m * sizeof(double))
    cdef double* ysrt = <double*> malloc(m * sizeof(double))
    cdef double* csum = <double*> malloc(m * sizeof(double))
    cdef double* csq = <double*> malloc(m * sizeof(double))
    cdef Py_ssize_t* order = <Py_ssize_t*> malloc(m * sizeof(Py_ssize_t))
    cdef Py_ssize_t* buf = <Py_ssize_t*> malloc(m * sizeof(Py_ssize_t))
    if xs == NULL or ysrt == NULL or csum == NULL or csq == NULL or order == NULL or buf == NULL:
        free(xs); free(ysrt); free(csum); free(csq); free(order); free(buf)
        raise MemoryError()

    cdef Py_ssize_t fi, i, f, nl, nr
    cdef double md = <double> m
    cdef double total, totsq, sse_parent, sl, sql, sr, sqr, gain, yv
    cdef double best_gain = 0.0, best_thr = 0.0
    cdef Py_ssize_t best_feat = -1

    with nogil:
        for fi in range(k):
            f = <Py_ssize_t> features[fi]
            for i in range(m):
                xs[i] = X[samples[start + i], f]
            _stable_argsort(xs, order, buf, m)
            for i in range(m):
                ysrt[i] = y[samples[start + order[i]]]
            yv = ysrt[0]
            csum[0] = yv
            csq[0] = yv * yv
            for i in range(1, m):
                yv = ysrt[i]
                csum[i] = csum[i - 1] + yv
                csq[i] = csq[i - 1] + yv * yv
            total = csum[m - 1]
            totsq = csq[m - 1]
            sse_parent = totsq - total * total / md
            for i in range(m - 1):
                if not (xs[order[i]] < xs[order[i + 1]]):
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sl = csum[i]
                sql = csq[i]
                sr = total - sl
                sqr = totsq - sql
                gain = sse_parent - (sql - sl * sl / (<double> nl)) - (sqr - sr * sr / (<double> nr))
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = (xs[order[i]] + xs[order[i + 1]]) / 2.0

    free(xs); free(ysrt); free(csum); free(csq); free(order); free(buf)
    if best_feat < 0:
        return -1, 0.0, 0.0
    return <long long> best_feat, best_thr, best_gain


def partition(double[:, ::1] X, long long[::1] samples,
              Py_ssize_t start, Py_ssize_t end,
              Py_ssize_t feature, double threshold):
    cdef Py_ssize_t m = end - start
    cdef long long* buf = <long long*> malloc(m * sizeof(long long))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j = 0
    cdef Py_ssize_t n_left = 0
    with nogil:
        for i in range(m):
            if X[samples[start + i], feature] <= threshold:
                buf[n_left] = samples[start + i]
                n_left += 1
        j = n_left
        for i in range(m):
            if not (X[samples[start + i], feature] <= threshold):
                buf[j] = samples[start + i]
                j += 1
        for i in range(m):
            samples[start + i] = buf[i]
    free(buf)
    return n_left
