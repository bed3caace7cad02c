# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

BACKEND = "cython"


cdef Py_ssize_t _intersect_into(const long long[:] a, Py_ssize_t na,
                                const long long[:] b, long long[:] out) noexcept nogil:
    # galloping would help for very skewed lengths; linear merge is enough here
    cdef Py_ssize_t i = 0, j = 0, m = 0, nb = b.shape[0]
    while i < na and j < nb:
        if a[i] < b[j]:
            i += 1
        elif a[i] > b[j]:
            j += 1
        else:
            out[m] = a[i]
            m += 1
            i += 1
            j += 1
    return m


def intersect_count(postings):
    if not postings:
        return 0
    arrays = [np.ascontiguousarray(p, dtype=np.int64) for p in sorted(postings, key=len)]
    cdef long long[:] acc = arrays[0].copy()
    cdef long long[:] other
    cdef Py_ssize_t m = acc.shape[0]
    for arr in arrays[1:]:
        if m == 0:
            break
        other = arr
        m = _intersect_into(acc, m, other, acc)
    return int(m)


cdef inline double _sqdist(const double[:, :] x, Py_ssize_t i,
                           const double[:, :] c, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t t
    cdef double s = 0.0, diff
    for t in range(x.shape[1]):
        diff = x[i, t] - c[j, t]
        s += diff * diff
    return s


def kmeanspp_indices(points, Py_ssize_t k, uniforms):
    cdef const double[:, :] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    chosen_arr = np.empty(k, dtype=np.int64)
    cdef long long[:] chosen = chosen_arr
    d2_arr = np.empty(n, dtype=np.float64)
    cdef double[:] d2 = d2_arr
    cdef Py_ssize_t i, j, c, idx
    cdef double total, target, acc, nd
    cdef bint taken

    idx = <Py_ssize_t> floor(u[0] * n)
    if idx > n - 1:
        idx = n - 1
    chosen[0] = idx
    for i in range(n):
        d2[i] = _sqdist(x, i, x, idx)
    for c in range(1, k):
        total = 0.0
        for i in range(n):
            total += d2[i]
        if total > 0:
            target = u[c] * total
            acc = 0.0
            idx = n - 1
            for i in range(n):
                acc += d2[i]
                if acc > target:
                    idx = i
                    break
        else:
            idx = -1
            for i in range(n):
                taken = False
                for j in range(c):
                    if chosen[j] == i:
                        taken = True
                        break
                if not taken:
                    idx = i
                    break
        chosen[c] = idx
        for i in range(n):
            nd = _sqdist(x, i, x, idx)
            if nd < d2[i]:
                d2[i] = nd
    return chosen_arr


def lloyd(points, centroids, Py_ssize_t max_iters):
    cdef const double[:, :] x = np.ascontiguousarray(points, dtype=np.float64)
    cent_arr = np.array(centroids, dtype=np.float64, order="C")
    cdef double[:, :] cent = cent_arr
    cdef Py_ssize_t n = x.shape[0], k = cent.shape[0], dim = x.shape[1]
    labels_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[:] labels = labels_arr
    cdef long long[:] new_labels = np.empty(n, dtype=np.int64)
    cdef double[:] point_d2 = np.empty(n, dtype=np.float64)
    cdef double[:, :] sums = np.empty((k, dim), dtype=np.float64)
    cdef long long[:] sizes = np.empty(k, dtype=np.int64)
    cdef Py_ssize_t it, i, j, t, best, far
    cdef double bd, dd, obj, fd
    cdef bint changed
    trace = []

    for it in range(max_iters):
        obj = 0.0
        changed = False
        for i in range(n):
            best = 0
            bd = _sqdist(x, i, cent, 0)
            for j in range(1, k):
                dd = _sqdist(x, i, cent, j)
                if dd < bd:
                    bd = dd
                    best = j
            new_labels[i] = best
            point_d2[i] = bd
            obj += bd
            if best != labels[i]:
                changed = True
        trace.append(obj)
        if not changed:
            break
        labels[:] = new_labels

        sums[:, :] = 0.0
        sizes[:] = 0
        for i in range(n):
            j = labels[i]
            sizes[j] += 1
            for t in range(dim):
                sums[j, t] += x[i, t]
        for j in range(k):
            if sizes[j]:
                for t in range(dim):
                    cent[j, t] = sums[j, t] / sizes[j]
        for j in range(k):
            if sizes[j] == 0:
                far = 0
                fd = point_d2[0]
                for i in range(1, n):
                    if point_d2[i] > fd:
                        fd = point_d2[i]
                        far = i
                for t in range(dim):
                    cent[j, t] = x[far, t]
                point_d2[far] = 0.0
        obj = 0.0
        for i in range(n):
            obj += _sqdist(x, i, cent, labels[i])
        trace.append(obj)
    return labels_arr, cent_arr, trace


def dispersion(d, labels, Py_ssize_t k):
    cdef const double[:, :] dm = np.ascontiguousarray(d, dtype=np.float64)
    cdef const long long[:] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = dm.shape[0], i, j
    sums_arr = np.zeros(k, dtype=np.float64)
    sizes_arr = np.zeros(k, dtype=np.int64)
    cdef double[:] sums = sums_arr
    cdef long long[:] sizes = sizes_arr
    for i in range(n):
        sizes[lab[i]] += 1
        for j in range(n):
            if lab[j] == lab[i]:
                sums[lab[i]] += dm[i, j]
    cdef double total = 0.0
    for j in range(k):
        if sizes[j]:
            total += sums[j] / (2.0 * sizes[j])
    return total
