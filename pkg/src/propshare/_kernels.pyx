# cython: language_level=3
"""Compiled kernels: water-filling best response, swap local search, greedy
step and rectangular Hungarian assignment.

Contracts match ``propshare._pure`` exactly; inputs are pre-validated by the
Python wrappers in ``propshare.strategies`` and ``propshare.optimum``.
"""
import numpy as np

from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, free, qsort
from libc.string cimport memset

cdef double SWAP_SLACK = 1e-12
cdef double DEGENERATE_GAP = 1e-12


ctypedef struct Item:
    double key
    Py_ssize_t idx


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef const Item* p = <const Item*>a
    cdef const Item* q = <const Item*>b
    if p.key > q.key:
        return -1
    if p.key < q.key:
        return 1
    return (p.idx > q.idx) - (p.idx < q.idx)


cdef int _cmp_idx(const void* a, const void* b) noexcept nogil:
    cdef Py_ssize_t p = (<const Py_ssize_t*>a)[0]
    cdef Py_ssize_t q = (<const Py_ssize_t*>b)[0]
    return (p > q) - (p < q)


cdef double _brs(const double* w, const double* y, double X, double eps,
                 const Py_ssize_t* subset, Py_ssize_t s, double* out,
                 Item* items, double* sq, double* yy) noexcept nogil:
    """Best response on ``subset``; writes every subset position of ``out``."""
    cdef Py_ssize_t t, c = 0, k, j
    cdef double ys, root_sum, opp_sum, last, xs, util
    for t in range(s):
        j = subset[t]
        out[j] = 0.0
        if w[j] > 0:
            ys = y[j] + eps
            items[c].key = w[j] / ys
            items[c].idx = j
            c += 1
    if c == 0:
        return 0.0
    qsort(items, c, sizeof(Item), _cmp_desc)
    root_sum = 0.0
    opp_sum = 0.0
    k = 1
    for t in range(c):
        j = items[t].idx
        ys = y[j] + eps
        sq[t] = sqrt(w[j] * ys)
        yy[t] = ys
        root_sum += sq[t]
        opp_sum += ys
        last = sq[t] / root_sum * (X + opp_sum) - ys
        if last >= 0:
            k = t + 1
    root_sum = 0.0
    opp_sum = 0.0
    for t in range(k):
        root_sum += sq[t]
        opp_sum += yy[t]
    util = 0.0
    for t in range(k):
        j = items[t].idx
        xs = sq[t] / root_sum * (X + opp_sum) - yy[t]
        if xs < 0:
            xs = 0.0
        out[j] = xs
        util += w[j] * xs / (xs + yy[t])
    return util


def best_response_subset(const double[::1] w, const double[::1] y, double X,
                         double eps, subset):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t[::1] sub = np.ascontiguousarray(subset, dtype=np.intp)
    cdef Py_ssize_t s = sub.shape[0]
    x = np.zeros(n)
    cdef double[::1] xv = x
    cdef Item* items = <Item*>malloc(max(s, 1) * sizeof(Item))
    cdef double* sq = <double*>malloc(max(s, 1) * sizeof(double))
    cdef double* yy = <double*>malloc(max(s, 1) * sizeof(double))
    cdef double util
    try:
        util = _brs(&w[0], &y[0], X, eps, &sub[0] if s else NULL, s, &xv[0], items, sq, yy)
    finally:
        free(items)
        free(sq)
        free(yy)
    return x, util


def best_response(const double[::1] w, const double[::1] y, double X, double eps):
    return best_response_subset(w, y, X, eps, np.arange(w.shape[0], dtype=np.intp))


def ratio_order(const double[::1] w, const double[::1] y, double eps):
    cdef Py_ssize_t n = w.shape[0], j
    cdef Item* items = <Item*>malloc(n * sizeof(Item))
    order = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] ov = order
    try:
        for j in range(n):
            items[j].key = w[j] / (y[j] + eps) if w[j] > 0 else 0.0
            items[j].idx = j
        qsort(items, n, sizeof(Item), _cmp_desc)
        for j in range(n):
            ov[j] = items[j].idx
    finally:
        free(items)
    return order


def local_search(const double[::1] w, const double[::1] y, double X,
                 Py_ssize_t k, double eps):
    cdef Py_ssize_t n = w.shape[0]
    if k >= n:
        return best_response(w, y, X, eps)[0]
    cdef Py_ssize_t[::1] order = ratio_order(w, y, eps)
    cdef Py_ssize_t* A = <Py_ssize_t*>malloc(k * sizeof(Py_ssize_t))
    cdef Py_ssize_t* B = <Py_ssize_t*>malloc(k * sizeof(Py_ssize_t))
    cdef char* in_a = <char*>malloc(n)
    cdef double* scratch = <double*>malloc(n * sizeof(double))
    cdef Item* items = <Item*>malloc(k * sizeof(Item))
    cdef double* sq = <double*>malloc(k * sizeof(double))
    cdef double* yy = <double*>malloc(k * sizeof(double))
    cdef Py_ssize_t t, ai, i, j
    cdef double util, ut
    cdef bint improved
    x = np.zeros(n)
    cdef double[::1] xv = x
    try:
        with nogil:
            memset(in_a, 0, n)
            for t in range(k):
                A[t] = order[t]
            qsort(A, k, sizeof(Py_ssize_t), _cmp_idx)
            for t in range(k):
                in_a[A[t]] = 1
            util = _brs(&w[0], &y[0], X, eps, A, k, scratch, items, sq, yy)
            improved = True
            while improved:
                improved = False
                for ai in range(k):
                    i = A[ai]
                    for j in range(n):
                        if in_a[j]:
                            continue
                        for t in range(k):
                            B[t] = A[t]
                        B[ai] = j
                        ut = _brs(&w[0], &y[0], X, eps, B, k, scratch, items, sq, yy)
                        if ut > util + SWAP_SLACK:
                            in_a[i] = 0
                            in_a[j] = 1
                            A[ai] = j
                            qsort(A, k, sizeof(Py_ssize_t), _cmp_idx)
                            util = ut
                            improved = True
                            break
                    if improved:
                        break
            _brs(&w[0], &y[0], X, eps, A, k, &xv[0], items, sq, yy)
    finally:
        free(A)
        free(B)
        free(in_a)
        free(scratch)
        free(items)
        free(sq)
        free(yy)
    return x


cdef object _greedy_move(const double[::1] x, const double* marg, double delta,
                         Py_ssize_t max_support):
    cdef Py_ssize_t n = x.shape[0], j, low = -1, high = -1, supp = 0
    out = np.array(x, dtype=float, copy=True)
    cdef double[::1] ov = out
    cdef double amt
    for j in range(n):
        if x[j] > 0:
            supp += 1
            if low < 0 or marg[j] < marg[low]:
                low = j
    if low < 0:
        return out
    for j in range(n):
        if supp >= max_support and not x[j] > 0:
            continue
        if high < 0 or marg[j] > marg[high]:
            high = j
    if not marg[high] - marg[low] > DEGENERATE_GAP:
        return out
    amt = delta if delta < ov[low] else ov[low]
    ov[low] -= amt
    ov[high] += amt
    return out


def greedy_step(const double[::1] x, const double[::1] w, const double[::1] y,
                double delta, double eps, Py_ssize_t max_support):
    cdef Py_ssize_t n = x.shape[0], j
    cdef double* marg = <double*>malloc(n * sizeof(double))
    cdef double opp, d
    try:
        for j in range(n):
            if w[j] > 0:
                opp = y[j] + eps
                d = (opp + x[j]) * (opp + x[j])
                marg[j] = w[j] * opp / d if d > 0 else INFINITY
            else:
                marg[j] = 0.0
        return _greedy_move(x, marg, delta, max_support)
    finally:
        free(marg)


def greedy_step_marginals(const double[::1] x, const double[::1] marg,
                          double delta, Py_ssize_t max_support):
    return _greedy_move(x, &marg[0], delta, max_support)


def hungarian_min(cost):
    cdef double[:, ::1] a = np.ascontiguousarray(cost, dtype=float)
    cdef Py_ssize_t nr = a.shape[0], nc = a.shape[1]
    if nr > nc:
        raise ValueError("hungarian_min needs rows <= cols")
    cdef double* u = <double*>malloc((nr + 1) * sizeof(double))
    cdef double* v = <double*>malloc((nc + 1) * sizeof(double))
    cdef double* minv = <double*>malloc((nc + 1) * sizeof(double))
    cdef Py_ssize_t* p = <Py_ssize_t*>malloc((nc + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* way = <Py_ssize_t*>malloc((nc + 1) * sizeof(Py_ssize_t))
    cdef char* used = <char*>malloc(nc + 1)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    assign = np.full(nr, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] av = assign
    try:
        with nogil:
            for i in range(nr + 1):
                u[i] = 0.0
            for j in range(nc + 1):
                v[j] = 0.0
                p[j] = 0
                way[j] = 0
            for i in range(1, nr + 1):
                p[0] = i
                j0 = 0
                for j in range(nc + 1):
                    minv[j] = INFINITY
                    used[j] = 0
                while True:
                    used[j0] = 1
                    i0 = p[j0]
                    delta = INFINITY
                    j1 = 0
                    for j in range(1, nc + 1):
                        if not used[j]:
                            cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                            if cur < minv[j]:
                                minv[j] = cur
                                way[j] = j0
                            if minv[j] < delta:
                                delta = minv[j]
                                j1 = j
                    for j in range(nc + 1):
                        if used[j]:
                            u[p[j]] += delta
                            v[j] -= delta
                        else:
                            minv[j] -= delta
                    j0 = j1
                    if p[j0] == 0:
                        break
                while True:
                    j1 = way[j0]
                    p[j0] = p[j1]
                    j0 = j1
                    if j0 == 0:
                        break
            for j in range(1, nc + 1):
                if p[j]:
                    av[p[j] - 1] = j - 1
    finally:
        free(u)
        free(v)
        free(minv)
        free(p)
        free(way)
        free(used)
    return assign
