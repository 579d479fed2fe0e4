# cython: language_level=3
"""Compiled inner loops. Semantics mirror ``cowgait._pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


cdef void _insertion_sort(double* buf, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(1, n):
        v = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > v:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = v


cdef double _median(double* buf, Py_ssize_t n) noexcept nogil:
    _insertion_sort(buf, n)
    if n % 2 == 1:
        return buf[n // 2]
    return 0.5 * (buf[n // 2 - 1] + buf[n // 2])


def mad_filter(const double[::1] values, Py_ssize_t window, double k, double floor):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t i, j, lo, hi, m
    cdef double med, mad, thr
    cdef Py_ssize_t count = 0
    out_arr = np.empty(n, dtype=np.float64)
    buf_arr = np.empty(window, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] buf = buf_arr
    with nogil:
        for i in range(n):
            lo = i - half if i >= half else 0
            hi = i + half + 1 if i + half + 1 <= n else n
            m = hi - lo
            for j in range(m):
                buf[j] = values[lo + j]
            med = _median(&buf[0], m)
            for j in range(m):
                buf[j] = fabs(values[lo + j] - med)
            mad = _median(&buf[0], m)
            thr = k * 1.4826 * mad
            if thr < floor:
                thr = floor
            if fabs(values[i] - med) > thr:
                out[i] = med
                count += 1
            else:
                out[i] = values[i]
    return out_arr, count


def best_split(const double[:, ::1] X, const double[::1] target,
               const cnp.int64_t[::1] features, Py_ssize_t min_leaf):
    """Best squared-error split over ``features``; (-1, nan, 0.0) if none."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t fi, f, r, nl, nr
    cdef double total = 0.0, parent, sl, sr, gain, xa, xb
    cdef double best_gain = 0.0, best_thr = np.nan
    cdef Py_ssize_t best_f = -1
    cdef cnp.int64_t[::1] order
    cdef double[::1] col
    for r in range(n):
        total += target[r]
    parent = total * total / n
    for fi in range(nf):
        f = features[fi]
        col_arr = np.ascontiguousarray(X[:, f])
        col = col_arr
        order = np.argsort(col_arr, kind="stable").astype(np.int64)
        sl = 0.0
        for r in range(n - 1):
            sl += target[order[r]]
            nl = r + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            xa = col[order[r]]
            xb = col[order[r + 1]]
            if xa == xb:
                continue
            sr = total - sl
            gain = sl * sl / nl + sr * sr / nr - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_thr = 0.5 * (xa + xb)
    return best_f, best_thr, best_gain


def smo_solve(const double[:, ::1] K, const double[::1] y, double C,
              double tol, Py_ssize_t max_iter):
    """Dual SVM solver with second-order working-set selection."""
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t t, i, j, it = 0
    cdef double gmax, gmax2, grad_diff, quad, obj, obj_min, tau = 1e-12
    cdef double old_ai, old_aj, delta, diff, s, dai, daj, yi, yj, qij
    alpha_arr = np.zeros(n, dtype=np.float64)
    grad_arr = -np.ones(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = grad_arr
    cdef bint converged = False
    with nogil:
        while it < max_iter:
            gmax = -INFINITY
            i = -1
            for t in range(n):
                if y[t] > 0:
                    if alpha[t] < C and -G[t] > gmax:
                        gmax = -G[t]
                        i = t
                else:
                    if alpha[t] > 0 and G[t] > gmax:
                        gmax = G[t]
                        i = t
            gmax2 = -INFINITY
            j = -1
            obj_min = INFINITY
            yi = y[i] if i >= 0 else 1.0
            for t in range(n):
                if y[t] > 0:
                    if alpha[t] > 0:
                        if G[t] > gmax2:
                            gmax2 = G[t]
                        grad_diff = gmax + G[t]
                        if i >= 0 and grad_diff > 0:
                            quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                            if quad <= 0:
                                quad = tau
                            obj = -(grad_diff * grad_diff) / quad
                            if obj < obj_min:
                                obj_min = obj
                                j = t
                else:
                    if alpha[t] < C:
                        if -G[t] > gmax2:
                            gmax2 = -G[t]
                        grad_diff = gmax - G[t]
                        if i >= 0 and grad_diff > 0:
                            quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                            if quad <= 0:
                                quad = tau
                            obj = -(grad_diff * grad_diff) / quad
                            if obj < obj_min:
                                obj_min = obj
                                j = t
            if gmax + gmax2 < tol or i < 0 or j < 0:
                converged = True
                break
            it += 1
            yj = y[j]
            qij = yi * yj * K[i, j]
            old_ai = alpha[i]
            old_aj = alpha[j]
            if yi != yj:
                quad = K[i, i] + K[j, j] + 2.0 * qij
                if quad <= 0:
                    quad = tau
                delta = (-G[i] - G[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] += delta
                alpha[j] += delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j] = 0
                        alpha[i] = diff
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0
                        alpha[j] = -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = C - diff
                else:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = C + diff
            else:
                quad = K[i, i] + K[j, j] - 2.0 * qij
                if quad <= 0:
                    quad = tau
                delta = (G[i] - G[j]) / quad
                s = alpha[i] + alpha[j]
                alpha[i] -= delta
                alpha[j] += delta
                if s > C:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = s - C
                else:
                    if alpha[j] < 0:
                        alpha[j] = 0
                        alpha[i] = s
                if s > C:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = s - C
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0
                        alpha[j] = s
            dai = alpha[i] - old_ai
            daj = alpha[j] - old_aj
            for t in range(n):
                G[t] += yi * y[t] * K[i, t] * dai + yj * y[t] * K[j, t] * daj
    return alpha_arr, grad_arr, int(it), bool(converged)
