"""Pure-Python/NumPy implementations of the compiled kernels.

Each function here has the same signature and tie-breaking rules as its
counterpart in ``_kernels.pyx`` so results agree whichever backend loads.
"""
import numpy as np


def mad_filter(values, window, k, floor):
    values = np.ascontiguousarray(values, dtype=np.float64)
    n = values.shape[0]
    half = window // 2
    out = values.copy()
    count = 0
    for i in range(n):
        seg = values[max(0, i - half):min(n, i + half + 1)]
        med = np.median(seg)
        mad = np.median(np.abs(seg - med))
        thr = max(k * 1.4826 * mad, floor)
        if abs(values[i] - med) > thr:
            out[i] = med
            count += 1
    return out, count


def best_split(X, target, features, min_leaf):
    """Best squared-error split over ``features``; (-1, nan, 0.0) if none."""
    n = X.shape[0]
    total = 0.0
    for v in target:
        total += v
    parent = total * total / n
    best_f, best_thr, best_gain = -1, float("nan"), 0.0
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        sl = np.cumsum(target[order])[:-1]
        sr = total - sl
        gain = sl * sl / nl + sr * sr / nr - parent
        ok = size_ok & (xs[:-1] != xs[1:])
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        r = int(np.argmax(gain))
        if gain[r] > best_gain:
            best_gain = float(gain[r])
            best_f = int(f)
            best_thr = 0.5 * (xs[r] + xs[r + 1])
    return best_f, best_thr, best_gain


def smo_solve(K, y, C, tol, max_iter):
    """Dual SVM solver with second-order working-set selection."""
    n = K.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0
    tau = 1e-12
    it = 0
    converged = False
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        score_up = np.where(pos, -G, G)
        if not up.any():
            converged = True
            break
        masked = np.where(up, score_up, -np.inf)
        i = int(np.argmax(masked))
        gmax = masked[i]
        yi = y[i]

        low = np.where(pos, alpha > 0, alpha < C)
        score_low = np.where(pos, G, -G)
        gmax2 = score_low[low].max() if low.any() else -np.inf
        grad_diff = gmax + score_low
        quad = diag[i] + diag - 2.0 * K[i]  # ||phi_i - phi_t||^2
        quad = np.where(quad <= 0, tau, quad)
        cand = low & (grad_diff > 0)
        if gmax + gmax2 < tol or not cand.any():
            converged = True
            break
        obj = np.where(cand, -(grad_diff * grad_diff) / quad, np.inf)
        j = int(np.argmin(obj))
        it += 1

        yj = y[j]
        qij = yi * yj * K[i, j]
        old_ai, old_aj = alpha[i], alpha[j]
        ai, aj = old_ai, old_aj
        if yi != yj:
            q = K[i, i] + K[j, j] + 2.0 * qij
            q = tau if q <= 0 else q
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            q = K[i, i] + K[j, j] - 2.0 * qij
            q = tau if q <= 0 else q
            delta = (G[i] - G[j]) / q
            s = ai + aj
            ai -= delta
            aj += delta
            if s > C:
                if ai > C:
                    ai, aj = C, s - C
            elif aj < 0:
                aj, ai = 0.0, s
            if s > C:
                if aj > C:
                    aj, ai = C, s - C
            elif ai < 0:
                ai, aj = 0.0, s
        alpha[i], alpha[j] = ai, aj
        dai = ai - old_ai
        daj = aj - old_aj
        G += yi * y * K[i] * dai + yj * y * K[j] * daj
    return alpha, G, it, converged
