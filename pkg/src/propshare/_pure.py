"""Pure-Python kernels.

Same contracts as the compiled ``_kernels`` module; used when the extension
is not built or when ``PROPSHARE_BACKEND=python`` is set.  Callers have
already validated inputs: arrays are float64, ``y + eps > 0`` wherever the
weight is positive, and ``X > 0``.
"""
import numpy as np

SWAP_SLACK = 1e-12
DEGENERATE_GAP = 1e-12


def best_response_subset(w, y, X, eps, subset):
    """Water-filling best response restricted to the machines in ``subset``.

    Returns ``(x, U)`` with ``x`` full length.  If no machine in the subset
    has positive weight the result is ``(zeros, 0.0)``.
    """
    n = w.shape[0]
    x = np.zeros(n)
    subset = np.asarray(subset, dtype=np.intp)
    ws = w[subset]
    keep = ws > 0
    if not keep.any():
        return x, 0.0
    cand = subset[keep]
    ws = ws[keep]
    ys = y[cand] + eps
    ratio = ws / ys
    order = np.lexsort((cand, -ratio))
    sq = np.sqrt(ws * ys)[order]
    yy = ys[order]
    root_sum = np.cumsum(sq)
    opp_sum = np.cumsum(yy)
    last = sq / root_sum * (X + opp_sum) - yy
    k = int(np.nonzero(last >= 0)[0][-1]) + 1
    xs = sq[:k] / root_sum[k - 1] * (X + opp_sum[k - 1]) - yy[:k]
    np.maximum(xs, 0.0, out=xs)
    idx = cand[order[:k]]
    x[idx] = xs
    util = float(np.sum(ws[order[:k]] * xs / (xs + yy[:k])))
    return x, util


def best_response(w, y, X, eps):
    return best_response_subset(w, y, X, eps, np.arange(w.shape[0]))


def ratio_order(w, y, eps):
    """Machines sorted by decreasing ``w / (y + eps)``, ties by index."""
    n = w.shape[0]
    ys = y + eps
    ratio = np.zeros(n)
    np.divide(w, ys, out=ratio, where=w > 0)
    return np.lexsort((np.arange(n), -ratio))


def local_search(w, y, X, k, eps):
    """Single-swap local search for the bounded-parallelism best response."""
    n = w.shape[0]
    if k >= n:
        return best_response(w, y, X, eps)[0]
    current = sorted(int(j) for j in ratio_order(w, y, eps)[:k])
    x, util = best_response_subset(w, y, X, eps, current)
    improved = True
    while improved:
        improved = False
        members = set(current)
        outside = [j for j in range(n) if j not in members]
        for i in current:
            for j in outside:
                trial = sorted(members - {i} | {j})
                xt, ut = best_response_subset(w, y, X, eps, trial)
                if ut > util + SWAP_SLACK:
                    current, x, util = trial, xt, ut
                    improved = True
                    break
            if improved:
                break
    return x


def greedy_step(x, w, y, delta, eps, max_support):
    """Move ``min(delta, x_low)`` from the lowest- to the highest-marginal machine."""
    n = x.shape[0]
    opp = y + eps
    denom = (opp + x) ** 2
    marg = np.zeros(n)
    pos = w > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(w * opp, denom, out=marg, where=pos)
    marg[pos & (denom == 0)] = np.inf
    support = x > 0
    return _greedy_move(x, marg, support, delta, max_support)


def greedy_step_marginals(x, marg, delta, max_support):
    return _greedy_move(x, marg, x > 0, delta, max_support)


def _greedy_move(x, marg, support, delta, max_support):
    out = x.copy()
    supp_idx = np.nonzero(support)[0]
    if supp_idx.size == 0:
        return out
    low = int(supp_idx[np.argmin(marg[supp_idx])])
    if supp_idx.size >= max_support:
        high = int(supp_idx[np.argmax(marg[supp_idx])])
    else:
        high = int(np.argmax(marg))
    if not marg[high] - marg[low] > DEGENERATE_GAP:
        return out
    amt = min(delta, out[low])
    out[low] -= amt
    out[high] += amt
    return out


def hungarian_min(cost):
    """Minimum-cost assignment of every row to a distinct column.

    Shortest augmenting path with vertex potentials, O(rows^2 * cols);
    requires ``rows <= cols``.  Returns the column index of each row.
    """
    cost = np.asarray(cost, dtype=float)
    nr, nc = cost.shape
    if nr > nc:
        raise ValueError("hungarian_min needs rows <= cols")
    # 1-based bookkeeping; column 0 is the virtual root.
    u = np.zeros(nr + 1)
    v = np.zeros(nc + 1)
    p = np.zeros(nc + 1, dtype=np.intp)
    way = np.zeros(nc + 1, dtype=np.intp)
    a = np.zeros((nr + 1, nc + 1))
    a[1:, 1:] = cost
    for i in range(1, nr + 1):
        p[0] = i
        j0 = 0
        minv = np.full(nc + 1, np.inf)
        used = np.zeros(nc + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = a[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            used_idx = np.nonzero(used)[0]
            u[p[used_idx]] += delta
            v[used_idx] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assign = np.full(nr, -1, dtype=np.intp)
    for j in range(1, nc + 1):
        if p[j]:
            assign[p[j] - 1] = j - 1
    return assign
