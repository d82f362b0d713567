"""Pure-numpy search kernels: fallback used when the compiled core is absent.

Both backends must return bit-identical results. Per-row squared distances
accumulate over dimensions in ascending order with one rounding per op,
which numpy elementwise ops reproduce exactly; kd-tree box bounds use the
same op order, so a bound never exceeds the true distance of any point in
the box and strict-inequality pruning is exact.
"""

from __future__ import annotations

import numpy as np


def _window_distances(X: np.ndarray, w: np.ndarray, q: np.ndarray) -> np.ndarray:
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for d in range(X.shape[1]):
        diff = X[:, d] - q[d]
        acc += w[d] * (diff * diff)
    return acc


def brute_query(X, w, q, exclude=-1):
    """Linear scan: (local index, squared distance); ties take the lowest index."""
    d2 = _window_distances(X, w, q)
    if 0 <= exclude < d2.shape[0]:
        d2 = d2.copy()
        d2[exclude] = np.inf
    i = int(np.argmin(d2))
    return i, float(d2[i])


def _box_bound(lo, hi, w, q, best):
    acc = 0.0
    for d in range(q.shape[0]):
        v = q[d]
        if v < lo[d]:
            diff = v - lo[d]
        elif v > hi[d]:
            diff = v - hi[d]
        else:
            continue
        acc += w[d] * (diff * diff)
        if acc > best:
            break
    return acc


def kd_query(Xp, perm, left, right, start, end, lo, hi, w, q, exclude=-1):
    """Exact nearest neighbor over a flattened kd-tree.

    Returns (window-local index, squared distance). `Xp` holds the window's
    rows permuted to leaf order; `perm` maps Xp positions back to
    window-local indices (ascending within each leaf).
    """
    best = np.inf
    best_id = -1
    stack = [(0, 0.0)]
    while stack:
        node, bound = stack.pop()
        if bound > best:
            continue
        l = left[node]
        if l < 0:
            s, e = start[node], end[node]
            dl = _window_distances(Xp[s:e], w, q)
            ids = perm[s:e]
            if exclude >= 0:
                sel = ids == exclude
                if sel.any():
                    dl = dl.copy()
                    dl[sel] = np.inf
            j = int(np.argmin(dl))
            d2 = float(dl[j])
            cand = int(ids[j])
            if d2 < best or (d2 == best and cand < best_id):
                best = d2
                best_id = cand
            continue
        r = right[node]
        bl = _box_bound(lo[l], hi[l], w, q, best)
        br = _box_bound(lo[r], hi[r], w, q, best)
        # Visit the nearer child first; push the farther one for later.
        if bl <= br:
            if br <= best:
                stack.append((r, br))
            if bl <= best:
                stack.append((l, bl))
        else:
            if bl <= best:
                stack.append((l, bl))
            if br <= best:
                stack.append((r, br))
    return best_id, best
