"""Deterministic kd-tree construction over a window's feature rows.

The tree is built once per search window and stored as flat arrays so both
the compiled and the fallback query kernels can walk it. Nodes carry tight
bounding boxes (per-dimension min/max of their points); leaves own
contiguous ranges of a permutation array whose entries are window-local
indices, ascending within each leaf so scans meet ties lowest-index-first.

Splits take the widest dimension at the median (argpartition), which is
deterministic for identical input; a zero-extent node becomes a leaf
regardless of size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DEPTH = 60


@dataclass
class KdTree:
    points: np.ndarray  # (M, D) rows permuted to leaf order, C-contiguous
    perm: np.ndarray  # (M,) int64: Xp position -> window-local index
    left: np.ndarray  # (K,) int32, -1 for leaves
    right: np.ndarray  # (K,) int32
    start: np.ndarray  # (K,) int64 leaf range into perm
    end: np.ndarray  # (K,) int64
    lo: np.ndarray  # (K, D)
    hi: np.ndarray  # (K, D)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def build_kdtree(X: np.ndarray, leaf_size: int = 16) -> KdTree:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("kd-tree needs a non-empty (M, D) matrix")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")

    left, right = [], []
    starts, ends = [], []
    los, his = [], []
    perm = np.empty(X.shape[0], dtype=np.int64)
    cursor = 0

    def new_node(lo, hi):
        left.append(-1)
        right.append(-1)
        starts.append(0)
        ends.append(0)
        los.append(lo)
        his.append(hi)
        return len(left) - 1

    # Stack of (node_id, indices, depth); children are created before they
    # are pushed so node ids are assigned in a deterministic order.
    root_idx = np.arange(X.shape[0], dtype=np.int64)
    lo0 = X.min(axis=0)
    hi0 = X.max(axis=0)
    stack = [(new_node(lo0, hi0), root_idx, 0)]
    while stack:
        node, idxs, depth = stack.pop()
        lo = los[node]
        hi = his[node]
        extent = hi - lo
        if idxs.size <= leaf_size or depth >= MAX_DEPTH or not np.any(extent > 0):
            nonlocal_start = cursor
            idxs = np.sort(idxs)
            perm[nonlocal_start : nonlocal_start + idxs.size] = idxs
            starts[node] = nonlocal_start
            ends[node] = nonlocal_start + idxs.size
            cursor += idxs.size
            continue
        dim = int(np.argmax(extent))
        k = idxs.size // 2
        order = np.argpartition(X[idxs, dim], k)
        li = idxs[order[:k]]
        ri = idxs[order[k:]]
        lchild = new_node(X[li].min(axis=0), X[li].max(axis=0))
        rchild = new_node(X[ri].min(axis=0), X[ri].max(axis=0))
        left[node] = lchild
        right[node] = rchild
        stack.append((rchild, ri, depth + 1))
        stack.append((lchild, li, depth + 1))

    assert cursor == X.shape[0]
    return KdTree(
        points=np.ascontiguousarray(X[perm]),
        perm=perm,
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        start=np.asarray(starts, dtype=np.int64),
        end=np.asarray(ends, dtype=np.int64),
        lo=np.ascontiguousarray(np.asarray(los)),
        hi=np.ascontiguousarray(np.asarray(his)),
    )
