"""CART and random forests, grown by a numba kernel.

Split rule: ``x[feature] <= threshold`` goes left. Candidate thresholds are
midpoints between consecutive distinct sorted values of the node's samples.
Splits maximize the impurity decrease (Gini for classes, variance for
regression); among equal decreases (relative tolerance 1e-12) the lower
feature index and then the lower threshold win. A node becomes a leaf when it
is pure, too small to give both children ``min_samples_leaf`` samples, at
``max_depth``, or has no valid threshold. Leaves predict the majority class
(ties to the smaller class) or the mean target.

Forests draw bootstrap rows and per-node feature subsets from SplitMix64
streams seeded with ``derive_seed(seed, tree_index)``.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from ..rng import derive_seed

TIE_RTOL = 1e-12

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True)
def _sm_next(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _sm_below(state, n):
    un = np.uint64(n)
    rem = (np.uint64(0) - un) % un
    while True:
        x = _sm_next(state)
        if rem == np.uint64(0) or x < np.uint64(0) - rem:
            return np.int64(x % un)


@numba.njit(cache=True)
def _best_split_on(X, y, idx, start, end, f, is_clf, n_classes, min_leaf, parent_score,
                   vals, order, cl, cr):
    """Best (score, threshold) for feature ``f``; score -inf when no valid cut."""
    m = end - start
    for i in range(m):
        vals[i] = X[idx[start + i], f]
    order_view = np.argsort(vals[:m], kind="mergesort")
    for i in range(m):
        order[i] = order_view[i]
    best = -np.inf
    best_thr = 0.0
    if is_clf:
        for k in range(n_classes):
            cl[k] = 0.0
            cr[k] = 0.0
        for i in range(m):
            cr[np.int64(y[idx[start + i]])] += 1.0
    else:
        sl = 0.0
        sr = 0.0
        for i in range(m):
            sr += y[idx[start + i]]
    for i in range(m - 1):
        row = idx[start + order[i]]
        if is_clf:
            c = np.int64(y[row])
            cl[c] += 1.0
            cr[c] -= 1.0
        else:
            sl += y[row]
            sr -= y[row]
        nl = i + 1
        nr = m - nl
        a = vals[order[i]]
        b = vals[order[i + 1]]
        if not (a < b) or nl < min_leaf or nr < min_leaf:
            continue
        if is_clf:
            s = 0.0
            for k in range(n_classes):
                s += cl[k] * cl[k] / nl + cr[k] * cr[k] / nr
        else:
            s = sl * sl / nl + sr * sr / nr
        if best == -np.inf or s > best + TIE_RTOL * abs(best):
            best = s
            thr = 0.5 * (a + b)
            if not thr < b:
                thr = a
            best_thr = thr
    return best, best_thr


@numba.njit(cache=True)
def _grow(X, y, sample_idx, is_clf, n_classes, max_depth, min_leaf, mtry, seed,
          feature, threshold, left, right, value):
    """Grow one tree into the preallocated node arrays; returns node count."""
    n = sample_idx.shape[0]
    p = X.shape[1]
    idx = sample_idx.copy()
    buf = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    order = np.empty(n, dtype=np.int64)
    cl = np.zeros(max(n_classes, 1))
    cr = np.zeros(max(n_classes, 1))
    counts = np.zeros(max(n_classes, 1))
    feats = np.arange(p)
    rng = np.empty(1, dtype=np.uint64)
    rng[0] = seed

    stack_node = np.empty(2 * n + 2, dtype=np.int64)
    stack_start = np.empty(2 * n + 2, dtype=np.int64)
    stack_end = np.empty(2 * n + 2, dtype=np.int64)
    stack_depth = np.empty(2 * n + 2, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start

        # leaf value and purity
        pure = True
        if is_clf:
            for k in range(n_classes):
                counts[k] = 0.0
            for i in range(start, end):
                counts[np.int64(y[idx[i]])] += 1.0
            best_k = 0
            for k in range(1, n_classes):
                if counts[k] > counts[best_k]:
                    best_k = k
            leaf_value = float(best_k)
            pure = counts[best_k] == m
            parent_score = 0.0
            for k in range(n_classes):
                parent_score += counts[k] * counts[k] / m
        else:
            s = 0.0
            y0 = y[idx[start]]
            for i in range(start, end):
                s += y[idx[i]]
                if y[idx[i]] != y0:
                    pure = False
            leaf_value = y0 if pure else s / m
            parent_score = s * s / m

        feature[node] = -1
        threshold[node] = 0.0
        left[node] = -1
        right[node] = -1
        value[node] = leaf_value
        if pure or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        # candidate features: a seeded subset, evaluated in increasing index order
        if mtry < p:
            for i in range(mtry):
                j = i + _sm_below(rng, p - i)
                t = feats[i]
                feats[i] = feats[j]
                feats[j] = t
            first = np.sort(feats[:mtry])
            rest = np.sort(feats[mtry:])
        else:
            first = np.arange(p)
            rest = np.empty(0, dtype=np.int64)

        best = -np.inf
        best_f = -1
        best_thr = 0.0
        for phase in range(2):
            cand = first if phase == 0 else rest
            for ci in range(cand.shape[0]):
                f = cand[ci]
                s, thr = _best_split_on(X, y, idx, start, end, f, is_clf, n_classes,
                                        min_leaf, parent_score, vals, order, cl, cr)
                if s == -np.inf:
                    continue
                if best_f < 0 or s > best + TIE_RTOL * abs(best):
                    best = s
                    best_f = f
                    best_thr = thr
            if best_f >= 0:
                break
        if best_f < 0:
            continue

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = 0
        for i in range(start, end):
            if not X[idx[i], best_f] <= best_thr:
                buf[nl + nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[start + i] = buf[i]

        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        # push right first so the left subtree is grown first
        stack_node[top] = ri
        stack_start[top] = start + nl
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = li
        stack_start[top] = start
        stack_end[top] = start + nl
        stack_depth[top] = depth + 1
        top += 1
    return n_nodes


@numba.njit(cache=True)
def _grow_forest(X, y, is_clf, n_classes, max_depth, min_leaf, mtry, bootstrap, seeds):
    n = X.shape[0]
    n_trees = seeds.shape[0]
    cap = 2 * n + 1
    feature = np.empty(n_trees * cap, dtype=np.int64)
    threshold = np.empty(n_trees * cap)
    left = np.empty(n_trees * cap, dtype=np.int64)
    right = np.empty(n_trees * cap, dtype=np.int64)
    value = np.empty(n_trees * cap)
    offsets = np.empty(n_trees + 1, dtype=np.int64)
    offsets[0] = 0
    rng = np.empty(1, dtype=np.uint64)
    for t in range(n_trees):
        rng[0] = seeds[t]
        if bootstrap:
            sample = np.empty(n, dtype=np.int64)
            for i in range(n):
                sample[i] = _sm_below(rng, n)
        else:
            sample = np.arange(n)
        # the tree's feature stream continues from the bootstrap stream state
        o = offsets[t]
        cnt = _grow(X, y, sample, is_clf, n_classes, max_depth, min_leaf, mtry, rng[0],
                    feature[o:o + cap], threshold[o:o + cap], left[o:o + cap],
                    right[o:o + cap], value[o:o + cap])
        offsets[t + 1] = o + cnt
    total = offsets[n_trees]
    return (feature[:total].copy(), threshold[:total].copy(), left[:total].copy(),
            right[:total].copy(), value[:total].copy(), offsets)


@numba.njit(cache=True)
def _apply_trees(X, feature, threshold, left, right, value, offsets):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty((n, n_trees))
    for t in range(n_trees):
        o = offsets[t]
        for i in range(n):
            node = 0
            while feature[o + node] >= 0:
                if X[i, feature[o + node]] <= threshold[o + node]:
                    node = left[o + node]
                else:
                    node = right[o + node]
            out[i, t] = value[o + node]
    return out


def _depth_arg(max_depth):
    return -1 if max_depth is None or (isinstance(max_depth, float) and math.isinf(max_depth)) else int(max_depth)


def fit_forest(X, y, *, classification, n_classes=3, n_trees=1, max_depth=None, min_samples_leaf=1,
               max_features=None, bootstrap=False, seed=0) -> dict:
    """Grow ``n_trees`` trees; returns the flat node arrays as a state dict."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    p = X.shape[1]
    mtry = p if max_features is None else int(max_features)
    mtry = min(max(mtry, 1), p)
    seeds = np.array([derive_seed(seed, t) for t in range(int(n_trees))], dtype=np.uint64)
    feature, threshold, left, right, value, offsets = _grow_forest(
        X, y, bool(classification), int(n_classes), _depth_arg(max_depth), int(min_samples_leaf),
        mtry, bool(bootstrap), seeds,
    )
    return {
        "feature": feature, "threshold": threshold, "left": left, "right": right,
        "value": value, "offsets": offsets,
    }


def tree_outputs(state, X) -> np.ndarray:
    """Per-tree leaf values, shape ``[n_rows x n_trees]``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _apply_trees(
        X, state["feature"].astype(np.int64), state["threshold"], state["left"].astype(np.int64),
        state["right"].astype(np.int64), state["value"], state["offsets"].astype(np.int64),
    )


def vote(per_tree: np.ndarray, n_classes: int = 3) -> np.ndarray:
    """Majority vote per row; ties go to the smaller class."""
    codes = per_tree.astype(np.int64)
    counts = np.zeros((codes.shape[0], n_classes), dtype=np.int64)
    for k in range(n_classes):
        counts[:, k] = (codes == k).sum(axis=1)
    return np.argmax(counts, axis=1)
