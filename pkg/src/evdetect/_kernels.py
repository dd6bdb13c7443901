"""Compiled inner loops for tree growing and prediction.

Split search runs level-wise over globally presorted feature columns:
one pass per feature visits every row in ascending value order, buckets
it into its current node, and evaluates a candidate threshold wherever
the value changes within a node. Candidates are accepted on strictly
greater gain, so ties resolve to the lowest feature index and then the
lowest threshold. All accumulation is sequential, which keeps results
bit-identical run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def gather_sorted(source, sorted_idx, out):
    """out[j, i] = source[sorted_idx[j, i]] for every feature j."""
    d, n = sorted_idx.shape
    for j in range(d):
        row_idx = sorted_idx[j]
        row_out = out[j]
        for i in range(n):
            row_out[i] = source[row_idx[i]]


@njit(cache=True)
def scan_level_newton(sorted_idx, val_sorted, p_sorted, y_sorted, node_of,
                      node_g, node_h, lam, min_child_weight, pos_weight,
                      best_gain, best_feat, best_thr, best_gl, best_hl):
    """Best second-order split per node for one tree level.

    Gain of a candidate is GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam),
    with first/second-order sums g = w*(p - y), h = w*p*(1-p) and
    w = pos_weight for positive rows, 1 otherwise. Candidates must leave
    at least min_child_weight of hessian on each side. ``p_sorted`` and
    ``y_sorted`` hold the per-row probability and label already gathered
    into each feature's sort order, keeping the scan sequential.
    """
    d, n = sorted_idx.shape
    m = node_g.shape[0]
    gl = np.zeros(m, dtype=np.float64)
    hl = np.zeros(m, dtype=np.float64)
    last_val = np.zeros(m, dtype=np.float64)
    started = np.zeros(m, dtype=np.uint8)
    for j in range(d):
        for t in range(m):
            gl[t] = 0.0
            hl[t] = 0.0
            started[t] = 0
        idx_row = sorted_idx[j]
        val_row = val_sorted[j]
        p_row = p_sorted[j]
        y_row = y_sorted[j]
        for i in range(n):
            nd = node_of[idx_row[i]]
            if nd < 0:
                continue
            v = val_row[i]
            if started[nd] == 1 and v != last_val[nd]:
                hl_nd = hl[nd]
                hr = node_h[nd] - hl_nd
                if hl_nd >= min_child_weight and hr >= min_child_weight:
                    gl_nd = gl[nd]
                    g_tot = node_g[nd]
                    gr = g_tot - gl_nd
                    gain = (gl_nd * gl_nd / (hl_nd + lam)
                            + gr * gr / (hr + lam)
                            - g_tot * g_tot / (node_h[nd] + lam))
                    if gain > best_gain[nd]:
                        a = last_val[nd]
                        thr = 0.5 * (a + v)
                        if thr <= a:
                            thr = v
                        best_gain[nd] = gain
                        best_feat[nd] = j
                        best_thr[nd] = thr
                        best_gl[nd] = gl_nd
                        best_hl[nd] = hl_nd
            yy = y_row[i]
            pp = p_row[i]
            w = 1.0 + (pos_weight - 1.0) * yy
            gl[nd] += w * (pp - yy)
            hl[nd] += w * pp * (1.0 - pp)
            last_val[nd] = v
            started[nd] = 1


@njit(cache=True)
def scan_level_gini(sorted_idx, val_sorted, w_sorted, y_sorted, node_of,
                    node_w, node_c1, feat_ok, min_leaf_weight,
                    best_dec, best_feat, best_thr, best_wl, best_c1l):
    """Best Gini-decrease split per node for one forest level.

    Decrease of a candidate is C1(W-C1)/W - C1L(WL-C1L)/WL -
    C1R(WR-C1R)/WR (weighted counts; constant 2/W factor dropped).
    Zero-decrease candidates are valid splits as long as each side keeps
    at least min_leaf_weight of sample weight. Only features flagged in
    feat_ok for a node are evaluated there.
    """
    d, n = sorted_idx.shape
    m = node_w.shape[0]
    wl = np.zeros(m, dtype=np.float64)
    c1l = np.zeros(m, dtype=np.float64)
    last_val = np.zeros(m, dtype=np.float64)
    started = np.zeros(m, dtype=np.uint8)
    for j in range(d):
        used = False
        for t in range(m):
            if feat_ok[t, j] != 0:
                used = True
                break
        if not used:
            continue
        for t in range(m):
            wl[t] = 0.0
            c1l[t] = 0.0
            started[t] = 0
        idx_row = sorted_idx[j]
        val_row = val_sorted[j]
        w_row = w_sorted[j]
        y_row = y_sorted[j]
        for i in range(n):
            nd = node_of[idx_row[i]]
            if nd < 0 or feat_ok[nd, j] == 0:
                continue
            v = val_row[i]
            if started[nd] == 1 and v != last_val[nd]:
                wl_nd = wl[nd]
                wr = node_w[nd] - wl_nd
                if wl_nd >= min_leaf_weight and wr >= min_leaf_weight:
                    c1l_nd = c1l[nd]
                    c1r = node_c1[nd] - c1l_nd
                    c1 = node_c1[nd]
                    wt = node_w[nd]
                    dec = (c1 * (wt - c1) / wt
                           - c1l_nd * (wl_nd - c1l_nd) / wl_nd
                           - c1r * (wr - c1r) / wr)
                    if dec > best_dec[nd]:
                        a = last_val[nd]
                        thr = 0.5 * (a + v)
                        if thr <= a:
                            thr = v
                        best_dec[nd] = dec
                        best_feat[nd] = j
                        best_thr[nd] = thr
                        best_wl[nd] = wl_nd
                        best_c1l[nd] = c1l_nd
            ww = w_row[i]
            wl[nd] += ww
            c1l[nd] += ww * y_row[i]
            last_val[nd] = v
            started[nd] = 1


@njit(cache=True)
def apply_splits(node_of, x_cols, split_feat, split_thr, child_slot):
    """Route rows to child slots; rows in non-splitting nodes retire (-1)."""
    n = node_of.shape[0]
    for r in range(n):
        nd = node_of[r]
        if nd < 0:
            continue
        f = split_feat[nd]
        if f < 0:
            node_of[r] = -1
        elif x_cols[f, r] < split_thr[nd]:
            node_of[r] = child_slot[nd]
        else:
            node_of[r] = child_slot[nd] + 1


@njit(cache=True)
def apply_splits_scored(node_of, x_cols, split_feat, split_thr, child_slot,
                        leaf_value, scores):
    """apply_splits plus adding the leaf value to retiring rows' scores."""
    n = node_of.shape[0]
    for r in range(n):
        nd = node_of[r]
        if nd < 0:
            continue
        f = split_feat[nd]
        if f < 0:
            scores[r] += leaf_value[nd]
            node_of[r] = -1
        elif x_cols[f, r] < split_thr[nd]:
            node_of[r] = child_slot[nd]
        else:
            node_of[r] = child_slot[nd] + 1


@njit(cache=True)
def predict_sum(x, feat_all, thr_all, left_all, right_all, value_all,
                roots, out):
    """Sum of per-tree leaf values for every row of ``x`` (row-major)."""
    n = x.shape[0]
    n_trees = roots.shape[0]
    for r in range(n):
        s = 0.0
        for ti in range(n_trees):
            idx = roots[ti]
            f = feat_all[idx]
            while f >= 0:
                if x[r, f] < thr_all[idx]:
                    idx = left_all[idx]
                else:
                    idx = right_all[idx]
                f = feat_all[idx]
            s += value_all[idx]
        out[r] = s
