"""Compiled split-search loops."""

import numpy as np
from numba import njit


@njit(cache=True)
def _soft(G, alpha):
    if G > alpha:
        return G - alpha
    if G < -alpha:
        return G + alpha
    return 0.0


@njit(cache=True)
def _score(G, H, alpha, lam):
    t = _soft(G, alpha)
    return t * t / (H + lam)


@njit(cache=True)
def hist_best_split(binned, rows, g, h, n_bins, n_slots, alpha, lam, min_leaf, min_hess):
    """Histogram split search over the columns of ``binned``.

    Returns (gain, column, bin, parent_score); column is -1 when no split
    satisfies the leaf constraints. Ties keep the first column, then the
    first bin.
    """
    k = binned.shape[1]
    Gh = np.zeros((k, n_slots))
    Hh = np.zeros((k, n_slots))
    Nh = np.zeros((k, n_slots), dtype=np.int64)
    G = 0.0
    H = 0.0
    for r in rows:
        gr = g[r]
        hr = h[r]
        G += gr
        H += hr
        for j in range(k):
            b = binned[r, j]
            Gh[j, b] += gr
            Hh[j, b] += hr
            Nh[j, b] += 1
    N = rows.shape[0]
    parent = _score(G, H, alpha, lam)
    best_gain = -np.inf
    best_col = -1
    best_bin = -1
    for j in range(k):
        GL = 0.0
        HL = 0.0
        NL = 0
        for b in range(n_bins[j] - 1):
            GL += Gh[j, b]
            HL += Hh[j, b]
            NL += Nh[j, b]
            NR = N - NL
            if NL < min_leaf or NR < min_leaf:
                continue
            HR = H - HL
            if HL < min_hess or HR < min_hess:
                continue
            gain = 0.5 * (_score(GL, HL, alpha, lam) + _score(G - GL, HR, alpha, lam) - parent)
            if gain > best_gain:
                best_gain = gain
                best_col = j
                best_bin = b
    return best_gain, best_col, best_bin, parent


@njit(cache=True)
def _gini_mass(w_pos, w_tot):
    if w_tot <= 0.0:
        return 0.0
    return 2.0 * w_pos * (w_tot - w_pos) / w_tot


@njit(cache=True)
def gini_best_split(X, rows, y, w, cols, min_leaf):
    """Exact Gini split search for weighted rows.

    Returns (impurity decrease, feature, threshold, parent mass); feature is
    -1 when nothing is admissible.
    """
    m = rows.shape[0]
    w_tot = 0.0
    w_pos = 0.0
    for r in rows:
        w_tot += w[r]
        w_pos += w[r] * y[r]
    parent = _gini_mass(w_pos, w_tot)
    best = -np.inf
    best_feat = -1
    best_thr = 0.0
    if parent <= 0.0:
        return best, best_feat, best_thr, parent
    xs = np.empty(m)
    for j in cols:
        for i in range(m):
            xs[i] = X[rows[i], j]
        order = np.argsort(xs, kind="mergesort")
        wl = 0.0
        pl = 0.0
        for i in range(m - 1):
            r = rows[order[i]]
            wl += w[r]
            pl += w[r] * y[r]
            x_here = xs[order[i]]
            if not x_here < xs[order[i + 1]]:
                continue
            if wl < min_leaf or w_tot - wl < min_leaf:
                continue
            dec = parent - _gini_mass(pl, wl) - _gini_mass(w_pos - pl, w_tot - wl)
            if dec > best:
                best = dec
                best_feat = j
                best_thr = x_here
    return best, best_feat, best_thr, parent
