"""Compiled kernel for exact per-instance tree attributions.

Implements the path-dependent polynomial-time Shapley algorithm for tree
ensembles: a depth-first walk maintains, per recursion level, the "unique
path" of distinct features encountered so far, each with the fraction of
cover-weighted paths that flow down when the feature is out of the coalition
(zero fraction) and the 0/1 indicator of x following the split (one fraction),
plus combinatorial subset weights. Leaf contributions are read off by
unwinding one path element at a time.

The pweight entry at subset size k equals
  sum over subsets S of path features with |S| = k of
  prod_{j in S} one_j * prod_{j not in S} zero_j * k! (m - k)! / (m + 1)!
for a path of m real features, which the extend/unwind recurrences below
maintain exactly.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _extend(pd, pz, po, pw, m, zero, one, feat):
    # add element at slot m (path had m real elements before)
    pd[m] = feat
    pz[m] = zero
    po[m] = one
    pw[m] = 1.0 if m == 0 else 0.0
    for i in range(m - 1, -1, -1):
        pw[i + 1] += one * pw[i] * (i + 1.0) / (m + 1.0)
        pw[i] = zero * pw[i] * (m - i) / (m + 1.0)


@njit(cache=True, nogil=True, inline="always")
def _unwound_sum(pz, po, pw, m, i):
    # total pweight of the path with element i removed (m = last path index)
    one = po[i]
    zero = pz[i]
    total = 0.0
    if one != 0.0:
        nxt = pw[m]
        for j in range(m - 1, -1, -1):
            tmp = nxt / ((j + 1.0) * one)
            total += tmp
            nxt = pw[j] - tmp * zero * (m - j)
    else:
        for j in range(m - 1, -1, -1):
            total += pw[j] / (zero * (m - j))
    return total * (m + 1.0)


@njit(cache=True, nogil=True, inline="always")
def _unwind(pd, pz, po, pw, m, i):
    # remove element i in place, leaving a valid path of m - 1 real elements
    one = po[i]
    zero = pz[i]
    if one != 0.0:
        nxt = pw[m]
        for j in range(m - 1, -1, -1):
            tmp = pw[j]
            pw[j] = nxt * (m + 1.0) / ((j + 1.0) * one)
            nxt = tmp - pw[j] * zero * (m - j) / (m + 1.0)
    else:
        for j in range(m - 1, -1, -1):
            pw[j] = pw[j] * (m + 1.0) / (zero * (m - j))
    for q in range(i, m):
        pd[q] = pd[q + 1]
        pz[q] = pz[q + 1]
        po[q] = po[q + 1]


@njit(cache=True, nogil=True)
def treeshap_matrix(feat, thr, left, right, value, cover, starts, x, phi):
    """Accumulate unscaled per-feature attributions for every row into phi."""
    n_rows = x.shape[0]
    n_trees = starts.shape[0] - 1
    n_nodes = feat.shape[0]

    # recursion-level path buffers and an explicit DFS stack
    max_lev = n_nodes + 2
    width = x.shape[1] + 3
    # bound levels by the deepest possible chain in any single tree
    deepest = 0
    for t in range(n_trees):
        span = starts[t + 1] - starts[t]
        if span > deepest:
            deepest = span
    levels = deepest + 2
    pd = np.empty((levels, width), dtype=np.int64)
    pz = np.empty((levels, width), dtype=np.float64)
    po = np.empty((levels, width), dtype=np.float64)
    pw = np.empty((levels, width), dtype=np.float64)
    s_node = np.empty(levels + 1, dtype=np.int64)
    s_lev = np.empty(levels + 1, dtype=np.int64)
    s_plen = np.empty(levels + 1, dtype=np.int64)
    s_pz = np.empty(levels + 1, dtype=np.float64)
    s_po = np.empty(levels + 1, dtype=np.float64)
    s_pi = np.empty(levels + 1, dtype=np.int64)

    for r in range(n_rows):
        for t in range(n_trees):
            sp = 0
            s_node[sp] = starts[t]
            s_lev[sp] = 0
            s_plen[sp] = 0
            s_pz[sp] = 1.0
            s_po[sp] = 1.0
            s_pi[sp] = -1
            sp += 1
            while sp > 0:
                sp -= 1
                node = s_node[sp]
                lev = s_lev[sp]
                plen = s_plen[sp]
                in_z = s_pz[sp]
                in_o = s_po[sp]
                in_f = s_pi[sp]
                if lev > 0:
                    for q in range(plen):
                        pd[lev, q] = pd[lev - 1, q]
                        pz[lev, q] = pz[lev - 1, q]
                        po[lev, q] = po[lev - 1, q]
                        pw[lev, q] = pw[lev - 1, q]
                _extend(pd[lev], pz[lev], po[lev], pw[lev], plen, in_z, in_o, in_f)
                m = plen  # unique_depth after extend
                f = feat[node]
                if f < 0:
                    for i in range(1, m + 1):
                        w = _unwound_sum(pz[lev], po[lev], pw[lev], m, i)
                        phi[r, pd[lev, i]] += w * (po[lev, i] - pz[lev, i]) * value[node]
                else:
                    if x[r, f] < thr[node]:
                        hot, cold = left[node], right[node]
                    else:
                        hot, cold = right[node], left[node]
                    iz = 1.0
                    io = 1.0
                    k = -1
                    for q in range(1, m + 1):
                        if pd[lev, q] == f:
                            k = q
                            break
                    if k >= 0:
                        iz = pz[lev, k]
                        io = po[lev, k]
                        _unwind(pd[lev], pz[lev], po[lev], pw[lev], m, k)
                        m -= 1
                    c_node = cover[node]
                    s_node[sp] = cold
                    s_lev[sp] = lev + 1
                    s_plen[sp] = m + 1
                    s_pz[sp] = iz * cover[cold] / c_node
                    s_po[sp] = 0.0
                    s_pi[sp] = f
                    sp += 1
                    s_node[sp] = hot
                    s_lev[sp] = lev + 1
                    s_plen[sp] = m + 1
                    s_pz[sp] = iz * cover[hot] / c_node
                    s_po[sp] = io
                    s_pi[sp] = f
                    sp += 1
