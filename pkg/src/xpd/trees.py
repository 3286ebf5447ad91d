"""Shared decision-tree core: quantile binning, second-order split search,
prediction, and flat-array forms used by the attribution kernels.

Split scoring follows the standard second-order boosting objective:
leaf weight w = -G/(H + lambda) and
gain = 1/2 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)] - gamma.

Routing convention is fixed for reproducibility: go left iff value < threshold
(ties to the right). Candidate split thresholds are bin edges, and a value
equal to an edge falls in the bin above it, so binned and threshold routing
agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_BINS = 256


@dataclass(frozen=True)
class BinMap:
    """Per-feature sorted bin upper edges; k edges define k+1 bins."""

    edges: tuple[np.ndarray, ...]

    @property
    def n_features(self) -> int:
        return len(self.edges)

    @property
    def n_bins(self) -> list[int]:
        return [e.size + 1 for e in self.edges]

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Map values to bin indices; out-of-range values clamp to end bins."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            out[:, j] = np.searchsorted(e, x[:, j], side="right")
        return out


def build_binmap(x: np.ndarray, max_bins: int = MAX_BINS) -> BinMap:
    """Quantile-style bin edges from training data.

    Edges are midpoints between adjacent distinct values, so every bin contains
    at least one training value; features with fewer than `max_bins` distinct
    values get exactly one bin per distinct value.
    """
    if not 2 <= max_bins <= 256:
        raise ValueError("max_bins must lie in [2, 256]")
    x = np.asarray(x, dtype=np.float64)
    edges = []
    n = x.shape[0]
    for j in range(x.shape[1]):
        uniq, counts = np.unique(x[:, j], return_counts=True)
        if uniq.size <= max_bins:
            e = (uniq[:-1] + uniq[1:]) / 2.0
        else:
            cum = np.cumsum(counts)
            targets = n * np.arange(1, max_bins) / max_bins
            pos = np.searchsorted(cum, targets)
            pos = np.unique(np.minimum(pos, uniq.size - 2))
            e = (uniq[pos] + uniq[pos + 1]) / 2.0
        # guard against float-degenerate midpoints producing an empty bin
        if e.size:
            b = np.searchsorted(e, x[:, j], side="right")
            occupied = np.bincount(b, minlength=e.size + 1) > 0
            while not occupied.all():
                empty = int(np.flatnonzero(~occupied)[0])
                e = np.delete(e, min(empty, e.size - 1))
                b = np.searchsorted(e, x[:, j], side="right")
                occupied = np.bincount(b, minlength=e.size + 1) > 0
        edges.append(np.ascontiguousarray(e))
    return BinMap(edges=tuple(edges))


def split_gain(gl, hl, gr, hr, reg_lambda: float, gamma: float):
    """Gain of a candidate split given child gradient/hessian sums."""
    parent = (gl + gr) ** 2 / (hl + hr + reg_lambda)
    return 0.5 * (gl**2 / (hl + reg_lambda) + gr**2 / (hr + reg_lambda) - parent) - gamma


def leaf_value(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    return -g_sum / (h_sum + reg_lambda)


@dataclass
class TreeNode:
    """Binary tree node: internal (feature, threshold, children) or leaf (value).

    Every node carries `cover`, the training hessian sum routed through it;
    internal covers equal the sum of the child covers exactly.
    """

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float | None = None
    cover: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 6
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    allowed_features: tuple[int, ...] | None = None  # None = all features
    max_leaves: int | None = None  # None = bounded by depth only


def fit_tree(x_binned: np.ndarray, binmap: BinMap, g: np.ndarray, h: np.ndarray,
             params: TreeParams) -> TreeNode:
    """Greedy histogram tree on binned features; see module docstring for the
    objective. Ties on gain break to the lowest feature index, then the lowest
    threshold. Deterministic for fixed inputs."""
    tree, _ = fit_tree_with_predictions(x_binned, binmap, g, h, params)
    return tree


def fit_tree_with_predictions(
    x_binned: np.ndarray, binmap: BinMap, g: np.ndarray, h: np.ndarray,
    params: TreeParams,
) -> tuple[TreeNode, np.ndarray]:
    """fit_tree plus the fitted tree's output on each training row (free
    byproduct of the row partition; avoids a re-traversal per boosting round)."""
    n, d = x_binned.shape
    if n == 0:
        raise ValueError("empty input")
    if g.shape[0] != n or h.shape[0] != n:
        raise ValueError("gradient/hessian length must equal the row count")
    allowed = params.allowed_features
    if allowed is None:
        allowed = tuple(range(d))
    if not allowed:
        raise ValueError("allowed_features must be non-empty")
    allowed = tuple(sorted(allowed))
    lam, gam, mcw = params.reg_lambda, params.gamma, params.min_child_weight
    max_leaves = params.max_leaves if params.max_leaves is not None else 1 << params.max_depth
    nbins = binmap.n_bins
    train_pred = np.empty(n, dtype=np.float64)

    def best_candidate(rows: np.ndarray, depth: int):
        if depth >= params.max_depth or rows.size < 2:
            return None
        xb = x_binned[rows]
        g_rows, h_rows = g[rows], h[rows]
        g_tot, h_tot = g_rows.sum(), h_rows.sum()
        best = None  # (gain, feature, bin_j)
        for f in allowed:
            nb = nbins[f]
            if nb < 2:
                continue
            col = xb[:, f]
            cnt = np.bincount(col, minlength=nb)
            gb = np.bincount(col, weights=g_rows, minlength=nb)
            hb = np.bincount(col, weights=h_rows, minlength=nb)
            cl = np.cumsum(cnt)[:-1]
            gl_ = np.cumsum(gb)[:-1]
            hl_ = np.cumsum(hb)[:-1]
            cr = rows.size - cl
            gr_, hr_ = g_tot - gl_, h_tot - hl_
            ok = (cl > 0) & (cr > 0) & (hl_ >= mcw) & (hr_ >= mcw)
            if not ok.any():
                continue
            gains = np.full(nb - 1, -np.inf)
            gains[ok] = split_gain(gl_[ok], hl_[ok], gr_[ok], hr_[ok], lam, gam)
            j = int(np.argmax(gains))
            if gains[j] > 0 and (best is None or gains[j] > best[0]):
                best = (float(gains[j]), f, j)
        return best

    def make_leaf(rows: np.ndarray) -> TreeNode:
        val = leaf_value(g[rows].sum(), h[rows].sum(), lam)
        train_pred[rows] = val
        return TreeNode(value=float(val), cover=float(h[rows].sum()))

    root = make_leaf(np.arange(n))
    open_splits = []  # (gain, order, node, rows, depth, feature, bin_j)
    cand = best_candidate(np.arange(n), 0)
    if cand is not None:
        open_splits.append((cand[0], 0, root, np.arange(n), 0, cand[1], cand[2]))
    order_id = 1
    n_leaves = 1
    while open_splits and n_leaves < max_leaves:
        # highest gain wins; earliest-created node on exact ties
        pick = max(range(len(open_splits)),
                   key=lambda i: (open_splits[i][0], -open_splits[i][1]))
        _, _, node, rows, depth, f, j = open_splits.pop(pick)
        mask = x_binned[rows, f] <= j
        rows_l, rows_r = rows[mask], rows[~mask]
        node.feature = f
        node.threshold = float(binmap.edges[f][j])
        node.value = None
        node.left = make_leaf(rows_l)
        node.right = make_leaf(rows_r)
        n_leaves += 1
        for child, child_rows in ((node.left, rows_l), (node.right, rows_r)):
            c = best_candidate(child_rows, depth + 1)
            if c is not None:
                open_splits.append((c[0], order_id, child, child_rows, depth + 1, c[1], c[2]))
                order_id += 1

    _fix_covers(root)
    return root, train_pred


def _fix_covers(node: TreeNode) -> float:
    """Recompute internal covers bottom-up so additivity is exact."""
    if node.is_leaf:
        return node.cover
    node.cover = _fix_covers(node.left) + _fix_covers(node.right)
    return node.cover


def predict_tree(tree: TreeNode, x_row: np.ndarray) -> float:
    """Route one row to a leaf: left iff value < threshold, ties right."""
    node = tree
    while not node.is_leaf:
        node = node.left if x_row[node.feature] < node.threshold else node.right
    return node.value


def tree_depth(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def tree_n_leaves(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 1
    return tree_n_leaves(tree.left) + tree_n_leaves(tree.right)


@dataclass(frozen=True)
class FlatForest:
    """Array form of a tree list: feature < 0 marks a leaf; children index into
    the same arrays; `starts` delimits trees like indptr."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    starts: np.ndarray
    max_depth: int


def flatten_forest(trees: Sequence[TreeNode]) -> FlatForest:
    feat, thr, left, right, value, cover, starts = [], [], [], [], [], [], [0]
    max_depth = 0

    def add(node: TreeNode, depth: int) -> int:
        nonlocal max_depth
        max_depth = max(max_depth, depth)
        i = len(feat)
        feat.append(-1 if node.is_leaf else node.feature)
        thr.append(0.0 if node.is_leaf else node.threshold)
        value.append(node.value if node.is_leaf else 0.0)
        cover.append(node.cover)
        left.append(-1)
        right.append(-1)
        if not node.is_leaf:
            left[i] = add(node.left, depth + 1)
            right[i] = add(node.right, depth + 1)
        return i

    for t in trees:
        add(t, 0)
        starts.append(len(feat))
    return FlatForest(
        feature=np.array(feat, dtype=np.int64),
        threshold=np.array(thr, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
        cover=np.array(cover, dtype=np.float64),
        starts=np.array(starts, dtype=np.int64),
        max_depth=max_depth,
    )


def apply_forest(flat: FlatForest, x: np.ndarray) -> np.ndarray:
    """Sum of leaf values over all trees for each row (unscaled)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros(n, dtype=np.float64)
    rows = np.arange(n)
    for t in range(flat.starts.size - 1):
        node = np.full(n, flat.starts[t], dtype=np.int64)
        while True:
            f = flat.feature[node]
            active = f >= 0
            if not active.any():
                break
            idx = rows[active]
            go_left = x[idx, f[active]] < flat.threshold[node[active]]
            node[idx] = np.where(go_left, flat.left[node[active]], flat.right[node[active]])
        out += flat.value[node]
    return out


def apply_tree(tree: TreeNode, x: np.ndarray) -> np.ndarray:
    return apply_forest(flatten_forest([tree]), x)


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value, "cover": node.cover}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "cover": node.cover,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(d: dict) -> TreeNode:
    if "value" in d:
        return TreeNode(value=float(d["value"]), cover=float(d["cover"]))
    return TreeNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        cover=float(d["cover"]),
        left=tree_from_dict(d["left"]),
        right=tree_from_dict(d["right"]),
    )


def trees_equal(a: TreeNode, b: TreeNode, value_tol: float = 0.0) -> bool:
    """Structural equality; leaf values and thresholds within `value_tol`."""
    if a.is_leaf != b.is_leaf:
        return False
    if a.is_leaf:
        return abs(a.value - b.value) <= value_tol
    if a.feature != b.feature:
        return False
    if abs(a.threshold - b.threshold) > value_tol:
        return False
    return trees_equal(a.left, b.left, value_tol) and trees_equal(a.right, b.right, value_tol)
