"""Shared test construction: random tree ensembles whose path-dependent and
interventional attributions provably coincide.

Trees are grown over a full binary product grid with thresholds at 0.5 and no
feature reused along a path; node covers are set by routing the grid through
the tree. The grid's empirical distribution factorizes, so cover-weighted
conditional expectations equal interventional expectations against the grid
as background, and the two attribution routes must agree to float precision.
"""

import itertools

import numpy as np

from xpd.gbdt import GbdtModel
from xpd.trees import TreeNode


def random_grid_ensemble(rng, max_features=8, max_depth=4, max_trees=4):
    d = int(rng.integers(2, max_features + 1))
    background = np.array(list(itertools.product([0.0, 1.0], repeat=d)))

    def grow(available, depth):
        if depth >= max_depth or not available or rng.random() < 0.3:
            return TreeNode(value=float(rng.normal()))
        f = int(rng.choice(available))
        rest = [a for a in available if a != f]
        return TreeNode(feature=f, threshold=0.5,
                        left=grow(rest, depth + 1), right=grow(rest, depth + 1))

    def route(node, rows):
        node.cover = float(rows.size)
        if node.is_leaf:
            return
        mask = background[rows, node.feature] < node.threshold
        route(node.left, rows[mask])
        route(node.right, rows[~mask])

    trees = []
    for _ in range(int(rng.integers(1, max_trees + 1))):
        tree = grow(list(range(d)), 0)
        if tree.is_leaf:
            tree = TreeNode(feature=int(rng.integers(d)), threshold=0.5,
                            left=TreeNode(value=float(rng.normal())),
                            right=TreeNode(value=float(rng.normal())))
        route(tree, np.arange(background.shape[0]))
        trees.append(tree)
    model = GbdtModel(base_score=float(rng.normal()),
                      learning_rate=float(rng.uniform(0.2, 1.5)), trees=trees)
    x = rng.integers(0, 2, d).astype(float)
    return model, background, x, d
