"""Exact per-prediction feature attributions.

Three routes, kept deliberately independent of each other:
  - tree_shap: polynomial-time path-dependent Shapley values for tree
    ensembles, weighting conditional expectations by node cover;
  - ebm_attribution: the closed form for additive models (centered shape
    table lookups);
  - brute_force_shapley: subset enumeration against a black-box margin
    function with an interventional background — the verification oracle.

All attributions are in margin (log-odds) units and satisfy local accuracy:
base_value + sum(phi) equals the model margin.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import factorial

import numpy as np

from ._shap_kernel import treeshap_matrix
from .dataset import Dataset
from .ebm import EbmModel, ebm_margin_matrix
from .errors import DataError
from .gbdt import GbdtModel, gbdt_margin_matrix
from .trees import FlatForest, TreeNode

MAX_BRUTE_FORCE_FEATURES = 12


@dataclass(frozen=True)
class Attribution:
    """Per-feature contributions plus the expectation they deviate from."""

    phi: np.ndarray
    base_value: float
    model_margin: float

    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + float(self.phi.sum()) - self.model_margin)


def _expected_leaf(node: TreeNode) -> float:
    """Cover-weighted expected leaf value of one tree."""
    if node.is_leaf:
        return node.value
    lc, rc = node.left.cover, node.right.cover
    total = lc + rc
    if total <= 0:
        raise DataError("tree has zero cover at an internal node")
    return (_expected_leaf(node.left) * lc + _expected_leaf(node.right) * rc) / total


def _ensemble_base_value(model: GbdtModel) -> float:
    return model.base_score + model.learning_rate * sum(
        _expected_leaf(t) for t in model.trees
    )


def _check_covers(model: GbdtModel) -> None:
    for t in model.trees:
        if t.cover <= 0:
            raise DataError("tree_shap requires positive cover at every root")


def _treeshap_phis(flat: FlatForest, x: np.ndarray, learning_rate: float,
                   workers: int = 1) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    phi = np.zeros_like(x)
    if workers <= 1 or x.shape[0] < 2 * workers:
        treeshap_matrix(flat.feature, flat.threshold, flat.left, flat.right,
                        flat.value, flat.cover, flat.starts, x, phi)
    else:
        # disjoint row blocks, assembled in place by index
        blocks = np.array_split(np.arange(x.shape[0]), workers)
        def run(rows):
            treeshap_matrix(flat.feature, flat.threshold, flat.left, flat.right,
                            flat.value, flat.cover, flat.starts,
                            x[rows], phi[rows[0]: rows[-1] + 1])
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, [b for b in blocks if b.size]))
    phi *= learning_rate
    return phi


def tree_shap(model: GbdtModel, x_row: np.ndarray) -> Attribution:
    """Exact Shapley values of the cover-weighted conditional-expectation game."""
    _check_covers(model)
    x = np.atleast_2d(np.asarray(x_row, dtype=np.float64))
    phi = _treeshap_phis(model.flat(), x, model.learning_rate)[0]
    return Attribution(
        phi=phi,
        base_value=_ensemble_base_value(model),
        model_margin=float(gbdt_margin_matrix(model, x)[0]),
    )


def ebm_attribution(model: EbmModel, x_row: np.ndarray) -> Attribution:
    """Additive models attribute in closed form: the centered shape values."""
    x = np.atleast_2d(np.asarray(x_row, dtype=np.float64))
    if x.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got {x.shape[1]}")
    xb = model.binmap.transform(x)
    phi = np.array([model.shape_tables[j][xb[0, j]] for j in range(model.n_features)])
    return Attribution(
        phi=phi,
        base_value=model.intercept,
        model_margin=float(ebm_margin_matrix(model, x)[0]),
    )


def _ebm_phi_matrix(model: EbmModel, x: np.ndarray) -> np.ndarray:
    xb = model.binmap.transform(np.asarray(x, dtype=np.float64))
    phi = np.empty(xb.shape, dtype=np.float64)
    for j in range(model.n_features):
        phi[:, j] = model.shape_tables[j][xb[:, j]]
    return phi


def brute_force_shapley(predict, background: np.ndarray, x_row: np.ndarray,
                        d: int) -> Attribution:
    """Exact Shapley values by subset enumeration (the verification oracle).

    The value of coalition S is the background average of `predict` with the
    features in S pinned to x (interventional expectation). `predict` must
    accept an (m, d) matrix and return a margin per row. Cost is
    2^d * len(background) model evaluations, hence the d <= 12 guard.
    """
    if d > MAX_BRUTE_FORCE_FEATURES:
        raise ValueError(f"brute force is limited to {MAX_BRUTE_FORCE_FEATURES} features")
    bg = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if bg.shape[0] == 0:
        raise ValueError("background must be non-empty")
    if bg.shape[1] != d:
        raise ValueError("background width must equal d")
    x_row = np.asarray(x_row, dtype=np.float64)

    n_subsets = 1 << d
    values = np.empty(n_subsets, dtype=np.float64)
    for s in range(n_subsets):
        hybrid = bg.copy()
        for j in range(d):
            if s >> j & 1:
                hybrid[:, j] = x_row[j]
        values[s] = float(np.mean(predict(hybrid)))

    sizes = np.array([bin(s).count("1") for s in range(n_subsets)])
    weights = np.array(
        [factorial(k) * factorial(d - 1 - k) / factorial(d) for k in range(d)]
    )
    phi = np.zeros(d)
    subsets = np.arange(n_subsets)
    for j in range(d):
        without = subsets[(subsets >> j) & 1 == 0]
        phi[j] = float(
            np.sum(weights[sizes[without]] * (values[without | (1 << j)] - values[without]))
        )
    return Attribution(
        phi=phi,
        base_value=float(values[0]),
        model_margin=float(values[n_subsets - 1]),
    )


def attribution_matrix(model, x, workers: int = 1) -> tuple[np.ndarray, float]:
    """Per-instance phi rows for a whole dataset, plus the shared base value.

    Accepts a Dataset or a raw matrix; dispatches on the model family. Pure
    per-row work, parallelizable across rows with index-ordered assembly.
    """
    if isinstance(x, Dataset):
        x = x.x
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if isinstance(model, GbdtModel):
        _check_covers(model)
        phi = _treeshap_phis(model.flat(), x, model.learning_rate, workers=workers)
        return phi, _ensemble_base_value(model)
    if isinstance(model, EbmModel):
        return _ebm_phi_matrix(model, x), model.intercept
    raise TypeError(f"unsupported model type {type(model).__name__}")
