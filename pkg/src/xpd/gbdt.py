"""Black-box exemplar: second-order gradient-boosted trees with logistic loss."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import Dataset
from .errors import DataError
from .metrics import roc_auc
from .trees import (
    MAX_BINS,
    BinMap,
    FlatForest,
    TreeNode,
    TreeParams,
    apply_forest,
    build_binmap,
    fit_tree_with_predictions,
    flatten_forest,
    tree_from_dict,
    tree_to_dict,
)

PROB_CLAMP = 1e-6
MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GbdtConfig:
    n_rounds: int = 300
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    early_stopping_patience: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1 or self.early_stopping_patience < 1:
            raise ValueError("n_rounds, max_depth and patience must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError("regularization terms must be non-negative")


@dataclass(eq=False)
class GbdtModel:
    """Additive tree ensemble; margin(x) = base_score + learning_rate * sum of trees."""

    base_score: float
    learning_rate: float
    trees: list[TreeNode]
    feature_names: list[str] | None = None
    fit_seconds: float = 0.0

    @property
    def n_features_hint(self) -> int | None:
        return len(self.feature_names) if self.feature_names else None

    def flat(self) -> FlatForest:
        return flatten_forest(self.trees)


def _clamped_logit(p: float) -> float:
    p = min(max(p, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return float(np.log(p / (1.0 - p)))


def gbdt_fit(train: Dataset, valid: Dataset, cfg: GbdtConfig = GbdtConfig()) -> GbdtModel:
    """Boost trees on logistic gradients g = p - y, h = p(1 - p).

    Stops when validation AUC has not improved for `early_stopping_patience`
    rounds and keeps the prefix with the best validation AUC. Early stopping is
    disabled when the validation split has a single class (AUC undefined).
    """
    t0 = time.perf_counter()
    y = train.y.astype(np.float64)
    base = _clamped_logit(float(y.mean()))
    binmap = build_binmap(train.x, MAX_BINS)
    xb = binmap.transform(train.x)
    params = TreeParams(
        max_depth=cfg.max_depth,
        reg_lambda=cfg.reg_lambda,
        gamma=cfg.gamma,
        min_child_weight=cfg.min_child_weight,
    )

    margins = np.full(train.n_rows, base)
    valid_margins = np.full(valid.n_rows, base)
    es_active = len(set(valid.y.tolist())) == 2
    best_auc, best_round = -np.inf, -1

    trees: list[TreeNode] = []
    for round_no in range(cfg.n_rounds):
        p = expit(margins)
        g = p - y
        h = p * (1.0 - p)
        tree, train_pred = fit_tree_with_predictions(xb, binmap, g, h, params)
        trees.append(tree)
        margins += cfg.learning_rate * train_pred
        valid_margins += cfg.learning_rate * apply_forest(flatten_forest([tree]), valid.x)
        if es_active:
            auc = roc_auc(valid_margins, valid.y)
            if auc > best_auc:
                best_auc, best_round = auc, round_no
            elif round_no - best_round >= cfg.early_stopping_patience:
                break

    if es_active and best_round >= 0:
        trees = trees[: best_round + 1]
    return GbdtModel(
        base_score=base,
        learning_rate=cfg.learning_rate,
        trees=trees,
        feature_names=train.feature_names,
        fit_seconds=time.perf_counter() - t0,
    )


def _check_width(model: GbdtModel, x: np.ndarray) -> None:
    hint = model.n_features_hint
    if hint is not None and x.shape[-1] != hint:
        raise DataError(f"expected {hint} features, got {x.shape[-1]}")


def gbdt_margin_matrix(model: GbdtModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check_width(model, x)
    return model.base_score + model.learning_rate * apply_forest(model.flat(), x)


def gbdt_margin(model: GbdtModel, x_row: np.ndarray) -> float:
    return float(gbdt_margin_matrix(model, np.asarray(x_row)[None, :])[0])


def gbdt_proba(model: GbdtModel, x_row: np.ndarray) -> float:
    return float(expit(gbdt_margin(model, x_row)))


def gbdt_proba_matrix(model: GbdtModel, x: np.ndarray) -> np.ndarray:
    return expit(gbdt_margin_matrix(model, x))


def gbdt_to_dict(model: GbdtModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "type": "gbdt",
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": model.feature_names,
        "trees": [tree_to_dict(t) for t in model.trees],
    }


def gbdt_from_dict(doc: dict) -> GbdtModel:
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DataError(f"unsupported model schema version {doc.get('schema_version')!r}")
    if doc.get("type") != "gbdt":
        raise DataError(f"not a gbdt model document: type={doc.get('type')!r}")
    return GbdtModel(
        base_score=float(doc["base_score"]),
        learning_rate=float(doc["learning_rate"]),
        trees=[tree_from_dict(t) for t in doc["trees"]],
        feature_names=doc.get("feature_names"),
    )
