"""White-box exemplar: cyclic one-feature-at-a-time boosted additive model.

Each feature owns a shape table (one additive score per bin). Fitting walks
the features in index order once per cycle, fits a tiny tree on the current
logistic gradients restricted to that single feature, and folds the scaled
leaf values into the feature's table. After early stopping every table is
re-centered to a count-weighted mean of zero, with the removed means folded
into the intercept, so the printed tables plus intercept reproduce the model
exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import Dataset
from .errors import DataError
from .gbdt import GbdtModel, _clamped_logit
from .metrics import roc_auc
from .trees import BinMap, TreeNode, build_binmap

MODEL_SCHEMA_VERSION = 1

# Coarser bins than the boosted-tree histogram: per-bin score estimates stay
# low-noise, which keeps the learned shape functions smooth enough that small
# input perturbations do not ripple through the attribution vector.
EBM_MAX_BINS = 16


@dataclass(frozen=True)
class EbmConfig:
    max_cycles: int = 1000
    learning_rate: float = 0.01
    max_leaves_per_step: int = 3
    early_stopping_patience: int = 50
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_cycles < 1 or self.max_leaves_per_step < 2 or self.early_stopping_patience < 1:
            raise ValueError("max_cycles, max_leaves_per_step and patience must be valid")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be non-negative")


@dataclass(eq=False)
class EbmModel:
    """Per-feature bin edges and additive score tables plus an intercept.

    margin(x) = intercept + sum_j shape_tables[j][bin_j(x_j)], with
    out-of-range values clamping to the boundary bins.
    """

    binmap: BinMap
    shape_tables: list[np.ndarray]
    bin_counts: list[np.ndarray]
    intercept: float
    feature_names: list[str] | None = None
    fit_seconds: float = 0.0

    @property
    def n_features(self) -> int:
        return self.binmap.n_features


def _best_segment_split(gb, hb, lo, hi, mcw):
    """Best in-segment split of bins [lo, hi); returns (gain, j) or None.

    Split after bin j sends bins <= j left. Pure second-order gain with no
    regularization; children must carry at least `mcw` hessian.
    """
    if hi - lo < 2:
        return None
    g_seg = gb[lo:hi]
    h_seg = hb[lo:hi]
    gl = np.cumsum(g_seg)[:-1]
    hl = np.cumsum(h_seg)[:-1]
    g_tot, h_tot = g_seg.sum(), h_seg.sum()
    gr, hr = g_tot - gl, h_tot - hl
    ok = (hl >= mcw) & (hr >= mcw)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = np.where(ok, 0.5 * (gl**2 / hl + gr**2 / hr - g_tot**2 / h_tot), -np.inf)
    j = int(np.argmax(gains))
    if not gains[j] > 0:
        return None
    return float(gains[j]), lo + j


def _fit_feature_steps(gb: np.ndarray, hb: np.ndarray, max_leaves: int,
                       mcw: float) -> np.ndarray | None:
    """Per-bin Newton leaf values for one feature, at most `max_leaves` segments.

    Best-first segmentation of the bin axis; returns None when no positive-gain
    split exists (the feature is skipped this cycle).
    """
    nb = gb.size
    first = _best_segment_split(gb, hb, 0, nb, mcw)
    if first is None:
        return None
    # segments as (lo, hi) with candidate splits; earliest segment wins ties
    open_segs = [(first[0], 0, 0, nb, first[1])]
    closed: list[tuple[int, int]] = []
    order = 1
    n_leaves = 1
    while open_segs and n_leaves < max_leaves:
        pick = max(range(len(open_segs)), key=lambda i: (open_segs[i][0], -open_segs[i][1]))
        _, _, lo, hi, j = open_segs.pop(pick)
        n_leaves += 1
        for seg_lo, seg_hi in ((lo, j + 1), (j + 1, hi)):
            cand = _best_segment_split(gb, hb, seg_lo, seg_hi, mcw)
            if cand is not None and n_leaves < max_leaves:
                open_segs.append((cand[0], order, seg_lo, seg_hi, cand[1]))
                order += 1
            else:
                closed.append((seg_lo, seg_hi))
    closed.extend((lo, hi) for _, _, lo, hi, _ in open_segs)

    deltas = np.zeros(nb)
    for lo, hi in closed:
        h_sum = hb[lo:hi].sum()
        if h_sum > 0:
            deltas[lo:hi] = -gb[lo:hi].sum() / h_sum
    return deltas


def ebm_fit(train: Dataset, valid: Dataset, cfg: EbmConfig = EbmConfig(),
            loss_history: list | None = None) -> EbmModel:
    """Cyclic boosting over features with early stopping on validation AUC.

    `loss_history`, when given, receives the mean train logistic loss after
    each cycle (diagnostic only).
    """
    t0 = time.perf_counter()
    y = train.y.astype(np.float64)
    intercept = _clamped_logit(float(y.mean()))
    binmap = build_binmap(train.x, EBM_MAX_BINS)
    xb_train = binmap.transform(train.x)
    xb_valid = binmap.transform(valid.x)
    d = train.n_features
    n_bins = binmap.n_bins
    tables = [np.zeros(nb) for nb in n_bins]
    counts = [np.bincount(xb_train[:, j], minlength=n_bins[j]).astype(np.int64)
              for j in range(d)]

    margins = np.full(train.n_rows, intercept)
    valid_margins = np.full(valid.n_rows, intercept)
    es_active = len(set(valid.y.tolist())) == 2
    best_auc, best_cycle = -np.inf, -1
    best_tables = [t.copy() for t in tables]

    for cycle in range(cfg.max_cycles):
        for f in range(d):
            p = expit(margins)
            g = p - y
            h = p * (1.0 - p)
            col = xb_train[:, f]
            gb = np.bincount(col, weights=g, minlength=n_bins[f])
            hb = np.bincount(col, weights=h, minlength=n_bins[f])
            deltas = _fit_feature_steps(gb, hb, cfg.max_leaves_per_step, cfg.min_child_weight)
            if deltas is None:
                continue
            deltas *= cfg.learning_rate
            tables[f] += deltas
            margins += deltas[col]
            valid_margins += deltas[xb_valid[:, f]]
        if loss_history is not None:
            p = np.clip(expit(margins), 1e-15, 1 - 1e-15)
            loss_history.append(float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))))
        if es_active:
            auc = roc_auc(valid_margins, valid.y)
            if auc > best_auc:
                best_auc, best_cycle = auc, cycle
                best_tables = [t.copy() for t in tables]
            elif cycle - best_cycle >= cfg.early_stopping_patience:
                break

    if es_active and best_cycle >= 0:
        tables = best_tables
    n_train = train.n_rows
    for f in range(d):
        mean_f = float(counts[f] @ tables[f]) / n_train
        tables[f] = tables[f] - mean_f
        intercept += mean_f

    return EbmModel(
        binmap=binmap,
        shape_tables=tables,
        bin_counts=counts,
        intercept=float(intercept),
        feature_names=train.feature_names,
        fit_seconds=time.perf_counter() - t0,
    )


def _check_width(model: EbmModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got {x.shape[-1]}")


def ebm_margin_matrix(model: EbmModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check_width(model, x)
    xb = model.binmap.transform(x)
    out = np.full(x.shape[0], model.intercept)
    for j in range(model.n_features):
        out += model.shape_tables[j][xb[:, j]]
    return out


def ebm_margin(model: EbmModel, x_row: np.ndarray) -> float:
    return float(ebm_margin_matrix(model, np.asarray(x_row)[None, :])[0])


def ebm_proba(model: EbmModel, x_row: np.ndarray) -> float:
    return float(expit(ebm_margin(model, x_row)))


def ebm_proba_matrix(model: EbmModel, x: np.ndarray) -> np.ndarray:
    return expit(ebm_margin_matrix(model, x))


def ebm_to_stump_ensemble(model: EbmModel) -> GbdtModel:
    """Re-express the additive model as one decision-list tree per feature.

    Each tree routes x_j to its bin and returns that bin's score; covers come
    from the training bin counts, so cover-weighted expectations match the
    count-weighted table means (zero after centering).
    """
    trees = []
    for j in range(model.n_features):
        edges = model.binmap.edges[j]
        scores = model.shape_tables[j]
        cnt = model.bin_counts[j].astype(np.float64)
        node = TreeNode(value=float(scores[-1]), cover=float(cnt[-1]))
        for b in range(edges.size - 1, -1, -1):
            leaf = TreeNode(value=float(scores[b]), cover=float(cnt[b]))
            node = TreeNode(
                feature=j,
                threshold=float(edges[b]),
                left=leaf,
                right=node,
                cover=float(cnt[b] + node.cover),
            )
        trees.append(node)
    return GbdtModel(
        base_score=model.intercept,
        learning_rate=1.0,
        trees=trees,
        feature_names=model.feature_names,
    )


def ebm_to_dict(model: EbmModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "type": "ebm",
        "intercept": model.intercept,
        "feature_names": model.feature_names,
        "features": [
            {
                "edges": [float(v) for v in model.binmap.edges[j]],
                "scores": [float(v) for v in model.shape_tables[j]],
                "counts": [int(v) for v in model.bin_counts[j]],
            }
            for j in range(model.n_features)
        ],
    }


def ebm_from_dict(doc: dict) -> EbmModel:
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DataError(f"unsupported model schema version {doc.get('schema_version')!r}")
    if doc.get("type") != "ebm":
        raise DataError(f"not an ebm model document: type={doc.get('type')!r}")
    feats = doc["features"]
    return EbmModel(
        binmap=BinMap(edges=tuple(np.array(f["edges"], dtype=np.float64) for f in feats)),
        shape_tables=[np.array(f["scores"], dtype=np.float64) for f in feats],
        bin_counts=[np.array(f["counts"], dtype=np.int64) for f in feats],
        intercept=float(doc["intercept"]),
        feature_names=doc.get("feature_names"),
    )
