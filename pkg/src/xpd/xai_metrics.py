"""Quantitative explainability metrics.

Each metric maps attribution matrices plus model queries to a score in [0, 1]
and an ordinal rating on a five-level scale. Scores are deterministic given
(data, model, seed); perturbation noise comes from per-instance seeded streams
so results do not depend on scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import Dataset, FeatureMeta
from .errors import MetricUndefinedError
from .trees import TreeParams, build_binmap, fit_tree_with_predictions

_REL_TOL = 1e-9


class Ordinal(str, Enum):
    LOW = "Low"
    LOW_MODERATE = "LowModerate"
    MODERATE = "Moderate"
    MODERATE_HIGH = "ModerateHigh"
    HIGH = "High"


@dataclass(frozen=True)
class MetricValue:
    score: float
    ordinal: Ordinal


@dataclass(frozen=True)
class XaiReport:
    fidelity: MetricValue
    simplicity: MetricValue
    comprehensiveness: MetricValue
    consistency: MetricValue
    explanation_accuracy: MetricValue
    stability: MetricValue
    actionability: MetricValue

    METRIC_NAMES = (
        "fidelity",
        "simplicity",
        "comprehensiveness",
        "consistency",
        "explanation_accuracy",
        "stability",
        "actionability",
    )

    @classmethod
    def from_scores(cls, scores: dict[str, float]) -> "XaiReport":
        return cls(**{
            name: MetricValue(score=float(scores[name]), ordinal=to_ordinal(scores[name]))
            for name in cls.METRIC_NAMES
        })

    def as_rows(self) -> list[tuple[str, float, str]]:
        return [
            (name, getattr(self, name).score, getattr(self, name).ordinal.value)
            for name in self.METRIC_NAMES
        ]


@dataclass(frozen=True)
class PerturbConfig:
    sigma: float = 0.05
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


def to_ordinal(score: float) -> Ordinal:
    """Fixed 0.2-wide buckets over [0, 1]."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    if score < 0.2:
        return Ordinal.LOW
    if score < 0.4:
        return Ordinal.LOW_MODERATE
    if score < 0.6:
        return Ordinal.MODERATE
    if score < 0.8:
        return Ordinal.MODERATE_HIGH
    return Ordinal.HIGH


def fidelity(model_margin, data: Dataset, surrogate_depth: int = 3) -> float:
    """Label agreement between a small surrogate tree and the model.

    The surrogate regresses the model's margins (squared loss) to the given
    depth, then both are thresholded at margin zero. A model that predicts a
    single class is perfectly mimicked by a constant, hence 1.0.
    """
    if data.n_rows == 0:
        raise ValueError("data must be non-empty")
    margins = np.asarray(model_margin(data.x), dtype=np.float64)
    model_labels = margins > 0
    if model_labels.all() or not model_labels.any():
        return 1.0
    binmap = build_binmap(data.x)
    xb = binmap.transform(data.x)
    # squared loss: g = -margin at a zero prediction, h = 1
    tree, surrogate_margin = fit_tree_with_predictions(
        xb, binmap, -margins, np.ones(data.n_rows),
        TreeParams(max_depth=surrogate_depth, reg_lambda=0.0, gamma=0.0,
                   min_child_weight=1.0),
    )
    return float(np.mean((surrogate_margin > 0) == model_labels))


def simplicity(phis: np.ndarray) -> float:
    """How few features carry 90% of each instance's attribution mass."""
    phis = np.atleast_2d(np.asarray(phis, dtype=np.float64))
    n, d = phis.shape
    if d < 2:
        raise ValueError("simplicity needs at least two features")
    a = np.sort(np.abs(phis), axis=1)[:, ::-1]
    totals = a.sum(axis=1)
    cums = np.cumsum(a, axis=1)
    k90 = np.zeros(n)
    nz = totals > 0
    if nz.any():
        need = totals[nz][:, None] * (0.9 - _REL_TOL)
        k90[nz] = 1 + np.argmax(cums[nz] >= need, axis=1)
    score = 1.0 - (float(k90.mean()) - 1.0) / (d - 1.0)
    return float(min(max(score, 0.0), 1.0))


def _topk_order(phis: np.ndarray) -> np.ndarray:
    """Columns per row sorted by |phi| descending, ties to the lower index."""
    return np.argsort(-np.abs(phis), axis=1, kind="stable")


def comprehensiveness(model_margin, data: Dataset, phis: np.ndarray,
                      base_value: float, train_means: np.ndarray,
                      k_max: int = 10, masker: str = "mean",
                      seed: int = 0) -> float:
    """Margin collapse toward the base value as top-attributed features are
    masked, averaged over k = 1..k_max and over instances.

    The primary masker replaces masked cells with training means; the
    "permute" masker takes them from a seeded row permutation instead and
    exists as a sanity cross-check.
    """
    x = data.x
    n, d = x.shape
    if not 1 <= k_max <= d:
        raise ValueError("k_max must lie in [1, n_features]")
    if masker not in ("mean", "permute"):
        raise ValueError(f"unknown masker {masker!r}")
    order = _topk_order(phis)
    m0 = np.asarray(model_margin(x), dtype=np.float64)
    denom = np.abs(m0 - base_value)
    keep = denom >= 1e-9
    if not keep.any():
        raise MetricUndefinedError("every instance sits at the base value")
    if masker == "mean":
        donors = np.broadcast_to(np.asarray(train_means, dtype=np.float64), (n, d))
    else:
        donors = x[np.random.default_rng(seed).permutation(n)]

    drops = np.empty((n, k_max))
    masked = x.copy()
    rows = np.arange(n)
    for k in range(1, k_max + 1):
        cols = order[:, k - 1]
        masked[rows, cols] = donors[rows, cols]
        mk = np.asarray(model_margin(masked), dtype=np.float64)
        drop = (denom - np.abs(mk - base_value)) / np.where(denom > 0, denom, 1.0)
        drops[:, k - 1] = np.clip(drop, 0.0, 1.0)
    return float(drops[keep].mean())


def consistency(phis: np.ndarray, data: Dataset, labels_pred: np.ndarray) -> float:
    """Cosine agreement of attributions between nearest same-prediction
    neighbours (standardized Euclidean distance), mapped to [0, 1]."""
    x = data.x
    n = x.shape[0]
    labels_pred = np.asarray(labels_pred)
    counts = [int(np.sum(labels_pred == v)) for v in (0, 1)]
    if max(counts) < 2:
        raise MetricUndefinedError("no two instances share a predicted label")
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    z = x / std

    sims = []
    for label in (0, 1):
        idx = np.flatnonzero(labels_pred == label)
        if idx.size < 2:
            continue  # singleton group: no neighbour to compare against
        zz = z[idx]
        sq = np.einsum("ij,ij->i", zz, zz)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (zz @ zz.T)
        np.fill_diagonal(d2, np.inf)
        nbr = np.argmin(d2, axis=1)
        sims.append(_cosine_rows(phis[idx], phis[idx[nbr]]))
    return float((np.concatenate(sims) + 1.0).mean() / 2.0)


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    both_zero = (na == 0) & (nb == 0)
    one_zero = ((na == 0) | (nb == 0)) & ~both_zero
    denom = np.where((na > 0) & (nb > 0), na * nb, 1.0)
    cos = np.einsum("ij,ij->i", a, b) / denom
    cos[both_zero] = 1.0
    cos[one_zero] = 0.0
    return np.clip(cos, -1.0, 1.0)


def explanation_accuracy(model_margin, data: Dataset, phis: np.ndarray,
                         train_means: np.ndarray) -> float:
    """Does ablating the top-attributed feature move the margin against its
    attribution sign? Fraction of instances where it does."""
    x = data.x
    n = x.shape[0]
    top = _topk_order(phis)[:, 0]
    rows = np.arange(n)
    top_phi = phis[rows, top]
    keep = top_phi != 0.0
    if not keep.any():
        raise MetricUndefinedError("all attributions are zero; nothing to ablate")
    m0 = np.asarray(model_margin(x), dtype=np.float64)
    ablated = x.copy()
    ablated[rows, top] = np.asarray(train_means, dtype=np.float64)[top]
    m1 = np.asarray(model_margin(ablated), dtype=np.float64)
    correct = np.sign(m1 - m0) == -np.sign(top_phi)
    return float(correct[keep].mean())


def stability(attribute_fn, data: Dataset, cfg: PerturbConfig,
              train_std: np.ndarray | None = None) -> float:
    """Cosine agreement of attributions under small input noise.

    Noise is zero-mean normal with scale sigma * per-feature train std, applied
    to numeric features only; each (repetition, instance) pair draws from its
    own seeded stream.
    """
    x = data.x
    n, d = x.shape
    if train_std is None:
        train_std = x.std(axis=0)
    scale = cfg.sigma * np.asarray(train_std, dtype=np.float64)
    numeric = np.array([m.kind == "numeric" for m in data.meta])
    scale = np.where(numeric, scale, 0.0)

    phi0 = np.asarray(attribute_fn(x), dtype=np.float64)
    sims = np.empty((cfg.repetitions, n))
    for rep in range(cfg.repetitions):
        if cfg.sigma == 0.0:
            noise = np.zeros((n, d))
        else:
            noise = np.stack([
                np.random.default_rng((cfg.seed, rep, i)).standard_normal(d)
                for i in range(n)
            ])
        phi1 = np.asarray(attribute_fn(x + noise * scale), dtype=np.float64)
        sims[rep] = _cosine_rows(phi0, phi1)
    return float((sims + 1.0).mean() / 2.0)


def actionability(phis: np.ndarray, meta: tuple[FeatureMeta, ...],
                  top_k: int = 3) -> float:
    """Share of top-k attribution mass on actionable-flagged features."""
    phis = np.atleast_2d(np.asarray(phis, dtype=np.float64))
    n, d = phis.shape
    if not 1 <= top_k <= d:
        raise ValueError("top_k must lie in [1, n_features]")
    if len(meta) != d:
        raise ValueError("need one FeatureMeta per column")
    flags = np.array([m.actionable for m in meta], dtype=bool)
    if not flags.any():
        warnings.warn("no actionable features flagged; actionability is 0.0",
                      stacklevel=2)
        return 0.0
    order = _topk_order(phis)[:, :top_k]
    rows = np.arange(n)[:, None]
    mass = np.abs(phis[rows, order])
    totals = mass.sum(axis=1)
    keep = totals > 0
    if not keep.any():
        warnings.warn("all attributions are zero; actionability is 0.0", stacklevel=2)
        return 0.0
    actionable_mass = (mass * flags[order]).sum(axis=1)
    return float((actionable_mass[keep] / totals[keep]).mean())
