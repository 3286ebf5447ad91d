"""Tabular binary-classification datasets: load, validate, split, synthesize."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DataError

NAME_CHARS = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_")


@dataclass(frozen=True)
class FeatureMeta:
    """Per-feature metadata: name, value kind, and whether a defender can act on it."""

    name: str
    kind: str = "numeric"  # "numeric" | "binary"
    actionable: bool = False

    def __post_init__(self):
        if self.kind not in ("numeric", "binary"):
            raise ValueError(f"unknown feature kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix, binary labels, and per-column metadata.

    Invariants enforced at construction: finite float64 cells, label values in
    {0, 1}, one FeatureMeta per column with unique names, and binary-kind
    columns restricted to {0, 1} values.
    """

    x: np.ndarray
    y: np.ndarray
    meta: tuple[FeatureMeta, ...]

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64)
        meta = tuple(self.meta)
        if x.ndim != 2:
            raise DataError("feature matrix must be 2-dimensional")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise DataError("label vector length must equal the row count")
        if not np.isfinite(x).all():
            raise DataError("feature matrix contains non-finite values")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if len(meta) != x.shape[1]:
            raise DataError("need exactly one FeatureMeta per column")
        names = [m.name for m in meta]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        for j, m in enumerate(meta):
            if m.kind == "binary" and x.shape[0]:
                col = x[:, j]
                if not np.isin(col, (0.0, 1.0)).all():
                    raise DataError(f"binary feature {m.name!r} has values outside {{0, 1}}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "meta", meta)

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [m.name for m in self.meta]

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.y == 0)), int(np.sum(self.y == 1))

    def take(self, indices: np.ndarray) -> "Dataset":
        """New Dataset holding the given rows (same metadata)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.x[idx], self.y[idx], self.meta)


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/valid/test row indices covering every row."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.train, self.valid, self.test


@dataclass(frozen=True)
class DatasetRegistryEntry:
    name: str
    n_instances: int
    n_features: int


_REGISTRY_ROWS = (
    ("ds_100K20", 100077, 20),
    ("ds_10K18", 10000, 18),
    ("ds_10K50", 10000, 49),
    ("ds_11055_rev", 11055, 32),
    ("ds_11055", 11055, 31),
    ("ds_11K89", 11481, 89),
    ("ds_129K112", 129698, 112),
    ("ds_235795_54", 235795, 55),
    ("ds_247950", 247950, 42),
    ("ds_600K11", 662591, 10),
    ("ds_88K112", 88647, 112),
    ("ds_90K32", 90000, 34),
)


def registry() -> dict[str, DatasetRegistryEntry]:
    """Shapes of the benchmark corpus this tool is calibrated against, by name."""
    return {n: DatasetRegistryEntry(n, ni, nf) for n, ni, nf in _REGISTRY_ROWS}


def _parse_cell(raw: str, row_no: int, col_name: str) -> float:
    text = raw.strip()
    if not text:
        raise DataError(f"empty cell at row {row_no}, column {col_name!r}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"cannot parse {raw!r} as a number at row {row_no}, column {col_name!r}"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value at row {row_no}, column {col_name!r}")
    return value


def load_csv(
    path: str | Path,
    label_column: str,
    actionable_columns: Iterable[str] = (),
) -> Dataset:
    """Load a headered CSV into a Dataset.

    The label column may use {0, 1} or {-1, 1} (remapped to {0, 1}). Feature
    kind is inferred as binary iff every observed value is 0 or 1. Missing or
    unparseable cells are an error naming the row and column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    actionable = set(actionable_columns)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"{path}: duplicate header names {dupes}")
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
        feat_names = [h for i, h in enumerate(header) if i != label_idx]
        unknown = sorted(actionable - set(feat_names))
        if unknown:
            raise DataError(f"{path}: actionable columns not in header: {unknown}")

        rows: list[list[float]] = []
        labels_raw: list[float] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore blank lines
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            vals = [_parse_cell(c, row_no, header[i]) for i, c in enumerate(row)]
            labels_raw.append(vals.pop(label_idx))
            rows.append(vals)

    if not rows:
        raise DataError(f"{path}: no data rows")
    x = np.array(rows, dtype=np.float64)
    raw = np.array(labels_raw)
    observed = set(np.unique(raw).tolist())
    if observed <= {0.0, 1.0}:
        y = raw.astype(np.int64)
    elif observed <= {-1.0, 1.0}:
        y = (raw > 0).astype(np.int64)
    else:
        bad = sorted(observed - {-1.0, 0.0, 1.0})
        raise DataError(f"{path}: label column has non-binary values {bad}")

    meta = []
    for j, name in enumerate(feat_names):
        binary = bool(np.isin(x[:, j], (0.0, 1.0)).all())
        meta.append(
            FeatureMeta(name=name, kind="binary" if binary else "numeric",
                        actionable=name in actionable)
        )
    return Dataset(x, y, tuple(meta))


def save_csv(ds: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write a Dataset as headered CSV; reloading reproduces the values exactly."""
    path = Path(path)
    if label_column in ds.feature_names:
        raise DataError(f"label column name {label_column!r} collides with a feature")
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names + [label_column])
        for i in range(ds.n_rows):
            writer.writerow([repr(float(v)) for v in ds.x[i]] + [int(ds.y[i])])


def _largest_remainder(total: int, fractions: Sequence[float]) -> list[int]:
    ideal = [total * f for f in fractions]
    counts = [math.floor(v) for v in ideal]
    remainders = [v - c for v, c in zip(ideal, counts)]
    short = total - sum(counts)
    # hand leftovers to the largest remainders, earlier part on ties
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def stratified_split(ds: Dataset, ratios: Sequence[float], seed: int) -> SplitIndices:
    """Deterministic stratified shuffle split into train/valid/test.

    Per-class allocations use largest-remainder rounding, so each part's class
    count is within one instance of exact proportionality.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError("need exactly three split ratios")
    if any(r <= 0 for r in ratios):
        raise ValueError("split ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("stratified split needs at least one instance of each class")

    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (0, 1):
        idx = np.flatnonzero(ds.y == cls)
        counts = _largest_remainder(idx.size, ratios)
        if counts[0] == 0:
            raise DataError(f"class {cls} would receive 0 training instances")
        perm = rng.permutation(idx)
        stops = np.cumsum(counts)
        parts[0].append(perm[: stops[0]])
        parts[1].append(perm[stops[0]: stops[1]])
        parts[2].append(perm[stops[1]: stops[2]])
    train, valid, test = (np.sort(np.concatenate(p)) for p in parts)
    return SplitIndices(train=train, valid=valid, test=test)


INTERACTION_WEIGHT = 1.25


def synthesize(n: int, d: int, seed: int, noise: float = 0.0) -> Dataset:
    """Generate a phishing-style benchmark table with a known signal structure.

    The signal is an indicator panel, mirroring how real phishing features
    behave: a binarized block (20% of columns, thresholded at zero) plus a
    sparse set of numeric columns vote through per-feature step effects with
    sign-balanced seeded weights in [1.5, 2.5]. Columns 0 and 1 are always
    numeric voters and additionally contribute one pairwise AND interaction,
    which an additive model cannot represent. Labels are the sign of the
    mean-centered vote total, then flipped independently with probability
    `noise`; the remaining columns are pure nuisance. Bit-identical for a
    fixed (n, d, seed, noise).
    """
    if n < 20:
        raise ValueError("n must be at least 20")
    if d < 2:
        raise ValueError("d must be at least 2")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    k_bin = int(round(0.2 * d))
    bin_block = np.arange(2, 2 + k_bin)
    n_cont = d - k_bin
    n_steps = max(2, round(n_cont / 5))
    spare = np.setdiff1d(np.setdiff1d(np.arange(d), bin_block), [0, 1])
    if n_steps > 2 and spare.size:
        picked = rng.choice(spare, size=min(n_steps - 2, spare.size), replace=False)
        step_idx = np.sort(np.concatenate(([0, 1], picked)))
    else:
        step_idx = np.array([0, 1])

    n_sig = k_bin + step_idx.size
    signs = np.ones(n_sig)
    signs[1::2] = -1.0
    signs = rng.permutation(signs)
    w = np.zeros(d)
    w[bin_block] = signs[:k_bin] * (1.5 + rng.random(k_bin))
    w[step_idx] = signs[k_bin:] * (1.5 + rng.random(step_idx.size))
    cuts = rng.uniform(-0.5, 0.5, size=step_idx.size)

    x = rng.standard_normal((n, d))
    x[:, bin_block] = (x[:, bin_block] > 0).astype(np.float64)

    votes = np.zeros((n, d))
    votes[:, bin_block] = x[:, bin_block]
    votes[:, step_idx] = (x[:, step_idx] > cuts).astype(np.float64)

    vote_means = np.zeros(d)
    vote_means[bin_block] = 0.5
    vote_means[step_idx] = norm.sf(cuts)
    pair = votes[:, 0] * votes[:, 1] - vote_means[0] * vote_means[1]
    margin = votes @ w + INTERACTION_WEIGHT * pair - w @ vote_means

    y = (margin > 0).astype(np.int64)
    if noise > 0:
        y = np.where(rng.random(n) < noise, 1 - y, y)

    n_actionable = math.ceil(d / 3)
    is_binary = np.zeros(d, dtype=bool)
    is_binary[bin_block] = True
    meta = tuple(
        FeatureMeta(
            name=f"f{j}",
            kind="binary" if is_binary[j] else "numeric",
            actionable=j < n_actionable,
        )
        for j in range(d)
    )
    return Dataset(x, y, meta)
