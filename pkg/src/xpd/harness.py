"""End-to-end comparison pipeline: data, both models, all metrics, reports.

A run is fully determined by its RunConfig: the canonical report body (the
report minus wall-clock runtimes) is byte-identical across repeat executions
and across worker counts. Stage failures abort with the stage name and leave
no partial report files behind.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .attribution import attribution_matrix
from .beeswarm import emit_beeswarm
from .dataset import Dataset, load_csv, stratified_split, synthesize
from .ebm import EbmConfig, EbmModel, ebm_fit, ebm_margin_matrix
from .errors import ConfigError, DataError, StageError, XpdError
from .gbdt import GbdtConfig, GbdtModel, gbdt_fit, gbdt_margin_matrix
from .metrics import McNemarResult, PredictiveReport, confusion, mcnemar, predictive_report
from .xai_metrics import (
    PerturbConfig,
    XaiReport,
    actionability,
    comprehensiveness,
    consistency,
    explanation_accuracy,
    fidelity,
    simplicity,
    stability,
)

PREDICTIVE_COLUMNS = ["model", "accuracy", "precision", "recall", "fp_rate",
                      "roc_auc", "runtime_seconds"]


@dataclass(frozen=True)
class CsvSource:
    path: str
    label_column: str = "label"
    actionable_columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class SynthSource:
    n: int = 10000
    d: int = 18
    seed: int = 7
    noise: float = 0.02


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 42


@dataclass(frozen=True)
class RunConfig:
    """Everything a comparison run depends on; serializable and strict."""

    source: CsvSource | SynthSource
    split: SplitConfig = SplitConfig()
    gbdt: GbdtConfig = GbdtConfig()
    ebm: EbmConfig = EbmConfig()
    perturb: PerturbConfig = PerturbConfig()

    def to_dict(self) -> dict:
        if isinstance(self.source, SynthSource):
            dataset = {"synth": {"n": self.source.n, "d": self.source.d,
                                 "seed": self.source.seed, "noise": self.source.noise}}
        else:
            dataset = {"csv": {"path": self.source.path,
                               "label_column": self.source.label_column,
                               "actionable_columns": list(self.source.actionable_columns)}}
        return {
            "dataset": dataset,
            "split": {"ratios": list(self.split.ratios), "seed": self.split.seed},
            "gbdt": {
                "n_rounds": self.gbdt.n_rounds,
                "max_depth": self.gbdt.max_depth,
                "learning_rate": self.gbdt.learning_rate,
                "lambda": self.gbdt.reg_lambda,
                "gamma": self.gbdt.gamma,
                "min_child_weight": self.gbdt.min_child_weight,
                "early_stopping_patience": self.gbdt.early_stopping_patience,
                "seed": self.gbdt.seed,
            },
            "ebm": {
                "max_cycles": self.ebm.max_cycles,
                "learning_rate": self.ebm.learning_rate,
                "max_leaves_per_step": self.ebm.max_leaves_per_step,
                "early_stopping_patience": self.ebm.early_stopping_patience,
                "min_child_weight": self.ebm.min_child_weight,
                "seed": self.ebm.seed,
            },
            "perturb": {"sigma": self.perturb.sigma,
                        "repetitions": self.perturb.repetitions,
                        "seed": self.perturb.seed},
        }


def _require_keys(section: dict, allowed: dict[str, type | tuple], where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _coerce(section: dict, spec: dict, where: str) -> dict:
    _require_keys(section, spec, where)
    out = {}
    for key, value in section.items():
        expected = spec[key]
        if expected is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
            out[key] = float(value)
        elif expected is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}.{key} must be an integer, got {value!r}")
            out[key] = value
        elif expected is str:
            if not isinstance(value, str):
                raise ConfigError(f"{where}.{key} must be a string, got {value!r}")
            out[key] = value
        else:
            out[key] = value
    return out


def run_config_from_dict(doc: dict) -> RunConfig:
    """Parse and validate a config document; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _require_keys(doc, {"dataset": dict, "split": dict, "gbdt": dict,
                        "ebm": dict, "perturb": dict}, "config")
    if "dataset" not in doc:
        raise ConfigError("config needs a 'dataset' section")
    ds = doc["dataset"]
    if not isinstance(ds, dict) or len(ds) != 1 or next(iter(ds)) not in ("synth", "csv"):
        raise ConfigError("config 'dataset' must be exactly one of {'synth': ...} or {'csv': ...}")
    kind, body = next(iter(ds.items()))
    if not isinstance(body, dict):
        raise ConfigError(f"dataset.{kind} must be an object")
    if kind == "synth":
        vals = _coerce(body, {"n": int, "d": int, "seed": int, "noise": float},
                       "dataset.synth")
        source: CsvSource | SynthSource = SynthSource(**vals)
    else:
        vals = _coerce(body, {"path": str, "label_column": str,
                              "actionable_columns": list}, "dataset.csv")
        if "path" not in vals:
            raise ConfigError("dataset.csv needs a 'path'")
        cols = vals.get("actionable_columns", [])
        if not isinstance(cols, list) or not all(isinstance(c, str) for c in cols):
            raise ConfigError("dataset.csv.actionable_columns must be a list of strings")
        source = CsvSource(path=vals["path"],
                           label_column=vals.get("label_column", "label"),
                           actionable_columns=tuple(cols))

    split_doc = _coerce(doc.get("split", {}), {"ratios": list, "seed": int}, "split")
    ratios = split_doc.get("ratios", [0.6, 0.2, 0.2])
    if not (isinstance(ratios, list) and len(ratios) == 3
            and all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in ratios)):
        raise ConfigError("split.ratios must be a list of three numbers")
    split = SplitConfig(ratios=tuple(float(r) for r in ratios),
                        seed=split_doc.get("seed", 42))

    gb = _coerce(doc.get("gbdt", {}), {
        "n_rounds": int, "max_depth": int, "learning_rate": float, "lambda": float,
        "gamma": float, "min_child_weight": float, "early_stopping_patience": int,
        "seed": int}, "gbdt")
    if "lambda" in gb:
        gb["reg_lambda"] = gb.pop("lambda")
    eb = _coerce(doc.get("ebm", {}), {
        "max_cycles": int, "learning_rate": float, "max_leaves_per_step": int,
        "early_stopping_patience": int, "min_child_weight": float, "seed": int}, "ebm")
    pt = _coerce(doc.get("perturb", {}), {"sigma": float, "repetitions": int,
                                          "seed": int}, "perturb")
    try:
        return RunConfig(source=source, split=split, gbdt=GbdtConfig(**gb),
                         ebm=EbmConfig(**eb), perturb=PerturbConfig(**pt))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return run_config_from_dict(doc)


@dataclass(frozen=True)
class ModelResult:
    predictive: PredictiveReport
    xai: XaiReport


@dataclass(frozen=True)
class ComparisonReport:
    dataset_name: str
    dataset_shape: tuple[int, int]
    config: dict
    gbdt: ModelResult
    ebm: ModelResult
    mcnemar: McNemarResult
    tool_version: str = __version__

    def to_dict(self) -> dict:
        def model_block(res: ModelResult) -> dict:
            return {
                "predictive": {
                    "accuracy": res.predictive.accuracy,
                    "precision": res.predictive.precision,
                    "recall": res.predictive.recall,
                    "fp_rate": res.predictive.fp_rate,
                    "roc_auc": res.predictive.roc_auc,
                },
                "xai": {name: {"score": score, "ordinal": ordinal}
                        for name, score, ordinal in res.xai.as_rows()},
            }

        return {
            "dataset": {"name": self.dataset_name,
                        "n_instances": self.dataset_shape[0],
                        "n_features": self.dataset_shape[1]},
            "config": self.config,
            "models": {"gbdt": model_block(self.gbdt), "ebm": model_block(self.ebm)},
            "mcnemar": {"b": self.mcnemar.b, "c": self.mcnemar.c,
                        "statistic": self.mcnemar.statistic,
                        "p_value": self.mcnemar.p_value},
            "tool_version": self.tool_version,
            "runtimes": {"gbdt_fit_seconds": self.gbdt.predictive.runtime_seconds,
                         "ebm_fit_seconds": self.ebm.predictive.runtime_seconds},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ComparisonReport":
        def model_result(block: dict, runtime: float) -> ModelResult:
            from .xai_metrics import MetricValue, Ordinal

            pred = PredictiveReport(runtime_seconds=runtime, **block["predictive"])
            xai = XaiReport(**{
                name: MetricValue(score=v["score"], ordinal=Ordinal(v["ordinal"]))
                for name, v in block["xai"].items()
            })
            return ModelResult(predictive=pred, xai=xai)

        rt = doc.get("runtimes", {})
        return cls(
            dataset_name=doc["dataset"]["name"],
            dataset_shape=(doc["dataset"]["n_instances"], doc["dataset"]["n_features"]),
            config=doc["config"],
            gbdt=model_result(doc["models"]["gbdt"], rt.get("gbdt_fit_seconds", 0.0)),
            ebm=model_result(doc["models"]["ebm"], rt.get("ebm_fit_seconds", 0.0)),
            mcnemar=McNemarResult(**doc["mcnemar"]),
            tool_version=doc["tool_version"],
        )


def canonical_report_bytes(doc: dict | ComparisonReport) -> bytes:
    """The deterministic report body: everything except wall-clock runtimes."""
    if isinstance(doc, ComparisonReport):
        doc = doc.to_dict()
    body = {k: v for k, v in doc.items() if k != "runtimes"}
    return (json.dumps(body, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _load_source(cfg: RunConfig) -> tuple[str, Dataset]:
    if isinstance(cfg.source, SynthSource):
        s = cfg.source
        name = f"synth-n{s.n}-d{s.d}-seed{s.seed}-noise{s.noise:g}"
        try:
            return name, synthesize(s.n, s.d, s.seed, s.noise)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    src = cfg.source
    return Path(src.path).stem, load_csv(src.path, src.label_column,
                                         src.actionable_columns)


def _evaluate_model(model, margin_fn, train: Dataset, test: Dataset,
                    perturb: PerturbConfig, workers: int) -> tuple[ModelResult, np.ndarray]:
    margins = margin_fn(test.x)
    preds = (margins >= 0).astype(np.int64)
    pred_report = predictive_report(confusion(preds, test.y), margins, test.y,
                                    model.fit_seconds)

    phis, base_value = attribution_matrix(model, test.x, workers=workers)
    train_means = train.x.mean(axis=0)
    train_std = train.x.std(axis=0)
    scores = {
        "fidelity": fidelity(margin_fn, test),
        "simplicity": simplicity(phis),
        "comprehensiveness": comprehensiveness(
            margin_fn, test, phis, base_value, train_means,
            k_max=min(10, test.n_features)),
        "consistency": consistency(phis, test, preds),
        "explanation_accuracy": explanation_accuracy(margin_fn, test, phis, train_means),
        "stability": stability(
            lambda m, _model=model: attribution_matrix(_model, m, workers=workers)[0],
            test, perturb, train_std),
        "actionability": actionability(phis, test.meta,
                                       top_k=min(3, test.n_features)),
    }
    return ModelResult(predictive=pred_report, xai=XaiReport.from_scores(scores)), phis


def run_compare(cfg: RunConfig, out_dir: str | Path, workers: int = 1,
                emit_plots: bool = True) -> ComparisonReport:
    """Full pipeline: load, split, fit both models, score, test, emit."""

    def stage(name: str, fn):
        try:
            return fn()
        except (XpdError, ValueError) as exc:
            raise StageError(name, exc) from exc

    dataset_name, ds = stage("load-data", lambda: _load_source(cfg))
    idx = stage("split", lambda: stratified_split(ds, cfg.split.ratios, cfg.split.seed))
    train, valid, test = (ds.take(p) for p in idx.parts())

    gbdt_model = stage("train-gbdt", lambda: gbdt_fit(train, valid, cfg.gbdt))
    ebm_model = stage("train-ebm", lambda: ebm_fit(train, valid, cfg.ebm))

    gbdt_res, gbdt_phis = stage("evaluate-gbdt", lambda: _evaluate_model(
        gbdt_model, lambda m: gbdt_margin_matrix(gbdt_model, m), train, test,
        cfg.perturb, workers))
    ebm_res, ebm_phis = stage("evaluate-ebm", lambda: _evaluate_model(
        ebm_model, lambda m: ebm_margin_matrix(ebm_model, m), train, test,
        cfg.perturb, workers))

    mc = stage("significance", lambda: mcnemar(
        (gbdt_margin_matrix(gbdt_model, test.x) >= 0).astype(int),
        (ebm_margin_matrix(ebm_model, test.x) >= 0).astype(int),
        test.y))

    report = ComparisonReport(
        dataset_name=dataset_name,
        dataset_shape=(ds.n_rows, ds.n_features),
        config=cfg.to_dict(),
        gbdt=gbdt_res,
        ebm=ebm_res,
        mcnemar=mc,
    )
    def emit_all():
        out = Path(out_dir)
        produced: list[Path] = []
        try:
            if emit_plots:
                out.mkdir(parents=True, exist_ok=True)
                produced.append(emit_beeswarm(gbdt_phis, test.x, test.feature_names,
                                              out / "beeswarm_gbdt.svg"))
                produced.append(emit_beeswarm(ebm_phis, test.x, test.feature_names,
                                              out / "beeswarm_ebm.svg"))
            produced.extend(emit_report(report, out))
        except BaseException:
            for p in produced:  # no partial run output on failure
                p.unlink(missing_ok=True)
            raise

    stage("emit-report", emit_all)
    return report


def emit_report(report: ComparisonReport, out_dir: str | Path) -> list[Path]:
    """Write report.json (canonical plus runtimes), predictive.csv, xai.csv.

    Files are written via temp-and-rename so an abort leaves nothing partial.
    """
    if not str(out_dir):
        raise ValueError("output directory must be non-empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    written: list[Path] = []

    def atomic_write(name: str, text: str) -> None:
        tmp = out / (name + ".tmp")
        try:
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, out / name)
        finally:
            tmp.unlink(missing_ok=True)
        written.append(out / name)

    try:
        atomic_write("report.json",
                     json.dumps(doc, sort_keys=True, indent=2) + "\n")

        rows = []
        for name, res in (("gbdt", report.gbdt), ("ebm", report.ebm)):
            p = res.predictive
            rows.append([name, repr(p.accuracy), repr(p.precision), repr(p.recall),
                         repr(p.fp_rate), repr(p.roc_auc), f"{p.runtime_seconds:.2f}"])
        lines = [",".join(PREDICTIVE_COLUMNS)] + [",".join(r) for r in rows]
        atomic_write("predictive.csv", "\n".join(lines) + "\n")

        xai_lines = ["model,metric,score,ordinal"]
        for name, res in (("gbdt", report.gbdt), ("ebm", report.ebm)):
            for metric, score, ordinal in res.xai.as_rows():
                xai_lines.append(f"{name},{metric},{score!r},{ordinal}")
        atomic_write("xai.csv", "\n".join(xai_lines) + "\n")
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return written


def load_report(path: str | Path) -> ComparisonReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ComparisonReport.from_dict(doc)


SUMMARY_COLUMNS = ["dataset", "model", "metric", "value"]


def run_batch(manifest_path: str | Path, out_dir: str | Path,
              workers: int = 1) -> Path:
    """Run every config in a manifest; write per-run reports plus one summary
    CSV (dataset, model, metric, value) with median aggregate rows."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ConfigError(f"no such manifest: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "runs" not in doc:
        raise ConfigError("manifest must be an object with a 'runs' list")
    _require_keys(doc, {"runs": list}, "manifest")
    runs = doc["runs"]
    if not isinstance(runs, list) or not runs:
        raise ConfigError("manifest 'runs' must be a non-empty list")

    parsed = []
    seen = set()
    for i, entry in enumerate(runs):
        if not isinstance(entry, dict):
            raise ConfigError(f"manifest run #{i} must be an object")
        _require_keys(entry, {"name": str, "config": dict}, f"manifest run #{i}")
        name = entry.get("name")
        if not name or not isinstance(name, str):
            raise ConfigError(f"manifest run #{i} needs a string 'name'")
        if name in seen:
            raise ConfigError(f"duplicate run name {name!r}")
        seen.add(name)
        parsed.append((name, run_config_from_dict(entry.get("config", {}))))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(args):
        name, cfg = args
        return name, run_compare(cfg, out / name, workers=1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, parsed))
    else:
        results = [one(p) for p in parsed]

    rows: list[tuple[str, str, str, float]] = []
    for name, report in results:
        for model_name, res in (("gbdt", report.gbdt), ("ebm", report.ebm)):
            p = res.predictive
            for metric, value in (("accuracy", p.accuracy), ("precision", p.precision),
                                  ("recall", p.recall), ("fp_rate", p.fp_rate),
                                  ("roc_auc", p.roc_auc),
                                  ("runtime_seconds", p.runtime_seconds)):
                rows.append((name, model_name, metric, value))
            for metric, score, _ in res.xai.as_rows():
                rows.append((name, model_name, metric, score))
        rows.append((name, "gbdt_vs_ebm", "mcnemar_statistic", report.mcnemar.statistic))
        rows.append((name, "gbdt_vs_ebm", "mcnemar_p_value", report.mcnemar.p_value))

    by_key: dict[tuple[str, str], list[float]] = {}
    for _, model_name, metric, value in rows:
        by_key.setdefault((model_name, metric), []).append(value)
    agg = [("aggregate_median", m, k, float(np.median(v)))
           for (m, k), v in by_key.items()]

    summary = out / "summary.csv"
    with summary.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows + agg:
            writer.writerow([row[0], row[1], row[2], repr(float(row[3]))])
    return summary
