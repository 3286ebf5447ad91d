"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .attribution import attribution_matrix
from .beeswarm import emit_beeswarm
from .dataset import load_csv, save_csv, synthesize
from .ebm import EbmModel
from .errors import ConfigError, DataError, StageError, XpdError
from .harness import (
    CsvSource,
    RunConfig,
    load_run_config,
    run_batch,
    run_compare,
)
from .model_io import load_model


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xpd",
        description="Train and compare a boosted-tree and an additive glass-box "
                    "classifier on tabular binary data, with exact attributions "
                    "and explainability scoring.",
    )
    parser.add_argument("--version", action="version", version=f"xpd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="run the full comparison pipeline")
    p.add_argument("--data", help="dataset CSV (overrides the config's dataset)")
    p.add_argument("--label-col", default=None)
    p.add_argument("--actionable", default=None,
                   help="comma-separated actionable column names")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("batch", help="run many configs and summarize")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("explain", help="per-instance attributions to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default="label")
    p.add_argument("--out", required=True)

    p = sub.add_parser("shapes", help="export per-feature shape tables (ebm)")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="beeswarm SVG from an attribution CSV")
    p.add_argument("--phis", required=True,
                   help="CSV from 'xpd explain' (long form) or a wide phi matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default="label")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_synth(args) -> int:
    try:
        ds = synthesize(args.n, args.d, args.seed, args.noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    save_csv(ds, args.out)
    print(f"wrote {args.out}: {ds.n_rows} rows x {ds.n_features} features "
          f"(+ label), positive rate {ds.y.mean():.3f}")
    return 0


def _cmd_compare(args) -> int:
    if args.config:
        cfg = load_run_config(args.config)
    elif args.data:
        cfg = RunConfig(source=CsvSource(path=args.data))
    else:
        raise ConfigError("compare needs --config and/or --data")
    if args.data:
        base = cfg.source if isinstance(cfg.source, CsvSource) else CsvSource(path=args.data)
        actionable = (tuple(s.strip() for s in args.actionable.split(",") if s.strip())
                      if args.actionable is not None else base.actionable_columns)
        cfg = RunConfig(
            source=CsvSource(path=args.data,
                             label_column=args.label_col or base.label_column,
                             actionable_columns=actionable),
            split=cfg.split, gbdt=cfg.gbdt, ebm=cfg.ebm, perturb=cfg.perturb,
        )
    elif args.label_col or args.actionable:
        raise ConfigError("--label-col/--actionable require --data")
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")

    report = run_compare(cfg, args.out, workers=args.workers)
    for name, res in (("gbdt", report.gbdt), ("ebm", report.ebm)):
        p = res.predictive
        print(f"{name}: accuracy={p.accuracy:.4f} precision={p.precision:.4f} "
              f"recall={p.recall:.4f} fp_rate={p.fp_rate:.4f} roc_auc={p.roc_auc:.4f} "
              f"runtime={p.runtime_seconds:.2f}s")
    print(f"mcnemar: b={report.mcnemar.b} c={report.mcnemar.c} "
          f"p={report.mcnemar.p_value:.4g}")
    print(f"report written to {args.out}")
    return 0


def _cmd_batch(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    summary = run_batch(args.manifest, args.out, workers=args.workers)
    print(f"summary written to {summary}")
    return 0


def _cmd_explain(args) -> int:
    model = load_model(args.model)
    ds = load_csv(args.data, args.label_col)
    names = model.feature_names or ds.feature_names
    if len(names) != ds.n_features:
        raise DataError("model and data disagree on feature count")
    phis, base_value = attribution_matrix(model, ds.x)
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "feature", "feature_value", "phi", "base_value"])
        for i in range(ds.n_rows):
            for j, name in enumerate(names):
                writer.writerow([i, name, repr(float(ds.x[i, j])),
                                 repr(float(phis[i, j])), repr(float(base_value))])
    print(f"wrote {args.out}: {ds.n_rows} instances x {len(names)} features")
    return 0


def _cmd_shapes(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, EbmModel):
        raise DataError("shapes export needs an ebm model file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = model.feature_names or [f"f{j}" for j in range(model.n_features)]
    for j, name in enumerate(names):
        edges = model.binmap.edges[j]
        lowers = np.concatenate(([-np.inf], edges))
        uppers = np.concatenate((edges, [np.inf]))
        with (out / f"shape_{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lower", "bin_upper", "score", "train_count"])
            for lo, hi, score, cnt in zip(lowers, uppers, model.shape_tables[j],
                                          model.bin_counts[j]):
                writer.writerow([repr(float(lo)), repr(float(hi)),
                                 repr(float(score)), int(cnt)])
    print(f"wrote {model.n_features} shape tables to {out}")
    return 0


def _read_phis_csv(path: Path, ds, names: list[str]) -> np.ndarray:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        rows = list(reader)
    if header == ["instance_id", "feature", "feature_value", "phi", "base_value"]:
        col = {name: j for j, name in enumerate(names)}
        n = max(int(r[0]) for r in rows) + 1
        phis = np.zeros((n, len(names)))
        for r in rows:
            if r[1] not in col:
                raise DataError(f"{path}: unknown feature {r[1]!r}")
            phis[int(r[0]), col[r[1]]] = float(r[3])
        return phis
    if header == names:
        return np.array([[float(v) for v in r] for r in rows])
    raise DataError(f"{path}: header matches neither the explain format nor "
                    f"the data's feature columns")


def _cmd_plot(args) -> int:
    ds = load_csv(args.data, args.label_col)
    phis = _read_phis_csv(Path(args.phis), ds, ds.feature_names)
    if phis.shape[0] != ds.n_rows:
        raise DataError("attribution rows do not match data rows")
    emit_beeswarm(phis, ds.x, ds.feature_names, args.out, seed=args.seed)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "compare": _cmd_compare,
    "batch": _cmd_batch,
    "explain": _cmd_explain,
    "shapes": _cmd_shapes,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, ConfigError):
            return 2
        if isinstance(cause, DataError):
            return 3
        return 4
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except XpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
