import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

import xpd
from xpd.beeswarm import beeswarm_feature_order, emit_beeswarm
from xpd.cli import main
from xpd.errors import ConfigError, StageError
from xpd.harness import (
    ComparisonReport,
    RunConfig,
    SynthSource,
    canonical_report_bytes,
    load_report,
    run_batch,
    run_compare,
    run_config_from_dict,
)

FAST_CONFIG = {
    "dataset": {"synth": {"n": 1200, "d": 6, "seed": 3, "noise": 0.05}},
    "split": {"ratios": [0.6, 0.2, 0.2], "seed": 42},
    "gbdt": {"n_rounds": 25, "early_stopping_patience": 8},
    "ebm": {"max_cycles": 60, "early_stopping_patience": 15},
    "perturb": {"sigma": 0.05, "repetitions": 3, "seed": 0},
}


@pytest.fixture(scope="module")
def fast_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = run_config_from_dict(FAST_CONFIG)
    report = run_compare(cfg, out)
    return report, out


class TestRunConfig:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            run_config_from_dict({**FAST_CONFIG, "bogus": 1})

    def test_unknown_nested_key(self):
        doc = json.loads(json.dumps(FAST_CONFIG))
        doc["gbdt"]["depth"] = 3
        with pytest.raises(ConfigError, match="unknown keys in gbdt"):
            run_config_from_dict(doc)

    def test_missing_dataset(self):
        with pytest.raises(ConfigError, match="dataset"):
            run_config_from_dict({"split": {"seed": 1}})

    def test_wrong_type(self):
        doc = json.loads(json.dumps(FAST_CONFIG))
        doc["gbdt"]["n_rounds"] = "many"
        with pytest.raises(ConfigError, match="integer"):
            run_config_from_dict(doc)

    def test_bad_parameter_value(self):
        doc = json.loads(json.dumps(FAST_CONFIG))
        doc["gbdt"]["learning_rate"] = -1.0
        with pytest.raises(ConfigError):
            run_config_from_dict(doc)

    def test_lambda_key_maps_to_regularizer(self):
        doc = json.loads(json.dumps(FAST_CONFIG))
        doc["gbdt"]["lambda"] = 2.5
        cfg = run_config_from_dict(doc)
        assert cfg.gbdt.reg_lambda == 2.5
        assert cfg.to_dict()["gbdt"]["lambda"] == 2.5

    def test_round_trip(self):
        cfg = run_config_from_dict(FAST_CONFIG)
        again = run_config_from_dict(cfg.to_dict())
        assert again == cfg


class TestRunCompare:
    def test_report_contract(self, fast_report):
        report, out = fast_report
        for res in (report.gbdt, report.ebm):
            for _, score, ordinal in res.xai.as_rows():
                assert 0.0 <= score <= 1.0
                assert ordinal in {o.value for o in xpd.Ordinal}
            for v in (res.predictive.accuracy, res.predictive.precision,
                      res.predictive.recall, res.predictive.fp_rate,
                      res.predictive.roc_auc):
                assert 0.0 <= v <= 1.0
        assert 0.0 <= report.mcnemar.p_value <= 1.0
        for name in ("report.json", "predictive.csv", "xai.csv",
                     "beeswarm_gbdt.svg", "beeswarm_ebm.svg"):
            assert (out / name).is_file()

    def test_predictive_csv_columns(self, fast_report):
        _, out = fast_report
        header = (out / "predictive.csv").read_text().splitlines()[0]
        assert header == "model,accuracy,precision,recall,fp_rate,roc_auc,runtime_seconds"

    def test_xai_csv_rows(self, fast_report):
        _, out = fast_report
        lines = (out / "xai.csv").read_text().splitlines()
        assert lines[0] == "model,metric,score,ordinal"
        assert len(lines) == 1 + 14  # 2 models x 7 metrics

    def test_report_json_round_trip(self, fast_report):
        report, out = fast_report
        back = load_report(out / "report.json")
        assert back.to_dict() == report.to_dict()

    def test_same_config_same_canonical_bytes(self, fast_report, tmp_path):
        report, _ = fast_report
        cfg = run_config_from_dict(FAST_CONFIG)
        second = run_compare(cfg, tmp_path / "again")
        assert canonical_report_bytes(second) == canonical_report_bytes(report)

    def test_worker_count_does_not_change_canonical_bytes(self, fast_report, tmp_path):
        report, _ = fast_report
        cfg = run_config_from_dict(FAST_CONFIG)
        parallel = run_compare(cfg, tmp_path / "p4", workers=4)
        assert canonical_report_bytes(parallel) == canonical_report_bytes(report)

    def test_test_labels_never_reach_training(self):
        ds = xpd.synthesize(1200, 6, seed=3, noise=0.05)
        idx = xpd.stratified_split(ds, (0.6, 0.2, 0.2), 42)
        train, valid = ds.take(idx.train), ds.take(idx.valid)
        poisoned = xpd.Dataset(ds.x.copy(), np.where(np.isin(np.arange(ds.n_rows),
                                                             idx.test),
                                                     1 - ds.y, ds.y), ds.meta)
        p_train, p_valid = poisoned.take(idx.train), poisoned.take(idx.valid)
        cfg_g = xpd.GbdtConfig(n_rounds=25, early_stopping_patience=8)
        cfg_e = xpd.EbmConfig(max_cycles=60, early_stopping_patience=15)
        from xpd.ebm import ebm_to_dict
        from xpd.gbdt import gbdt_to_dict
        assert gbdt_to_dict(xpd.gbdt_fit(train, valid, cfg_g)) == \
            gbdt_to_dict(xpd.gbdt_fit(p_train, p_valid, cfg_g))
        assert ebm_to_dict(xpd.ebm_fit(train, valid, cfg_e)) == \
            ebm_to_dict(xpd.ebm_fit(p_train, p_valid, cfg_e))

    def test_stage_error_names_stage_and_leaves_no_outputs(self, tmp_path):
        cfg = RunConfig(source=SynthSource(n=10, d=3, seed=0, noise=0.0))
        out = tmp_path / "broken"
        with pytest.raises(StageError, match="load-data"):
            run_compare(cfg, out)
        assert not (out / "report.json").exists()

    def test_single_class_source_fails_in_split_stage(self, tmp_path):
        # all-identical labels cannot be stratified; the stage must say so
        cfg = run_config_from_dict({
            "dataset": {"synth": {"n": 40, "d": 3, "seed": 0, "noise": 0.0}},
            "gbdt": {"n_rounds": 2}, "ebm": {"max_cycles": 2},
        })
        # synthesized data practically always has both classes; force the error
        # through a csv with one class instead
        p = tmp_path / "one_class.csv"
        p.write_text("f1,label\n" + "".join(f"{v},1\n" for v in range(30)),
                     encoding="utf-8")
        cfg2 = run_config_from_dict({"dataset": {"csv": {"path": str(p)}}})
        with pytest.raises(StageError, match="split"):
            run_compare(cfg2, tmp_path / "out")


class TestBeeswarm:
    def test_valid_standalone_svg(self, fast_report, tmp_path):
        _, out = fast_report
        root = ET.parse(out / "beeswarm_gbdt.svg").getroot()
        assert root.tag.endswith("svg")
        assert root.attrib.get("xmlns") is None  # ET folds xmlns into the tag
        assert len(root) > 3

    def test_single_dot(self, tmp_path):
        path = tmp_path / "one.svg"
        emit_beeswarm(np.array([[0.5]]), np.array([[1.0]]), ["f0"], path)
        text = path.read_text()
        assert text.count("<circle") == 1

    def test_constant_feature_mid_color(self, tmp_path):
        from xpd.beeswarm import _color

        path = tmp_path / "const.svg"
        phis = np.array([[0.5], [0.2], [-0.1]])
        emit_beeswarm(phis, np.ones((3, 1)), ["f0"], path)
        text = path.read_text()
        # all three dots share the midpoint color
        assert text.count(f'fill="{_color(0.5)}"') == 3

    def test_feature_order_matches_mean_abs_phi(self, tmp_path):
        rng = np.random.default_rng(0)
        phis = rng.standard_normal((40, 5)) * np.array([0.1, 5.0, 1.0, 0.01, 2.0])
        x = rng.standard_normal((40, 5))
        names = [f"f{j}" for j in range(5)]
        path = tmp_path / "order.svg"
        emit_beeswarm(phis, x, names, path)
        text = path.read_text()
        shown = [names[j] for j in beeswarm_feature_order(phis)]
        positions = [text.index(f">{n}</text>") for n in shown]
        assert positions == sorted(positions)

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        phis = rng.standard_normal((20, 3))
        x = rng.standard_normal((20, 3))
        a = emit_beeswarm(phis, x, ["a", "b", "c"], tmp_path / "a.svg").read_bytes()
        b = emit_beeswarm(phis, x, ["a", "b", "c"], tmp_path / "b.svg").read_bytes()
        assert a == b


class TestBatch:
    def test_two_runs_and_summary(self, tmp_path):
        manifest = {
            "runs": [
                {"name": "alpha", "config": FAST_CONFIG},
                {"name": "beta", "config": {**FAST_CONFIG,
                                            "dataset": {"synth": {"n": 1000, "d": 5,
                                                                  "seed": 4,
                                                                  "noise": 0.1}}}},
            ]
        }
        mpath = tmp_path / "manifest.json"
        mpath.write_text(json.dumps(manifest), encoding="utf-8")
        summary = run_batch(mpath, tmp_path / "batch")
        lines = summary.read_text().splitlines()
        assert lines[0] == "dataset,model,metric,value"
        datasets = {line.split(",")[0] for line in lines[1:]}
        assert datasets == {"alpha", "beta", "aggregate_median"}
        assert (tmp_path / "batch" / "alpha" / "report.json").is_file()
        assert (tmp_path / "batch" / "beta" / "report.json").is_file()

    def test_duplicate_names_rejected(self, tmp_path):
        manifest = {"runs": [{"name": "x", "config": FAST_CONFIG},
                             {"name": "x", "config": FAST_CONFIG}]}
        mpath = tmp_path / "m.json"
        mpath.write_text(json.dumps(manifest), encoding="utf-8")
        with pytest.raises(ConfigError, match="duplicate"):
            run_batch(mpath, tmp_path / "out")


class TestCli:
    def test_synth_writes_loadable_csv(self, tmp_path, capsys):
        out = tmp_path / "synth.csv"
        rc = main(["synth", "--n", "50", "--d", "4", "--seed", "1",
                   "--noise", "0.1", "--out", str(out)])
        assert rc == 0
        ds = xpd.load_csv(out, "label")
        assert ds.x.shape == (50, 4)

    def test_synth_bad_params_exit_2(self, tmp_path):
        rc = main(["synth", "--n", "5", "--d", "4", "--seed", "1",
                   "--out", str(tmp_path / "x.csv")])
        assert rc == 2

    def test_compare_with_config(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(FAST_CONFIG), encoding="utf-8")
        out = tmp_path / "out"
        rc = main(["compare", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        assert (out / "report.json").is_file()

    def test_compare_with_csv_data(self, tmp_path):
        data = tmp_path / "data.csv"
        xpd.save_csv(xpd.synthesize(800, 5, seed=2, noise=0.05), data)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "dataset": {"synth": {"n": 100, "d": 3, "seed": 1, "noise": 0.0}},
            "gbdt": {"n_rounds": 10}, "ebm": {"max_cycles": 20},
        }), encoding="utf-8")
        out = tmp_path / "out"
        rc = main(["compare", "--data", str(data), "--label-col", "label",
                   "--actionable", "f0,f1", "--config", str(cfg_path),
                   "--out", str(out)])
        assert rc == 0
        report = load_report(out / "report.json")
        assert report.dataset_name == "data"

    def test_compare_without_source_exit_2(self, tmp_path):
        assert main(["compare", "--out", str(tmp_path / "o")]) == 2

    def test_compare_missing_data_exit_3(self, tmp_path):
        rc = main(["compare", "--data", str(tmp_path / "absent.csv"),
                   "--out", str(tmp_path / "o")])
        assert rc == 3

    def test_compare_bad_config_exit_2(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"dataset": {"synth": {"n": 100}},
                                        "nope": 1}), encoding="utf-8")
        rc = main(["compare", "--config", str(cfg_path),
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_explain_and_plot(self, tmp_path):
        data = tmp_path / "d.csv"
        ds = xpd.synthesize(120, 4, seed=5, noise=0.05)
        xpd.save_csv(ds, data)
        idx = xpd.stratified_split(ds, (0.6, 0.2, 0.2), 42)
        model = xpd.gbdt_fit(ds.take(idx.train), ds.take(idx.valid),
                             xpd.GbdtConfig(n_rounds=8, early_stopping_patience=5))
        mpath = tmp_path / "model.json"
        xpd.save_model(model, mpath)

        out_csv = tmp_path / "explain.csv"
        rc = main(["explain", "--model", str(mpath), "--data", str(data),
                   "--out", str(out_csv)])
        assert rc == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "instance_id,feature,feature_value,phi,base_value"
        assert len(lines) == 1 + 120 * 4
        # phi rows reproduce local accuracy for the first instance
        from xpd.gbdt import gbdt_margin
        rows0 = [l.split(",") for l in lines[1: 1 + 4]]
        total = sum(float(r[3]) for r in rows0) + float(rows0[0][4])
        assert total == pytest.approx(gbdt_margin(model, ds.x[0]), abs=1e-9)

        svg = tmp_path / "plot.svg"
        rc = main(["plot", "--phis", str(out_csv), "--data", str(data),
                   "--out", str(svg)])
        assert rc == 0
        ET.parse(svg)

    def test_shapes_export(self, tmp_path):
        ds = xpd.synthesize(200, 4, seed=6, noise=0.05)
        idx = xpd.stratified_split(ds, (0.6, 0.2, 0.2), 42)
        model = xpd.ebm_fit(ds.take(idx.train), ds.take(idx.valid),
                            xpd.EbmConfig(max_cycles=20, early_stopping_patience=10))
        mpath = tmp_path / "ebm.json"
        xpd.save_model(model, mpath)
        out = tmp_path / "shapes"
        rc = main(["shapes", "--model", str(mpath), "--out", str(out)])
        assert rc == 0
        files = sorted(p.name for p in out.glob("shape_*.csv"))
        assert files == [f"shape_f{j}.csv" for j in range(4)]
        header = (out / "shape_f0.csv").read_text().splitlines()[0]
        assert header == "bin_lower,bin_upper,score,train_count"

    def test_shapes_rejects_gbdt_model(self, tmp_path):
        model = xpd.GbdtModel(base_score=0.0, learning_rate=0.1, trees=[])
        mpath = tmp_path / "g.json"
        xpd.save_model(model, mpath)
        rc = main(["shapes", "--model", str(mpath), "--out", str(tmp_path / "s")])
        assert rc == 3

    def test_batch_cli(self, tmp_path):
        manifest = {"runs": [{"name": "only", "config": FAST_CONFIG}]}
        mpath = tmp_path / "m.json"
        mpath.write_text(json.dumps(manifest), encoding="utf-8")
        rc = main(["batch", "--manifest", str(mpath), "--out", str(tmp_path / "b")])
        assert rc == 0
        assert (tmp_path / "b" / "summary.csv").is_file()
