import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import xpd
from xpd.dataset import FeatureMeta, load_csv, registry, save_csv, stratified_split, synthesize
from xpd.errors import DataError
from xpd.gbdt import gbdt_margin_matrix


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_basic_parse(self, tmp_path):
        p = write(tmp_path, "f1,f2,label\n0.5,1,1\n0.2,0,0\n")
        ds = load_csv(p, "label")
        assert ds.x.shape == (2, 2)
        assert ds.meta[0].kind == "numeric"
        assert ds.meta[1].kind == "binary"
        assert ds.y.tolist() == [1, 0]

    def test_label_column_position_ignored(self, tmp_path):
        p = write(tmp_path, "label,f1\n1,0.5\n0,0.2\n")
        ds = load_csv(p, "label")
        assert ds.feature_names == ["f1"]
        assert ds.x[:, 0].tolist() == [0.5, 0.2]

    def test_signed_labels_remapped(self, tmp_path):
        p = write(tmp_path, "f1,label\n0.1,-1\n0.2,1\n")
        ds = load_csv(p, "label")
        assert ds.y.tolist() == [0, 1]

    def test_actionable_flags(self, tmp_path):
        p = write(tmp_path, "f1,f2,label\n0.5,1,1\n0.2,0,0\n")
        ds = load_csv(p, "label", actionable_columns=["f2"])
        assert [m.actionable for m in ds.meta] == [False, True]

    def test_unknown_actionable_column(self, tmp_path):
        p = write(tmp_path, "f1,label\n0.5,1\n0.2,0\n")
        with pytest.raises(DataError, match="actionable"):
            load_csv(p, "label", actionable_columns=["nope"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "absent.csv", "label")

    def test_missing_label_column(self, tmp_path):
        p = write(tmp_path, "f1,f2\n1,2\n")
        with pytest.raises(DataError, match="label"):
            load_csv(p, "label")

    def test_empty_cell_names_row_and_column(self, tmp_path):
        p = write(tmp_path, "f1,f2,label\n0.5,,1\n")
        with pytest.raises(DataError, match=r"row 2.*'f2'"):
            load_csv(p, "label")

    def test_unparseable_cell_names_row_and_column(self, tmp_path):
        p = write(tmp_path, "f1,label\n0.5,1\nxyz,0\n")
        with pytest.raises(DataError, match=r"'xyz'.*row 3.*'f1'"):
            load_csv(p, "label")

    def test_non_binary_label(self, tmp_path):
        p = write(tmp_path, "f1,label\n0.5,2\n")
        with pytest.raises(DataError, match="non-binary"):
            load_csv(p, "label")

    def test_duplicate_header(self, tmp_path):
        p = write(tmp_path, "f1,f1,label\n1,2,0\n")
        with pytest.raises(DataError, match="duplicate"):
            load_csv(p, "label")

    def test_benchmark_scale_shape(self, tmp_path):
        # 11055 rows x 31 feature columns, the classic phishing table shape
        rng = np.random.default_rng(0)
        names = [f"c{j}" for j in range(31)]
        rows = rng.integers(-1, 2, size=(11055, 31))
        labels = rng.integers(0, 2, size=11055)
        lines = [",".join(names + ["label"])]
        lines += [",".join(map(str, r)) + f",{l}" for r, l in zip(rows.tolist(), labels.tolist())]
        p = write(tmp_path, "\n".join(lines) + "\n")
        ds = load_csv(p, "label")
        assert ds.x.shape == (11055, 31)

    def test_round_trip_is_value_exact(self, tmp_path):
        ds = synthesize(60, 5, seed=11, noise=0.1)
        p = tmp_path / "rt.csv"
        save_csv(ds, p)
        back = load_csv(p, "label")
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.y, ds.y)


class TestDatasetValidation:
    def test_rejects_non_finite(self):
        with pytest.raises(DataError, match="non-finite"):
            xpd.Dataset(np.array([[np.nan]]), np.array([0]), (FeatureMeta("a"),))

    def test_rejects_bad_labels(self):
        with pytest.raises(DataError, match="labels"):
            xpd.Dataset(np.ones((2, 1)), np.array([0, 2]), (FeatureMeta("a"),))

    def test_rejects_duplicate_names(self):
        with pytest.raises(DataError, match="unique"):
            xpd.Dataset(np.ones((1, 2)), np.array([1]),
                        (FeatureMeta("a"), FeatureMeta("a")))

    def test_rejects_non_binary_values_for_binary_kind(self):
        with pytest.raises(DataError, match="binary"):
            xpd.Dataset(np.array([[0.5]]), np.array([1]),
                        (FeatureMeta("a", kind="binary"),))

    def test_immutable(self):
        ds = synthesize(30, 3, seed=0)
        with pytest.raises(ValueError):
            ds.x[0, 0] = 5.0


class TestStratifiedSplit:
    def test_forced_allocation(self):
        x = np.arange(20, dtype=float).reshape(10, 2)
        y = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0])
        ds = xpd.Dataset(x, y, (FeatureMeta("a"), FeatureMeta("b")))
        idx = stratified_split(ds, (0.6, 0.2, 0.2), seed=0)
        assert (idx.train.size, idx.valid.size, idx.test.size) == (6, 2, 2)
        assert ds.y[idx.train].sum() == 3
        assert ds.y[idx.valid].sum() == 1
        assert ds.y[idx.test].sum() == 1

    def test_deterministic(self):
        ds = synthesize(200, 4, seed=5)
        a = stratified_split(ds, (0.6, 0.2, 0.2), seed=9)
        b = stratified_split(ds, (0.6, 0.2, 0.2), seed=9)
        for pa, pb in zip(a.parts(), b.parts()):
            assert np.array_equal(pa, pb)

    def test_bad_ratio_sum(self):
        ds = synthesize(40, 3, seed=1)
        with pytest.raises(ValueError, match="sum to 1"):
            stratified_split(ds, (0.5, 0.5, 0.5), seed=0)

    def test_non_positive_ratio(self):
        ds = synthesize(40, 3, seed=1)
        with pytest.raises(ValueError, match="positive"):
            stratified_split(ds, (1.0, 0.0, 0.0), seed=0)

    def test_starved_training_class(self):
        x = np.arange(8, dtype=float).reshape(4, 2)
        ds = xpd.Dataset(x, np.array([1, 0, 0, 0]), (FeatureMeta("a"), FeatureMeta("b")))
        with pytest.raises(DataError, match="0 training"):
            stratified_split(ds, (0.1, 0.8, 0.1), seed=0)

    @settings(max_examples=40, deadline=None)
    @given(
        n_pos=st.integers(3, 80),
        n_neg=st.integers(3, 80),
        seed=st.integers(0, 2**31),
        ratios=st.sampled_from([(0.6, 0.2, 0.2), (0.5, 0.25, 0.25), (0.7, 0.15, 0.15)]),
    )
    def test_parts_partition_rows_with_proportional_classes(self, n_pos, n_neg, seed, ratios):
        n = n_pos + n_neg
        y = np.array([1] * n_pos + [0] * n_neg)
        x = np.arange(n, dtype=float).reshape(n, 1)
        ds = xpd.Dataset(x, y, (FeatureMeta("a"),))
        idx = stratified_split(ds, ratios, seed=seed)
        allp = np.concatenate(idx.parts())
        assert np.array_equal(np.sort(allp), np.arange(n))
        for part, ratio in zip(idx.parts(), ratios):
            for cls, n_cls in ((0, n_neg), (1, n_pos)):
                got = int(np.sum(ds.y[part] == cls))
                assert abs(got - n_cls * ratio) < 1.0


class TestSynthesize:
    def test_shape_and_class_balance(self):
        ds = synthesize(1000, 18, seed=7, noise=0.0)
        assert ds.x.shape == (1000, 18)
        assert 0.35 <= ds.y.mean() <= 0.65

    def test_pure_noise_has_no_signal(self):
        ds = synthesize(2000, 8, seed=3, noise=0.5)
        idx = stratified_split(ds, (0.6, 0.2, 0.2), seed=42)
        train, valid, test = (ds.take(p) for p in idx.parts())
        model = xpd.gbdt_fit(train, valid,
                             xpd.GbdtConfig(n_rounds=30, early_stopping_patience=30))
        auc = xpd.roc_auc(gbdt_margin_matrix(model, test.x), test.y)
        assert 0.45 <= auc <= 0.55

    def test_deterministic(self):
        a = synthesize(300, 7, seed=12, noise=0.1)
        b = synthesize(300, 7, seed=12, noise=0.1)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_seed_changes_data(self):
        a = synthesize(300, 7, seed=1)
        b = synthesize(300, 7, seed=2)
        assert not np.array_equal(a.x, b.x)

    def test_binary_block_and_actionable_flags(self):
        ds = synthesize(100, 18, seed=0)
        kinds = [m.kind for m in ds.meta]
        assert kinds.count("binary") == 4
        assert sum(m.actionable for m in ds.meta) == 6
        assert [m.actionable for m in ds.meta[:6]] == [True] * 6
        assert ds.feature_names == [f"f{j}" for j in range(18)]

    def test_minimums_enforced(self):
        with pytest.raises(ValueError):
            synthesize(10, 5, seed=0)
        with pytest.raises(ValueError):
            synthesize(50, 1, seed=0)
        with pytest.raises(ValueError):
            synthesize(50, 5, seed=0, noise=1.0)


class TestRegistry:
    def test_entry_count(self):
        assert len(registry()) == 12

    def test_known_rows(self):
        reg = registry()
        assert (reg["ds_600K11"].n_instances, reg["ds_600K11"].n_features) == (662591, 10)
        assert (reg["ds_11K89"].n_instances, reg["ds_11K89"].n_features) == (11481, 89)
        assert (reg["ds_11055"].n_instances, reg["ds_11055"].n_features) == (11055, 31)

    def test_all_shapes(self):
        expected = {
            "ds_100K20": (100077, 20), "ds_10K18": (10000, 18),
            "ds_10K50": (10000, 49), "ds_11055_rev": (11055, 32),
            "ds_11055": (11055, 31), "ds_11K89": (11481, 89),
            "ds_129K112": (129698, 112), "ds_235795_54": (235795, 55),
            "ds_247950": (247950, 42), "ds_600K11": (662591, 10),
            "ds_88K112": (88647, 112), "ds_90K32": (90000, 34),
        }
        assert {k: (v.n_instances, v.n_features) for k, v in registry().items()} == expected
