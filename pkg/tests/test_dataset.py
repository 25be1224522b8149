import numpy as np
import pytest

from fmalign.dataset import (
    DataMatrix,
    SplitSpec,
    fit_standardizer,
    load_csv,
    load_label_sidecar,
    make_s_curve,
    make_split,
    make_swiss_roll,
    standardize,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_header_and_label_column(self, tmp_path):
        p = write(tmp_path, "d.csv", "f0,f1,label\n1,2,0\n3,4,1\n5,6,0\n")
        X = load_csv(p, label_column="label")
        assert X.values.shape == (3, 2)
        assert X.labels.tolist() == [0, 1, 0]

    def test_no_header(self, tmp_path):
        p = write(tmp_path, "d.csv", "1,2\n3,4\n")
        X = load_csv(p)
        assert X.values.shape == (2, 2)
        assert X.labels is None

    def test_nan_cell_names_position(self, tmp_path):
        p = write(tmp_path, "d.csv", "1,2\n3,NaN\n")
        with pytest.raises(ValueError, match=r"row 1, column 1"):
            load_csv(p)

    def test_garbage_cell_names_position(self, tmp_path):
        p = write(tmp_path, "d.csv", "f0,f1\n1,2\n3,oops\n")
        with pytest.raises(ValueError, match=r"row 1, column 1"):
            load_csv(p)

    def test_ragged_rows_rejected(self, tmp_path):
        p = write(tmp_path, "d.csv", "1,2\n3,4,5\n")
        with pytest.raises(ValueError, match="ragged"):
            load_csv(p)

    def test_empty_file_rejected(self, tmp_path):
        p = write(tmp_path, "d.csv", "")
        with pytest.raises(ValueError, match="empty"):
            load_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="no such file"):
            load_csv(tmp_path / "absent.csv")

    def test_label_sidecar(self, tmp_path):
        p = write(tmp_path, "d.csv", "1,2\n3,4\n")
        s = write(tmp_path, "d.labels", "1\n0\n")
        X = load_csv(p, labels_path=s)
        assert X.labels.tolist() == [1, 0]

    def test_sidecar_length_mismatch(self, tmp_path):
        p = write(tmp_path, "d.csv", "1,2\n3,4\n")
        s = write(tmp_path, "d.labels", "1\n")
        with pytest.raises(ValueError, match="1 labels for 2 samples"):
            load_csv(p, labels_path=s)

    def test_sidecar_loader(self, tmp_path):
        s = write(tmp_path, "d.labels", "3\n-1\n7\n")
        assert load_label_sidecar(s).tolist() == [3, -1, 7]


class TestStandardize:
    def test_two_point_column(self):
        X = DataMatrix(values=np.array([[1.0], [3.0]]))
        out = standardize(X)
        assert np.allclose(out.values.ravel(), [-1.0, 1.0])  # population variance

    def test_constant_column_zeroed(self):
        X = DataMatrix(values=np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
        out = standardize(X)
        assert np.all(out.values[:, 0] == 0.0)

    def test_against_two_pass_oracle(self):
        rng = np.random.default_rng(11)
        vals = rng.standard_normal((10, 4)) * 3.0 + 1.5
        out = standardize(DataMatrix(values=vals)).values
        for c in range(4):
            col = vals[:, c]
            mean = sum(col) / len(col)
            var = sum((v - mean) ** 2 for v in col) / len(col)
            expect = (col - mean) / np.sqrt(var)
            assert np.allclose(out[:, c], expect, atol=1e-12)
            assert abs(out[:, c].mean()) < 1e-10
            assert abs(out[:, c].var() - 1.0) < 1e-10

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        X = DataMatrix(values=rng.standard_normal((20, 3)))
        once = standardize(X)
        twice = standardize(once)
        assert np.allclose(once.values, twice.values, atol=1e-10)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="at least 2"):
            fit_standardizer(np.ones((1, 3)))


class TestMakeSplit:
    def labeled(self, per_class, n_classes=2, seed=0):
        rng = np.random.default_rng(seed)
        labels = np.repeat(np.arange(n_classes), per_class)
        return DataMatrix(values=rng.standard_normal((labels.size, 3)), labels=labels)

    def test_deterministic(self):
        X = self.labeled(30)
        spec = SplitSpec(3, 3, seed=42, split_index=4)
        a = make_split(X, X, spec)
        b = make_split(X, X, spec)
        for side in (0, 1):
            for cls in a[side]:
                assert a[side][cls].tolist() == b[side][cls].tolist()

    def test_split_independent_of_earlier_splits(self):
        # split 4 is reproducible without generating splits 0..3
        X = self.labeled(30)
        direct = make_split(X, X, SplitSpec(3, 3, seed=9, split_index=4))
        for i in range(4):
            make_split(X, X, SplitSpec(3, 3, seed=9, split_index=i))
        again = make_split(X, X, SplitSpec(3, 3, seed=9, split_index=4))
        assert direct[0][0].tolist() == again[0][0].tolist()

    def test_infeasible_count_names_class(self):
        X = self.labeled(30)
        with pytest.raises(ValueError, match="class 0"):
            make_split(X, X, SplitSpec(31, 3))

    def test_counts_and_disjointness(self):
        X = self.labeled(30, n_classes=3)
        src, tgt = make_split(X, X, SplitSpec(5, 2, seed=1))
        for cls, idx in src.items():
            assert idx.size == 5
            assert np.unique(idx).size == 5
            assert np.all(X.labels[idx] == cls)
        for cls, idx in tgt.items():
            assert idx.size == 2

    def test_selection_frequency_binomial(self):
        # 20 splits on a 100-sample dataset: per-sample selection counts stay
        # within 3 sigma of the uniform binomial expectation
        X = self.labeled(50, n_classes=2, seed=3)
        draws = 10
        splits = 20
        counts = np.zeros(100)
        for s in range(splits):
            src, _ = make_split(X, X, SplitSpec(draws, 1, seed=123, split_index=s))
            for idx in src.values():
                counts[idx] += 1
        p = draws / 50
        sigma = np.sqrt(splits * p * (1 - p))
        assert np.all(np.abs(counts - splits * p) <= 3 * sigma)


class TestSyntheticManifolds:
    def test_swiss_noiseless_on_surface(self):
        X, t = make_swiss_roll(100, noise=0.0, seed=1)
        x, h, z = X.values[:, 0], X.values[:, 1], X.values[:, 2]
        assert np.max(np.abs(x - t * np.cos(t))) < 1e-12
        assert np.max(np.abs(z - t * np.sin(t))) < 1e-12
        # intrinsic parameter orders points along the roll
        order = np.argsort(t)
        assert np.all(np.diff(t[order]) >= 0)

    def test_swiss_single_point(self):
        X, t = make_swiss_roll(1, noise=0.0, seed=7)
        assert np.allclose(X.values[0, 0], t[0] * np.cos(t[0]))

    def test_s_curve_noiseless_on_surface(self):
        X, t = make_s_curve(100, noise=0.0, seed=2)
        assert np.max(np.abs(X.values[:, 0] - np.sin(t))) < 1e-12
        assert np.max(np.abs(X.values[:, 2] - np.sign(t) * (np.cos(t) - 1))) < 1e-12

    def test_seed_determinism(self):
        a, ta = make_swiss_roll(50, noise=0.1, seed=3)
        b, tb = make_swiss_roll(50, noise=0.1, seed=3)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(ta, tb)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_swiss_roll(0)
        with pytest.raises(ValueError):
            make_s_curve(5, noise=-1.0)


class TestDataMatrix:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="non-finite"):
            DataMatrix(values=np.array([[1.0, np.inf]]))

    def test_label_length_checked(self):
        with pytest.raises(ValueError, match="labels length"):
            DataMatrix(values=np.ones((3, 2)), labels=np.array([1, 2]))


class TestBenchmarkFeatureFiles:
    """Shape checks on downloaded benchmark files, when available."""

    def test_amazon_surf_shape(self):
        import os
        from pathlib import Path

        data_dir = os.environ.get("FMALIGN_DATA_DIR")
        path = Path(data_dir) / "amazon_surf.csv" if data_dir else None
        if path is None or not path.exists():
            pytest.skip("amazon_surf.csv not available")
        X = load_csv(path, label_column="label")
        assert X.values.shape == (958, 800)
        assert X.labels.size == 958
