import numpy as np
import pytest

from dpsearch.data import Dataset, dumps, generate, generate_documents, load, load_truth, save
from dpsearch.errors import InputError
from dpsearch.prior import is_canonical

# E[K] for N = 50, alpha = 1 is the harmonic number H_50
H50 = sum(1.0 / i for i in range(1, 51))


class TestGenerate:
    def test_shapes_and_truth(self):
        ds = generate(30, dim=3, seed=1)
        assert ds.points.shape == (30, 3) and ds.kind == "dense"
        assert len(ds.truth) == 30 and is_canonical(ds.truth)
        assert ds.provenance["seed"] == 1

    def test_seeded(self):
        a, b = generate(20, seed=7), generate(20, seed=7)
        np.testing.assert_array_equal(a.points, b.points)
        assert a.truth == b.truth
        assert not np.array_equal(a.points, generate(20, seed=8).points)

    def test_expected_cluster_count(self):
        ks = [len(set(generate(50, seed=s).truth)) for s in range(1000)]
        assert abs(np.mean(ks) - H50) <= 0.15

    def test_tiny_alpha_gives_one_cluster(self):
        assert set(generate(40, alpha=1e-9, seed=3).truth) == {0}

    def test_documents(self):
        ds = generate_documents(12, vocab=6, doc_length=9, seed=2)
        assert ds.points.shape == (12, 6) and ds.kind == "sparse"
        assert (ds.points.sum(axis=1) == 9).all()

    @pytest.mark.parametrize("kw", [dict(n=0), dict(n=5, alpha=0.0), dict(n=5, obs_var=-1.0)])
    def test_bad_arguments(self, kw):
        with pytest.raises(InputError):
            generate(**kw)


class TestIO:
    def test_dense_round_trip_is_byte_identical(self, tmp_path):
        ds = generate(25, dim=2, seed=4)
        path = tmp_path / "x.csv"
        save(ds, path, "dense-csv", tmp_path / "x.truth")
        back = load(path, "dense-csv", tmp_path / "x.truth")
        np.testing.assert_array_equal(back.points, ds.points)
        assert back.truth == ds.truth
        assert dumps(back) == path.read_text()

    def test_sparse_round_trip(self, tmp_path):
        ds = generate_documents(10, vocab=5, seed=5)
        path = tmp_path / "docs.txt"
        save(ds, path, "sparse-triplet")
        back = load(path, "sparse-triplet", vocab=5)
        np.testing.assert_array_equal(back.points, ds.points)

    def test_sparse_accumulates_and_pads(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("0 1 2\n0 1 1\n2 0 4\n")
        ds = load(path, "sparse-triplet")
        np.testing.assert_array_equal(ds.points, [[0, 3], [0, 0], [4, 0]])

    def test_dense_error_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n\n3.0,oops\n")
        with pytest.raises(InputError, match=":3:"):
            load(path)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(InputError, match=":2: expected 2 values"):
            load(path)

    def test_sparse_errors(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1 2\n0 7 1\n")
        with pytest.raises(InputError, match=":2:.*vocabulary"):
            load(path, "sparse-triplet", vocab=5)
        path.write_text("0 1\n")
        with pytest.raises(InputError, match=":1:"):
            load(path, "sparse-triplet")

    def test_truth_errors(self, tmp_path):
        data, truth = tmp_path / "x.csv", tmp_path / "t.txt"
        data.write_text("1.0\n2.0\n")
        truth.write_text("0\nx\n")
        with pytest.raises(InputError, match=":2:"):
            load_truth(truth)
        truth.write_text("0\n")
        with pytest.raises(InputError, match="1 labels for 2 points"):
            load(data, truth_path=truth)

    def test_missing_and_empty(self, tmp_path):
        with pytest.raises(InputError):
            load(tmp_path / "nope.csv")
        (tmp_path / "empty.csv").write_text("\n")
        with pytest.raises(InputError):
            load(tmp_path / "empty.csv")
        with pytest.raises(InputError):
            load(tmp_path / "empty.csv", "parquet")

    def test_dataset_validation(self):
        with pytest.raises(InputError):
            Dataset("dense", np.zeros((3, 2)), truth=(0, 1))
        with pytest.raises(InputError):
            Dataset("ragged", np.zeros((3, 2)))
