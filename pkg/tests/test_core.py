import numpy as np
import pytest

from crot import (
    AUTO,
    CrotConfig,
    DataMatrix,
    MaskSpec,
    RngStream,
    ValidationError,
    column_mean,
    sample_indices,
)
from crot.io import read_matrix_csv, write_matrix_csv


def mat(rows):
    return DataMatrix(np.asarray(rows, dtype=float))


class TestDataMatrix:
    def test_shape_and_accessors(self):
        X = mat([[1, 2, 3], [4, 5, 6]])
        assert (X.rows, X.cols) == (2, 3)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            DataMatrix(np.array([[1.0, np.nan]]))
        with pytest.raises(ValidationError):
            DataMatrix(np.array([[np.inf, 0.0]]))

    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValidationError):
            DataMatrix(np.zeros(3))

    def test_rejects_duplicate_col_names(self):
        with pytest.raises(ValidationError):
            DataMatrix(np.zeros((1, 2)), col_names=("a", "a"))

    def test_rejects_mismatched_names(self):
        with pytest.raises(ValidationError):
            DataMatrix(np.zeros((1, 2)), col_names=("a",))
        with pytest.raises(ValidationError):
            DataMatrix(np.zeros((2, 1)), row_ids=("r0",))

    def test_copy_is_independent(self):
        X = mat([[1.0, 2.0]])
        Y = X.copy()
        Y.values[0, 0] = 9.0
        assert X.values[0, 0] == 1.0


class TestMaskSpec:
    def test_normalizes_sorted_unique(self):
        assert MaskSpec((3, 1, 3, 2)).missing_cols == (1, 2, 3)

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            MaskSpec((-1, 2))

    def test_rejects_bad_scope(self):
        with pytest.raises(ValidationError):
            MaskSpec((0,), scope=(4, 2))

    def test_validate_for_range(self):
        X = mat([[1, 2], [3, 4]])
        with pytest.raises(ValidationError):
            MaskSpec((5,)).validate_for(X)
        with pytest.raises(ValidationError):
            MaskSpec(()).validate_for(X)
        MaskSpec(()).validate_for(X, require_nonempty=False)

    def test_scope_rows(self):
        m = MaskSpec((0,), scope=(1, 3))
        assert m.scope_rows(5).tolist() == [1, 2]
        assert MaskSpec((0,)).scope_rows(3).tolist() == [0, 1, 2]


class TestCrotConfig:
    def test_defaults_valid(self):
        cfg = CrotConfig()
        assert cfg.epsilon == AUTO and cfg.k == AUTO

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epsilon": 0.0},
            {"epsilon": "wat"},
            {"p": 0},
            {"alpha": -0.1},
            {"iterations": 0},
            {"batch_size": 0},
            {"k": 0},
            {"k": "three"},
            {"k_max": 2},
            {"learning_rate": 0.0},
            {"adam_beta1": 1.0},
            {"adam_beta2": 0.0},
            {"adam_eps": 0.0},
            {"sinkhorn_max_iter": 0},
            {"sinkhorn_tol": 0.0},
            {"convergence_window": 0},
            {"convergence_rel_tol": 0.0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValidationError):
            CrotConfig(**kwargs)


class TestRngStream:
    def test_replay_identical(self):
        s = RngStream(42, "x")
        a = s.generator().standard_normal(8)
        b = s.generator().standard_normal(8)
        assert np.array_equal(a, b)

    def test_streams_independent(self):
        a = RngStream(42, "a").generator().standard_normal(8)
        b = RngStream(42, "b").generator().standard_normal(8)
        assert not np.array_equal(a, b)

    def test_substream_label_composition(self):
        s = RngStream(1, "root").substream("init")
        assert s.stream_id == "root/init"

    def test_negative_seed_ok(self):
        RngStream(-5, "x").generator().standard_normal(2)


class TestColumnMean:
    def test_two_point_mean(self):
        assert column_mean(mat([[1], [3]]), 0) == 2.0

    def test_constant_column(self):
        assert column_mean(mat([[5, 0], [5, 0], [5, 0]]), 0) == 5.0

    def test_hand_sum(self):
        # (2 + 4 + 0) / 3
        assert column_mean(mat([[1, 2], [2, 4], [6, 0]]), 1) == pytest.approx(2.0, abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            column_mean(mat([[1.0]]), 1)

    def test_empty_matrix(self):
        with pytest.raises(ValidationError):
            column_mean(DataMatrix(np.zeros((0, 2))), 0)

    def test_row_permutation_invariant(self):
        gen = np.random.default_rng(3)
        X = gen.normal(size=(40, 3))
        for j in range(3):
            base = column_mean(DataMatrix(X), j)
            for _ in range(5):
                perm = gen.permutation(40)
                assert column_mean(DataMatrix(X[perm]), j) == pytest.approx(base, abs=1e-12)


class TestSampleIndices:
    def test_exhaustive_sample_is_permutation(self):
        idx = sample_indices(5, 5, RngStream(0, "s"))
        assert sorted(idx.tolist()) == [0, 1, 2, 3, 4]

    def test_single_choice(self):
        assert sample_indices(1, 1, RngStream(0, "s")).tolist() == [0]

    def test_deterministic_and_seed_sensitive(self):
        a = sample_indices(1000, 100, RngStream(7, "s"))
        b = sample_indices(1000, 100, RngStream(7, "s"))
        c = sample_indices(1000, 100, RngStream(8, "s"))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_distinct_of_length_l(self):
        for i in range(20):
            idx = sample_indices(50, 20, RngStream(i, "s"))
            assert len(set(idx.tolist())) == 20

    def test_rejects_oversample(self):
        with pytest.raises(ValidationError):
            sample_indices(3, 4, RngStream(0, "s"))

    def test_coupon_collector_coverage(self):
        root = RngStream(5, "cc")
        seen = set()
        for i in range(200):
            seen.update(sample_indices(13, 1, root.substream(str(i))).tolist())
            if len(seen) == 13:
                break
        assert len(seen) == 13


class TestCsvRoundTrip:
    def test_bit_identical_round_trip(self, tmp_path):
        gen = np.random.default_rng(11)
        vals = gen.normal(size=(7, 4)) * 10.0 ** gen.integers(-8, 8, size=(7, 4))
        X = DataMatrix(
            vals,
            col_names=tuple(f"g{i}" for i in range(4)),
            row_ids=tuple(f"cell{i}" for i in range(7)),
        )
        path = tmp_path / "m.csv"
        write_matrix_csv(path, X)
        Y = read_matrix_csv(path)
        assert np.array_equal(X.values, Y.values)
        assert Y.col_names == X.col_names
        assert Y.row_ids == X.row_ids

    def test_round_trip_without_ids(self, tmp_path):
        X = mat([[1.5, -2.25], [1e-300, 1e300]])
        path = tmp_path / "m.csv"
        write_matrix_csv(path, X)
        Y = read_matrix_csv(path)
        assert np.array_equal(X.values, Y.values)
        assert Y.col_names == ("c0", "c1")
