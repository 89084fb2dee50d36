"""Unit tests for imputation: specs, mean/knn/iterative transforms, storage."""

import json

import numpy as np
import pytest

from mdew.data import dataset_from_arrays
from mdew.errors import ConfigError, DataError
from mdew.imputers import (
    IMPUTER_NAMES,
    ImputerSpec,
    fit_imputer,
    imputer_from_dict,
    imputer_to_dict,
    impute_dataset,
    nan_euclidean_distances,
    spec_from_name,
    spec_key,
)
from mdew.learners import TreeParams
from mdew.missingness import ampute_mcar, imputation_rmse

from conftest import make_correlated

NAN = float("nan")


def _ds(values):
    values = np.asarray(values, dtype=np.float64)
    return dataset_from_arrays(values, np.zeros(len(values)))


class TestSpecs:
    def test_registry_has_six_named_imputers(self):
        assert sorted(IMPUTER_NAMES) == [
            "gbm-iter",
            "knn",
            "knn-iter",
            "mean",
            "rf-iter",
            "ridge-iter",
        ]
        for name, spec in IMPUTER_NAMES.items():
            assert spec_from_name(name) == spec

    def test_unknown_name_and_kind(self):
        with pytest.raises(ConfigError):
            spec_from_name("median")
        with pytest.raises(ConfigError):
            ImputerSpec(kind="median")

    def test_backbone_only_for_iterative(self):
        with pytest.raises(ConfigError):
            ImputerSpec(kind="iterative")  # backbone required
        with pytest.raises(ConfigError):
            ImputerSpec(kind="iterative", backbone="mystery")
        with pytest.raises(ConfigError):
            ImputerSpec(kind="mean", backbone="bayes_ridge")

    def test_numeric_bounds(self):
        with pytest.raises(ConfigError):
            ImputerSpec(kind="knn", k=0)
        with pytest.raises(ConfigError):
            ImputerSpec(kind="iterative", backbone="forest", max_rounds=-1)
        with pytest.raises(ConfigError):
            ImputerSpec(kind="iterative", backbone="forest", tolerance=0.0)

    def test_spec_key_identity(self):
        spec = spec_from_name("rf-iter")
        assert spec_key(spec, 3) == spec_key(spec_from_name("rf-iter"), 3)
        assert spec_key(spec, 3) != spec_key(spec, 4)
        assert spec_key(spec, 3) != spec_key(spec_from_name("gbm-iter"), 3)
        custom = ImputerSpec(
            kind="iterative", backbone="forest", backbone_params=TreeParams(n_trees=7)
        )
        assert spec_key(custom, 3) != spec_key(spec, 3)


class TestNanDistances:
    def test_overlap_rescaling_oracle(self):
        A = np.array([[0.0, 0.0, 0.0]])
        Am = np.array([[False, True, False]])
        B = np.array([[1.0, 9.0, 0.0]])
        Bm = np.zeros((1, 3), dtype=bool)
        # squared gap 1 over a 2-of-3 overlap rescales to 3/2 before the root
        got = nan_euclidean_distances(A, Am, B, Bm)
        assert got[0, 0] == pytest.approx(np.sqrt(1.5), abs=1e-12)

    def test_no_overlap_is_infinite(self):
        A = np.array([[1.0, 0.0]])
        Am = np.array([[False, True]])
        B = np.array([[0.0, 2.0]])
        Bm = np.array([[True, False]])
        assert np.isinf(nan_euclidean_distances(A, Am, B, Bm)[0, 0])

    def test_complete_rows_match_plain_euclidean(self):
        rng = np.random.default_rng(60)
        A = rng.normal(size=(6, 4))
        B = rng.normal(size=(5, 4))
        no_mask_a = np.zeros(A.shape, dtype=bool)
        no_mask_b = np.zeros(B.shape, dtype=bool)
        got = nan_euclidean_distances(A, no_mask_a, B, no_mask_b)
        want = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2))
        assert np.allclose(got, want, atol=1e-12)


class TestMeanImputer:
    def test_fills_with_observed_column_mean(self):
        data = _ds([[1.0, 10.0], [NAN, 20.0], [3.0, NAN]])
        fitted = fit_imputer(spec_from_name("mean"), data)
        out = fitted.transform(data)
        assert out[1, 0] == 2.0  # mean of {1, 3}
        assert out[2, 1] == 15.0  # mean of {10, 20}
        assert out[0, 0] == 1.0 and out[0, 1] == 10.0  # observed cells untouched

    def test_fully_missing_column_rejected(self):
        data = _ds([[1.0, NAN], [2.0, NAN]])
        with pytest.raises(DataError):
            fit_imputer(spec_from_name("mean"), data)


class TestKnnImputer:
    def test_exact_match_donates_its_value(self):
        train = _ds([[0.0, 7.0], [5.0, 1.0], [9.0, 3.0]])
        fitted = fit_imputer(ImputerSpec(kind="knn", k=1), train)
        out = fitted.transform_masked(
            np.array([[0.0, 0.0]]), np.array([[False, True]])
        )
        assert out[0, 1] == 7.0

    def test_donor_must_observe_the_column(self):
        train = dataset_from_arrays(
            np.array([[0.0, NAN], [0.1, 5.0], [10.0, 7.0]]), np.zeros(3)
        )
        fitted = fit_imputer(ImputerSpec(kind="knn", k=1), train)
        out = fitted.transform_masked(
            np.array([[0.0, 0.0]]), np.array([[False, True]])
        )
        # nearest row is missing that column, so the next-nearest donates
        assert out[0, 1] == 5.0

    def test_all_missing_query_falls_back_to_means(self):
        train = _ds([[1.0, 10.0], [3.0, 20.0]])
        fitted = fit_imputer(ImputerSpec(kind="knn", k=2), train)
        out = fitted.transform_masked(
            np.array([[0.0, 0.0]]), np.array([[True, True]])
        )
        assert np.array_equal(out[0], np.array([2.0, 15.0]))

    def test_k_donors_are_averaged(self):
        train = _ds([[0.0, 4.0], [0.1, 8.0], [50.0, 100.0]])
        fitted = fit_imputer(ImputerSpec(kind="knn", k=2), train)
        out = fitted.transform_masked(
            np.array([[0.0, 0.0]]), np.array([[False, True]])
        )
        assert out[0, 1] == 6.0


class TestIterativeImputer:
    def test_zero_rounds_degenerates_to_mean_fill(self):
        data = make_correlated(60, 4, 0.8, seed=61)
        masked = ampute_mcar(data, 0.3, seed=61).data
        spec = ImputerSpec(kind="iterative", backbone="bayes_ridge", max_rounds=0)
        out = fit_imputer(spec, masked).transform(masked)
        mean_out = fit_imputer(spec_from_name("mean"), masked).transform(masked)
        assert np.array_equal(out, mean_out)

    def test_recovers_exact_linear_dependence(self):
        rng = np.random.default_rng(62)
        X = rng.normal(size=(120, 3))
        X = np.column_stack([X, 2.0 * X[:, 0] - X[:, 1]])
        hide = rng.random(120) < 0.3
        values = X.copy()
        values[hide, 3] = NAN
        data = dataset_from_arrays(values, np.zeros(120))
        fitted = fit_imputer(spec_from_name("ridge-iter"), data)
        out = fitted.transform(data)
        assert np.max(np.abs(out[hide, 3] - X[hide, 3])) < 0.05

    def test_beats_mean_fill_on_correlated_data(self):
        data = make_correlated(200, 6, 0.9, seed=63)
        result = ampute_mcar(data, 0.3, seed=63)
        ridge_out = fit_imputer(spec_from_name("ridge-iter"), result.data).transform(
            result.data
        )
        mean_out = fit_imputer(spec_from_name("mean"), result.data).transform(
            result.data
        )
        assert imputation_rmse(result, ridge_out) < imputation_rmse(result, mean_out)

    def test_sweep_order_ascending_missing_count_with_index_ties(self):
        values = np.array(
            [
                [NAN, 1.0, NAN, 0.0],
                [NAN, 2.0, NAN, 1.0],
                [NAN, NAN, 3.0, 2.0],
                [4.0, 5.0, 6.0, 3.0],
                [7.0, 8.0, 9.0, 4.0],
                [1.0, 2.0, 3.0, 5.0],
            ]
        )  # missing counts: col0=3, col1=1, col2=2, col3=0
        data = dataset_from_arrays(values, np.zeros(6))
        fitted = fit_imputer(spec_from_name("ridge-iter"), data)
        assert fitted.sweep_order == [1, 2, 0]

        tied = np.array([[NAN, NAN, 0.0], [1.0, 2.0, 3.0], [NAN, NAN, 6.0]])
        fitted_tied = fit_imputer(
            spec_from_name("ridge-iter"), dataset_from_arrays(tied, np.zeros(3))
        )
        assert fitted_tied.sweep_order == [0, 1]

    def test_complete_data_is_untouched(self):
        rng = np.random.default_rng(64)
        data = dataset_from_arrays(rng.normal(size=(30, 4)), np.zeros(30))
        for name in IMPUTER_NAMES:
            fitted = fit_imputer(spec_from_name(name), data, seed=1)
            assert np.array_equal(fitted.transform(data), data.values), name

    @pytest.mark.parametrize("name", ["rf-iter", "gbm-iter", "knn-iter"])
    def test_tree_and_knn_backbones_run_and_reproduce(self, name):
        data = make_correlated(80, 4, 0.8, seed=65)
        masked = ampute_mcar(data, 0.25, seed=65).data
        spec = IMPUTER_NAMES[name]
        if name != "knn-iter":
            spec = ImputerSpec(
                kind="iterative",
                backbone=spec.backbone,
                max_rounds=2,
                backbone_params=TreeParams(n_trees=5, max_depth=3),
            )
        a = fit_imputer(spec, masked, seed=7).transform(masked)
        b = fit_imputer(spec, masked, seed=7).transform(masked)
        assert np.isfinite(a).all()
        assert np.array_equal(a, b)


class TestTransformContract:
    def test_transform_masked_matches_transform(self):
        data = make_correlated(50, 4, 0.7, seed=66)
        masked = ampute_mcar(data, 0.3, seed=66).data
        for name in ("mean", "knn", "ridge-iter"):
            fitted = fit_imputer(spec_from_name(name), masked)
            assert np.array_equal(
                fitted.transform(masked),
                fitted.transform_masked(masked.values, masked.mask),
            ), name

    def test_width_mismatch_rejected(self):
        fitted = fit_imputer(spec_from_name("mean"), _ds([[1.0, 2.0], [3.0, NAN]]))
        with pytest.raises(DataError):
            fitted.transform_masked(np.zeros((2, 3)), np.zeros((2, 3), dtype=bool))

    def test_observed_cells_never_change(self):
        data = make_correlated(60, 5, 0.8, seed=67)
        masked = ampute_mcar(data, 0.3, seed=67).data
        observed = ~masked.mask
        for name in IMPUTER_NAMES:
            fitted = fit_imputer(spec_from_name(name), masked, seed=2)
            out = fitted.transform(masked)
            assert np.array_equal(out[observed], masked.values[observed]), name


class TestImputeDataset:
    def test_statistics_come_from_train_only(self):
        train = _ds([[1.0, 5.0], [3.0, 7.0], [NAN, 6.0]])
        test = _ds([[NAN, 106.0], [102.0, NAN]])  # shifted by +100
        _, (train_out, test_out) = impute_dataset(
            spec_from_name("mean"), train, [test]
        )
        assert train_out[2, 0] == 2.0
        assert test_out[0, 0] == 2.0  # train mean, not 102
        assert test_out[1, 1] == 6.0  # train mean, not 106

    def test_iterative_regressors_are_frozen_at_fit_time(self):
        data = make_correlated(100, 4, 0.9, seed=68)
        masked = ampute_mcar(data, 0.3, seed=68).data
        fitted, (out_a,) = impute_dataset(spec_from_name("ridge-iter"), masked)
        out_b = fitted.transform(masked)
        assert np.array_equal(out_a, out_b)


class TestSerialization:
    @pytest.mark.parametrize("name", ["mean", "knn", "ridge-iter", "rf-iter"])
    def test_round_trip_preserves_transform_bitwise(self, name):
        data = make_correlated(60, 4, 0.8, seed=69)
        masked = ampute_mcar(data, 0.3, seed=69).data
        spec = IMPUTER_NAMES[name]
        if name == "rf-iter":
            spec = ImputerSpec(
                kind="iterative",
                backbone="forest",
                max_rounds=2,
                backbone_params=TreeParams(n_trees=4, max_depth=3),
            )
        fitted = fit_imputer(spec, masked, seed=3)
        clone = imputer_from_dict(json.loads(json.dumps(imputer_to_dict(fitted))))
        assert np.array_equal(fitted.transform(masked), clone.transform(masked))

    def test_rejects_foreign_payload(self):
        with pytest.raises(DataError):
            imputer_from_dict({"format": "other"})
