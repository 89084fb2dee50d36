"""Synthetic amputation: mechanisms, calibration, guards, determinism."""

import math

import numpy as np
import pytest

from mdew.data import dataset_from_arrays
from mdew.errors import ConfigError, ConvergenceError, DataError
from mdew.metrics import student_t_cdf
from mdew.missingness import (
    ampute,
    ampute_mar,
    ampute_mcar,
    ampute_mnar,
    calibrate_intercept,
    imputation_rmse,
    mar_probabilities,
)
from mdew.seeding import derive_rng


def _complete(n, d, seed=0):
    rng = derive_rng(seed, "complete")
    return dataset_from_arrays(
        rng.normal(size=(n, d)), (rng.random(n) < 0.5).astype(int)
    )


class TestMcar:
    def test_rate_bounds(self):
        data = _complete(10, 3)
        for rate in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ConfigError):
                ampute_mcar(data, rate, seed=0)

    def test_determinism(self):
        data = _complete(50, 4)
        a = ampute_mcar(data, 0.3, seed=5)
        b = ampute_mcar(data, 0.3, seed=5)
        assert np.array_equal(a.data.mask, b.data.mask)

    def test_mask_superset_and_ground_truth_reconstruction(self):
        data = _complete(80, 5, seed=1)
        pre_masked = data.values.copy()
        pre_masked[:10, 0] = np.nan
        data = dataset_from_arrays(pre_masked, data.target)
        result = ampute_mcar(data, 0.3, seed=2)
        assert (result.data.mask | ~data.mask).all() or (
            result.data.mask[data.mask]
        ).all()  # new mask includes the old one
        # ground truth + previously observed cells reconstruct the input
        rebuilt = result.data.values.copy()
        rebuilt[result.rows, result.cols] = result.values
        obs = ~data.mask
        assert np.array_equal(rebuilt[obs], data.values[obs])

    def test_no_row_loses_all_features(self):
        data = _complete(60, 3, seed=3)
        result = ampute_mcar(data, 0.95, seed=4)
        assert (~result.data.mask).sum(axis=1).min() >= 1

    def test_empirical_rate(self):
        data = _complete(10000, 15, seed=6)
        result = ampute_mcar(data, 0.3, seed=7)
        frac = result.data.mask.mean()
        assert 0.29 <= frac <= 0.31


class TestMar:
    def test_column_allocation_d20(self):
        data = _complete(400, 20, seed=8)
        result = ampute_mar(data, seed=9)
        plan = result.plan
        assert len(plan.masked_columns) == 6  # ceil(0.3 * 20)
        assert len(plan.cause_columns) == 6  # round((3/7) * 14)
        assert not set(plan.masked_columns) & set(plan.cause_columns)

    def test_cause_columns_stay_complete(self):
        data = _complete(500, 10, seed=10)
        result = ampute_mar(data, seed=11)
        assert not result.data.mask[:, result.plan.cause_columns].any()

    def test_analytic_rate_calibration(self):
        # Before sampling, the mean Bernoulli probability per masked column
        # must equal the target rate to bisection tolerance.
        data = _complete(2000, 12, seed=12)
        result = ampute_mar(data, rate=0.3, seed=13)
        probs = mar_probabilities(result.plan, data.values)
        for j in range(probs.shape[1]):
            assert abs(probs[:, j].mean() - 0.3) < 1e-6

    def test_empirical_rate_per_masked_column(self):
        data = _complete(10000, 15, seed=14)
        result = ampute_mar(data, rate=0.3, seed=15)
        for c in result.plan.masked_columns:
            rate = result.data.mask[:, c].mean()
            assert 0.28 <= rate <= 0.32, (c, rate)

    def test_mask_depends_on_causes(self):
        # Point-biserial correlation between the mask indicator and the
        # logistic score must be significant at p < 0.01 on 10,000 rows.
        data = _complete(10000, 10, seed=16)
        result = ampute_mar(data, rate=0.3, seed=17)
        plan = result.plan
        c = plan.masked_columns[0]
        z = (data.values[:, plan.cause_columns] - plan.cause_means) / plan.cause_stds
        score = z @ plan.weights[0]
        mask = result.data.mask[:, c].astype(float)
        r = np.corrcoef(mask, score)[0, 1]
        n = len(mask)
        t = abs(r) * math.sqrt((n - 2) / (1 - r * r))
        p = 1.0 - student_t_cdf(t, n - 2)
        assert p < 0.01, (r, p)

    def test_zero_cause_fraction_degenerates_to_bernoulli(self):
        data = _complete(5000, 8, seed=18)
        result = ampute_mar(data, rate=0.3, cause_fraction=0.0, seed=19)
        assert len(result.plan.cause_columns) == 0
        for c in result.plan.masked_columns:
            rate = result.data.mask[:, c].mean()
            assert 0.27 <= rate <= 0.33

    def test_too_few_columns(self):
        data = _complete(10, 1, seed=20)
        with pytest.raises(DataError):
            ampute_mar(data, seed=21)

    def test_determinism(self):
        data = _complete(100, 8, seed=22)
        a = ampute_mar(data, seed=23)
        b = ampute_mar(data, seed=23)
        assert np.array_equal(a.data.mask, b.data.mask)
        assert np.array_equal(a.plan.weights, b.plan.weights)


class TestMnar:
    def test_cause_columns_become_missing(self):
        data = _complete(10000, 15, seed=24)
        mnar = ampute_mnar(data, rate=0.3, seed=25)
        mar = ampute_mar(data, rate=0.3, seed=25)
        assert not mar.data.mask[:, mar.plan.cause_columns].any()
        cause_rate = mnar.data.mask[:, mnar.plan.cause_columns].mean()
        assert 0.28 <= cause_rate <= 0.32

    def test_masked_columns_still_calibrated(self):
        data = _complete(10000, 15, seed=26)
        result = ampute_mnar(data, rate=0.3, seed=27)
        for c in result.plan.masked_columns:
            rate = result.data.mask[:, c].mean()
            assert 0.28 <= rate <= 0.32


class TestDispatch:
    def test_unknown_mechanism(self):
        with pytest.raises(ConfigError):
            ampute(_complete(10, 3), mechanism="jackknife", rate=0.3, seed=0)

    def test_mcar_rejects_mar_kwargs(self):
        with pytest.raises(ConfigError):
            ampute(_complete(10, 3), mechanism="mcar", rate=0.3, seed=0, column_fraction=0.5)

    def test_plan_serializes(self):
        result = ampute(_complete(50, 8), mechanism="mnar", rate=0.3, seed=1)
        d = result.to_dict()
        assert d["plan"]["mechanism"] == "mnar"
        assert len(d["ground_truth"]["rows"]) == len(d["ground_truth"]["values"])


class TestCalibrateIntercept:
    def test_zero_logits_half(self):
        assert abs(calibrate_intercept(np.zeros(100), 0.5)) < 1e-6

    def test_zero_logits_point_three(self):
        # Tolerance contract is on the achieved rate, not on b itself.
        b = calibrate_intercept(np.zeros(100), 0.3)
        achieved = 1.0 / (1.0 + math.exp(-b))
        assert abs(achieved - 0.3) < 1e-6
        assert abs(b - math.log(0.3 / 0.7)) < 1e-5  # -0.8472978603872034

    def test_symmetric_pair(self):
        assert abs(calibrate_intercept(np.array([-1.0, 1.0]), 0.5)) < 1e-6

    def test_bad_rate(self):
        with pytest.raises(ConfigError):
            calibrate_intercept(np.zeros(5), 1.5)


class TestImputationRmse:
    def test_exact_match_is_zero(self):
        data = _complete(30, 4, seed=28)
        result = ampute_mcar(data, 0.3, seed=29)
        assert imputation_rmse(result, data.values) == 0.0

    def test_hand_computed(self):
        data = dataset_from_arrays(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0, 1]))
        result = ampute_mcar(data, 0.5, seed=1)
        # overwrite to exactly two ground-truth cells with errors 3 and 4
        if len(result.values) >= 2:
            imputed = data.values.copy()
            imputed[result.rows[0], result.cols[0]] += 3.0
            imputed[result.rows[1], result.cols[1]] += 4.0
            expected = math.sqrt((9.0 + 16.0) / 2.0)
            err = imputation_rmse(result, imputed) - expected
            if len(result.values) == 2:
                assert abs(err) < 1e-12
                assert abs(expected - 3.5355339059327378) < 1e-15

    def test_nothing_amputed_errors(self):
        data = _complete(20, 3, seed=30)
        result = ampute_mcar(data, 0.01, seed=31)
        if len(result.values) == 0:
            with pytest.raises(DataError):
                imputation_rmse(result, data.values)
        else:
            # force the degenerate case instead
            from dataclasses import replace

            empty = replace(
                result,
                rows=np.array([], dtype=np.int64),
                cols=np.array([], dtype=np.int64),
                values=np.array([]),
            )
            with pytest.raises(DataError):
                imputation_rmse(empty, data.values)
