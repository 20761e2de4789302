"""Tests for the cross-sectional regression module."""

import numpy as np
import pandas as pd
import pytest
from scipy.stats import spearmanr

from fieldbt.errors import DataError, NumericalError
from fieldbt.fields import FieldMatrix
from fieldbt.regression import RegressionModel, fit, flip_coefficients, predict


def make_matrix(values, field_names=None, assets=None):
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    return FieldMatrix(
        start=pd.Timestamp("2015-01-05"),
        end=pd.Timestamp("2015-12-31"),
        field_names=tuple(field_names or [f"F{i}" for i in range(p)]),
        assets=tuple(assets or [f"A{i:03d}" for i in range(n)]),
        values=values,
        dropped={},
    )


class TestFit:
    def test_noiseless_single_field(self):
        rng = np.random.default_rng(80)
        x = rng.normal(0.01, 0.004, size=40)
        matrix = make_matrix(x[:, None], field_names=["SIGMA"])
        y = 3.0 * x + 7.0
        model = fit(matrix, y)
        assert model.coefficients[0] == pytest.approx(3.0 * np.std(x, ddof=1), rel=1e-9)
        preds = predict(model, matrix)
        assert np.max(np.abs(preds.to_numpy() - y)) <= 1e-9

    def test_constant_target(self):
        rng = np.random.default_rng(81)
        matrix = make_matrix(rng.normal(size=(30, 4)))
        model = fit(matrix, np.full(30, 0.0125))
        assert np.max(np.abs(model.coefficients)) <= 1e-15
        assert model.intercept == pytest.approx(0.0125, abs=1e-15)
        assert model.r_squared == 0.0

    def test_matches_lstsq_oracle_100x10(self):
        rng = np.random.default_rng(82)
        x = rng.normal(size=(100, 10))
        y = rng.normal(size=100)
        matrix = make_matrix(x)
        model = fit(matrix, y)
        # Independent unregularized solve on the standardized design.
        z = (x - x.mean(axis=0)) / x.std(axis=0, ddof=1)
        a = np.column_stack([np.ones(100), z])
        oracle, *_ = np.linalg.lstsq(a, y, rcond=None)
        assert model.intercept == pytest.approx(oracle[0], rel=1e-6, abs=1e-12)
        np.testing.assert_allclose(model.coefficients, oracle[1:], rtol=1e-6)

    def test_zero_variance_column_dropped(self):
        rng = np.random.default_rng(83)
        x = rng.normal(size=(25, 3))
        x[:, 1] = 4.2
        matrix = make_matrix(x, field_names=["A", "B", "C"])
        model = fit(matrix, rng.normal(size=25))
        assert model.fields == ("A", "C")
        assert model.dropped_fields == ("B",)

    def test_all_degenerate_raises(self):
        matrix = make_matrix(np.full((10, 2), 3.0))
        with pytest.raises(NumericalError):
            fit(matrix, np.random.default_rng(84).normal(size=10))

    def test_too_few_assets_raises(self):
        rng = np.random.default_rng(85)
        matrix = make_matrix(rng.normal(size=(5, 4)))
        with pytest.raises(DataError):
            fit(matrix, rng.normal(size=5))

    def test_series_target_intersects_assets(self):
        rng = np.random.default_rng(86)
        matrix = make_matrix(rng.normal(size=(20, 2)))
        target = pd.Series(
            rng.normal(size=18), index=[f"A{i:03d}" for i in range(18)]
        )
        model = fit(matrix, target)
        assert model.n_assets == 18

    def test_r_squared_consistent_with_predict(self):
        rng = np.random.default_rng(87)
        x = rng.normal(size=(60, 5))
        y = x @ rng.normal(size=5) * 0.01 + rng.normal(0, 0.01, size=60)
        matrix = make_matrix(x)
        model = fit(matrix, y)
        preds = predict(model, matrix).to_numpy()
        sst = ((y - y.mean()) ** 2).sum()
        ssr = ((y - preds) ** 2).sum()
        assert model.r_squared == pytest.approx(1 - ssr / sst, abs=1e-10)

    def test_standardization_absorbs_column_scale(self):
        rng = np.random.default_rng(88)
        x = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        m1 = fit(make_matrix(x), y)
        x2 = x.copy()
        x2[:, 1] *= 250.0
        m2 = fit(make_matrix(x2), y)
        p1 = predict(m1, make_matrix(x)).to_numpy()
        p2 = predict(m2, make_matrix(x2)).to_numpy()
        np.testing.assert_allclose(p1, p2, atol=1e-9)

    def test_deterministic_serialization(self):
        rng = np.random.default_rng(89)
        x = rng.normal(size=(40, 6))
        y = rng.normal(size=40)
        m1 = fit(make_matrix(x), y)
        m2 = fit(make_matrix(x), y)
        assert m1.to_json() == m2.to_json()
        round_trip = RegressionModel.from_json(m1.to_json())
        np.testing.assert_array_equal(round_trip.coefficients, m1.coefficients)


class TestPredict:
    def test_in_sample_identity(self):
        rng = np.random.default_rng(90)
        x = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        matrix = make_matrix(x)
        model = fit(matrix, y)
        z = (x - model.field_means) / model.field_stds
        fitted = model.intercept + z @ model.coefficients
        np.testing.assert_allclose(predict(model, matrix).to_numpy(), fitted, atol=1e-12)

    def test_zero_coefficients_predict_intercept(self):
        rng = np.random.default_rng(91)
        matrix = make_matrix(rng.normal(size=(20, 3)))
        model = fit(matrix, np.full(20, 0.004))
        preds = predict(model, matrix)
        np.testing.assert_allclose(preds.to_numpy(), 0.004, atol=1e-12)

    def test_missing_field_raises(self):
        rng = np.random.default_rng(92)
        matrix = make_matrix(rng.normal(size=(20, 3)), field_names=["A", "B", "C"])
        model = fit(matrix, rng.normal(size=20))
        other = make_matrix(rng.normal(size=(20, 2)), field_names=["A", "B"])
        with pytest.raises(DataError):
            predict(model, other)

    def test_out_of_sample_rank_correlation_at_2to1_snr(self):
        # Planted rule: window means are a fixed linear map of z-scored fields
        # plus unit noise, with |signal|/|noise| = 2. The attainable rank
        # correlation at this SNR is about 0.87, well above the 0.6 floor.
        rng = np.random.default_rng(93)
        n, p = 100, 3
        w = np.array([1.2, -1.0, 1.0])
        w *= 2.0 / np.linalg.norm(w)
        xa = rng.normal(size=(n, p))
        xb = rng.normal(size=(n, p))
        za = (xa - xa.mean(axis=0)) / xa.std(axis=0, ddof=1)
        zb = (xb - xb.mean(axis=0)) / xb.std(axis=0, ddof=1)
        ya = za @ w + rng.normal(size=n)
        yb = zb @ w + rng.normal(size=n)
        model = fit(make_matrix(xa), ya)
        preds = predict(model, make_matrix(xb)).to_numpy()
        rho, _ = spearmanr(preds, yb)
        assert rho > 0.6


class TestFlip:
    def test_involution(self):
        rng = np.random.default_rng(94)
        model = fit(make_matrix(rng.normal(size=(30, 4))), rng.normal(size=30))
        double = flip_coefficients(flip_coefficients(model))
        np.testing.assert_array_equal(double.coefficients, model.coefficients)
        assert double.intercept == model.intercept

    def test_predictions_mirror_around_intercept(self):
        rng = np.random.default_rng(95)
        matrix = make_matrix(rng.normal(size=(25, 3)))
        model = fit(matrix, rng.normal(size=25))
        p = predict(model, matrix).to_numpy()
        p_flip = predict(flip_coefficients(model), matrix).to_numpy()
        np.testing.assert_allclose(p_flip, 2 * model.intercept - p, atol=1e-12)

    def test_argmax_becomes_argmin(self):
        rng = np.random.default_rng(96)
        matrix = make_matrix(rng.normal(size=(25, 3)))
        model = fit(matrix, rng.normal(size=25))
        p = predict(model, matrix)
        p_flip = predict(flip_coefficients(model), matrix)
        assert p.idxmax() == p_flip.idxmin()
