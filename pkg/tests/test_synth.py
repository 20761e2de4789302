"""Tests for the synthetic panel generator."""

import numpy as np
import pytest

from fieldbt.errors import ConfigError
from fieldbt.synth import SynthConfig, generate_synthetic_panel


class TestSynthConfig:
    def test_from_mapping_parses_strings(self):
        cfg = SynthConfig.from_mapping(
            {
                "n_assets": "10",
                "n_days": "300",
                "n_factors": "2",
                "loadings": "0.5,1.5",
                "idio_vol": "0.008",
                "planted_coeffs": "2e-4,3e-4",
                "noise_vol": "1e-4",
            }
        )
        assert cfg.n_assets == 10
        assert cfg.loadings == (0.5, 1.5)
        assert cfg.planted_coeffs == (2e-4, 3e-4)

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            SynthConfig.from_mapping({"n_assets": 5, "n_days": 100, "bogus": 1})

    def test_rejects_nonpositive_sizes(self):
        with pytest.raises(ConfigError):
            SynthConfig(n_assets=0, n_days=100)
        with pytest.raises(ConfigError):
            SynthConfig(n_assets=5, n_days=0)


class TestGeneration:
    def test_deterministic_for_fixed_seed(self):
        cfg = SynthConfig(n_assets=6, n_days=120, n_factors=2, skew_mix=0.03,
                          planted_coeffs=(1e-4, 1e-4), noise_vol=5e-5)
        a = generate_synthetic_panel(cfg, seed=7)
        b = generate_synthetic_panel(cfg, seed=7)
        assert np.array_equal(a.prices.to_numpy(), b.prices.to_numpy())
        assert np.array_equal(a.benchmarks.to_numpy(), b.benchmarks.to_numpy())
        for f in a.fundamentals.values:
            av = a.fundamentals.values[f].to_numpy()
            bv = b.fundamentals.values[f].to_numpy()
            assert np.array_equal(av, bv, equal_nan=True)

    def test_seeds_differ(self):
        cfg = SynthConfig(n_assets=4, n_days=80)
        a = generate_synthetic_panel(cfg, seed=1)
        b = generate_synthetic_panel(cfg, seed=2)
        assert not np.array_equal(a.prices.to_numpy(), b.prices.to_numpy())

    def test_degenerate_factor_model(self):
        # No idio noise, one factor, unit loadings: every asset equals MARKET.
        cfg = SynthConfig(n_assets=3, n_days=200, n_factors=1, loadings=(1.0,), idio_vol=0.0)
        panel = generate_synthetic_panel(cfg, seed=9)
        market = panel.benchmarks["MARKET"].to_numpy()
        for a in panel.assets:
            assert np.allclose(panel.returns[a].to_numpy(), market, atol=1e-12)

    def test_prices_strictly_positive(self):
        cfg = SynthConfig(n_assets=8, n_days=400, idio_vol=0.03, skew_mix=0.1)
        panel = generate_synthetic_panel(cfg, seed=10)
        assert (panel.prices.to_numpy() > 0).all()

    def test_skew_mix_injects_negative_skew(self):
        cfg = SynthConfig(n_assets=30, n_days=2000, loadings=(0.0,), idio_vol=0.01,
                          skew_mix=0.04)
        panel = generate_synthetic_panel(cfg, seed=11)
        from fieldbt.stats import skewness

        skews = [skewness(panel.returns[a].to_numpy()) for a in panel.assets]
        assert np.mean(skews) < -0.5

    def test_planted_signal_recovered_by_ols(self):
        # Oracle: pooled cross-sectional OLS of realized year-block means on
        # the generator's own lagged z-scored (sigma, beta) regressors, with
        # per-year intercepts. market_drift=0 removes the natural beta premium
        # so the planted coefficients are the only systematic effect.
        c_sigma, c_beta = 6e-4, 6e-4
        cfg = SynthConfig(
            n_assets=150,
            n_days=252 * 11 + 1,
            n_factors=1,
            loadings=(0.5, 1.5),
            idio_vol=0.01,
            planted_coeffs=(c_sigma, c_beta),
            noise_vol=3e-4,
            market_drift=0.0,
        )
        panel = generate_synthetic_panel(cfg, seed=12)
        rets = panel.returns.to_numpy()
        market = panel.benchmarks["MARKET"].to_numpy()
        n_years = rets.shape[0] // 252

        rows_x, rows_y, year_ids = [], [], []
        for y in range(1, n_years):
            prev = rets[(y - 1) * 252 : y * 252]
            cur = rets[y * 252 : (y + 1) * 252]
            mkt = market[(y - 1) * 252 : y * 252]
            sig = prev.std(axis=0, ddof=1)
            mc = mkt - mkt.mean()
            bet = (prev - prev.mean(axis=0)).T @ mc / float(mc @ mc)
            zs = (sig - sig.mean()) / sig.std()
            zb = (bet - bet.mean()) / bet.std()
            rows_x.append(np.column_stack([zs, zb]))
            rows_y.append(cur.mean(axis=0))
            year_ids.extend([y] * rets.shape[1])

        x = np.vstack(rows_x)
        yv = np.concatenate(rows_y)
        year_ids = np.array(year_ids)
        # Year fixed effects via within-year demeaning.
        for y in np.unique(year_ids):
            m = year_ids == y
            x[m] -= x[m].mean(axis=0)
            yv[m] -= yv[m].mean()
        coef, *_ = np.linalg.lstsq(x, yv, rcond=None)
        assert coef[0] == pytest.approx(c_sigma, abs=2.0e-4)
        assert coef[1] == pytest.approx(c_beta, abs=2.0e-4)

    def test_regime_drifts_script_crash_and_rebound(self):
        cfg = SynthConfig(
            n_assets=40,
            n_days=252 * 4 + 1,
            loadings=(0.5, 1.5),
            idio_vol=0.008,
            regime_drifts=(0.0, 8e-4, -8e-4, 8e-4),
            market_drift=0.0,
        )
        panel = generate_synthetic_panel(cfg, seed=13)
        rets = panel.returns.to_numpy()
        for y, expected_sign in [(1, 1), (2, -1), (3, 1)]:
            prev = rets[(y - 1) * 252 : y * 252]
            cur = rets[y * 252 : (y + 1) * 252]
            sig = prev.std(axis=0, ddof=1)
            means = cur.mean(axis=0)
            rho = np.corrcoef(sig, means)[0, 1]
            assert np.sign(rho) == expected_sign
