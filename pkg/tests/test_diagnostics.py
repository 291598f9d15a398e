import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.optimize import fsolve

import garchkit as gk
from garchkit.diagnostics import chi2_sf
from garchkit.errors import DataError, ModelError
from oracles import chi2_sf_quadrature, ljung_box_oracle, ols_oracle

EMPTY = np.empty(0)


def orthogonal_fixture(n=16, m=3, seed=90):
    """Construct a series whose sample autocorrelations vanish at lags 1..m:
    fix the tail, solve the first m coordinates so the lag-1..m sample
    autocovariances are exactly zero."""
    rng = np.random.default_rng(seed)
    tail = rng.standard_normal(n - m)

    def constraints(head):
        x = np.concatenate([head, tail])
        dev = x - x.mean()
        return [float(np.dot(dev[k:], dev[:-k])) for k in range(1, m + 1)]

    head = fsolve(constraints, rng.standard_normal(m), xtol=1e-13)
    assert max(abs(c) for c in constraints(head)) < 1e-10
    return np.concatenate([head, tail])


class TestLjungBox:
    def test_orthogonal_fixture_gives_zero(self):
        x = orthogonal_fixture()
        result = gk.ljung_box(x, 3)
        assert result.statistic < 1e-10
        assert result.p_value > 1.0 - 1e-10

    def test_formula_by_formula_oracle(self):
        rng = np.random.default_rng(91)
        x = np.cumsum(rng.standard_normal(300)) * 0.1 + rng.standard_normal(300)
        result = gk.ljung_box(x, 24)
        assert_allclose(result.statistic, ljung_box_oracle(x, 24), rtol=1e-12, atol=1e-10)

    def test_size_on_iid_data(self):
        reps, rejections = 400, 0
        for rep in range(reps):
            x = np.random.default_rng(50_000 + rep).standard_normal(1000)
            if gk.ljung_box(x, 24).p_value < 0.05:
                rejections += 1
        assert 0.02 <= rejections / reps <= 0.09

    def test_monotone_in_lag_depth(self):
        rng = np.random.default_rng(92)
        x = rng.standard_normal(500)
        stats = [gk.ljung_box(x, m).statistic for m in range(1, 30)]
        assert np.all(np.diff(stats) >= 0)

    def test_lag_depth_guard(self):
        with pytest.raises(DataError, match="too large"):
            gk.ljung_box(np.random.default_rng(93).standard_normal(60), 24)

    def test_zero_variance(self):
        with pytest.raises(DataError):
            gk.ljung_box(np.ones(200), 5)


class TestChi2:
    def test_against_quadrature_oracle(self):
        for x, df in ((10.0, 3), (30.0, 24), (68.26, 24), (1.5, 1)):
            assert_allclose(chi2_sf(x, df), chi2_sf_quadrature(x, df), atol=1e-10)


class TestLmArch:
    def test_two_pass_ols_oracle(self):
        rng = np.random.default_rng(94)
        n, p = 400, 12
        x = rng.standard_normal(n) * (1.0 + 0.5 * np.abs(rng.standard_normal(n)))
        result = gk.lm_arch(x, p)
        y2 = x * x
        design = np.column_stack(
            [np.ones(n - p)] + [y2[p - j: n - j] for j in range(1, p + 1)]
        )
        _, r2, _ = ols_oracle(y2[p:], design)
        assert_allclose(result.statistic, (n - p) * r2, rtol=1e-12, atol=1e-10)
        assert_allclose(result.p_value, chi2_sf_quadrature(result.statistic, p), atol=1e-10)

    def test_collinear_lag_matrix_degenerate(self):
        result = gk.lm_arch(np.ones(200) * 3.0, 4)
        assert result.degenerate
        assert result.statistic == 0.0
        assert result.p_value == 1.0

    def test_alternating_signs_constant_squares(self):
        x = np.tile([1.0, -1.0], 100)
        result = gk.lm_arch(x, 4)
        assert result.degenerate

    def test_power_on_garch_returns(self):
        spec = gk.ModelSpec(dependent="r", include_constant_mean=False)
        params = gk.ParamVector(b=EMPTY, omega=0.05, alpha=[0.10], beta=[0.85])
        rejections = 0
        for rep in range(40):
            sim = gk.simulate(spec, params, n_obs=2000, seed=60_000 + rep)
            if gk.lm_arch(sim.series.values, 24).p_value < 0.05:
                rejections += 1
        assert rejections >= 36


class TestEngleNg:
    def test_sign_symmetric_fixture(self):
        # every y has its negation one period apart; complete cycles make the
        # post-negative and post-positive squared means match exactly
        y = np.concatenate([np.tile([1.0, -2.0, -1.0, 2.0], 25), [1.0]])
        result = gk.engle_ng(y)
        assert abs(result.sign.statistic) < 1e-10

    def test_all_four_statistics_match_ols_oracles(self):
        rng = np.random.default_rng(95)
        y = rng.standard_normal(500) * (1.0 + 0.3 * (rng.uniform(size=500) < 0.4))
        result = gk.engle_ng(y)

        y2 = (y * y)[1:]
        n_prev = (y[:-1] < 0).astype(float)
        ny = n_prev * y[:-1]
        py = (1.0 - n_prev) * y[:-1]
        ones = np.ones(len(y2))

        for res, reg in ((result.sign, n_prev), (result.negative_size, ny),
                         (result.positive_size, py)):
            _, _, tstats = ols_oracle(y2, np.column_stack([ones, reg]))
            assert_allclose(res.statistic, tstats[1], rtol=1e-12, atol=1e-10)

        _, r2, _ = ols_oracle(y2, np.column_stack([ones, n_prev, ny, py]))
        assert_allclose(result.joint.statistic, len(y2) * r2, rtol=1e-12, atol=1e-10)

    def test_power_on_gjr_data(self):
        spec = gk.ModelSpec(dependent="r", family=gk.VarianceFamily.GJR,
                            include_constant_mean=False)
        params = gk.ParamVector(b=EMPTY, omega=0.05, alpha=[0.05], beta=[0.85], gamma=[0.15])
        rejections = 0
        for rep in range(40):
            sim = gk.simulate(spec, params, n_obs=3000, seed=61_000 + rep)
            if gk.engle_ng(sim.series.values).joint.p_value < 0.05:
                rejections += 1
        assert rejections / 40 > 0.5

    def test_no_sign_variation(self):
        with pytest.raises(DataError, match="sign variation"):
            gk.engle_ng(np.abs(np.random.default_rng(96).standard_normal(100)) + 0.1)

    def test_too_short(self):
        with pytest.raises(DataError):
            gk.engle_ng(np.random.default_rng(97).standard_normal(20))


class TestScaleInvariance:
    @settings(deadline=None, max_examples=25)
    @given(st.floats(min_value=1e-3, max_value=1e3),
           st.integers(min_value=0, max_value=2**31 - 1))
    def test_all_statistics_scale_free(self, c, seed):
        x = np.random.default_rng(seed).standard_normal(300)
        base = gk.run_battery(x, lags=8)
        scaled = gk.run_battery(c * x, lags=8)
        for fld in ("q_stat", "q2_stat", "arch_stat", "sign_t", "nsize_t",
                    "psize_t", "joint_stat"):
            assert_allclose(getattr(scaled, fld), getattr(base, fld),
                            rtol=1e-9, atol=1e-9)


class TestStationarityReport:
    GARCH = gk.ModelSpec(dependent="r")

    def test_stationary_fit_values(self):
        params = gk.ParamVector(b=[0.0], omega=0.01, alpha=[0.226], beta=[0.359])
        report = gk.stationarity_report(self.GARCH, params)
        assert_allclose(report.persistence, 0.585, atol=1e-12)
        assert report.stationary

    def test_nonstationary_flagged_not_rejected(self):
        params = gk.ParamVector(b=[0.0], omega=0.01, alpha=[0.288], beta=[0.752])
        report = gk.stationarity_report(self.GARCH, params)
        assert_allclose(report.persistence, 1.040, atol=1e-12)
        assert not report.stationary

    def test_zero_loadings(self):
        params = gk.ParamVector(b=[0.0], omega=0.01, alpha=[0.0], beta=[0.0])
        report = gk.stationarity_report(self.GARCH, params)
        assert report.persistence == 0.0
        assert report.stationary

    def test_gjr_half_gamma(self):
        spec = gk.ModelSpec(dependent="r", family=gk.VarianceFamily.GJR)
        params = gk.ParamVector(b=[0.0], omega=0.01, alpha=[0.1], beta=[0.8], gamma=[0.1])
        assert_allclose(gk.stationarity_report(spec, params).persistence, 0.95)

    def test_log_family_rejected(self):
        spec = gk.ModelSpec(dependent="r", family=gk.VarianceFamily.LOG_EGARCH)
        params = gk.ParamVector(b=[0.0], omega=0.0, alpha=[0.1], beta=[0.9], gamma=[0.0])
        with pytest.raises(ModelError):
            gk.stationarity_report(spec, params)


class TestBattery:
    def test_report_fields_complete(self):
        rng = np.random.default_rng(98)
        report = gk.run_battery(rng.standard_normal(800), lags=24)
        assert report.lags_used == 24
        for fld in ("q_p", "q2_p", "arch_p", "sign_p", "nsize_p", "psize_p", "joint_p"):
            assert 0.0 <= getattr(report, fld) <= 1.0
        for fld in ("q_stat", "q2_stat", "arch_stat", "sign_t", "nsize_t",
                    "psize_t", "joint_stat"):
            assert np.isfinite(getattr(report, fld))
