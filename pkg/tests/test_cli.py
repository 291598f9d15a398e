import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

import garchkit as gk
from garchkit.cli import main
from oracles import weekday_dates


def make_level_csv(path, n_rows=300, seed=1, names=("aaa", "bbb", "ccc")):
    rng = np.random.default_rng(seed)
    dates = weekday_dates(n_rows)
    cols = {}
    for j, name in enumerate(names):
        rets = rng.standard_normal(n_rows - 1) * (0.8 + 0.2 * j)
        levels = 100.0 * np.cumprod(np.concatenate([[1.0], 1.0 + rets / 100.0]))
        cols[name] = levels
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date," + ",".join(names) + "\n")
        for i, d in enumerate(dates):
            fh.write(str(d) + "," + ",".join(repr(float(cols[n][i])) for n in names) + "\n")
    return path


class TestSimulateCommand:
    def test_row_count_and_determinism(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        args = ["simulate", "--series", "sim", "--rows", "500", "--seed", "9"]
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        text_a = (out_a / "simulated.csv").read_text()
        assert text_a == (out_b / "simulated.csv").read_text()
        assert len(text_a.strip().splitlines()) == 501  # header + rows
        truth = json.loads((out_a / "simulation_truth.json").read_text())
        assert len(truth["series"]["sim"]["returns"]) == 499

    def test_explosive_guard(self, tmp_path):
        args = ["simulate", "--series", "s", "--rows", "100", "--alpha", "0.25",
                "--beta", "0.8", "--seed", "9", "--out", str(tmp_path / "x")]
        assert main(args) == 4
        assert main(args + ["--allow-explosive"]) == 0

    def test_unrepresentable_explosive_path_rejected(self, tmp_path):
        args = ["simulate", "--series", "s", "--rows", "400", "--alpha", "0.6",
                "--beta", "0.9", "--seed", "9", "--allow-explosive",
                "--out", str(tmp_path / "x")]
        assert main(args) == 4


class TestDescribeCommand:
    def test_file_contract_three_series(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        out = tmp_path / "out"
        rc = main(["describe", "--data", str(data), "--series", "aaa,bbb,ccc",
                   "--out", str(out), "--lags", "20"])
        assert rc == 0
        stats_lines = (out / "summary_stats.csv").read_text().strip().splitlines()
        assert len(stats_lines) == 4  # header + 3 series rows
        assert len(list(out.glob("*_acf.csv"))) == 3
        assert len(list(out.glob("*.svg"))) == 6
        assert (out / "summary_stats.md").exists()
        assert (out / "run_manifest.json").exists()

    def test_acf_band_column_constant(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        out = tmp_path / "out"
        main(["describe", "--data", str(data), "--series", "aaa", "--out", str(out)])
        lines = (out / "aaa_acf.csv").read_text().strip().splitlines()[1:]
        bands = {line.split(",")[3] for line in lines}
        assert len(bands) == 1
        expected = gk.acf_band(299)  # 300 level rows -> 299 returns
        assert abs(float(bands.pop()) - expected) <= 5e-4  # 3-decimal table rounding

    def test_byte_identical_reruns(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        args = ["describe", "--data", str(data), "--series", "aaa,bbb"]
        main(args + ["--out", str(out_a)])
        main(args + ["--out", str(out_b)])
        for name in ("summary_stats.csv", "aaa_acf.csv", "bbb_acf.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_input_file_never_mutated(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        before = data.read_bytes()
        main(["describe", "--data", str(data), "--series", "aaa", "--out",
              str(tmp_path / "out")])
        assert data.read_bytes() == before

    def test_missing_column_is_config_error(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        rc = main(["describe", "--data", str(data), "--series", "zzz",
                   "--out", str(tmp_path / "out")])
        assert rc == 4

    def test_missing_file_is_data_error(self, tmp_path):
        rc = main(["describe", "--data", str(tmp_path / "nope.csv"), "--series", "a",
                   "--out", str(tmp_path / "out")])
        assert rc == 2


class TestFitCommand:
    def test_end_to_end_recovery(self, tmp_path):
        sim_out = tmp_path / "sim"
        assert main(["simulate", "--series", "sim", "--rows", "2500", "--seed", "5",
                     "--out", str(sim_out)]) == 0
        fit_out = tmp_path / "fit"
        rc = main(["fit", "--data", str(sim_out / "simulated.csv"), "--series", "sim",
                   "--out", str(fit_out), "--seed", "1"])
        assert rc == 0
        manifest = json.loads((fit_out / "run_manifest.json").read_text())
        entry = manifest["fits"]["sim"]
        est = np.asarray(entry["params"]["estimates"])
        se = np.asarray(entry["params"]["std_errors"])
        truth = np.array([0.0, 0.05, 0.10, 0.85])  # const, omega, alpha, beta
        assert np.all(np.abs(est - truth) <= 3.0 * se)
        assert entry["converged"]
        assert entry["stationary"]

        for suffix in ("coefficients.csv", "coefficients.md", "diagnostics.csv",
                       "diagnostics.md", "volatility.csv", "standardized.csv"):
            assert (fit_out / f"sim_{suffix}").exists()

        vol_lines = (fit_out / "sim_volatility.csv").read_text().strip().splitlines()
        assert len(vol_lines) == 2500  # header + 2499 usable observations

    def test_gjr_zero_gamma_nests_garch_loglik(self, tmp_path):
        sim_out = tmp_path / "sim"
        main(["simulate", "--series", "sim", "--rows", "1200", "--seed", "6",
              "--out", str(sim_out)])
        fit_out = tmp_path / "fit"
        assert main(["fit", "--data", str(sim_out / "simulated.csv"), "--series", "sim",
                     "--out", str(fit_out)]) == 0
        manifest = json.loads((fit_out / "run_manifest.json").read_text())
        entry = manifest["fits"]["sim"]

        table = gk.load_csv(sim_out / "simulated.csv")
        rets = gk.to_returns(table.column("sim"), gk.ReturnMethod.SIMPLE,
                             dates=table.dates)
        panel = gk.Panel(rets.dates, {"sim": rets.values})
        p = entry["params"]
        gjr_params = gk.ParamVector(b=p["b"], omega=p["omega"], alpha=p["alpha"],
                                    beta=p["beta"], gamma=[0.0])
        spec = gk.ModelSpec(dependent="sim", family=gk.VarianceFamily.GJR)
        ll = gk.log_likelihood(spec, gjr_params, panel)
        assert abs(ll - entry["loglik"]) < 1e-8

    def test_diagnostics_row_clean_on_well_specified_fixtures(self, tmp_path):
        # the written diagnostics row shows no leftover ARCH on >= 9/10 seeds
        clean = 0
        for seed in range(10):
            sim_out = tmp_path / f"sim{seed}"
            main(["simulate", "--series", "sim", "--rows", "1500", "--seed",
                  str(seed), "--out", str(sim_out)])
            fit_out = tmp_path / f"fit{seed}"
            assert main(["fit", "--data", str(sim_out / "simulated.csv"),
                         "--series", "sim", "--out", str(fit_out),
                         "--allow-nonconverged"]) == 0
            manifest = json.loads((fit_out / "run_manifest.json").read_text())
            diag = manifest["fits"]["sim"]["diagnostics"]
            clean += diag["q2_p"] > 0.05 and diag["arch_p"] > 0.05
        assert clean >= 9

    def test_fit_with_regressors_and_dummies(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv", n_rows=700, seed=8)
        out = tmp_path / "out"
        rc = main(["fit", "--data", str(data), "--series", "aaa",
                   "--mean-x", "aaa,bbb:1,monday", "--var-x", "ccc",
                   "--out", str(out), "--allow-nonconverged"])
        assert rc == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        names = manifest["fits"]["aaa"]["params"]["names"]
        assert "aaa(t-1)" in names  # own return series defaults to lag 1
        assert "bbb(t-1)" in names  # explicit lag
        assert "monday" in names    # dummy enters contemporaneously
        assert "ccc" in names


class TestNonConvergence:
    def test_report_emitted_and_exit_code(self, tmp_path, monkeypatch):
        import dataclasses

        import garchkit.cli as cli_mod

        data = make_level_csv(tmp_path / "levels.csv", n_rows=600, seed=12)
        real_fit = cli_mod.fit

        def unconverged_fit(spec, panel, options=None):
            return dataclasses.replace(real_fit(spec, panel, options), converged=False)

        monkeypatch.setattr(cli_mod, "fit", unconverged_fit)
        out = tmp_path / "out"
        args = ["fit", "--data", str(data), "--series", "aaa", "--out", str(out)]
        assert main(args) == 3
        # the report is still written before the nonzero exit
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["fits"]["aaa"]["converged"] is False
        assert (out / "aaa_coefficients.csv").exists()
        assert main(args + ["--allow-nonconverged"]) == 0


class TestConfigFile:
    def test_runs_from_json(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        out = tmp_path / "out"
        config = {"data": str(data), "series": ["aaa"], "out": str(out), "lags": 10}
        cfg_path = tmp_path / "runs.json"
        cfg_path.write_text(json.dumps([config]))
        assert main(["describe", "--config", str(cfg_path)]) == 0
        assert (out / "summary_stats.csv").exists()

    def test_unknown_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "runs.json"
        cfg_path.write_text(json.dumps([{"series": ["a"], "bogus": 1}]))
        assert main(["describe", "--config", str(cfg_path)]) == 4

    def test_per_column_transform_override(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv", n_rows=400, seed=10)
        out = tmp_path / "out"
        config = {"data": str(data), "series": ["aaa"], "mean_x": ["bbb"],
                  "transforms": {"bbb": "diff"}, "out": str(out)}
        cfg_path = tmp_path / "runs.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["describe", "--config", str(cfg_path)]) == 0


class TestConfigErrors:
    def test_bad_family(self, tmp_path):
        rc = main(["fit", "--data", "x.csv", "--series", "a", "--family", "garch",
                   "--out", str(tmp_path), "--lags", "0"])
        assert rc == 4

    def test_series_required(self, tmp_path):
        rc = main(["describe", "--data", "x.csv", "--out", str(tmp_path)])
        assert rc == 4

    def test_sample_too_short_is_estimation_error(self, tmp_path):
        data = make_level_csv(tmp_path / "tiny.csv", n_rows=30)
        rc = main(["fit", "--data", str(data), "--series", "aaa",
                   "--out", str(tmp_path / "out")])
        assert rc == 3

    def test_duplicate_regressor_rejected(self, tmp_path):
        data = make_level_csv(tmp_path / "levels.csv")
        rc = main(["fit", "--data", str(data), "--series", "aaa",
                   "--mean-x", "monday,monday:0", "--out", str(tmp_path / "out")])
        assert rc == 4
