"""Command-line pipeline wiring ingest -> statistics -> estimation -> diagnostics.

Commands: describe (summary stats, ACF, plots), fit (coefficient tables,
diagnostics row, volatility paths, JSON manifest), simulate (synthetic
level-path fixtures with a truth manifest).

Data contract: input CSVs carry level (price/index) series; every referenced
column is converted with the configured return method before modeling, with
optional per-column overrides (``diff`` or ``level``) in a config file.
Exit codes: 0 success, 2 data error, 3 convergence failure, 4 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import output
from .diagnostics import run_battery, stationarity_report
from .errors import ConfigError, DataError, EstimationError, GarchkitError, ModelError
from .estimation import FitOptions, fit
from .ingest import Panel, align, build_dummies, load_csv
from .model import ModelSpec, ParamVector, Regressor, VarianceFamily, simulate
from .series_stats import SummaryStats, acf, acf_values, summarize

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONVERGENCE = 3
EXIT_CONFIG = 4

_FAMILIES = {
    "garch": VarianceFamily.GARCH,
    "gjr": VarianceFamily.GJR,
    "egarch": VarianceFamily.LOG_EGARCH,
}
_TRANSFORMS = ("simple", "log", "diff", "level")
_SIM_START = "1999-01-04"


@dataclass
class RunConfig:
    """One run of one command; the same keys are accepted from a config file."""

    data: str | None = None
    series: list[str] = field(default_factory=list)
    family: str = "garch"
    mean_x: list[str] = field(default_factory=list)
    var_x: list[str] = field(default_factory=list)
    lags: int = 24
    returns: str = "simple"
    out: str = "out"
    seed: int = 0
    allow_nonconverged: bool = False
    decimals: int = 3
    transforms: dict = field(default_factory=dict)
    # simulate-only keys
    rows: int = 1000
    omega: float = 0.05
    alpha: float = 0.10
    beta: float = 0.85
    gamma: float = 0.0
    mean_const: float = 0.0
    allow_explosive: bool = False

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {sorted(_FAMILIES)}")
        if self.returns not in ("simple", "log"):
            raise ConfigError(f"returns method must be 'simple' or 'log', got {self.returns!r}")
        if self.lags < 1:
            raise ConfigError("lags must be >= 1")
        if self.decimals < 0:
            raise ConfigError("decimals must be >= 0")
        if not isinstance(self.transforms, dict):
            raise ConfigError("transforms must be a column -> kind mapping")
        for col, kind in self.transforms.items():
            if kind not in _TRANSFORMS:
                raise ConfigError(f"transform for {col!r} must be one of {_TRANSFORMS}")
        for key in ("series", "mean_x", "var_x"):
            if not isinstance(getattr(self, key), list):
                raise ConfigError(f"{key} must be a list of column names")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def _split_list(text: str | None) -> list[str]:
    if not text:
        return []
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _parse_regressors(tokens: list[str], return_series: set[str]) -> tuple[Regressor, ...]:
    """'name' or 'name:lag'; bare return-series names default to lag 1,
    everything else is contemporaneous."""
    out = []
    for tok in tokens:
        if ":" in tok:
            name, _, lag_text = tok.partition(":")
            name = name.strip()
            try:
                lag = int(lag_text)
            except ValueError:
                raise ConfigError(f"bad regressor token {tok!r}: lag must be an integer") from None
        else:
            name = tok.strip()
            lag = 1 if name in return_series else 0
        out.append(Regressor(name=name, lag=lag))
    return tuple(out)


def _load_levels(config: RunConfig) -> Panel:
    if not config.data:
        raise ConfigError("--data is required")
    return align(load_csv(config.data))


def _model_panel(levels: Panel, needed: list[str], config: RunConfig) -> Panel:
    """Transform referenced level columns to model columns and attach dummies.

    All columns are trimmed to the second date onward so that differenced and
    level columns stay date-aligned.
    """
    dummies = build_dummies(levels.dates[1:])
    columns: dict[str, np.ndarray] = {}
    for name in needed:
        if name in columns:
            continue
        if name in levels.columns:
            values = levels.column(name)
            kind = config.transforms.get(name, config.returns)
            if kind in ("simple", "log"):
                if np.any(values <= 0):
                    raise DataError(f"column {name!r} must be strictly positive for return transform")
                ratio = values[1:] / values[:-1]
                columns[name] = 100.0 * (ratio - 1.0) if kind == "simple" else 100.0 * np.log(ratio)
            elif kind == "diff":
                columns[name] = np.diff(values)
            else:  # level
                columns[name] = values[1:]
        elif name in dummies:
            columns[name] = dummies[name]
        else:
            raise ConfigError(f"referenced column {name!r} not found in {config.data}")
    return Panel(levels.dates[1:], columns)


def _needed_columns(config: RunConfig) -> list[str]:
    names = list(config.series)
    for tok in config.mean_x + config.var_x:
        names.append(tok.partition(":")[0].strip())
    seen, ordered = set(), []
    for n in names:
        if n not in seen:
            seen.add(n)
            ordered.append(n)
    return ordered


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    return out


def _stats_row(name: str, stats: SummaryStats) -> list:
    return [name, stats.n, stats.min, stats.q1, stats.median, stats.q3, stats.max,
            stats.mean, stats.std_dev, stats.skewness_excess, stats.kurtosis_excess,
            stats.ks_statistic]


def cmd_describe(config: RunConfig) -> int:
    if not config.series:
        raise ConfigError("--series is required")
    levels = _load_levels(config)
    panel = _model_panel(levels, _needed_columns(config), config)
    out = _out_dir(config)

    headers = ["series", "n", "min", "q1", "median", "q3", "max",
               "mean", "std_dev", "skewness_excess", "kurtosis_excess", "ks_statistic"]
    rows = []
    manifest_series = {}
    for name in config.series:
        series = panel.series(name)
        stats = summarize(series)
        rows.append(_stats_row(name, stats))

        profile = acf(series, config.lags)
        sq = acf_values(series.values**2, config.lags)[1:]
        output.write_table_csv(
            out / f"{name}_acf.csv",
            ["lag", "acf_return", "acf_squared", "band"],
            [[int(k), profile.correlations[i], sq[i], profile.band]
             for i, k in enumerate(profile.lags)],
            decimals=config.decimals,
        )
        output.plot_series(out / f"{name}_returns.svg", series.dates, series.values,
                           f"{name} daily returns")
        output.plot_acf(out / f"{name}_acf.svg", profile.lags, profile.correlations,
                        sq, profile.band, f"{name} autocorrelations")
        manifest_series[name] = {
            "n": stats.n, "mean": stats.mean, "std_dev": stats.std_dev,
            "skewness_excess": stats.skewness_excess,
            "kurtosis_excess": stats.kurtosis_excess,
            "ks_statistic": stats.ks_statistic,
            "acf_band": profile.band,
        }

    output.write_table_csv(out / "summary_stats.csv", headers, rows, decimals=config.decimals)
    output.write_table_markdown(out / "summary_stats.md", headers, rows,
                                decimals=config.decimals, title="Summary statistics")
    output.write_manifest(out / "run_manifest.json", {
        "command": "describe",
        "config": config.as_dict(),
        "config_hash": output.config_hash(config.as_dict()),
        "seed": config.seed,
        "version": output.toolkit_version(),
        "series": manifest_series,
        "rows_dropped_in_alignment": levels.dropped_rows,
    })
    return EXIT_OK


def _build_spec(config: RunConfig, dependent: str) -> ModelSpec:
    return_series = set(config.series)
    return ModelSpec(
        dependent=dependent,
        family=_FAMILIES[config.family],
        mean_regressors=_parse_regressors(config.mean_x, return_series),
        variance_regressors=_parse_regressors(config.var_x, return_series),
    )


def _params_payload(result) -> dict:
    p = result.params
    return {
        "b": list(p.b),
        "omega": p.omega,
        "alpha": list(p.alpha),
        "beta": list(p.beta),
        "gamma": list(p.gamma) if p.gamma is not None else None,
        "delta": list(p.delta),
        "names": result.param_names,
        "estimates": list(result.estimates),
        "std_errors": list(result.std_errors),
        "p_values": list(result.p_values),
    }


def cmd_fit(config: RunConfig) -> int:
    if not config.series:
        raise ConfigError("--series is required")
    levels = _load_levels(config)
    panel = _model_panel(levels, _needed_columns(config), config)
    out = _out_dir(config)

    manifest_fits = {}
    all_converged = True
    for name in config.series:
        spec = _build_spec(config, name)
        result = fit(spec, panel, FitOptions(jitter_seed=config.seed))
        all_converged &= result.converged

        table_rows = []
        for panel_tag, table in (("mean", result.mean_table), ("variance", result.variance_table)):
            for coef_name, est, se, pv in table:
                table_rows.append([panel_tag, coef_name, est, se, pv])
        headers = ["panel", "coefficient", "estimate", "robust_se", "p_value"]
        output.write_table_csv(out / f"{name}_coefficients.csv", headers, table_rows,
                               decimals=config.decimals)
        output.write_table_markdown(out / f"{name}_coefficients.md", headers, table_rows,
                                    decimals=config.decimals,
                                    title=f"{name}: {config.family.upper()} fit")

        report = run_battery(result.standardized_residuals, lags=config.lags)
        diag_headers = ["statistic", "value", "p_value"]
        diag_rows = [
            [f"Q({config.lags})", report.q_stat, report.q_p],
            [f"Q2({config.lags})", report.q2_stat, report.q2_p],
            [f"ARCH({config.lags})", report.arch_stat, report.arch_p],
            ["N-SIGN", report.sign_t, report.sign_p],
            ["N-SIZE", report.nsize_t, report.nsize_p],
            ["P-SIZE", report.psize_t, report.psize_p],
            ["JOINT", report.joint_stat, report.joint_p],
        ]
        output.write_table_csv(out / f"{name}_diagnostics.csv", diag_headers, diag_rows,
                               decimals=config.decimals)
        output.write_table_markdown(out / f"{name}_diagnostics.md", diag_headers, diag_rows,
                                    decimals=config.decimals, title=f"{name}: diagnostics")

        usable_dates = panel.dates[spec.max_lag:]
        path = result.variance_path
        output.write_series_csv(out / f"{name}_volatility.csv", usable_dates, {
            "conditional_variance": path.variance,
            "conditional_std": path.conditional_std,
        })
        output.write_series_csv(out / f"{name}_standardized.csv", usable_dates, {
            "standardized_residual": result.standardized_residuals,
        })

        entry = {
            "params": _params_payload(result),
            "loglik": result.loglik,
            "persistence": result.persistence,
            "converged": result.converged,
            "iterations": result.iterations,
            "restarts": result.restarts,
            "n_obs": result.n_obs,
            "diagnostics": asdict(report),
        }
        if spec.family is not VarianceFamily.LOG_EGARCH:
            entry["stationary"] = stationarity_report(spec, result.params).stationary
        manifest_fits[name] = entry

    output.write_manifest(out / "run_manifest.json", {
        "command": "fit",
        "config": config.as_dict(),
        "config_hash": output.config_hash(config.as_dict()),
        "seed": config.seed,
        "version": output.toolkit_version(),
        "fits": manifest_fits,
    })
    if not all_converged and not config.allow_nonconverged:
        print("fit did not converge (rerun with --allow-nonconverged to accept)", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_simulate(config: RunConfig) -> int:
    if not config.series:
        raise ConfigError("--series is required")
    if config.rows < 3:
        raise ConfigError("--rows must be >= 3")
    family = _FAMILIES[config.family]
    out = _out_dir(config)

    dates = np.busday_offset(np.datetime64(_SIM_START), np.arange(config.rows))
    columns: dict[str, np.ndarray] = {}
    truth = {}
    for i, name in enumerate(config.series):
        spec = ModelSpec(dependent=name, family=family)
        gamma = [config.gamma] if family.has_asymmetry else None
        params = ParamVector(b=[config.mean_const], omega=config.omega,
                             alpha=[config.alpha], beta=[config.beta], gamma=gamma)
        # No stationary distribution to converge to when explosive: skip burn-in.
        burn_in = 0 if config.allow_explosive else 500
        sim = simulate(spec, params, n_obs=config.rows - 1, seed=config.seed + i,
                       start_date=str(dates[1]), burn_in=burn_in,
                       allow_explosive=config.allow_explosive)
        levels = np.empty(config.rows)
        levels[0] = 100.0
        step = sim.series.values / 100.0
        with np.errstate(over="ignore"):
            if config.returns == "simple":
                levels[1:] = 100.0 * np.cumprod(1.0 + step)
            else:
                levels[1:] = 100.0 * np.exp(np.cumsum(step))
        if not np.all(np.isfinite(levels)) or np.any(levels <= 0):
            raise ConfigError(
                f"simulated level path for {name!r} is not representable "
                "(explosive parameters); use fewer rows or tamer parameters"
            )
        columns[name] = levels
        truth[name] = {
            "seed": sim.seed,
            "family": config.family,
            "params": {
                "b": list(params.b), "omega": params.omega,
                "alpha": list(params.alpha), "beta": list(params.beta),
                "gamma": list(params.gamma) if params.gamma is not None else None,
            },
            "returns": sim.series.values,
            "true_variance": sim.variance,
        }

    output.write_series_csv(out / "simulated.csv", dates, columns)
    output.write_manifest(out / "simulation_truth.json", {
        "command": "simulate",
        "config": config.as_dict(),
        "config_hash": output.config_hash(config.as_dict()),
        "seed": config.seed,
        "version": output.toolkit_version(),
        "rows": config.rows,
        "returns_method": config.returns,
        "series": truth,
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="garchkit",
        description="GARCH-family conditional-volatility modeling for daily return panels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--data", help="input CSV of level series (first column 'date')")
        p.add_argument("--series", help="comma-separated dependent series names")
        p.add_argument("--family", default="garch", choices=sorted(_FAMILIES))
        p.add_argument("--mean-x", default="", help="mean regressors: name or name:lag, comma-separated")
        p.add_argument("--var-x", default="", help="variance regressors: name or name:lag, comma-separated")
        p.add_argument("--lags", type=int, default=24, help="lag depth for diagnostics/ACF")
        p.add_argument("--returns", default="simple", choices=("simple", "log"))
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--allow-nonconverged", action="store_true")
        p.add_argument("--config", help="JSON config file: one run per entry")

    for name in ("describe", "fit"):
        common(sub.add_parser(name))

    sim = sub.add_parser("simulate")
    common(sim)
    sim.add_argument("--rows", type=int, default=1000, help="data rows to write (rows-1 returns)")
    sim.add_argument("--omega", type=float, default=0.05)
    sim.add_argument("--alpha", type=float, default=0.10)
    sim.add_argument("--beta", type=float, default=0.85)
    sim.add_argument("--gamma", type=float, default=0.0)
    sim.add_argument("--mean-const", type=float, default=0.0)
    sim.add_argument("--allow-explosive", action="store_true")
    return parser


def _configs_from_args(args: argparse.Namespace) -> list[RunConfig]:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from None
        entries = raw.get("runs", raw) if isinstance(raw, dict) else raw
        if isinstance(entries, dict):
            entries = [entries]
        if not isinstance(entries, list):
            raise ConfigError("config file must hold a run object or a list of runs")
        return [RunConfig.from_dict(e) for e in entries]

    kwargs = dict(
        data=args.data,
        series=_split_list(args.series),
        family=args.family,
        mean_x=_split_list(args.mean_x),
        var_x=_split_list(args.var_x),
        lags=args.lags,
        returns=args.returns,
        out=args.out,
        seed=args.seed,
        allow_nonconverged=args.allow_nonconverged,
    )
    if args.command == "simulate":
        kwargs.update(
            rows=args.rows, omega=args.omega, alpha=args.alpha, beta=args.beta,
            gamma=args.gamma, mean_const=args.mean_const,
            allow_explosive=args.allow_explosive,
        )
    return [RunConfig(**kwargs)]


_COMMANDS = {"describe": cmd_describe, "fit": cmd_fit, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for config in _configs_from_args(args):
            code = _COMMANDS[args.command](config)
            if code != EXIT_OK:
                return code
        return EXIT_OK
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except GarchkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
