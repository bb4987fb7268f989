"""Batch experiment runner.

Subcommands: recover, plan, sweep, oracle, scatter.  Configuration comes
from a JSON document plus flag overrides; outputs are CSV signals/error
tables and JSON plans/summaries with 17-significant-digit numbers so reruns
are byte-identical.  Exit codes: 0 success, 2 configuration error,
3 numerical instability.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cutter, metrics, oracles, scenarios
from .errors import ConfigError, GtibError, InstabilityError, RecoveryError
from .signals import RecoveredSignal, TimeGrid
from .spectral import Side, SpectralData
from .cutter import Method

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3

_SCENARIOS = ("single_soliton", "two_soliton", "eight_soliton", "chirped_sech",
              "from_spectral_file")


@dataclass
class ExperimentConfig:
    """Validated experiment description (config file plus flag overrides)."""

    scenario: str = "single_soliton"
    parameters: dict = field(default_factory=dict)
    t_min: float | None = None
    t_max: float | None = None
    m: int | None = None
    p: float | None = None
    method: Method | None = None
    zone_constant: float = cutter.DEFAULT_ZONE_CONSTANT
    h_list: list | None = None
    out_dir: Path = Path(".")

    @classmethod
    def load(cls, args) -> "ExperimentConfig":
        cfg = cls()
        if args.config:
            try:
                with open(args.config) as fh:
                    doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
            cfg._apply_doc(doc)
        cfg._apply_flags(args)
        cfg._validate()
        return cfg

    def _apply_doc(self, doc: dict) -> None:
        known = {"scenario", "parameters", "grid", "window", "method",
                 "zone_constant", "h_list", "output"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        self.scenario = doc.get("scenario", self.scenario)
        self.parameters = dict(doc.get("parameters", {}))
        grid = doc.get("grid", {})
        self.t_min = grid.get("t_min", self.t_min)
        self.t_max = grid.get("t_max", self.t_max)
        if "m" in grid:
            self.m = int(grid["m"])
        if "tau" in grid:
            if self.t_min is None or self.t_max is None:
                raise ConfigError("grid tau needs explicit t_min/t_max")
            fm = (self.t_max - self.t_min) / float(grid["tau"])
            if abs(fm - round(fm)) > 1e-9 * max(fm, 1.0):
                raise ConfigError("grid tau does not divide the time span")
            self.m = int(round(fm))
        window = doc.get("window", {})
        if "p" in window and window["p"] is not None:
            self.p = float(window["p"])
        if "method" in doc:
            self.method = _parse_method(doc["method"])
        if "zone_constant" in doc:
            self.zone_constant = float(doc["zone_constant"])
        if "h_list" in doc:
            self.h_list = [float(x) for x in doc["h_list"]]
        out = doc.get("output", {})
        if "dir" in out:
            self.out_dir = Path(out["dir"])

    def _apply_flags(self, args) -> None:
        if getattr(args, "method", None):
            self.method = _parse_method(args.method)
        if getattr(args, "M", None):
            self.m = args.M
        if getattr(args, "h", None):
            if self.t_min is None or self.t_max is None:
                # defer: h against the scenario's default span
                self.parameters["_flag_h"] = args.h
            else:
                fm = (self.t_max - self.t_min) / (0.5 * args.h)
                if abs(fm - round(fm)) > 1e-9 * max(fm, 1.0):
                    raise ConfigError("flag --h does not divide the time span")
                self.m = int(round(fm))
        if getattr(args, "P", None):
            self.p = args.P
        if getattr(args, "zone_constant", None) is not None:
            self.zone_constant = args.zone_constant
        if getattr(args, "h_list", None):
            self.h_list = [float(x) for x in args.h_list.split(",")]
        if getattr(args, "out", None):
            self.out_dir = Path(args.out)

    def _validate(self) -> None:
        if self.scenario not in _SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"choose from {_SCENARIOS}")
        if (self.t_min is None) != (self.t_max is None):
            raise ConfigError("grid needs both t_min and t_max")
        if self.t_min is not None and self.m is not None:
            tau = (self.t_max - self.t_min) / self.m
            if self.p is not None:
                h = 2.0 * tau
                if abs(self.p - self.m * h) > 1e-9 * max(self.p, 1.0):
                    raise ConfigError(
                        f"window P={self.p:g} inconsistent with M={self.m} and "
                        f"h=2*tau={h:g} (need P = M h = {self.m * h:g})")


def _parse_method(name) -> Method:
    try:
        return Method(str(name))
    except ValueError as exc:
        raise ConfigError(f"unknown method {name!r}; choose from "
                          f"{[m.value for m in Method]}") from exc


def _scenario_run(cfg: ExperimentConfig) -> scenarios.ScenarioRun:
    if cfg.scenario == "from_spectral_file":
        return _run_from_file(cfg)
    params = dict(cfg.parameters)
    flag_h = params.pop("_flag_h", None)
    sc = scenarios.build_scenario(cfg.scenario, **params)
    if cfg.t_min is not None:
        sc.span = (cfg.t_min, cfg.t_max)
    count = cfg.m
    kwargs = {}
    if flag_h is not None and count is None:
        kwargs["h"] = flag_h
    elif count is not None:
        kwargs["count"] = count
    return scenarios.run_scenario(cfg.scenario, method=cfg.method,
                                  zone_constant=cfg.zone_constant,
                                  **params, **kwargs)


def _run_from_file(cfg: ExperimentConfig) -> scenarios.ScenarioRun:
    params = dict(cfg.parameters)
    params.pop("_flag_h", None)
    path = params.pop("path", None)
    oracle_csv = params.pop("oracle_csv", None)
    if params:
        raise ConfigError(f"unknown parameters for from_spectral_file: {sorted(params)}")
    if path is None:
        raise ConfigError("from_spectral_file needs parameters.path")
    try:
        data = SpectralData.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read spectral data {path}: {exc}") from exc
    if cfg.t_min is None or cfg.m is None:
        raise ConfigError("from_spectral_file needs an explicit grid (t_min, t_max, m)")
    grid = TimeGrid(cfg.t_min, (cfg.t_max - cfg.t_min) / cfg.m, cfg.m)
    m = grid.count
    p = m * 2.0 * grid.tau
    method = cfg.method if cfg.method is not None else Method.WITH_CUTS
    plan_obj = cutter.plan(data, grid, p, m, method, cfg.zone_constant)
    if method in (Method.LEFT_ONLY, Method.RIGHT_ONLY):
        want = Side.LEFT if method is Method.LEFT_ONLY else Side.RIGHT
        from .spectral import convert_side
        side_data = data if data.side is want else convert_side(data, want)
        recovered = cutter.recover(side_data, plan_obj, p, m)
    else:
        recovered = cutter.recover(data, plan_obj, p, m)
    oracle = RecoveredSignal.read_csv(oracle_csv) if oracle_csv else None
    if oracle is not None and (oracle.t.size != grid.count + 1
                               or abs(oracle.t[0] - grid.t_min) > 1e-9):
        raise ConfigError("oracle CSV grid does not match the requested grid")
    sc = scenarios.Scenario(name="from_spectral_file", data_left=None,
                            data_right=None, span=(grid.t_min, grid.t_max),
                            default_count=m, default_method=method)
    return scenarios.ScenarioRun(scenario=sc, grid=grid, plan=plan_obj,
                                 recovered=recovered, oracle=oracle)


def _write_run_artifacts(cfg: ExperimentConfig, run: scenarios.ScenarioRun,
                         write_plan=True, write_signal=True) -> None:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if write_signal:
        run.recovered.write_csv(out / "recovered.csv")
        print(f"wrote {out / 'recovered.csv'}")
    if write_plan:
        run.plan.save(out / "plan.json")
        print(f"wrote {out / 'plan.json'}")
    if run.oracle is not None and write_signal:
        h = 2.0 * run.grid.tau
        report = metrics.error_report(run.recovered.q, run.oracle.q, h=h,
                                      label=run.scenario.name)
        report.write_csv(out / "error.csv", t=run.grid.array)
        with open(out / "summary.json", "w") as fh:
            json.dump({"scenario": run.scenario.name, "h": h,
                       "rmse": report.rmse,
                       "max_epsilon": float(np.max(report.pointwise))},
                      fh, indent=2)
        print(f"wrote {out / 'error.csv'}")
        print(f"wrote {out / 'summary.json'}")
        print(f"rmse = {report.rmse:.6e}")


def _cmd_recover(args) -> int:
    cfg = ExperimentConfig.load(args)
    run = _scenario_run(cfg)
    _write_run_artifacts(cfg, run)
    return EXIT_OK


def _cmd_plan(args) -> int:
    cfg = ExperimentConfig.load(args)
    run = _scenario_run(cfg)
    _write_run_artifacts(cfg, run, write_signal=False)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args)
    if cfg.scenario == "from_spectral_file":
        raise ConfigError("sweep needs a synthetic scenario with an exact reference")
    if not cfg.h_list:
        raise ConfigError("sweep needs h_list (config field or --h-list)")
    params = dict(cfg.parameters)
    params.pop("_flag_h", None)
    reports, slope = metrics.convergence_sweep(
        cfg.scenario, cfg.h_list, method=cfg.method,
        zone_constant=cfg.zone_constant, **params)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w") as fh:
        fh.write("h,rmse\n")
        for r in reports:
            fh.write(f"{r.h:.17g},{r.rmse:.17g}\n")
    metrics.sweep_summary_json(out / "sweep.json", cfg.scenario, reports, slope)
    print(f"wrote {out / 'sweep.csv'}")
    print(f"wrote {out / 'sweep.json'}")
    for r in reports:
        print(f"h = {r.h:<12g} rmse = {r.rmse:.6e}")
    if slope is not None:
        print(f"slope = {slope:.4f}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = ExperimentConfig.load(args)
    if cfg.scenario == "from_spectral_file":
        raise ConfigError("oracle emission needs a synthetic scenario")
    params = dict(cfg.parameters)
    params.pop("_flag_h", None)
    sc = scenarios.build_scenario(cfg.scenario, **params)
    if cfg.t_min is not None:
        sc.span = (cfg.t_min, cfg.t_max)
    grid = sc.grid_for(count=cfg.m)
    signal = sc.oracle(grid.array)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    signal.write_csv(out / "oracle.csv")
    print(f"wrote {out / 'oracle.csv'}")
    return EXIT_OK


def _cmd_scatter(args) -> int:
    try:
        signal = RecoveredSignal.read_csv(args.signal)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read signal CSV {args.signal}: {exc}") from exc
    xi = np.linspace(args.xi_min, args.xi_max, args.xi_samples)
    data = oracles.forward_scatter(
        signal, xi, oracles.Dispersion(args.dispersion), Side(args.side))
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    data.save(out / "spectral.json")
    print(f"wrote {out / 'spectral.json'}")
    print(f"eigenvalues found: {len(data.discrete)}")
    for d in data.discrete:
        print(f"  zeta = {d.zeta:.12g}  norming = {d.norming:.12g}")
    return EXIT_OK


def _add_common(parser) -> None:
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--out", help="output directory (default .)")
    parser.add_argument("--method", help="recovery method override",
                        choices=[m.value for m in Method])
    parser.add_argument("--h", type=float, help="integration step override (h = 2 tau)")
    parser.add_argument("--P", type=float, help="window length (validated as M h)")
    parser.add_argument("--M", type=int, help="grid interval count override")
    parser.add_argument("--zone-constant", dest="zone_constant", type=float,
                        help="stability zone constant (default 6)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gtib",
        description="Signal reconstruction from scattering data via "
                    "block-Toeplitz inner bordering with stability-zone cuts")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in [
        ("recover", _cmd_recover, "run a recovery and write signal/plan/error files"),
        ("plan", _cmd_plan, "write the cut plan for a configuration"),
        ("sweep", _cmd_sweep, "convergence sweep across step sizes"),
        ("oracle", _cmd_oracle, "emit a scenario's exact reference signal"),
    ]:
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--h-list", dest="h_list",
                           help="comma-separated decreasing step sizes")
        p.set_defaults(fn=fn)

    p = sub.add_parser("scatter", help="forward-scatter a signal CSV to spectral JSON")
    p.add_argument("signal", help="input CSV with columns t, re_q, im_q")
    p.add_argument("--dispersion", choices=["anomalous", "normal"],
                   default="anomalous")
    p.add_argument("--side", choices=["left", "right"], default="left")
    p.add_argument("--xi-min", dest="xi_min", type=float, default=-8.0)
    p.add_argument("--xi-max", dest="xi_max", type=float, default=8.0)
    p.add_argument("--xi-samples", dest="xi_samples", type=int, default=513)
    p.add_argument("--out", help="output directory (default .)")
    p.set_defaults(fn=_cmd_scatter)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstabilityError, RecoveryError) as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except GtibError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
