"""Command-line entry point.

Subcommands: ``synth``, ``validate``, ``run``, ``compare``, ``export-lp``.
Exit codes: 0 success, 1 failure (details in ``error.json``), 2 usage error.
Options may also come from a YAML file given with ``--config``; command-line
flags win over file values.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import yaml

from capmech import model, report, runner
from capmech.domain import (FlexFamily, FlexMode, Mechanism, ModelData, ScenarioConfig, ValidationError,
                            WeatherWindow, find_violations, load_series_dir, load_technologies)
from capmech.flex import build_portfolio, export_portfolio, load_flex_inputs
from capmech.lp import available_backends, write_mps
from capmech.synth import scarcity_span, write_synth

BACKEND_ENV = "CAPMECH_BACKEND"
SCENARIOS = {"capacity-market": "capacity-market", "reserve": "reliability-reserve",
             "reliability-reserve": "reliability-reserve"}
DEFAULTS = {
    "seed": 42,
    "invest_year": 2009,
    "dispatch_years": "2008-2014",
    "scenario": "capacity-market",
    "firm_target": "auto",
    "firm_margin": 5.0,
    "activation_price": 500.0,
    "carbon_price": 130.0,
    "interest_rate": 0.04,
    "demand_target": 670.0,
    "flex_mode": FlexMode.FIXED.value,
    "flex_lifetime": 20.0,
    "hours": 8760,
    "first_hour": "0",
    "parallel": 1,
    "aggregate_industry": True,
    "calibrate_industry": False,
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str, window: str | None = None):
        super().__init__(message)
        self.stage = stage
        self.window = window


@dataclass
class CliConfig:
    technologies: Path | None
    flex: Path | None
    series: Path | None
    output: Path | None
    scenario: str
    backend: str
    seed: int
    parallel: int
    options: dict


def parse_years(text: str | int | list) -> list[int]:
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(y) for y in text]
    years = []
    for part in str(text).split(","):
        if "-" in part:
            lo, hi = part.split("-")
            years += list(range(int(lo), int(hi) + 1))
        elif part.strip():
            years.append(int(part))
    return years


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML file with option defaults")
    p.add_argument("--technologies", type=Path, help="technology parameter file (default: bundled table)")
    p.add_argument("--flex", type=Path, help="flexibility input file (default: bundled inputs)")
    p.add_argument("--series", type=Path, help="directory of {name}_{year}.csv series")
    p.add_argument("--scenario", choices=sorted(SCENARIOS))
    p.add_argument("--invest-year", type=int)
    p.add_argument("--dispatch-years", help="e.g. 2008-2014 or 2009,2011")
    p.add_argument("--firm-target", help="GW, or 'auto' for residual-load peak plus margin")
    p.add_argument("--firm-margin", type=float, help="GW added to the residual-load peak in auto mode")
    p.add_argument("--activation-price", type=float)
    p.add_argument("--carbon-price", type=float)
    p.add_argument("--interest-rate", type=float)
    p.add_argument("--demand-target", type=float, help="annual load TWh_el before district heating")
    p.add_argument("--flex-mode", choices=[m.value for m in FlexMode])
    p.add_argument("--flex-lifetime", type=float)
    p.add_argument("--hours", type=int, help="hours per window (8760 for full years)")
    p.add_argument("--first-hour", help="first window hour, or 'scarcity' to center on the January spell")
    p.add_argument("--aggregate-industry", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--calibrate-industry", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--backend", help=f"solver backend ({', '.join(available_backends())})")
    p.add_argument("--parallel", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capmech", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write deterministic synthetic input series")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    p.add_argument("--years", default=DEFAULTS["dispatch_years"], help="window start years, e.g. 2008-2014")
    p.add_argument("--load-twh", type=float, default=500.0)
    p.add_argument("--dh-heat-twh", type=float, default=95.0)

    p = sub.add_parser("validate", help="check inputs against a scenario")
    _common(p)

    p = sub.add_parser("run", help="invest, size the reserve, dispatch every window, report")
    _common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--export-lp", action="store_true", help="also write the MPS files and their index")

    p = sub.add_parser("compare", help="compare two run directories")
    p.add_argument("dir_a", type=Path)
    p.add_argument("dir_b", type=Path)
    p.add_argument("--out", type=Path, help="directory for comparison.csv and summary.txt (default: dir_b/..)")

    p = sub.add_parser("export-lp", help="write the invest model of a scenario as MPS")
    _common(p)
    p.add_argument("--out", type=Path, required=True)
    return parser


def resolve(args: argparse.Namespace) -> CliConfig:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            doc = yaml.safe_load(args.config.read_text("utf-8")) or {}
        except OSError as exc:
            raise StageError("config", f"cannot read {args.config}: {exc}") from exc
        unknown = set(doc) - set(DEFAULTS) - {"technologies", "flex", "series", "backend"}
        if unknown:
            raise StageError("config", f"unknown keys in {args.config}: {sorted(unknown)}")
        opts.update(doc)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    paths = {}
    for key in ("technologies", "flex", "series"):
        value = getattr(args, key, None) or opts.pop(key, None)
        opts.pop(key, None)
        paths[key] = Path(value) if value else None
        if paths[key] is not None and not paths[key].exists():
            raise StageError("config", f"{key} path {paths[key]} does not exist")
    backend = getattr(args, "backend", None) or opts.pop("backend", None) or os.environ.get(BACKEND_ENV, "highs")
    opts.pop("backend", None)
    if backend not in available_backends():
        raise StageError("config", f"unknown backend {backend!r}")
    return CliConfig(paths["technologies"], paths["flex"], paths["series"], getattr(args, "out", None),
                     SCENARIOS[opts["scenario"]], backend, int(opts["seed"]), int(opts["parallel"]), opts)


def load_inputs(cc: CliConfig) -> tuple[ScenarioConfig, ModelData]:
    o = cc.options
    if cc.series is None:
        raise StageError("config", "--series is required (generate one with 'capmech synth')")
    techs = load_technologies(cc.technologies)
    flex_inputs = load_flex_inputs(cc.flex)
    portfolio = build_portfolio(flex_inputs, calibrate=bool(o["calibrate_industry"]),
                                aggregate=bool(o["aggregate_industry"]))
    series = load_series_dir(cc.series)
    data = ModelData(techs, tuple(portfolio), series, flex_inputs.process_heat)

    hours = int(o["hours"])
    first = o["first_hour"]
    first = scarcity_span(hours) if str(first) == "scarcity" else int(first)
    invest = WeatherWindow(int(o["invest_year"]), first, hours)
    windows = tuple(WeatherWindow(y, first, hours) for y in parse_years(o["dispatch_years"]))
    mech_kw = {}
    if cc.scenario == "reliability-reserve":
        mech_kw["activation_price"] = float(o["activation_price"])
    config = ScenarioConfig(Mechanism(cc.scenario, 1.0, **mech_kw), invest_window=invest, dispatch_windows=windows,
                            carbon_price=float(o["carbon_price"]), interest_rate=float(o["interest_rate"]),
                            flex_mode=o["flex_mode"], demand_uplift_target=o["demand_target"],
                            flex_lifetime=float(o["flex_lifetime"]))
    target = o["firm_target"]
    if str(target) == "auto":
        try:
            wd = data.for_window(invest, config.demand_uplift_target)
        except KeyError as exc:
            raise StageError("validate", f"missing series: {exc}") from exc
        target = model.firm_target_for(data, wd, float(o["firm_margin"]))
    config = config.with_mechanism(Mechanism(cc.scenario, float(target), **mech_kw))
    return config, data


def write_error(directory: Path | None, exc: Exception, stage: str, window: str | None = None) -> Path:
    directory = directory or Path.cwd()
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "error.json"
    doc = {"stage": stage, "window": window, "error": type(exc).__name__, "message": str(exc), "exit_code": 1}
    cause = exc if isinstance(exc, ValidationError) else exc.__cause__
    if isinstance(cause, ValidationError):
        doc["violations"] = cause.violations
    path.write_text(json.dumps(doc, indent=2) + "\n", "utf-8")
    return path


def cmd_synth(args) -> int:
    try:
        files = write_synth(args.out, args.seed, parse_years(args.years), load_twh=args.load_twh,
                            dh_heat_twh=args.dh_heat_twh)
    except OSError as exc:
        raise StageError("synth", f"cannot write to {args.out}: {exc}") from exc
    print(f"wrote {len(files)} series files to {args.out}")
    return 0


def cmd_validate(args) -> int:
    cc = resolve(args)
    config, data = load_inputs(cc)
    violations = find_violations(config, data)
    if violations:
        raise StageError("validate", "input invalid", None) from ValidationError(violations)
    print(f"OK: {len(data.technologies)} technologies, {len(data.flex)} flex options, "
          f"{len(config.windows)} windows, firm target {config.mechanism.firm_target:.2f} GW")
    return 0


def cmd_run(args) -> int:
    cc = resolve(args)
    config, data = load_inputs(cc)
    echo = {k: (str(v) if isinstance(v, Path) else v) for k, v in cc.options.items()}
    echo.update({"technologies": str(cc.technologies or "<bundled>"), "flex": str(cc.flex or "<bundled>"),
                 "series": str(cc.series)})
    plan = runner.RunPlan(config, data, cc.backend, cc.output, cc.parallel, export_lp=args.export_lp,
                          extra_manifest={"cli": echo})
    export_portfolio(data.flex, Path(cc.output) / "flex_portfolio.csv")
    result = runner.run(plan)
    mean = report.metrics(result)[-1]
    print(f"{result.scenario}: reserve {result.reserve_size:.2f} GW, flex {sum(result.flex_installed.values()):.2f}"
          f" GWh, mean price {mean.avg_price:.2f}, levy {mean.levy:.2f} EUR/MWh -> {cc.output}")
    return 0


def cmd_compare(args) -> int:
    try:
        a, ma = runner.load_result(args.dir_a)
        b, mb = runner.load_result(args.dir_b)
    except (OSError, KeyError, ValueError) as exc:
        raise StageError("compare", str(exc)) from exc
    if ma["input_hash"] != mb["input_hash"]:
        raise StageError("compare", "input hash mismatch: the runs used different inputs")
    families = {k: FlexFamily(v) for k, v in {**ma["flex_families"], **mb["flex_families"]}.items()}
    table = report.summarize(a, b, families)
    out = args.out or args.dir_b.parent
    out.mkdir(parents=True, exist_ok=True)
    report.write_comparison(table, out / "comparison.csv")
    summary = report.text_summary(a, b, table)
    (out / "summary.txt").write_text(summary, "utf-8")
    print(summary, end="")
    return 0


def cmd_export_lp(args) -> int:
    cc = resolve(args)
    config, data = load_inputs(cc)
    out = Path(cc.output)
    out.mkdir(parents=True, exist_ok=True)
    wds = {w: data.for_window(w, config.demand_uplift_target) for w in config.windows}
    p, idx = model.build_invest(config, data, wds[config.invest_window],
                                dh_hp_capacity=runner.heat_pump_capacity(config, wds))
    name = model.model_file_name(config.name, config.invest_window.label, "invest")
    write_mps(p, out / name)
    idx.to_csv(out / (name[:-4] + ".index.csv"))
    print(f"wrote {out / name} ({p.n_vars} variables, {p.n_rows} constraints)")
    return 0


COMMANDS = {"synth": cmd_synth, "validate": cmd_validate, "run": cmd_run, "compare": cmd_compare,
            "export-lp": cmd_export_lp}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = getattr(args, "out", None)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        cause = exc.__cause__ if isinstance(exc.__cause__, ValidationError) else exc
        path = write_error(out, cause, exc.stage, exc.window)
        print(f"error [{exc.stage}]: {cause} (details in {path})", file=sys.stderr)
        return 1
    except runner.RunError as exc:
        path = write_error(out, exc, exc.stage, exc.window)
        print(f"error: {exc} (details in {path})", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        path = write_error(out, exc, args.command)
        print(f"error [{args.command}]: {exc} (details in {path})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
