"""Two-step scenario runs: invest on one window, dispatch on every window.

Output directory layout (all CSV headers fixed):

- ``manifest.json``: config echo, input hash, versions, file hashes
- ``capacities.csv``: ``item,category,value,unit``
- ``flex_capacities.csv``: ``window,option,family,value_gwh``
- ``prices_invest.csv``: ``timestamp,price``
- ``prices_{window}.csv``: ``timestamp,price,demand_gw``
- ``dispatch_{window}.csv``: ``timestamp`` then one GW column per block
- ``reserve_{window}.csv``: ``timestamp,reserve_gw,unserved_gw,price``
- ``metrics.csv`` and ``pdc_{scenario}_{window}.csv`` (see :mod:`capmech.report`)
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from capmech import __version__, model, report
from capmech.domain import (FlexMode, Mechanism, ModelData, ScenarioConfig, ScenarioResult, WeatherWindow,
                            WindowData, WindowResult, dump_technologies, marginal_cost, validate)
from capmech.lp import LpProblem, LpSolution, Sense, get_backend, solve, write_mps

log = logging.getLogger(__name__)

PRICE_COLUMNS = ("timestamp", "price", "demand_gw")
RESERVE_COLUMNS = ("timestamp", "reserve_gw", "unserved_gw", "price")
CAPACITY_COLUMNS = ("item", "category", "value", "unit")
FLEX_COLUMNS = ("window", "option", "family", "value_gwh")
FLOAT_FORMAT = "%.6f"
DISPATCH_BLOCKS = ("gen", "discharge", "charge", "reduce", "direct", "heat_pump", "spill", "reserve", "unserved",
                   "level")


class RunError(RuntimeError):
    """A stage failed; ``stage`` and ``window`` say where."""

    def __init__(self, stage: str, window: str, message: str):
        super().__init__(f"[{stage}] window {window}: {message}")
        self.stage = stage
        self.window = window


@dataclass
class RunPlan:
    config: ScenarioConfig
    data: ModelData
    backend: str = "highs"
    output_dir: Path | None = None
    parallelism: int = 1
    export_lp: bool = False
    extra_manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.config.dispatch_windows:
            raise ValueError("dispatch windows must not be empty")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        get_backend(self.backend)
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)
            self.output_dir.mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# Solving helpers


def extract_prices(sol: LpSolution, idx: model.ModelIndex) -> np.ndarray:
    """Hour-ordered energy-balance duals, EUR/MWh_el."""
    if not sol.optimal:
        raise ValueError(f"cannot extract prices from a {sol.status.value} solution")
    return model.prices(sol, idx)


def diagnose_infeasibility(p: LpProblem, top: int = 5) -> list[str]:
    """Rows that need relaxing to make ``p`` feasible, largest violation first."""
    q = LpProblem(p.name + "_elastic")
    q.add_variables(p.var_names, lb=p.lb, ub=p.ub, obj=0.0)
    m = p.n_rows
    pos = q.add_variables([f"__pos{i}" for i in range(m)], obj=1.0)
    neg = q.add_variables([f"__neg{i}" for i in range(m)], obj=1.0)
    A = p.A.tocoo()
    for sense in Sense:
        rows = np.nonzero(np.array([s is sense for s in p.senses]))[0]
        if not len(rows):
            continue
        local = {r: k for k, r in enumerate(rows)}
        sel = np.isin(A.row, rows)
        lr = np.array([local[r] for r in A.row[sel]], dtype=int)
        q.add_rows([f"r{r}" for r in rows], sense, p.rhs[rows],
                   [lr, np.arange(len(rows)), np.arange(len(rows))],
                   [A.col[sel], pos[rows], neg[rows]],
                   [A.data[sel], np.ones(len(rows)), -np.ones(len(rows))])
    sol = solve(q, "highs", check=False)
    if not sol.optimal:
        return []
    viol = sol.x[pos] + sol.x[neg]
    order = np.argsort(-viol)
    return [f"{p.row_names[i]} ({viol[i]:.4g})" for i in order[:top] if viol[i] > 1e-7]


def _solve(p: LpProblem, backend: str, stage: str, window: str) -> LpSolution:
    try:
        sol = solve(p, backend)
    except Exception as exc:
        raise RunError(stage, window, f"{type(exc).__name__}: {exc}") from exc
    if not sol.optimal:
        detail = ""
        if sol.status.value == "infeasible":
            rows = diagnose_infeasibility(p)
            if rows:
                detail = "; violated constraints: " + ", ".join(rows)
        raise RunError(stage, window, f"{sol.status.value}{detail}")
    return sol


def _dispatch_frame(sol: LpSolution, idx: model.ModelIndex) -> pd.DataFrame:
    cols = {}
    reduce: dict[str, np.ndarray] = {}
    for (cat, item), j in idx.vars.items():
        if cat not in DISPATCH_BLOCKS:
            continue
        values = np.asarray(sol.x[j], dtype=float)
        if cat == "reduce":
            option = item.rsplit(".", 1)[0]
            reduce[option] = reduce.get(option, 0.0) + values
            continue
        cols[f"{cat}.{item}"] = values
    for option, values in reduce.items():
        cols[f"reduce.{option}"] = values
    frame = pd.DataFrame(cols)
    return frame[sorted(frame.columns, key=lambda c: (DISPATCH_BLOCKS.index(c.split(".")[0]), c))]


def window_data(plan: RunPlan) -> dict[WeatherWindow, WindowData]:
    cfg = plan.config
    return {w: plan.data.for_window(w, cfg.demand_uplift_target) for w in cfg.windows}


def heat_pump_capacity(cfg: ScenarioConfig, wds: dict[WeatherWindow, WindowData]) -> float | None:
    """District-heating heat pumps sized to the highest heat demand of any window."""
    peaks = [float(wd.dh_heat.max()) for wd in wds.values() if wd.dh_heat is not None]
    return cfg.dh_hp_oversize * max(peaks) if peaks else None


# ---------------------------------------------------------------------------
# Run


def run(plan: RunPlan) -> ScenarioResult:
    cfg, data = plan.config, plan.data
    try:
        validate(cfg, data)
    except ValueError as exc:
        raise RunError("validate", cfg.invest_window.label, str(exc)) from exc
    wds = window_data(plan)
    hp_cap = heat_pump_capacity(cfg, wds)
    scenario = cfg.name

    inv_wd = wds[cfg.invest_window]
    p, idx = model.build_invest(cfg, data, inv_wd, dh_hp_capacity=hp_cap)
    _maybe_export(plan, p, idx, scenario, cfg.invest_window.label, "invest")
    sol = _solve(p, plan.backend, "invest", cfg.invest_window.label)
    installed, flex_installed = model.capacities_from(sol, idx)
    invest_prices = extract_prices(sol, idx)
    reserve = model.size_reserve(installed, data.technologies, cfg.mechanism) if cfg.mechanism.is_reserve else 0.0
    log.info("%s invest %s: objective %.1f, reserve %.2f GW", scenario, cfg.invest_window.label, sol.objective,
             reserve)

    flex_fixed = flex_installed if cfg.flex_mode is FlexMode.FIXED else None

    def dispatch(w: WeatherWindow) -> WindowResult:
        wd = wds[w]
        q, qidx = model.build_dispatch(cfg, data, wd, installed, reserve, flex_fixed, hp_cap)
        _maybe_export(plan, q, qidx, scenario, w.label, "dispatch")
        s = _solve(q, plan.backend, "dispatch", w.label)
        _, flex = model.capacities_from(s, qidx)
        frame = _dispatch_frame(s, qidx)
        res = s.x[qidx.var("reserve", "output")] if ("reserve", "output") in qidx.vars else np.zeros(wd.n_hours)
        uns = s.x[qidx.var("unserved", "el")]
        return WindowResult(w, extract_prices(s, qidx), model.electric_demand(data, wd), frame,
                            np.where(np.abs(res) < 1e-9, 0.0, res), np.where(np.abs(uns) < 1e-9, 0.0, uns),
                            flex, s.objective, dict(s.metrics))

    windows = list(cfg.dispatch_windows)
    if plan.parallelism > 1:
        with ThreadPoolExecutor(max_workers=plan.parallelism) as pool:
            results = list(pool.map(dispatch, windows))
    else:
        results = [dispatch(w) for w in windows]

    ocgt = data.technologies.get(report.RESERVE_TECH)
    result = ScenarioResult(
        scenario=scenario, config=cfg, installed=installed, flex_installed=flex_installed, reserve_size=reserve,
        invest_objective=sol.objective, invest_prices=invest_prices, windows=results,
        payment_rate=report.payment_rate(data.technologies, cfg.interest_rate) if ocgt else 0.0,
        reserve_marginal_cost=marginal_cost(ocgt, cfg.carbon_price) if ocgt else 0.0,
        input_hash=input_hash(cfg, data))
    if plan.output_dir is not None:
        persist(plan, result)
    return result


def _maybe_export(plan: RunPlan, p: LpProblem, idx: model.ModelIndex, scenario: str, window: str, stage: str):
    if not (plan.export_lp and plan.output_dir is not None):
        return
    target = plan.output_dir / "lp"
    target.mkdir(exist_ok=True)
    name = model.model_file_name(scenario, window, stage)
    write_mps(p, target / name)
    idx.to_csv(target / (name[:-4] + ".index.csv"))


# ---------------------------------------------------------------------------
# Hashing and persistence


def config_to_dict(cfg: ScenarioConfig) -> dict:
    mech = cfg.mechanism
    return {
        "mechanism": {"variant": mech.variant, "firm_target": mech.firm_target,
                      "activation_price": mech.activation_price, "eligible_firm": sorted(mech.eligible_firm)},
        "invest_window": asdict(cfg.invest_window),
        "dispatch_windows": [asdict(w) for w in cfg.dispatch_windows],
        "carbon_price": cfg.carbon_price,
        "interest_rate": cfg.interest_rate,
        "flex_mode": cfg.flex_mode.value,
        "demand_uplift_target": cfg.demand_uplift_target,
        "flex_lifetime": cfg.flex_lifetime,
        "slack_price": cfg.slack_price,
        "dh_hp_oversize": cfg.dh_hp_oversize,
    }


def config_from_dict(d: dict) -> ScenarioConfig:
    m = d["mechanism"]
    mech = Mechanism(m["variant"], m["firm_target"], m.get("activation_price"), frozenset(m["eligible_firm"]))
    return ScenarioConfig(
        mechanism=mech, invest_window=WeatherWindow(**d["invest_window"]),
        dispatch_windows=tuple(WeatherWindow(**w) for w in d["dispatch_windows"]),
        carbon_price=d["carbon_price"], interest_rate=d["interest_rate"], flex_mode=d["flex_mode"],
        demand_uplift_target=d["demand_uplift_target"], flex_lifetime=d["flex_lifetime"],
        slack_price=d["slack_price"], dh_hp_oversize=d["dh_hp_oversize"])


def input_hash(cfg: ScenarioConfig, data: ModelData) -> str:
    """Hash of everything except the mechanism, so two scenarios on the same inputs match."""
    h = hashlib.sha256()
    echo = config_to_dict(cfg)
    echo.pop("mechanism")
    echo.pop("slack_price")
    h.update(json.dumps(echo, sort_keys=True).encode())
    h.update(dump_technologies(data.technologies).encode())
    h.update(repr(data.flex).encode())
    h.update(repr(data.process_heat).encode())
    years = sorted({y for w in cfg.windows for y in (w.start_year, w.start_year + 1)})
    for name in sorted(data.series):
        for year in years:
            s = data.series[name].get(year)
            if s is not None:
                h.update(f"{name}:{year}:{s.unit.value}".encode())
                h.update(np.ascontiguousarray(s.values).tobytes())
    return h.hexdigest()


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _stamps(w: WeatherWindow) -> list[str]:
    return list(w.hours.strftime("%Y-%m-%dT%H:%M:%SZ"))


def persist(plan: RunPlan, result: ScenarioResult) -> Path:
    out = Path(plan.output_dir)
    cfg = result.config
    caps = [(k, "power", v, "GWh" if k.endswith(".energy") else "GW") for k, v in result.installed.items()]
    caps += [(k, "flex", v, "GWh") for k, v in result.flex_installed.items()]
    caps.append(("reserve", "reserve", result.reserve_size, "GW"))
    _write_csv(pd.DataFrame(caps, columns=list(CAPACITY_COLUMNS)), out / "capacities.csv")

    families = {o.id: o.family.value for o in plan.data.flex}
    flex_rows = [(w.window.label, k, families.get(k, ""), v) for w in result.windows
                 for k, v in w.flex_capacities.items()]
    _write_csv(pd.DataFrame(flex_rows, columns=list(FLEX_COLUMNS)), out / "flex_capacities.csv")

    _write_csv(pd.DataFrame({"timestamp": _stamps(cfg.invest_window), "price": result.invest_prices}),
               out / "prices_invest.csv")
    for w in result.windows:
        label = w.window.label
        stamps = _stamps(w.window)
        _write_csv(pd.DataFrame({"timestamp": stamps, "price": w.prices, "demand_gw": w.demand}),
                   out / f"prices_{label}.csv")
        frame = w.dispatch.copy()
        frame.insert(0, "timestamp", stamps)
        _write_csv(frame, out / f"dispatch_{label}.csv")
        _write_csv(pd.DataFrame({"timestamp": stamps, "reserve_gw": w.reserve, "unserved_gw": w.unserved,
                                 "price": w.prices}), out / f"reserve_{label}.csv")
    report.write_metrics(report.metrics(result), out / "metrics.csv")
    report.write_price_duration(result, out)

    files = {}
    for path in sorted(out.glob("*.csv")):
        files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest = {
        "scenario": result.scenario,
        "config": config_to_dict(cfg),
        "input_hash": result.input_hash,
        "backend": plan.backend,
        "reserve_size": result.reserve_size,
        "payment_rate": result.payment_rate,
        "reserve_marginal_cost": result.reserve_marginal_cost,
        "invest_objective": result.invest_objective,
        "window_objectives": {w.window.label: w.objective for w in result.windows},
        "flex_families": families,
        "versions": {"capmech": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "pandas": pd.__version__},
        "files": files,
        **plan.extra_manifest,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    return out


def load_result(directory: str | Path) -> tuple[ScenarioResult, dict]:
    """Rebuild a :class:`ScenarioResult` from a run directory; also returns the manifest."""
    d = Path(directory)
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{d}: no manifest.json, not a run directory")
    manifest = json.loads(manifest_path.read_text("utf-8"))
    cfg = config_from_dict(manifest["config"])
    caps = pd.read_csv(d / "capacities.csv")
    installed = {r.item: float(r.value) for r in caps.itertuples() if r.category == "power"}
    flex_installed = {r.item: float(r.value) for r in caps.itertuples() if r.category == "flex"}
    flex_windows = pd.read_csv(d / "flex_capacities.csv", dtype={"window": str})
    windows = []
    for w in cfg.dispatch_windows:
        label = w.label
        prices = pd.read_csv(d / f"prices_{label}.csv")
        reserve = pd.read_csv(d / f"reserve_{label}.csv")
        dispatch = pd.read_csv(d / f"dispatch_{label}.csv").drop(columns="timestamp")
        fw = flex_windows[flex_windows.window == label]
        windows.append(WindowResult(
            w, prices.price.to_numpy(), prices.demand_gw.to_numpy(), dispatch, reserve.reserve_gw.to_numpy(),
            reserve.unserved_gw.to_numpy(), {r.option: float(r.value_gwh) for r in fw.itertuples()},
            float(manifest["window_objectives"][label])))
    invest = pd.read_csv(d / "prices_invest.csv")
    result = ScenarioResult(
        scenario=manifest["scenario"], config=cfg, installed=installed, flex_installed=flex_installed,
        reserve_size=float(manifest["reserve_size"]), invest_objective=float(manifest["invest_objective"]),
        invest_prices=invest.price.to_numpy(), windows=windows, payment_rate=float(manifest["payment_rate"]),
        reserve_marginal_cost=float(manifest["reserve_marginal_cost"]), input_hash=manifest["input_hash"])
    return result, manifest

