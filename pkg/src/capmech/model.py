"""Investment and dispatch linear programs for one bidding zone.

Units: power in GW, energy in GWh, one step per hour. The objective is in
kEUR, so the dual of an hourly energy balance reads directly in EUR/MWh_el
and annual capacity costs (EUR/kW/a) enter as ``1000 * cost * weight`` per GW,
where ``weight`` is the fraction of a year the window covers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from capmech.domain import (HOURS_PER_YEAR, FlexFamily, FlexOption, HourlySeries, Kind, ModelData,
                            ScenarioConfig, Technology, WindowData, annuity, marginal_cost)
from capmech.flex import resistance_heater_power
from capmech.lp import INF, LpProblem, LpSolution, Sense

KEUR_PER_GW = 1000.0  # EUR/kW (or EUR/kWh) times GW (GWh) in kEUR


class FormulationError(ValueError):
    pass


def demand_profile(base: HourlySeries, uplift_target: float) -> HourlySeries:
    """Add a flat adder so the series sums to ``uplift_target`` TWh over its hours."""
    total = float(np.sum(base.values)) / 1000.0
    extra = uplift_target - total
    if extra < -1e-9 * max(1.0, total):
        raise FormulationError(f"negative uplift: load already sums to {total:.3f} TWh > target {uplift_target}")
    adder = max(extra, 0.0) * 1000.0 / len(base.values)
    return HourlySeries(base.weather_year, base.values + adder, base.unit)


# ---------------------------------------------------------------------------
# Index


@dataclass
class ModelIndex:
    """Where every block of variables and rows lives in the problem.

    ``vars``/``rows`` map (category, item) to index arrays; hourly blocks are
    contiguous. ``capacity`` maps a capacity key (``ccgt``, ``battery.energy``,
    ``flex.industry_3h``) to its variable, for the investment model only.
    """

    stage: str
    n_hours: int
    vars: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    rows: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    capacity: dict[str, int] = field(default_factory=dict)
    fixed: dict[str, float] = field(default_factory=dict)

    @property
    def balance(self) -> np.ndarray:
        return self.rows[("balance", "el")]

    @property
    def firm_row(self) -> int | None:
        r = self.rows.get(("firm", "target"))
        return None if r is None else int(r[0])

    def var(self, category: str, item: str) -> np.ndarray:
        return self.vars[(category, item)]

    def items(self, category: str) -> list[str]:
        return [i for c, i in self.vars if c == category]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "category", "item", "start", "count"])
            for kind, table in (("var", self.vars), ("row", self.rows)):
                for (cat, item), idx in table.items():
                    w.writerow([kind, cat, item, int(idx[0]) if len(idx) else 0, len(idx)])
            for key, j in self.capacity.items():
                w.writerow(["capacity", "capacity", key, j, 1])

    @classmethod
    def from_csv(cls, path: str | Path, stage: str = "", n_hours: int = 0) -> ModelIndex:
        out = cls(stage, n_hours)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                start, count = int(row["start"]), int(row["count"])
                key = (row["category"], row["item"])
                if row["kind"] == "var":
                    out.vars[key] = np.arange(start, start + count)
                elif row["kind"] == "row":
                    out.rows[key] = np.arange(start, start + count)
                else:
                    out.capacity[row["item"]] = start
        return out


# ---------------------------------------------------------------------------
# Helpers


def capacity_cost(overnight: float, fixed: float, lifetime: float, rate: float) -> float:
    """EUR/kW/a (or EUR/kWh/a) for an endogenous capacity."""
    return annuity(overnight, lifetime, rate) + fixed


def firm_capacity(techs: dict[str, Technology], capacities: dict[str, float], eligible) -> float:
    """Firm capacity in GW: dispatchable capacity plus storage/reservoir discharge power."""
    total = 0.0
    for tid in sorted(eligible):
        tech = techs[tid]
        key = tid if tech.kind is Kind.DISPATCHABLE else f"{tid}.discharge"
        total += capacities.get(key, 0.0)
    return total


def size_reserve(capacities: dict[str, float], techs: dict[str, Technology], mechanism) -> float:
    """Reserve power making wholesale plus reserve firm capacity reach the target."""
    return max(0.0, mechanism.firm_target - firm_capacity(techs, capacities, mechanism.eligible_firm))


def electric_demand(data: ModelData, wd: WindowData) -> np.ndarray:
    """Inflexible load plus the flat process-heat draw plus district-heating heat-pump power."""
    demand = np.array(wd.load, dtype=float)
    if wd.dh_heat is not None:
        demand = demand + wd.dh_heat / wd.dh_cop
    return demand


def residual_peak(data: ModelData, wd: WindowData) -> float:
    """Highest hourly electric demand net of variable renewable output, GW."""
    residual = electric_demand(data, wd)
    for tech in data.technologies.values():
        if tech.kind is Kind.RENEWABLE:
            residual = residual - tech.capacity[1] * wd.availability[tech.availability]
    return float(residual.max())


def firm_target_for(data: ModelData, wd: WindowData, margin: float = 5.0) -> float:
    """Residual-load peak plus a safety margin, the way the firm target is set."""
    return residual_peak(data, wd) + margin


class _Builder:
    def __init__(self, name: str, stage: str, config: ScenarioConfig, data: ModelData, wd: WindowData):
        self.p = LpProblem(name)
        self.idx = ModelIndex(stage, wd.n_hours)
        self.config = config
        self.data = data
        self.wd = wd
        self.T = wd.n_hours
        self.hours = np.arange(self.T)
        self.weight = wd.window.weight
        # balance terms: (column arrays, sign); supply +1, demand -1
        self.balance_terms: list[tuple[np.ndarray, float]] = []

    # -- generic pieces ----------------------------------------------------

    def hourly(self, category: str, item: str, lb=0.0, ub=INF, cost=0.0) -> np.ndarray:
        names = [f"{category}.{item}.{t}" for t in range(self.T)]
        cols = self.p.add_variables(names, lb=lb, ub=ub, obj=cost)
        self.idx.vars[(category, item)] = cols
        return cols

    def capacity_var(self, key: str, annual_cost: float, lo: float = 0.0, hi: float = INF) -> int:
        j = self.p.add_variable(f"cap.{key}", lb=lo, ub=hi, obj=KEUR_PER_GW * annual_cost * self.weight)
        self.idx.capacity[key] = j
        return j

    def hourly_rows(self, category: str, item: str, sense, rhs, terms) -> np.ndarray:
        """``terms`` is a list of (columns, coefficient) with scalars or per-hour arrays;
        a single column (int) is broadcast to every hour."""
        names = [f"{category}.{item}.{t}" for t in range(self.T)]
        local, cols, vals = [], [], []
        for c, v in terms:
            c = np.full(self.T, c) if np.isscalar(c) else np.asarray(c)
            local.append(self.hours)
            cols.append(c)
            vals.append(np.broadcast_to(np.asarray(v, dtype=float), (self.T,)))
        rows = self.p.add_rows(names, sense, rhs, local, cols, vals)
        self.idx.rows[(category, item)] = rows
        return rows

    def upper(self, category: str, item: str, cols: np.ndarray, cap, factor=1.0) -> None:
        """cols_t <= factor_t * cap, as a bound when ``cap`` is a number, a row when it is a column."""
        if isinstance(cap, tuple):  # ("var", j)
            self.hourly_rows(category, item, Sense.LE, 0.0, [(cols, 1.0), (cap[1], -np.asarray(factor, dtype=float))])
        else:
            self.p.set_bounds(cols, ub=np.asarray(factor, dtype=float) * cap)

    def level_recursion(self, item: str, level, inflow_terms, retention: float) -> None:
        """level_t - retention*level_{t-1} - inflows_t = 0 with level_{-1} = level_{T-1}."""
        terms = [(level, 1.0), (np.roll(level, 1), -retention)] + inflow_terms
        self.hourly_rows("level", item, Sense.EQ, 0.0, terms)

    # -- capacities --------------------------------------------------------

    def capacity_of(self, key: str, lo: float, hi: float, overnight: float, fixed: float, lifetime: float,
                    fixed_caps: dict[str, float] | None):
        """Either a constant (fixed technology or dispatch stage) or ("var", column)."""
        if fixed_caps is not None:
            if key not in fixed_caps:
                raise FormulationError(f"missing capacity for {key}")
            value = float(fixed_caps[key])
            self.idx.fixed[key] = value
            return value
        if lo == hi:
            self.idx.fixed[key] = lo
            return lo
        cost = capacity_cost(overnight, fixed, lifetime, self.config.interest_rate)
        return ("var", self.capacity_var(key, cost, lo, hi))


def _fixed_cost_offset(techs: dict[str, Technology], caps: dict[str, float], rate: float, weight: float) -> float:
    """Capacity cost of the power sector (kEUR) for fixed capacities, used as objective offset."""
    total = 0.0
    for tech in techs.values():
        if tech.kind in (Kind.DISPATCHABLE, Kind.RENEWABLE):
            if tech.capacity[0] != tech.capacity[1]:
                total += caps.get(tech.id, 0.0) * capacity_cost(tech.overnight_cost, tech.fixed_cost,
                                                                tech.lifetime, rate)
            continue
        for part_name in ("charge", "discharge", "energy"):
            part = getattr(tech, part_name)
            if part is not None and part.endogenous:
                total += caps.get(f"{tech.id}.{part_name}", 0.0) * capacity_cost(
                    part.overnight_cost, part.fixed_cost, tech.lifetime, rate)
    return KEUR_PER_GW * total * weight


def _build(stage: str, config: ScenarioConfig, data: ModelData, wd: WindowData,
           fixed_caps: dict[str, float] | None, reserve_size: float | None,
           flex_caps: dict[str, float] | None, dh_hp_capacity: float | None,
           name: str | None) -> tuple[LpProblem, ModelIndex]:
    if name is None:
        name = f"{config.name}_{wd.window.label}_{stage}"
    b = _Builder(name, stage, config, data, wd)
    p = b.p
    mech = config.mechanism
    rate = config.interest_rate

    for tech in data.technologies.values():
        if tech.kind is Kind.DISPATCHABLE:
            cap = b.capacity_of(tech.id, *tech.capacity, tech.overnight_cost, tech.fixed_cost, tech.lifetime,
                                fixed_caps)
            gen = b.hourly("gen", tech.id, cost=marginal_cost(tech, config.carbon_price))
            b.upper("cap", tech.id, gen, cap)
            b.balance_terms.append((gen, 1.0))
        elif tech.kind is Kind.RENEWABLE:
            cap = b.capacity_of(tech.id, *tech.capacity, tech.overnight_cost, tech.fixed_cost, tech.lifetime,
                                fixed_caps)
            gen = b.hourly("gen", tech.id, cost=tech.var_cost)
            b.upper("cap", tech.id, gen, cap, wd.availability[tech.availability])
            b.balance_terms.append((gen, 1.0))
        elif tech.kind is Kind.STORAGE:
            caps = {}
            for part_name in ("charge", "discharge", "energy"):
                part = getattr(tech, part_name)
                caps[part_name] = b.capacity_of(f"{tech.id}.{part_name}", *part.capacity, part.overnight_cost,
                                                part.fixed_cost, tech.lifetime, fixed_caps)
            ch = b.hourly("charge", tech.id, cost=tech.charge.var_cost)
            dis = b.hourly("discharge", tech.id, cost=tech.discharge.var_cost)
            lvl = b.hourly("level", tech.id)
            b.upper("cap_charge", tech.id, ch, caps["charge"])
            b.upper("cap_discharge", tech.id, dis, caps["discharge"])
            b.upper("cap_energy", tech.id, lvl, caps["energy"])
            b.level_recursion(tech.id, lvl, [(ch, -tech.charge.efficiency), (dis, 1.0 / tech.discharge.efficiency)],
                              tech.energy.efficiency)
            b.balance_terms += [(dis, 1.0), (ch, -1.0)]
        elif tech.kind is Kind.RESERVOIR:
            dcap = b.capacity_of(f"{tech.id}.discharge", *tech.discharge.capacity, tech.discharge.overnight_cost,
                                 tech.discharge.fixed_cost, tech.lifetime, fixed_caps)
            ecap = b.capacity_of(f"{tech.id}.energy", *tech.energy.capacity, tech.energy.overnight_cost,
                                 tech.energy.fixed_cost, tech.lifetime, fixed_caps)
            if isinstance(dcap, tuple):
                raise FormulationError(f"{tech.id}: reservoir discharge capacity must be fixed")
            dis = b.hourly("discharge", tech.id, cost=tech.discharge.var_cost)
            spill = b.hourly("spill", tech.id)
            lvl = b.hourly("level", tech.id)
            b.upper("cap_discharge", tech.id, dis, dcap)
            b.upper("cap_energy", tech.id, lvl, ecap)
            inflow = wd.inflow[tech.inflow] * dcap
            # level_t = level_{t-1} + inflow_t - dis_t/eta - spill_t
            b.hourly_rows("level", tech.id, Sense.EQ, inflow,
                          [(lvl, 1.0), (np.roll(lvl, 1), -tech.energy.efficiency),
                           (dis, 1.0 / tech.discharge.efficiency), (spill, 1.0)])
            b.balance_terms.append((dis, 1.0))

    for opt in data.flex:
        _add_flex(b, opt, flex_caps, dh_hp_capacity)

    if mech.is_reserve:
        if stage == "invest":
            proxy = b.hourly("reserve", "output", cost=mech.activation_price)
        else:
            proxy = b.hourly("reserve", "output", ub=reserve_size or 0.0, cost=mech.activation_price)
        b.balance_terms.append((proxy, 1.0))
    if stage == "dispatch":
        unserved = b.hourly("unserved", "el", cost=config.unserved_price)
        b.balance_terms.append((unserved, 1.0))

    load = np.array(wd.load, dtype=float)
    if data.process_heat is not None and any(o.family is FlexFamily.PROCESS_HEAT for o in data.flex):
        # the resistance-heated share is modeled explicitly, so it leaves the inflexible load
        load = load - _resistance_power(data) / 1000.0
    b.hourly_rows("balance", "el", Sense.EQ, load, b.balance_terms)

    if stage == "invest" and not mech.is_reserve:
        terms = []
        fixed = 0.0
        for tid in sorted(mech.eligible_firm):
            tech = data.technologies[tid]
            key = tid if tech.kind is Kind.DISPATCHABLE else f"{tid}.discharge"
            if key in b.idx.capacity:
                terms.append(b.idx.capacity[key])
            else:
                fixed += b.idx.fixed.get(key, 0.0)
        rhs = mech.firm_target - fixed
        row = p.add_constraint("firm.target", (terms, [1.0] * len(terms)), Sense.GE, rhs)
        b.idx.rows[("firm", "target")] = np.array([row])

    if stage == "dispatch" and fixed_caps is not None:
        p.offset = _fixed_cost_offset(data.technologies, fixed_caps, rate, b.weight)
        if flex_caps is not None:
            p.offset += KEUR_PER_GW * b.weight * sum(
                annuity(o.energy_invest_cost, config.flex_lifetime, rate) * flex_caps[o.id] for o in data.flex)
    return p, b.idx


def _resistance_power(data: ModelData) -> float:
    """Average electric draw of resistance-heated process heat, MW_el."""
    inp = data.process_heat
    return resistance_heater_power(inp.resistance_thermal, inp.eta_rh) * 1e6 / HOURS_PER_YEAR


def _add_flex(b: _Builder, opt: FlexOption, flex_caps: dict[str, float] | None,
              dh_hp_capacity: float | None) -> None:
    key = f"flex.{opt.id}"
    if flex_caps is not None:
        if opt.id not in flex_caps:
            raise FormulationError(f"missing flex capacity for {opt.id}")
        energy = float(flex_caps[opt.id])
        b.idx.fixed[key] = energy
    else:
        cost = annuity(opt.energy_invest_cost, b.config.flex_lifetime, b.config.interest_rate)
        hi = opt.energy_cap
        energy = ("var", b.capacity_var(key, cost, 0.0, hi))
    retention = 1.0 - opt.hourly_loss
    power = opt.power / 1000.0  # GW

    if opt.family is FlexFamily.INDUSTRY:
        tiers = []
        prev = 0.0
        for k, (frac, price) in enumerate(opt.activation_cost_tiers):
            cols = b.hourly("reduce", f"{opt.id}.{k}", ub=(frac - prev) * power, cost=price)
            tiers.append(cols)
            prev = frac
        b.balance_terms += [(cols, 1.0) for cols in tiers]
        if opt.shedding:
            return
        ch = b.hourly("charge", opt.id, ub=power)
        lvl = b.hourly("level", opt.id)
        b.upper("cap_energy", opt.id, lvl, energy)
        b.level_recursion(opt.id, lvl, [(ch, -opt.storage_efficiency)] +
                          [(cols, 1.0 / opt.storage_efficiency) for cols in tiers], retention)
        b.balance_terms.append((ch, -1.0))

    elif opt.family is FlexFamily.PROCESS_HEAT:
        if b.data.process_heat is None:
            raise FormulationError("process-heat option needs process-heat inputs")
        need = _resistance_power(b.data) / 1000.0  # GW_el equivalent of the heat demand
        direct = b.hourly("direct", opt.id)
        ch = b.hourly("charge", opt.id, ub=power)
        dis = b.hourly("discharge", opt.id, ub=(opt.discharge_power or INF) / 1000.0)
        lvl = b.hourly("level", opt.id)
        b.upper("cap_energy", opt.id, lvl, energy)
        b.level_recursion(opt.id, lvl, [(ch, -opt.storage_efficiency), (dis, 1.0)], retention)
        b.hourly_rows("heat", opt.id, Sense.EQ, need, [(direct, 1.0), (dis, 1.0)])
        b.balance_terms += [(direct, -1.0), (ch, -1.0)]

    elif opt.family is FlexFamily.DISTRICT_HEATING:
        wd = b.wd
        if wd.dh_heat is None:
            raise FormulationError("district-heating option needs heat and COP series")
        hp_cap = dh_hp_capacity if dh_hp_capacity is not None else (
            b.config.dh_hp_oversize * float(wd.dh_heat.max()))
        b.idx.fixed["dh.heat_pump"] = hp_cap
        hp = b.hourly("heat_pump", opt.id, ub=hp_cap)
        ch = b.hourly("charge", opt.id)
        dis = b.hourly("discharge", opt.id)
        lvl = b.hourly("level", opt.id)
        b.upper("cap_energy", opt.id, lvl, energy)
        b.level_recursion(opt.id, lvl, [(ch, -opt.storage_efficiency), (dis, 1.0)], retention)
        b.hourly_rows("heat", opt.id, Sense.EQ, wd.dh_heat, [(hp, 1.0), (dis, 1.0), (ch, -1.0)])
        b.balance_terms.append((hp, -1.0 / wd.dh_cop))


def build_invest(config: ScenarioConfig, data: ModelData, wd: WindowData, dh_hp_capacity: float | None = None,
                 name: str | None = None) -> tuple[LpProblem, ModelIndex]:
    """Joint capacity and dispatch model for one window."""
    if wd.window != config.invest_window:
        raise FormulationError(f"window {wd.window.label} is not the invest window {config.invest_window.label}")
    return _build("invest", config, data, wd, None, None, None, dh_hp_capacity, name)


def build_dispatch(config: ScenarioConfig, data: ModelData, wd: WindowData, fixed_capacities: dict[str, float],
                   reserve_size: float = 0.0, flex_capacities: dict[str, float] | None = None,
                   dh_hp_capacity: float | None = None, name: str | None = None) -> tuple[LpProblem, ModelIndex]:
    """Dispatch with power-sector capacities fixed.

    With ``flex_capacities`` given the flexibility storages are fixed too;
    otherwise they are re-optimized at their investment cost.
    """
    return _build("dispatch", config, data, wd, dict(fixed_capacities), reserve_size, flex_capacities,
                  dh_hp_capacity, name)


# ---------------------------------------------------------------------------
# Decoding


def capacities_from(sol: LpSolution, idx: ModelIndex) -> tuple[dict[str, float], dict[str, float]]:
    """(power-sector capacities, flex energy capacities in GWh) of a solved model."""
    power: dict[str, float] = {}
    flex: dict[str, float] = {}
    values = {k: float(sol.x[j]) for k, j in idx.capacity.items()}
    values.update({k: v for k, v in idx.fixed.items() if k not in values})
    for key, v in values.items():
        v = 0.0 if abs(v) < 1e-9 else v
        if key.startswith("flex."):
            flex[key[5:]] = v
        elif key != "dh.heat_pump":
            power[key] = v
    return power, flex


def prices(sol: LpSolution, idx: ModelIndex) -> np.ndarray:
    return np.asarray(sol.duals[idx.balance], dtype=float)


def model_file_name(scenario: str, window: str, stage: str) -> str:
    return f"{scenario}_{window}_{stage}.mps"


def annual_firm_value(sol: LpSolution, idx: ModelIndex, weight: float) -> float:
    """Dual of the firm-capacity row converted to EUR/kW/a."""
    return float(sol.duals[idx.firm_row]) / (KEUR_PER_GW * weight)
