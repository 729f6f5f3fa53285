"""Typed inputs and results shared across the model.

Everything here is plain data plus validation. Units follow the parameter
file: GW_el for power, GWh for energy, EUR/kW for overnight cost and
EUR/MWh for variable cost, unless a field says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np
import pandas as pd
import yaml

if TYPE_CHECKING:
    from capmech.flex import ProcessHeatInput

HOURS_PER_YEAR = 8760
INDUSTRY_DURATIONS = (3, 12, 72, 336)


class Kind(str, Enum):
    DISPATCHABLE = "dispatchable"
    RENEWABLE = "variable-renewable"
    STORAGE = "storage"
    RESERVOIR = "reservoir"


class Unit(str, Enum):
    GW_EL = "GW_el"
    GW_TH = "GW_th"
    FRACTION = "fraction"
    EUR_MWH = "EUR/MWh_el"
    DIMENSIONLESS = "dimensionless"


class FlexFamily(str, Enum):
    INDUSTRY = "industry-dr"
    PROCESS_HEAT = "process-heat"
    DISTRICT_HEATING = "district-heating"


class FlexMode(str, Enum):
    FIXED = "fixed-from-invest"
    REOPTIMIZE = "reoptimize-per-year"


class ValidationError(ValueError):
    """Raised by :func:`validate`; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _bound(value) -> tuple[float, float]:
    if isinstance(value, (list, tuple)):
        lo, hi = value
        return float(lo), float(hi)
    return float(value), float(value)


def hourly_loss(daily_loss: float) -> float:
    """Per-hour standing loss equivalent to a per-day fractional loss."""
    return 1.0 - (1.0 - daily_loss) ** (1.0 / 24.0)


# ---------------------------------------------------------------------------
# Technologies


@dataclass(frozen=True)
class StoragePart:
    """One of the charge / discharge / energy rows of a storage technology.

    For the energy part ``efficiency`` is the per-hour retention factor.
    """

    capacity: tuple[float, float]
    overnight_cost: float = 0.0
    fixed_cost: float = 0.0
    efficiency: float = 1.0
    var_cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "capacity", _bound(self.capacity))

    @property
    def endogenous(self) -> bool:
        return self.capacity[0] != self.capacity[1]


@dataclass(frozen=True)
class Technology:
    id: str
    kind: Kind
    lifetime: float
    name: str = ""
    capacity: tuple[float, float] = (0.0, 0.0)
    overnight_cost: float = 0.0
    fixed_cost: float = 0.0
    efficiency: float = 1.0
    carbon_content: float = 0.0
    fuel_cost: float = 0.0
    var_cost: float = 0.0
    firm: bool = False
    availability: str | None = None
    inflow: str | None = None
    charge: StoragePart | None = None
    discharge: StoragePart | None = None
    energy: StoragePart | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "capacity", _bound(self.capacity))

    @property
    def endogenous(self) -> bool:
        parts = [p for p in (self.charge, self.discharge, self.energy) if p]
        if parts:
            return any(p.endogenous for p in parts)
        return self.capacity[0] != self.capacity[1]

    @property
    def standing_loss(self) -> float:
        """Per-hour standing loss of the energy part (0 for non-storage)."""
        return 1.0 - self.energy.efficiency if self.energy else 0.0

    def violations(self) -> list[str]:
        out = []
        where = f"technology[{self.id}]"
        if not self.lifetime > 0:
            out.append(f"{where}.lifetime: must be > 0, got {self.lifetime}")
        checks = [("", self)]
        checks += [(f".{n}", p) for n, p in
                   (("charge", self.charge), ("discharge", self.discharge), ("energy", self.energy)) if p]
        for suffix, obj in checks:
            lo, hi = obj.capacity
            if not (0 <= lo <= hi):
                out.append(f"{where}{suffix}.capacity: need 0 <= lo <= hi, got [{lo}, {hi}]")
            if not (0 < obj.efficiency <= 1):
                out.append(f"{where}{suffix}.efficiency: fraction out of (0,1], got {obj.efficiency}")
            for name in ("overnight_cost", "fixed_cost", "var_cost"):
                v = getattr(obj, name)
                if not (v >= 0 and math.isfinite(v)):
                    out.append(f"{where}{suffix}.{name}: must be finite and >= 0, got {v}")
        for name in ("carbon_content", "fuel_cost"):
            if not getattr(self, name) >= 0:
                out.append(f"{where}.{name}: must be >= 0")
        if self.kind is Kind.STORAGE and not (self.charge and self.discharge and self.energy):
            out.append(f"{where}: storage needs charge, discharge and energy rows")
        if self.kind is Kind.RESERVOIR and not (self.discharge and self.energy and self.inflow):
            out.append(f"{where}: reservoir needs discharge, energy rows and an inflow series")
        if self.kind is Kind.RENEWABLE and not self.availability:
            out.append(f"{where}.availability: renewable needs an availability series")
        return out


def marginal_cost(tech: Technology, carbon_price: float) -> float:
    """Short-run cost in EUR/MWh_el of a dispatchable plant."""
    if tech.kind is not Kind.DISPATCHABLE:
        raise ValueError(f"marginal_cost needs a dispatchable technology, {tech.id} is {tech.kind.value}")
    return (tech.fuel_cost + carbon_price * tech.carbon_content) / tech.efficiency + tech.var_cost


def annuity(overnight: float, lifetime: float, rate: float) -> float:
    """Annualized overnight cost (same money unit, per year)."""
    if lifetime <= 0:
        raise ValueError("lifetime must be > 0")
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if rate == 0:
        return overnight / lifetime
    growth = (1 + rate) ** lifetime
    return overnight * rate * growth / (growth - 1)


_PART_KEYS = ("charge", "discharge", "energy")


def _tech_from_dict(tid: str, row: dict) -> Technology:
    row = dict(row)
    for key in _PART_KEYS:
        if key in row:
            row[key] = StoragePart(**row[key])
    return Technology(id=tid, **row)


def _tech_to_dict(tech: Technology) -> dict:
    defaults = {f.name: f.default for f in fields(Technology)}
    out = {}
    for f in fields(Technology):
        if f.name == "id":
            continue
        value = getattr(tech, f.name)
        if f.name in _PART_KEYS:
            if value is not None:
                out[f.name] = {pf.name: _plain(getattr(value, pf.name)) for pf in fields(StoragePart)}
            continue
        if value == defaults.get(f.name) and f.name not in ("kind", "lifetime"):
            continue
        out[f.name] = _plain(value)
    return out


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        lo, hi = value
        return lo if lo == hi else [lo, hi]
    return value


def load_technologies(path: str | Path | None = None) -> dict[str, Technology]:
    """Read a parameter file; ``None`` loads the bundled 2030 table."""
    if path is None:
        text = resources.files("capmech").joinpath("data/technologies.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    doc = yaml.safe_load(text)
    return {tid: _tech_from_dict(tid, row) for tid, row in doc["technologies"].items()}


def dump_technologies(techs: Mapping[str, Technology], path: str | Path | None = None) -> str:
    doc = {"technologies": {tid: _tech_to_dict(t) for tid, t in techs.items()}}
    text = yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)
    if path is not None:
        Path(path).write_text(text, "utf-8")
    return text


# ---------------------------------------------------------------------------
# Time series


@dataclass(frozen=True, eq=False)
class HourlySeries:
    weather_year: int
    values: np.ndarray
    unit: Unit

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit(self.unit))
        arr = np.asarray(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def violations(self, name: str, calendar: bool = True) -> list[str]:
        out = []
        where = f"series[{name}][{self.weather_year}]"
        if calendar and len(self) != hours_in_year(self.weather_year):
            out.append(f"{where}: length {len(self)} does not match year ({hours_in_year(self.weather_year)})")
        if not np.all(np.isfinite(self.values)):
            out.append(f"{where}: non-finite values")
        elif self.unit is Unit.FRACTION and (self.values.min() < 0 or self.values.max() > 1):
            out.append(f"{where}: fraction out of [0,1]")
        elif self.unit in (Unit.GW_EL, Unit.GW_TH) and self.values.min() < 0:
            out.append(f"{where}: negative demand")
        elif self.unit is Unit.DIMENSIONLESS and self.values.min() <= 0:
            out.append(f"{where}: must be > 0")
        return out


def hours_in_year(year: int) -> int:
    leap = year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)
    return 8784 if leap else 8760


@lru_cache(maxsize=None)
def calendar_index(year: int) -> pd.DatetimeIndex:
    return pd.date_range(f"{year}-01-01", periods=hours_in_year(year), freq="h", tz="UTC")


def write_series(path: str | Path, series: HourlySeries) -> None:
    """CSV with header ``timestamp,value``; timestamps ISO-8601 UTC."""
    stamps = calendar_index(series.weather_year).strftime("%Y-%m-%dT%H:%M:%SZ")
    lines = ["timestamp,value"]
    lines += [f"{s},{v:.6f}" for s, v in zip(stamps, series.values)]
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_series(path: str | Path, unit: Unit | str) -> HourlySeries:
    frame = pd.read_csv(path)
    if list(frame.columns) != ["timestamp", "value"]:
        raise ValueError(f"{path}: expected header 'timestamp,value', got {list(frame.columns)}")
    stamps = pd.to_datetime(frame["timestamp"], utc=True)
    year = int(stamps.iloc[0].year)
    expected = calendar_index(year)
    if len(stamps) != len(expected) or not (stamps.values == expected.values).all():
        raise ValueError(f"{path}: timestamps must cover calendar year {year} hourly")
    return HourlySeries(year, frame["value"].to_numpy(dtype=float), Unit(unit))


# Expected unit of each named input series.
SERIES_UNITS = {
    "load": Unit.GW_EL,
    "solar": Unit.FRACTION,
    "wind_onshore": Unit.FRACTION,
    "wind_offshore": Unit.FRACTION,
    "ror": Unit.FRACTION,
    "reservoir_inflow": Unit.FRACTION,
    "dh_heat": Unit.GW_TH,
    "dh_cop": Unit.DIMENSIONLESS,
}


def load_series_dir(directory: str | Path, names: Iterable[str] | None = None) -> dict[str, dict[int, HourlySeries]]:
    """Load every ``{name}_{year}.csv`` in ``directory``."""
    out: dict[str, dict[int, HourlySeries]] = {}
    wanted = set(names) if names is not None else None
    for path in sorted(Path(directory).glob("*_*.csv")):
        name, _, year = path.stem.rpartition("_")
        if not year.isdigit() or name not in SERIES_UNITS:
            continue
        if wanted is not None and name not in wanted:
            continue
        out.setdefault(name, {})[int(year)] = read_series(path, SERIES_UNITS[name])
    return out


@dataclass(frozen=True)
class WeatherWindow:
    """July of ``start_year`` through June of the following year.

    ``first_hour``/``n_hours`` select a contiguous sub-span of the 8760-hour
    window for desk-scale runs; the default is the whole window.
    """

    start_year: int
    first_hour: int = 0
    n_hours: int = HOURS_PER_YEAR

    def __post_init__(self):
        if not (0 <= self.first_hour and self.n_hours > 0 and self.first_hour + self.n_hours <= HOURS_PER_YEAR):
            raise ValueError(f"window span [{self.first_hour}, {self.first_hour + self.n_hours}) outside 8760 hours")

    @property
    def label(self) -> str:
        return str(self.start_year)

    @property
    def full(self) -> bool:
        return self.n_hours == HOURS_PER_YEAR

    @property
    def weight(self) -> float:
        """Fraction of a year covered; annual costs are scaled by this."""
        return self.n_hours / HOURS_PER_YEAR

    @property
    def hours(self) -> pd.DatetimeIndex:
        return _window_index(self.start_year)[self.first_hour:self.first_hour + self.n_hours]

    def extract(self, by_year: Mapping[int, HourlySeries]) -> np.ndarray:
        missing = [y for y in (self.start_year, self.start_year + 1) if y not in by_year]
        if missing:
            raise KeyError(f"missing calendar years {missing} for window {self.label}")
        first, second = by_year[self.start_year], by_year[self.start_year + 1]
        joined = np.concatenate([first.values, second.values])
        mask = _window_mask(self.start_year)
        return joined[mask][self.first_hour:self.first_hour + self.n_hours]


@lru_cache(maxsize=None)
def _window_mask(start_year: int) -> np.ndarray:
    idx = calendar_index(start_year).append(calendar_index(start_year + 1))
    july = pd.Timestamp(f"{start_year}-07-01", tz="UTC")
    stop = pd.Timestamp(f"{start_year + 1}-07-01", tz="UTC")
    leap_day = (idx.month == 2) & (idx.day == 29)
    mask = np.asarray((idx >= july) & (idx < stop) & ~leap_day)
    assert mask.sum() == HOURS_PER_YEAR
    return mask


@lru_cache(maxsize=None)
def _window_index(start_year: int) -> pd.DatetimeIndex:
    idx = calendar_index(start_year).append(calendar_index(start_year + 1))
    return idx[_window_mask(start_year)]


# ---------------------------------------------------------------------------
# Flexibility, mechanisms, scenarios


@dataclass(frozen=True)
class FlexOption:
    """Demand-side flexibility asset with fixed power and endogenous storage.

    ``activation_cost_tiers`` holds (cumulative fraction of power, EUR/MWh_el)
    pairs applied to load reductions. ``discharge_power`` caps load
    reduction when it differs from ``power`` (process heat can only displace
    its resistance-heater draw). A ``shedding`` option reduces load without
    recovering it later and has no storage. ``power`` of 0 for district heating means
    the heat-pump capacity is taken from the heat series at build time.
    """

    id: str
    family: FlexFamily
    power: float  # MW_el
    duration_cap: float  # h
    energy_invest_cost: float  # EUR/kWh
    activation_cost_tiers: tuple[tuple[float, float], ...] = ()
    storage_efficiency: float = 1.0
    standing_loss: float = 0.0  # per day
    energy_upper_bound: float = math.inf  # GWh
    discharge_power: float | None = None  # MW_el
    shedding: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", FlexFamily(self.family))
        tiers = tuple((float(f), float(c)) for f, c in self.activation_cost_tiers)
        object.__setattr__(self, "activation_cost_tiers", tiers)

    @property
    def hourly_loss(self) -> float:
        return hourly_loss(self.standing_loss)

    @property
    def energy_cap(self) -> float:
        """Upper bound on storage size in GWh."""
        if self.power > 0 and math.isfinite(self.duration_cap):
            return min(self.power * self.duration_cap / 1000.0, self.energy_upper_bound)
        return self.energy_upper_bound

    def violations(self) -> list[str]:
        out = []
        where = f"flex[{self.id}]"
        if not self.power >= 0:
            out.append(f"{where}.power: must be >= 0")
        if self.discharge_power is not None and not self.discharge_power >= 0:
            out.append(f"{where}.discharge_power: must be >= 0")
        if self.family is FlexFamily.INDUSTRY and self.duration_cap not in INDUSTRY_DURATIONS:
            out.append(f"{where}.duration_cap: must be one of {INDUSTRY_DURATIONS}, got {self.duration_cap}")
        if not self.duration_cap > 0:
            out.append(f"{where}.duration_cap: must be > 0")
        if not (0 < self.storage_efficiency <= 1):
            out.append(f"{where}.storage_efficiency: fraction out of (0,1]")
        if not (0 <= self.standing_loss < 1):
            out.append(f"{where}.standing_loss: fraction out of [0,1)")
        if not self.energy_invest_cost >= 0:
            out.append(f"{where}.energy_invest_cost: must be >= 0")
        if not self.energy_upper_bound >= 0:
            out.append(f"{where}.energy_upper_bound: must be >= 0")
        tiers = self.activation_cost_tiers
        if self.family is FlexFamily.INDUSTRY and not tiers:
            out.append(f"{where}.activation_cost_tiers: industry options need tiers")
        if tiers:
            fracs = [f for f, _ in tiers]
            costs = [c for _, c in tiers]
            if fracs[0] <= 0 or any(b <= a for a, b in zip(fracs, fracs[1:])) or abs(fracs[-1] - 1) > 1e-12:
                out.append(f"{where}.activation_cost_tiers: fractions must increase and cover (0,1]")
            if any(b < a for a, b in zip(costs, costs[1:])) or min(costs) < 0:
                out.append(f"{where}.activation_cost_tiers: costs must be >= 0 and non-decreasing")
        return out


@dataclass(frozen=True)
class Mechanism:
    """``variant`` is ``capacity-market`` or ``reliability-reserve``."""

    variant: str
    firm_target: float  # GW_el
    activation_price: float | None = None  # EUR/MWh_el
    eligible_firm: frozenset[str] = frozenset({"ccgt", "ocgt", "oil", "bio", "reservoir", "h2"})

    def __post_init__(self):
        if self.variant not in ("capacity-market", "reliability-reserve"):
            raise ValueError(f"unknown mechanism variant {self.variant!r}")
        object.__setattr__(self, "eligible_firm", frozenset(self.eligible_firm))

    @property
    def is_reserve(self) -> bool:
        return self.variant == "reliability-reserve"

    @classmethod
    def capacity_market(cls, firm_target: float, **kw) -> Mechanism:
        return cls("capacity-market", firm_target, **kw)

    @classmethod
    def reliability_reserve(cls, firm_target: float, activation_price: float = 500.0, **kw) -> Mechanism:
        return cls("reliability-reserve", firm_target, activation_price, **kw)


@dataclass(frozen=True)
class ScenarioConfig:
    mechanism: Mechanism
    invest_window: WeatherWindow = WeatherWindow(2009)
    dispatch_windows: tuple[WeatherWindow, ...] = tuple(WeatherWindow(y) for y in range(2008, 2015))
    carbon_price: float = 130.0  # EUR/t
    interest_rate: float = 0.04
    flex_mode: FlexMode = FlexMode.FIXED
    demand_uplift_target: float | None = 670.0  # TWh_el/a; None keeps the load series as is
    flex_lifetime: float = 20.0  # years
    slack_price: float | None = None  # EUR/MWh_el; None means 10x activation price (or 5000)
    dh_hp_oversize: float = 1.0  # heat-pump capacity as multiple of peak district heat

    def __post_init__(self):
        object.__setattr__(self, "flex_mode", FlexMode(self.flex_mode))
        object.__setattr__(self, "dispatch_windows", tuple(self.dispatch_windows))

    @property
    def name(self) -> str:
        return self.mechanism.variant

    @property
    def unserved_price(self) -> float:
        if self.slack_price is not None:
            return self.slack_price
        return 10.0 * (self.mechanism.activation_price or 500.0)

    def with_mechanism(self, mechanism: Mechanism) -> ScenarioConfig:
        return replace(self, mechanism=mechanism)

    @property
    def windows(self) -> tuple[WeatherWindow, ...]:
        seen = {self.invest_window: None}
        for w in self.dispatch_windows:
            seen.setdefault(w, None)
        return tuple(seen)


# ---------------------------------------------------------------------------
# Data bundle


@dataclass(frozen=True)
class WindowData:
    """Series sliced to one weather window, plus flat process-heat loads."""

    window: WeatherWindow
    load: np.ndarray  # GW_el, inflexible
    availability: dict[str, np.ndarray]
    inflow: dict[str, np.ndarray]  # fraction of reservoir power
    dh_heat: np.ndarray | None = None  # GW_th
    dh_cop: np.ndarray | None = None

    @property
    def n_hours(self) -> int:
        return len(self.load)


@dataclass(frozen=True)
class ModelData:
    technologies: dict[str, Technology]
    flex: tuple[FlexOption, ...] = ()
    series: dict[str, dict[int, HourlySeries]] = field(default_factory=dict)
    process_heat: ProcessHeatInput | None = None

    def required_series(self) -> dict[str, Unit]:
        need = {"load": SERIES_UNITS["load"]}
        for tech in self.technologies.values():
            for name in (tech.availability, tech.inflow):
                if name:
                    need[name] = SERIES_UNITS.get(name, Unit.FRACTION)
        if any(f.family is FlexFamily.DISTRICT_HEATING for f in self.flex):
            need["dh_heat"] = Unit.GW_TH
            need["dh_cop"] = Unit.DIMENSIONLESS
        return need

    def for_window(self, window: WeatherWindow, demand_target: float | None = None) -> WindowData:
        """Slice all series to ``window``; optionally uplift load to ``demand_target`` TWh/a.

        The uplift is computed on the full 8760-hour window and then sliced,
        so a sub-span carries the same flat adder as the whole year.
        """
        full = replace(window, first_hour=0, n_hours=HOURS_PER_YEAR)
        load = full.extract(self.series["load"])
        if demand_target is not None:
            from capmech.model import demand_profile

            load = demand_profile(HourlySeries(window.start_year, load, Unit.GW_EL), demand_target).values
        sl = slice(window.first_hour, window.first_hour + window.n_hours)
        avail = {t.availability: window.extract(self.series[t.availability])
                 for t in self.technologies.values() if t.availability}
        inflow = {t.inflow: window.extract(self.series[t.inflow])
                  for t in self.technologies.values() if t.inflow}
        heat = cop = None
        if "dh_heat" in self.required_series():
            heat = window.extract(self.series["dh_heat"])
            cop = window.extract(self.series["dh_cop"])
        return WindowData(window, np.array(load[sl]), avail, inflow, heat, cop)


def find_violations(config: ScenarioConfig, data: ModelData) -> list[str]:
    out: list[str] = []
    for tech in data.technologies.values():
        out += tech.violations()
    for opt in data.flex:
        out += opt.violations()
    ids = [o.id for o in data.flex]
    if len(set(ids)) != len(ids):
        out.append("flex: duplicate option ids")

    for name, unit in data.required_series().items():
        by_year = data.series.get(name, {})
        for window in config.windows:
            for year in (window.start_year, window.start_year + 1):
                if year not in by_year:
                    out.append(f"series[{name}][{year}]: missing (needed by window {window.label})")
        for year, s in by_year.items():
            if s.unit is not unit:
                out.append(f"series[{name}][{year}]: unit mismatch, expected {unit.value}, got {s.unit.value}")
            else:
                out += s.violations(name)

    mech = config.mechanism
    if not mech.firm_target > 0:
        out.append(f"mechanism.firm_target: must be > 0, got {mech.firm_target}")
    unknown = mech.eligible_firm - set(data.technologies)
    if unknown:
        out.append(f"mechanism.eligible_firm: unknown technologies {sorted(unknown)}")
    if mech.is_reserve:
        costs = {t.id: marginal_cost(t, config.carbon_price) for t in data.technologies.values()
                 if t.kind is Kind.DISPATCHABLE and not t.violations()}
        if mech.activation_price is None:
            out.append("mechanism.activation_price: required for reliability-reserve")
        elif costs:
            worst = max(costs, key=costs.get)
            if not mech.activation_price > costs[worst]:
                out.append(f"mechanism.activation_price: {mech.activation_price} must exceed the highest "
                           f"marginal cost {costs[worst]:.1f} ({worst})")
    if config.interest_rate < 0:
        out.append("config.interest_rate: must be >= 0")
    if config.carbon_price < 0:
        out.append("config.carbon_price: must be >= 0")
    spans = {(w.first_hour, w.n_hours) for w in config.windows}
    if len(spans) > 1:
        out.append("config: all windows must cover the same hour span")
    return out


def validate(config: ScenarioConfig, data: ModelData) -> ModelData:
    """Return ``data`` unchanged if it is consistent with ``config``, else raise."""
    violations = find_violations(config, data)
    if violations:
        raise ValidationError(violations)
    return data


# ---------------------------------------------------------------------------
# Results


@dataclass
class WindowResult:
    """Dispatch outcome of one weather window."""

    window: WeatherWindow
    prices: np.ndarray  # EUR/MWh_el, energy-balance duals
    demand: np.ndarray  # GW_el, exogenous electric demand used to weight averages
    dispatch: pd.DataFrame  # GW per hour, one column per variable block
    reserve: np.ndarray  # GW, reserve output per hour
    unserved: np.ndarray  # GW
    flex_capacities: dict[str, float]  # GWh
    objective: float
    solve_metrics: dict = field(default_factory=dict)

    @property
    def activation_hours(self) -> int:
        return int(np.count_nonzero(self.reserve > 1e-6))

    @property
    def reserve_energy(self) -> float:
        """GWh_el."""
        return float(self.reserve.sum())


@dataclass
class ScenarioResult:
    scenario: str
    config: ScenarioConfig
    installed: dict[str, float]  # GW (GWh for storage energy)
    flex_installed: dict[str, float]  # GWh
    reserve_size: float  # GW
    invest_objective: float
    invest_prices: np.ndarray
    windows: list[WindowResult]
    payment_rate: float = 0.0  # EUR/kW/a per contracted firm kW
    reserve_marginal_cost: float = 0.0  # EUR/MWh_el
    input_hash: str = ""

    def window(self, label: str) -> WindowResult:
        for w in self.windows:
            if w.window.label == label:
                return w
        raise KeyError(label)
