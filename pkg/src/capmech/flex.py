"""Derive the demand-side flexibility portfolio from industry and heat statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import yaml

from capmech.domain import HOURS_PER_YEAR, INDUSTRY_DURATIONS, FlexFamily, FlexOption

# Share of each option's power priced at the lower activation cost.
FIRST_TIER_SHARE = 0.2
HEAT_BANDS = ("<100", "100-160", "160-500")
HEAT_PUMP_BANDS = ("<100", "100-160")


@dataclass(frozen=True)
class IndustryProcessRecord:
    name: str
    dr_share: float
    installed_load: float  # MW_el
    max_duration: int  # h
    load_change_cost: float  # EUR/MWh_el
    min_load_change_cost: float | None = None
    storage_invest_cost: float = 5240.0  # EUR/MW_el
    shedding: bool = False

    def __post_init__(self):
        if not 0 <= self.dr_share <= 1:
            raise ValueError(f"{self.name}: dr_share must lie in [0,1]")
        if self.max_duration not in INDUSTRY_DURATIONS:
            raise ValueError(f"{self.name}: max_duration must be one of {INDUSTRY_DURATIONS}")
        if self.min_cost > self.load_change_cost:
            raise ValueError(f"{self.name}: min load change cost exceeds full cost")

    @property
    def min_cost(self) -> float:
        return self.load_change_cost if self.min_load_change_cost is None else self.min_load_change_cost

    @property
    def flexible_power(self) -> float:
        return self.dr_share * self.installed_load

    @property
    def buckets(self) -> tuple[int, ...]:
        return tuple(d for d in INDUSTRY_DURATIONS if d <= self.max_duration)


@dataclass(frozen=True)
class RevenueRequirementInput:
    gva_share: float
    product_price: float  # EUR/t
    specific_electricity: float  # MWh_el/t

    def __post_init__(self):
        if not (self.gva_share > 0 and self.product_price > 0):
            raise ValueError("gva_share and product_price must be > 0")
        if not self.specific_electricity > 0:
            raise ValueError("specific_electricity must be > 0")


@dataclass(frozen=True)
class ProcessHeatInput:
    thermal_demand_by_band: Mapping[str, float] = field(
        default_factory=lambda: {"<100": 67.0, "100-160": 70.2, "160-500": 33.1})  # TWh_th/a
    cop: float = 3.7
    eta_rh: float = 0.99
    eta_hs: float = 0.90
    tau_s: float = 72.0  # h
    storage_share: float = 0.3
    storage_invest: float = 40.0  # EUR/kWh_th
    boiler_invest: float = 80.0  # EUR/kWh_th
    overcapacity_share: float = 0.7
    standing_loss: float = 0.03  # per day

    def __post_init__(self):
        if set(self.thermal_demand_by_band) != set(HEAT_BANDS):
            raise ValueError(f"thermal_demand_by_band needs exactly the bands {HEAT_BANDS}")
        if any(q < 0 for q in self.thermal_demand_by_band.values()):
            raise ValueError("thermal demand must be >= 0")
        for name in ("eta_rh", "eta_hs"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0,1]")
        for name in ("storage_share", "overcapacity_share", "standing_loss"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0,1]")
        if not self.cop > 0:
            raise ValueError("cop must be > 0")

    @property
    def total_thermal(self) -> float:
        return sum(self.thermal_demand_by_band.values())

    @property
    def heat_pump_thermal(self) -> float:
        return sum(self.thermal_demand_by_band[b] for b in HEAT_PUMP_BANDS)

    @property
    def resistance_thermal(self) -> float:
        return self.thermal_demand_by_band["160-500"]


# ---------------------------------------------------------------------------
# Industry


def revenue_requirement(inp: RevenueRequirementInput) -> float:
    """Lost value added per MWh of electricity not consumed, EUR/MWh_el."""
    return inp.gva_share * inp.product_price / inp.specific_electricity


def equal_bucket_weights(record: IndustryProcessRecord) -> dict[int, float]:
    n = len(record.buckets)
    return {d: 1.0 / n for d in record.buckets}


def calibrate_bucket_weights(records: Sequence[IndustryProcessRecord], target_mw: float = 1558.0,
                             duration: int = 3) -> dict[str, dict[int, float]]:
    """Bucket weights pinning the aggregate power of one duration bucket.

    Every process gives the same share of its flexible power to ``duration``;
    the rest is spread evenly over its other eligible buckets. Processes
    whose only bucket is ``duration`` keep all their power there.
    """
    fixed = sum(r.flexible_power for r in records if r.buckets == (duration,))
    shared = sum(r.flexible_power for r in records if duration in r.buckets and r.buckets != (duration,))
    if shared <= 0:
        raise ValueError("no process can be calibrated")
    share = (target_mw - fixed) / shared
    if not 0 <= share <= 1:
        raise ValueError(f"target {target_mw} MW is unreachable (share {share:.3f})")
    weights = {}
    for r in records:
        if r.buckets == (duration,) or duration not in r.buckets:
            weights[r.name] = equal_bucket_weights(r)
            continue
        others = [d for d in r.buckets if d != duration]
        weights[r.name] = {d: (share if d == duration else (1 - share) / len(others)) for d in r.buckets}
    return weights


def industry_portfolio(records: Sequence[IndustryProcessRecord], other_base_load: float | None = None,
                       electrification_uplift: float = 0.39,
                       bucket_weights: Mapping[str, Mapping[int, float]] | None = None) -> list[FlexOption]:
    """One FlexOption per (process, duration bucket).

    ``other_base_load`` replaces the installed load of the ``other`` record
    by ``other_base_load * (1 + electrification_uplift)``.
    """
    if not records:
        raise ValueError("industry_portfolio needs at least one record")
    if electrification_uplift < 0:
        raise ValueError("electrification_uplift must be >= 0")
    options = []
    for rec in records:
        if rec.name == "other" and other_base_load is not None:
            rec = IndustryProcessRecord(**{**rec.__dict__,
                                           "installed_load": other_base_load * (1 + electrification_uplift)})
        weights = (bucket_weights or {}).get(rec.name) or equal_bucket_weights(rec)
        if set(weights) - set(rec.buckets):
            raise ValueError(f"{rec.name}: weights reference buckets above max duration")
        total = sum(weights.values())
        for duration in rec.buckets:
            power = rec.flexible_power * weights.get(duration, 0.0) / total
            if power <= 0:
                continue
            tiers = ((FIRST_TIER_SHARE, rec.min_cost), (1.0, rec.load_change_cost))
            if rec.min_cost == rec.load_change_cost:
                tiers = ((1.0, rec.load_change_cost),)
            options.append(FlexOption(
                id=f"{rec.name}_{duration}h",
                family=FlexFamily.INDUSTRY,
                power=power,
                duration_cap=duration,
                # EUR/MW_el spread over the bucket's hours -> EUR/kWh_el
                energy_invest_cost=rec.storage_invest_cost / duration / 1000.0,
                activation_cost_tiers=tiers,
                storage_efficiency=1.0,
                standing_loss=0.0,
                shedding=rec.shedding,
            ))
    return options


def aggregate_by_duration(options: Sequence[FlexOption]) -> list[FlexOption]:
    """Merge industry options sharing a duration bucket into one option.

    The merged activation tiers are the exact aggregate cost curve (pieces
    of every process sorted by cost). Non-industry options pass through.
    """
    out = [o for o in options if o.family is not FlexFamily.INDUSTRY]
    groups: dict[tuple, list[FlexOption]] = {}
    for o in options:
        if o.family is FlexFamily.INDUSTRY:
            groups.setdefault((o.duration_cap, o.energy_invest_cost, o.shedding), []).append(o)
    merged = []
    for (duration, cost, shedding), group in sorted(groups.items()):
        power = sum(o.power for o in group)
        pieces: dict[float, float] = {}
        for o in group:
            prev = 0.0
            for frac, price in o.activation_cost_tiers:
                pieces[price] = pieces.get(price, 0.0) + (frac - prev) * o.power
                prev = frac
        tiers, acc = [], 0.0
        for price in sorted(pieces):
            acc += pieces[price]
            frac = acc / power
            if frac > (tiers[-1][0] if tiers else 0.0):  # zero-width pieces vanish
                tiers.append((frac, price))
        tiers[-1] = (1.0, tiers[-1][1])
        merged.append(FlexOption(
            id=f"industry_{duration:g}h", family=FlexFamily.INDUSTRY, power=power, duration_cap=duration,
            energy_invest_cost=cost, activation_cost_tiers=tuple(tiers), shedding=shedding))
    return merged + out


# ---------------------------------------------------------------------------
# Process heat


class HeatElectricity(NamedTuple):
    energy: float  # TWh_el/a
    average_power: float  # MW_el


class StorageBound(NamedTuple):
    energy_th: float  # GWh_th
    charge_power: float  # GW
    eta_rh: float

    @property
    def energy_el(self) -> float:
        return self.energy_th / self.eta_rh


def heat_pump_power(q_band: float, cop: float) -> HeatElectricity:
    if not cop > 0:
        raise ValueError("cop must be > 0")
    energy = q_band / cop
    return HeatElectricity(energy, energy * 1e6 / HOURS_PER_YEAR)


def resistance_heater_power(q_band: float, eta_rh: float) -> float:
    if not 0 < eta_rh <= 1:
        raise ValueError("eta_rh must lie in (0,1]")
    return q_band / eta_rh


def process_heat_electricity(inp: ProcessHeatInput) -> dict[str, float]:
    """Electricity demand (TWh_el/a) per temperature band and in total."""
    out = {b: heat_pump_power(inp.thermal_demand_by_band[b], inp.cop).energy for b in HEAT_PUMP_BANDS}
    out["160-500"] = resistance_heater_power(inp.resistance_thermal, inp.eta_rh)
    out["total"] = sum(out.values())
    return out


def charge_power_cap(energy_th: float, tau_s: float, eta_hs: float) -> float:
    if tau_s <= 0:
        raise ValueError("tau_s must be > 0")
    return energy_th / (tau_s * eta_hs)


def process_heat_storage_bound(inp: ProcessHeatInput) -> StorageBound:
    # annual heat read as a constant thermal power held for tau_s hours
    if inp.tau_s <= 0:
        raise ValueError("tau_s must be > 0")
    avg_power = inp.total_thermal * 1000.0 / HOURS_PER_YEAR  # GW_th
    energy = inp.storage_share * avg_power * inp.tau_s
    return StorageBound(energy, charge_power_cap(energy, inp.tau_s, inp.eta_hs), inp.eta_rh)


def process_heat_flex_invest(inp: ProcessHeatInput) -> float:
    """Storage plus boiler overcapacity cost per kWh_el of flexible energy."""
    return (inp.storage_invest / (inp.eta_hs * inp.eta_rh)
            + inp.boiler_invest * inp.overcapacity_share / inp.eta_rh)


def process_heat_option(inp: ProcessHeatInput) -> FlexOption:
    bound = process_heat_storage_bound(inp)
    resistance_el = resistance_heater_power(inp.resistance_thermal, inp.eta_rh) * 1e6 / HOURS_PER_YEAR
    return FlexOption(
        id="process_heat",
        family=FlexFamily.PROCESS_HEAT,
        power=bound.charge_power * 1000.0,
        duration_cap=inp.tau_s,
        energy_invest_cost=process_heat_flex_invest(inp),
        storage_efficiency=inp.eta_hs,
        standing_loss=inp.standing_loss,
        energy_upper_bound=bound.energy_el,
        discharge_power=resistance_el,
    )


# ---------------------------------------------------------------------------
# District heating


def district_heating_option(annual_heat: float, storage_invest: float = 50.0,
                            storage_efficiency: float = 0.90, standing_loss: float = 0.02) -> FlexOption:
    """Water tank in front of large heat pumps covering all district heat."""
    if not annual_heat > 0:
        raise ValueError("annual_heat must be > 0")
    return FlexOption(
        id="district_heating",
        family=FlexFamily.DISTRICT_HEATING,
        power=0.0,
        duration_cap=math.inf,
        energy_invest_cost=storage_invest,
        storage_efficiency=storage_efficiency,
        standing_loss=standing_loss,
    )


# ---------------------------------------------------------------------------
# Input files and export


@dataclass(frozen=True)
class FlexInputs:
    industry: tuple[IndustryProcessRecord, ...]
    revenue: dict[str, RevenueRequirementInput]
    process_heat: ProcessHeatInput
    dh_annual_heat: float
    dh_storage_invest: float
    dh_storage_efficiency: float
    dh_standing_loss: float
    other_uplift: float


def load_flex_inputs(path: str | Path | None = None) -> FlexInputs:
    if path is None:
        text = resources.files("capmech").joinpath("data/flex.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    doc = yaml.safe_load(text)
    invest = float(doc.get("storage_invest_cost", 5240.0))
    industry = tuple(IndustryProcessRecord(name=name, storage_invest_cost=invest, **row)
                     for name, row in doc["industry"].items())
    revenue = {k: RevenueRequirementInput(**v) for k, v in doc.get("revenue_requirement", {}).items()}
    dh = doc["district_heating"]
    return FlexInputs(
        industry=industry,
        revenue=revenue,
        process_heat=ProcessHeatInput(**doc["process_heat"]),
        dh_annual_heat=float(dh["annual_heat"]),
        dh_storage_invest=float(dh["storage_invest"]),
        dh_storage_efficiency=float(dh.get("storage_efficiency", 0.9)),
        dh_standing_loss=float(dh.get("standing_loss", 0.02)),
        other_uplift=float(doc.get("other_uplift", 0.39)),
    )


def build_portfolio(inputs: FlexInputs, calibrate: bool = False, aggregate: bool = False) -> list[FlexOption]:
    weights = calibrate_bucket_weights(inputs.industry) if calibrate else None
    options = industry_portfolio(inputs.industry, bucket_weights=weights)
    if aggregate:
        options = aggregate_by_duration(options)
    options.append(process_heat_option(inputs.process_heat))
    options.append(district_heating_option(inputs.dh_annual_heat, inputs.dh_storage_invest,
                                           inputs.dh_storage_efficiency, inputs.dh_standing_loss))
    return options


PORTFOLIO_COLUMNS = ("id", "family", "power_mw", "duration_cap_h", "energy_invest_cost_eur_per_kwh",
                     "activation_tiers", "storage_efficiency", "standing_loss_per_day",
                     "energy_upper_bound_gwh", "discharge_power_mw", "shedding")


def export_portfolio(options: Sequence[FlexOption], path: str | Path) -> None:
    """CSV, one row per option. Tiers are ``fraction:cost`` joined by ``|``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PORTFOLIO_COLUMNS)
        for o in options:
            writer.writerow([
                o.id, o.family.value, repr(o.power), repr(float(o.duration_cap)), repr(o.energy_invest_cost),
                "|".join(f"{f!r}:{c!r}" for f, c in o.activation_cost_tiers),
                repr(o.storage_efficiency), repr(o.standing_loss), repr(float(o.energy_upper_bound)),
                "" if o.discharge_power is None else repr(o.discharge_power), int(o.shedding),
            ])


def import_portfolio(path: str | Path) -> list[FlexOption]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            tiers = tuple(tuple(float(x) for x in t.split(":")) for t in row["activation_tiers"].split("|") if t)
            duration = float(row["duration_cap_h"])
            out.append(FlexOption(
                id=row["id"], family=row["family"], power=float(row["power_mw"]),
                duration_cap=int(duration) if duration.is_integer() else duration,
                energy_invest_cost=float(row["energy_invest_cost_eur_per_kwh"]),
                activation_cost_tiers=tiers, storage_efficiency=float(row["storage_efficiency"]),
                standing_loss=float(row["standing_loss_per_day"]),
                energy_upper_bound=float(row["energy_upper_bound_gwh"]),
                discharge_power=float(row["discharge_power_mw"]) if row["discharge_power_mw"] else None,
                shedding=bool(int(row["shedding"])),
            ))
    return out
