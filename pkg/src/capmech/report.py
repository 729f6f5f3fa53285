"""Headline metrics, levies and comparison tables from scenario results.

Levy units: GW times EUR/kW/a is MEUR/a and TWh is 1e6 MWh, so
``GW * EUR/kW/a / TWh`` is already EUR/MWh.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from capmech.domain import FlexFamily, HourlySeries, ScenarioResult, Technology, annuity

METRICS_COLUMNS = ("window", "avg_price", "avg_price_simple", "levy", "supply_cost", "supply_cost_simple",
                   "activation_hours", "reserve_energy_gwh", "unserved_energy_gwh", "annual_demand_twh")
COMPARISON_COLUMNS = ("section", "item", "value_a", "value_b", "ratio_b_to_a")
RESERVE_TECH = "ocgt"


class ReportError(ValueError):
    pass


def price_duration(prices: HourlySeries | Sequence[float] | np.ndarray) -> np.ndarray:
    values = prices.values if isinstance(prices, HourlySeries) else np.asarray(prices, dtype=float)
    if len(values) == 0:
        raise ReportError("price series is empty")
    return np.sort(values)[::-1]


def payment_rate(techs: dict[str, Technology], interest_rate: float, tech_id: str = RESERVE_TECH) -> float:
    """Annualized investment plus fixed cost, EUR/kW/a, paid per contracted firm kW."""
    t = techs[tech_id]
    return annuity(t.overnight_cost, t.lifetime, interest_rate) + t.fixed_cost


def capacity_market_levy(firm_target: float, payment_rate: float, annual_demand: float) -> float:
    """EUR/MWh_el from GW, EUR/kW/a and TWh_el."""
    if not annual_demand > 0:
        raise ReportError("annual demand must be > 0")
    return firm_target * payment_rate / annual_demand


def reserve_levy(reserve: float, payment_rate: float, activation: Iterable[float], activation_price: float,
                 annual_demand: float, reserve_marginal_cost: float) -> float:
    """Capacity payments plus activation cost minus energy sales, per MWh of demand.

    ``activation`` holds activated energy records in GWh_el.
    """
    if not annual_demand > 0:
        raise ReportError("annual demand must be > 0")
    energy = float(np.sum(np.asarray(list(activation), dtype=float)))
    net_activation = energy * (reserve_marginal_cost - activation_price) / 1000.0  # MEUR
    return (reserve * payment_rate + net_activation) / annual_demand


@dataclass(frozen=True)
class MetricsRow:
    window: str
    avg_price: float  # demand-weighted
    avg_price_simple: float
    levy: float
    supply_cost: float
    supply_cost_simple: float
    activation_hours: int
    reserve_energy_gwh: float
    unserved_energy_gwh: float
    annual_demand_twh: float


def _row(label, prices, demand, levy, hours, reserve, unserved, annual) -> MetricsRow:
    weighted = float(np.dot(prices, demand) / demand.sum())
    simple = float(prices.mean())
    return MetricsRow(label, weighted, simple, levy, weighted + levy, simple + levy, hours, reserve, unserved,
                      annual)


def metrics(result: ScenarioResult) -> list[MetricsRow]:
    """One row per dispatch window plus a ``mean`` row over windows.

    Capacity payments are annual. Activated reserve energy is taken as is:
    a desk-scale span is chosen to contain the year's scarcity, so scaling
    it up to a year would multiply the scarcity, not just the hours.
    """
    mech = result.config.mechanism
    rate = result.payment_rate
    rows = []
    for w in result.windows:
        annual = float(w.demand.sum()) / 1000.0 / w.window.weight
        if mech.is_reserve:
            levy = reserve_levy(result.reserve_size, rate, w.reserve, mech.activation_price, annual,
                                result.reserve_marginal_cost)
        else:
            levy = capacity_market_levy(mech.firm_target, rate, annual)
        rows.append(_row(w.window.label, w.prices, w.demand, levy, w.activation_hours, w.reserve_energy,
                         float(w.unserved.sum()), annual))
    if rows:
        mean = {k: float(np.mean([getattr(r, k) for r in rows])) for k in METRICS_COLUMNS[1:]}
        mean["activation_hours"] = int(sum(r.activation_hours for r in rows))
        mean["reserve_energy_gwh"] = float(sum(r.reserve_energy_gwh for r in rows))
        mean["unserved_energy_gwh"] = float(sum(r.unserved_energy_gwh for r in rows))
        mean["supply_cost"] = mean["avg_price"] + mean["levy"]
        mean["supply_cost_simple"] = mean["avg_price_simple"] + mean["levy"]
        rows.append(MetricsRow("mean", **mean))
    return rows


def metrics_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=list(METRICS_COLUMNS))


def write_metrics(rows: Sequence[MetricsRow], path: str | Path) -> None:
    metrics_frame(rows).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def write_price_duration(result: ScenarioResult, directory: str | Path) -> list[Path]:
    """``pdc_{scenario}_{window}.csv`` with columns rank, hour_share, price."""
    out = []
    for w in result.windows:
        pdc = price_duration(w.prices)
        n = len(pdc)
        frame = pd.DataFrame({"rank": np.arange(1, n + 1), "hour_share": np.arange(1, n + 1) / n, "price": pdc})
        path = Path(directory) / f"pdc_{result.scenario}_{w.window.label}.csv"
        frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
        out.append(path)
    return out


# ---------------------------------------------------------------------------
# Comparison


def _ratio(a: float, b: float) -> float:
    if a == 0:
        return 1.0 if b == 0 else float("inf")
    return b / a


def family_totals(flex: dict[str, float], families: dict[str, FlexFamily]) -> dict[str, float]:
    out = {f.value: 0.0 for f in FlexFamily}
    for oid, v in flex.items():
        out[families[oid].value] += v
    return out


def summarize(a: ScenarioResult, b: ScenarioResult, families: dict[str, FlexFamily]) -> pd.DataFrame:
    """Side-by-side table of ``a`` and ``b``; ratios are b over a.

    Pass the capacity market as ``a`` and the reserve as ``b`` to get the
    reserve-to-market ratios.
    """
    wa = [w.window.label for w in a.windows]
    wb = [w.window.label for w in b.windows]
    if wa != wb:
        raise ReportError(f"window mismatch: {wa} vs {wb}")
    if a.input_hash and b.input_hash and a.input_hash != b.input_hash:
        raise ReportError("input mismatch: results were produced from different data")

    records = []

    def add(section, item, va, vb):
        records.append((section, item, float(va), float(vb), _ratio(float(va), float(vb))))

    for key in sorted(set(a.installed) | set(b.installed)):
        add("capacity", key, a.installed.get(key, 0.0), b.installed.get(key, 0.0))
    add("capacity", "reserve", a.reserve_size, b.reserve_size)
    for key in sorted(set(a.flex_installed) | set(b.flex_installed)):
        add("flex", key, a.flex_installed.get(key, 0.0), b.flex_installed.get(key, 0.0))
    fa = family_totals(a.flex_installed, families)
    fb = family_totals(b.flex_installed, families)
    for fam in fa:
        add("flex_family", fam, fa[fam], fb[fam])
    add("flex_family", "total", sum(fa.values()), sum(fb.values()))
    ma = {r.window: r for r in metrics(a)}
    mb = {r.window: r for r in metrics(b)}
    for label in ma:
        for col in METRICS_COLUMNS[1:]:
            add(f"metrics.{label}", col, getattr(ma[label], col), getattr(mb[label], col))
    return pd.DataFrame(records, columns=list(COMPARISON_COLUMNS))


def write_comparison(frame: pd.DataFrame, path: str | Path) -> None:
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def text_summary(a: ScenarioResult, b: ScenarioResult, table: pd.DataFrame) -> str:
    def get(section, item, col):
        sel = table[(table.section == section) & (table.item == item)]
        return float(sel[col].iloc[0])

    lines = [f"Scenario A: {a.scenario}", f"Scenario B: {b.scenario}", ""]
    lines.append("Firm capacity and reserve")
    lines.append(f"  reserve size: A {a.reserve_size:.2f} GW, B {b.reserve_size:.2f} GW")
    for key in ("ccgt", "ocgt"):
        if key in a.installed or key in b.installed:
            lines.append(f"  {key}: A {a.installed.get(key, 0):.2f} GW, B {b.installed.get(key, 0):.2f} GW")
    lines.append("")
    lines.append("Flexibility storage (GWh; district heating in GWh_th)")
    for fam in [f.value for f in FlexFamily] + ["total"]:
        lines.append(f"  {fam}: A {get('flex_family', fam, 'value_a'):.2f}, B {get('flex_family', fam, 'value_b'):.2f},"
                     f" ratio B/A {get('flex_family', fam, 'ratio_b_to_a'):.2f}")
    lines.append("")
    lines.append("Prices and levies, mean over windows (EUR/MWh_el)")
    for col, label in (("avg_price", "average wholesale price (demand-weighted)"),
                       ("avg_price_simple", "average wholesale price (simple)"),
                       ("levy", "levy"), ("supply_cost", "average supply cost (demand-weighted)"),
                       ("supply_cost_simple", "average supply cost (simple)")):
        lines.append(f"  {label}: A {get('metrics.mean', col, 'value_a'):.2f}, B {get('metrics.mean', col, 'value_b'):.2f}")
    lines.append(f"  reserve activation hours: A {get('metrics.mean', 'activation_hours', 'value_a'):.0f}, "
                 f"B {get('metrics.mean', 'activation_hours', 'value_b'):.0f}")
    lines.append("")
    lines.append("Maximum price per window (EUR/MWh_el)")
    for wa, wb in zip(a.windows, b.windows):
        lines.append(f"  {wa.window.label}: A {wa.prices.max():.2f}, B {wb.prices.max():.2f}")
    return "\n".join(lines) + "\n"
