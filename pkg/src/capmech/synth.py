"""Synthetic hourly input series.

Stand-ins for measured demand, renewable availability and heat data with
plausible shapes: seasonal and diurnal cycles, autocorrelated weather noise
and one cold, still, dark spell in mid-January of every year. Everything is
drawn from ``numpy.random.default_rng`` seeded per (seed, series, year), so
a year's file does not depend on which other years are generated.
"""

from __future__ import annotations

import zlib
from pathlib import Path
from typing import Iterable

import numpy as np

from capmech.domain import HourlySeries, Unit, calendar_index, write_series

DEFAULT_LOAD_TWH = 500.0  # before the flat uplift to the scenario target
DEFAULT_DH_HEAT_TWH = 95.0
SCARCITY_DAYS = (14, 19)  # January days [start, stop) of the cold, still spell


def _rng(seed: int, name: str, year: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode()), year])


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return out


def _calendar(year: int):
    idx = calendar_index(year)
    doy = idx.dayofyear.to_numpy() - 1
    hour = idx.hour.to_numpy()
    weekday = idx.dayofweek.to_numpy()
    winter = np.cos(2 * np.pi * doy / 365.25)  # +1 around new year, -1 mid-summer
    month, day = idx.month.to_numpy(), idx.day.to_numpy()
    event = (month == 1) & (day >= SCARCITY_DAYS[0]) & (day < SCARCITY_DAYS[1])
    # a short evening peak on the coldest day of the spell
    spike = (month == 1) & (day == SCARCITY_DAYS[0] + 2) & (hour >= 17) & (hour < 20)
    return idx, doy, hour, weekday, winter, event, spike


def synth_year(seed: int, year: int, load_twh: float = DEFAULT_LOAD_TWH,
               dh_heat_twh: float = DEFAULT_DH_HEAT_TWH) -> dict[str, HourlySeries]:
    """All series of one calendar year."""
    idx, doy, hour, weekday, winter, event, spike = _calendar(year)
    n = len(idx)
    out = {}

    rng = _rng(seed, "load", year)
    diurnal = 0.5 * (1 - np.cos(2 * np.pi * (hour - 4) / 24)) + 0.15 * np.exp(-((hour - 19) / 2.0) ** 2)
    shape = 1.0 + 0.12 * winter + 0.18 * diurnal - 0.08 * (weekday >= 5) + 0.02 * _ar1(rng, n, 0.95, 0.3)
    # spike height varies by weather year, so some years exhaust flexibility
    spike_height = _rng(seed, "spike", year).uniform(0.2, 0.45)
    shape = shape + 0.06 * event + spike_height * spike
    load = shape / shape.sum() * load_twh * 1000.0
    out["load"] = HourlySeries(year, load, Unit.GW_EL)

    rng = _rng(seed, "solar", year)
    elevation = np.sin(np.pi * (hour - 6 + 2 * winter) / (12 - 4 * winter))
    daylight = np.clip(elevation, 0, None) * (0.55 - 0.3 * winter)
    cloud = np.clip(1 - 0.5 * np.abs(_ar1(rng, n, 0.97, 0.15)), 0.1, 1.0)
    solar = np.clip(daylight * cloud * np.where(event, 0.3, 1.0), 0, 1)
    out["solar"] = HourlySeries(year, solar, Unit.FRACTION)

    rng = _rng(seed, "wind", year)
    common = _ar1(rng, n, 0.985, 0.12)
    local = _ar1(rng, n, 0.9, 0.1)
    still = np.where(event, 0.08, 1.0)
    onshore = np.clip((0.24 + 0.08 * winter + 0.9 * common * 0.4 + 0.05 * local) * still, 0, 1)
    offshore = np.clip((0.42 + 0.1 * winter + 0.9 * common * 0.5 + 0.05 * local) * still, 0, 1)
    out["wind_onshore"] = HourlySeries(year, onshore, Unit.FRACTION)
    out["wind_offshore"] = HourlySeries(year, offshore, Unit.FRACTION)

    rng = _rng(seed, "hydro", year)
    melt = 0.5 + 0.2 * np.sin(2 * np.pi * (doy - 60) / 365.25)
    out["ror"] = HourlySeries(year, np.clip(melt + 0.05 * _ar1(rng, n, 0.999, 0.02), 0, 1), Unit.FRACTION)
    out["reservoir_inflow"] = HourlySeries(year, np.clip(0.8 * melt - 0.1, 0, 1), Unit.FRACTION)

    rng = _rng(seed, "heat", year)
    temperature = 10 - 9 * winter + 4 * np.sin(2 * np.pi * (hour - 9) / 24) + 2 * _ar1(rng, n, 0.99, 0.3)
    temperature = temperature - 8 * event
    space = np.clip(16 - temperature, 0, None)
    heat = space + 2.0  # hot water base
    out["dh_heat"] = HourlySeries(year, heat / heat.sum() * dh_heat_twh * 1000.0, Unit.GW_TH)
    cop = np.clip(3.2 + 0.05 * (temperature - 5), 2.2, 4.5)
    out["dh_cop"] = HourlySeries(year, cop, Unit.DIMENSIONLESS)
    return out


def synth_series(seed: int, years: Iterable[int], **kw) -> dict[str, dict[int, HourlySeries]]:
    out: dict[str, dict[int, HourlySeries]] = {}
    for year in sorted(set(years)):
        for name, s in synth_year(seed, year, **kw).items():
            out.setdefault(name, {})[year] = s
    return out


def years_for(start_years: Iterable[int]) -> list[int]:
    """Calendar years touched by summer-to-summer windows starting in ``start_years``."""
    return sorted({y for s in start_years for y in (s, s + 1)})


def write_synth(directory: str | Path, seed: int, start_years: Iterable[int], **kw) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, by_year in synth_series(seed, years_for(start_years), **kw).items():
        for year, s in by_year.items():
            path = directory / f"{name}_{year}.csv"
            write_series(path, s)
            written.append(path)
    return sorted(written)


def scarcity_span(n_hours: int = 168) -> int:
    """First window hour of a span of ``n_hours`` centered on the January spell."""
    july_to_jan = 184 * 24
    mid = july_to_jan + (SCARCITY_DAYS[0] - 1) * 24 + (SCARCITY_DAYS[1] - SCARCITY_DAYS[0]) * 12
    return max(0, mid - n_hours // 2)
