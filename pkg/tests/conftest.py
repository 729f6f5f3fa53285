from __future__ import annotations

import numpy as np
import pytest

from capmech.domain import (HourlySeries, Kind, Mechanism, ModelData, ScenarioConfig, StoragePart, Technology, Unit,
                            WeatherWindow, calendar_index, load_technologies)
from capmech.flex import build_portfolio, load_flex_inputs
from capmech.synth import scarcity_span, synth_series, years_for

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

SPAN = 168
YEARS = tuple(range(2008, 2015))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def flex_inputs():
    return load_flex_inputs()


@pytest.fixture(scope="session")
def techs():
    return load_technologies()


@pytest.fixture(scope="session")
def synth_data(flex_inputs, techs):
    """Bundled technologies and flexibility on seeded synthetic series for 2008-2014 windows."""
    flex = tuple(build_portfolio(flex_inputs, aggregate=True))
    return ModelData(techs, flex, synth_series(42, years_for(YEARS)), flex_inputs.process_heat)


@pytest.fixture(scope="session")
def span_windows():
    first = scarcity_span(SPAN)
    return tuple(WeatherWindow(y, first, SPAN) for y in YEARS)


def flat_year_series(year: int, values, unit) -> HourlySeries:
    n = len(calendar_index(year))
    arr = np.resize(np.asarray(values, dtype=float), n)
    return HourlySeries(year, arr, unit)


def toy_data(load_24h, techs: dict[str, Technology], years=(2009, 2010), extra_series=None) -> ModelData:
    """Calendar series repeating a 24-hour load profile, for small hand-checkable models."""
    series = {"load": {y: flat_year_series(y, load_24h, Unit.GW_EL) for y in years}}
    for name, values in (extra_series or {}).items():
        series[name] = {y: flat_year_series(y, values, Unit.FRACTION) for y in years}
    return ModelData(techs, (), series)


def plant(tid: str, fuel: float, eff: float = 1.0, overnight: float = 0.0, fixed: float = 0.0,
          capacity=(0.0, float("inf")), lifetime: float = 20.0, firm: bool = True) -> Technology:
    return Technology(tid, Kind.DISPATCHABLE, lifetime, capacity=capacity, overnight_cost=overnight,
                      fixed_cost=fixed, efficiency=eff, fuel_cost=fuel, firm=firm)


def storage(tid: str, power: float, energy=(0.0, float("inf")), energy_cost: float = 0.0, eff: float = 0.9,
            lifetime: float = 20.0) -> Technology:
    return Technology(tid, Kind.STORAGE, lifetime,
                      charge=StoragePart(power, efficiency=eff), discharge=StoragePart(power, efficiency=eff),
                      energy=StoragePart(energy, overnight_cost=energy_cost, efficiency=1.0))


def toy_config(mechanism: Mechanism, window: WeatherWindow, **kw) -> ScenarioConfig:
    kw.setdefault("demand_uplift_target", None)
    return ScenarioConfig(mechanism, invest_window=window, dispatch_windows=(window,), **kw)


def random_lp(seed: int, m: int = 8, n: int = 12):
    """Feasible and bounded LP with mixed row senses, built around a known point."""
    from capmech.lp import LpProblem

    rng = np.random.default_rng(seed)
    p = LpProblem(f"rand{seed}")
    ub = rng.uniform(2, 10, n)
    x0 = rng.uniform(0, 1, n) * ub
    p.add_variables([f"x{j}" for j in range(n)], lb=0.0, ub=ub, obj=rng.uniform(-5, 5, n))
    A = rng.uniform(-3, 3, (m, n)) * (rng.random((m, n)) < 0.6)
    ax = A @ x0
    for i in range(m):
        sense = ("<=", ">=", "=")[i % 3]
        slack = rng.uniform(0, 2)
        rhs = ax[i] + slack if sense == "<=" else ax[i] - slack if sense == ">=" else ax[i]
        cols = np.nonzero(A[i])[0]
        p.add_constraint(f"r{i}", (cols, A[i, cols]), sense, rhs)
    return p


def toy_dispatch_lp(demand, caps=(10.0, 10.0), costs=(20.0, 60.0)):
    """Two fixed plants serving an hourly demand; balance rows are ``bal.t``."""
    from capmech.lp import LpProblem

    p = LpProblem("toy")
    T = len(demand)
    gens = [p.add_variables([f"g{k}.{t}" for t in range(T)], 0.0, caps[k], costs[k]) for k in range(len(caps))]
    for t, d in enumerate(demand):
        p.add_constraint(f"bal.{t}", {int(g[t]): 1.0 for g in gens}, "=", d)
    return p


def span_config(synth_data, span_windows, variant: str, **kw):
    """Scenario on one-week windows with the firm target set from the invest window's residual peak."""
    from capmech.model import firm_target_for

    invest = span_windows[1]
    target = firm_target_for(synth_data, synth_data.for_window(invest, 670.0))
    mech = (Mechanism.reliability_reserve(target) if variant == "reserve" else Mechanism.capacity_market(target))
    return ScenarioConfig(mech, invest_window=invest, dispatch_windows=span_windows, **kw)


@pytest.fixture(scope="session")
def span_results(synth_data, span_windows):
    """Both scenarios run once on the synthetic one-week windows (HiGHS)."""
    from capmech.runner import RunPlan, run

    return {v: run(RunPlan(span_config(synth_data, span_windows, v), synth_data))
            for v in ("capacity-market", "reserve")}
