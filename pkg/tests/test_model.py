import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capmech.domain import (FlexFamily, HourlySeries, Mechanism, ScenarioConfig, Unit, WeatherWindow, annuity,
                            marginal_cost)
from capmech.lp import solve
from capmech.model import (FormulationError, ModelIndex, annual_firm_value, build_dispatch, build_invest,
                           capacities_from, demand_profile, electric_demand, firm_capacity, firm_target_for,
                           model_file_name, prices, size_reserve)

from conftest import plant, storage, toy_config, toy_data

W24 = WeatherWindow(2009, 0, 24)
LOAD = 6 + 3 * np.sin(np.linspace(0, 2 * np.pi, 24, endpoint=False))


# ---------------------------------------------------------------------------
# demand and reserve sizing


def test_demand_profile_adder():
    base = HourlySeries(2009, np.full(8760, 500e3 / 8760), Unit.GW_EL)
    out = demand_profile(base, 670)
    assert out.values[0] - base.values[0] == pytest.approx(170e3 / 8760)
    assert out.values[0] - base.values[0] == pytest.approx(19.41, abs=5e-3)
    assert out.values.sum() / 1000 == pytest.approx(670, abs=1e-6)
    np.testing.assert_array_equal(demand_profile(base, 500).values, base.values)
    with pytest.raises(FormulationError, match="negative uplift"):
        demand_profile(base, 400)


def test_size_reserve_examples(techs):
    mech = Mechanism.reliability_reserve(101.3)
    caps = {"ccgt": 40.0, "ocgt": 10.0, "oil": 2.82, "bio": 6.0, "reservoir.discharge": 3.0, "h2.discharge": 4.48}
    assert firm_capacity(techs, caps, mech.eligible_firm) == pytest.approx(66.3)
    assert size_reserve(caps, techs, mech) == pytest.approx(35.0)
    assert size_reserve({"ccgt": 200.0}, techs, mech) == 0.0
    assert size_reserve({}, techs, mech) == pytest.approx(101.3)


@given(st.dictionaries(st.sampled_from(["ccgt", "ocgt", "oil", "bio", "reservoir.discharge", "h2.discharge",
                                        "battery.discharge", "solar"]), st.floats(0, 100)),
       st.floats(0, 300))
def test_size_reserve_closes_gap(techs, caps, target):
    mech = Mechanism.reliability_reserve(target)
    reserve = size_reserve(caps, techs, mech)
    firm = firm_capacity(techs, caps, mech.eligible_firm)
    assert reserve >= 0
    assert firm + reserve >= target - 1e-9
    assert reserve == 0 or firm + reserve == pytest.approx(target)
    assert firm == pytest.approx(sum(v for k, v in caps.items() if k not in ("battery.discharge", "solar")))


# ---------------------------------------------------------------------------
# toy models


def energy_only(tids):
    return Mechanism.capacity_market(0.0, eligible_firm=frozenset(tids))


def test_single_technology_equilibrium():
    data = toy_data(LOAD, {"p": plant("p", 42.0)})
    cfg = toy_config(energy_only({"p"}), W24)
    wd = data.for_window(W24)
    p, idx = build_invest(cfg, data, wd)
    sol = solve(p)
    caps, _ = capacities_from(sol, idx)
    assert caps["p"] >= LOAD.max() - 1e-9
    np.testing.assert_allclose(prices(sol, idx), 42.0, atol=1e-9)


def test_single_technology_capacity_rent():
    data = toy_data(np.full(24, 5.0), {"p": plant("p", 42.0, overnight=400, fixed=15, lifetime=25)})
    cfg = toy_config(energy_only({"p"}), W24)
    p, idx = build_invest(cfg, data, data.for_window(W24))
    sol = solve(p)
    assert capacities_from(sol, idx)[0]["p"] == pytest.approx(5.0)
    pr = prices(sol, idx)
    rent = 1000 * (annuity(400, 25, 0.04) + 15) * W24.weight
    assert pr.min() >= 42.0 - 1e-9
    assert (pr - 42.0).sum() == pytest.approx(rent, rel=1e-9)


def peaker_pair():
    techs = {"base": plant("base", 30.0, overnight=1500, fixed=30, lifetime=30),
             "peak": plant("peak", 130.4, overnight=400, fixed=15, lifetime=25)}
    return techs


def test_firm_dual_equals_peaker_cost():
    data = toy_data(LOAD, peaker_pair())
    cfg = toy_config(Mechanism.capacity_market(LOAD.max() + 5, eligible_firm=frozenset({"base", "peak"})), W24)
    p, idx = build_invest(cfg, data, data.for_window(W24))
    sol = solve(p)
    assert sol.duals[idx.firm_row] >= 0
    value = annual_firm_value(sol, idx, W24.weight)
    # independent oracle: the marginal firm kW is a peaker that never runs
    assert value == pytest.approx(annuity(400, 25, 0.04) + 15, rel=1e-3)
    assert prices(sol, idx).max() <= 130.4 + 1e-3
    caps, _ = capacities_from(sol, idx)
    assert caps["base"] + caps["peak"] == pytest.approx(LOAD.max() + 5)


def test_firm_dual_with_scarcity_rent():
    # a target below the peak leaves scarcity hours priced by the peaker running flat out
    techs = {"peak": plant("peak", 100.0, overnight=400, fixed=15, lifetime=25),
             "dr": plant("dr", 900.0, firm=False, capacity=(3.0, 3.0))}
    load = np.r_[np.full(20, 4.0), np.full(4, 6.0)]
    data = toy_data(load, techs)
    cfg = toy_config(Mechanism.capacity_market(5.0, eligible_firm=frozenset({"peak"})), W24)
    p, idx = build_invest(cfg, data, data.for_window(W24))
    sol = solve(p)
    pr = prices(sol, idx)
    cost = 1000 * (annuity(400, 25, 0.04) + 15) * W24.weight
    oracle = cost - np.maximum(pr - 100.0, 0).sum()
    assert sol.duals[idx.firm_row] == pytest.approx(max(oracle, 0.0), abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(1, 10), min_size=24, max_size=24), st.floats(0, 8))
def test_energy_only_is_a_relaxation(load, margin):
    load = np.array(load)
    data = toy_data(load, peaker_pair())
    firm = frozenset({"base", "peak"})
    cm = toy_config(Mechanism.capacity_market(load.max() + margin, eligible_firm=firm), W24)
    eo = toy_config(Mechanism.capacity_market(0.0, eligible_firm=firm), W24)
    wd = data.for_window(W24)
    obj_cm = solve(build_invest(cm, data, wd)[0]).objective
    obj_eo = solve(build_invest(eo, data, wd)[0]).objective
    assert obj_eo <= obj_cm + 1e-6 * abs(obj_cm)


def reserve_toy(spike=12.0, reserve=3.0):
    load = np.full(24, 8.0)
    load[18] = spike
    techs = {"base": plant("base", 20.0, capacity=(10.0, 10.0)),
             "mid": plant("mid", 90.0, capacity=(1.0, 1.0))}
    data = toy_data(load, techs)
    cfg = toy_config(Mechanism.reliability_reserve(11.0 + reserve, eligible_firm=frozenset({"base", "mid"})),
                     W24)
    return cfg, data


def test_reserve_scarcity_hour_prices_at_activation():
    cfg, data = reserve_toy()
    wd = data.for_window(W24)
    p, idx = build_dispatch(cfg, data, wd, {"base": 10.0, "mid": 1.0}, reserve_size=3.0)
    sol = solve(p)
    pr = prices(sol, idx)
    reserve = sol.x[idx.var("reserve", "output")]
    assert reserve[18] == pytest.approx(1.0)
    assert pr[18] == pytest.approx(500.0, abs=1e-4)
    assert np.all(np.delete(pr, 18) < 500)
    assert sol.x[idx.var("unserved", "el")].max() == pytest.approx(0.0, abs=1e-9)


def test_reserve_shortfall_uses_slack():
    cfg, data = reserve_toy(spike=16.0)
    p, idx = build_dispatch(cfg, data, data.for_window(W24), {"base": 10.0, "mid": 1.0}, reserve_size=3.0)
    sol = solve(p)
    assert sol.x[idx.var("unserved", "el")][18] == pytest.approx(2.0)
    assert prices(sol, idx)[18] == pytest.approx(cfg.unserved_price)
    assert cfg.unserved_price == 5000


def test_reserve_invest_proxy_caps_prices():
    load = np.full(24, 8.0)
    load[18] = 12.0
    techs = {"peak": plant("peak", 130.4, overnight=400, fixed=15, lifetime=25)}
    data = toy_data(load, techs)
    cfg = toy_config(Mechanism.reliability_reserve(20.0, eligible_firm=frozenset({"peak"})), W24)
    p, idx = build_invest(cfg, data, data.for_window(W24))
    sol = solve(p)
    pr = prices(sol, idx)
    assert pr.max() <= 500 + 1e-9
    proxy = sol.x[idx.var("reserve", "output")]
    assert np.all(pr[proxy > 1e-6] == pytest.approx(500.0, abs=1e-4))
    assert idx.firm_row is None
    assert ("unserved", "el") not in idx.vars


def test_dispatch_objective_not_below_invest():
    techs = dict(peaker_pair(), st=storage("st", 2.0, energy_cost=30.0))
    data = toy_data(LOAD, techs)
    cfg = toy_config(Mechanism.capacity_market(LOAD.max(), eligible_firm=frozenset({"base", "peak"})), W24)
    wd = data.for_window(W24)
    p, idx = build_invest(cfg, data, wd)
    sol = solve(p)
    caps, _ = capacities_from(sol, idx)
    assert "st.energy" in caps and "st.charge" in caps
    d, didx = build_dispatch(cfg, data, wd, caps)
    dsol = solve(d)
    assert dsol.objective >= sol.objective - 1e-6 * abs(sol.objective)
    assert dsol.objective == pytest.approx(sol.objective, rel=1e-7)
    assert dsol.x[didx.var("unserved", "el")].max() <= 1e-9


def test_window_and_capacity_errors():
    data = toy_data(LOAD, peaker_pair())
    cfg = toy_config(energy_only({"base"}), W24)
    other = WeatherWindow(2009, 24, 24)
    with pytest.raises(FormulationError, match="invest window"):
        build_invest(cfg, data, data.for_window(other))
    with pytest.raises(FormulationError, match="missing capacity"):
        build_dispatch(cfg, data, data.for_window(W24), {"base": 1.0})


def test_model_file_name():
    assert model_file_name("capacity-market", "2009", "invest") == "capacity-market_2009_invest.mps"


# ---------------------------------------------------------------------------
# full synthetic invest model on a one-week window


@pytest.fixture(scope="module")
def synth_invest(synth_data, span_windows):
    window = span_windows[1]
    cfg = ScenarioConfig(Mechanism.capacity_market(110.0), invest_window=window, dispatch_windows=(window,))
    wd = synth_data.for_window(window, cfg.demand_uplift_target)
    p, idx = build_invest(cfg, synth_data, wd)
    return cfg, wd, p, idx, solve(p)


def test_synth_model_balance_and_prices(synth_invest, synth_data):
    cfg, wd, p, idx, sol = synth_invest
    assert sol.optimal
    ax = p.A @ sol.x
    bal = idx.balance
    assert np.abs(ax[bal] - p.rhs[bal]).max() <= 1e-6 * (1 + np.abs(p.rhs[bal]).max())
    mcs = [marginal_cost(t, cfg.carbon_price) for t in synth_data.technologies.values() if t.kind == "dispatchable"]
    pr = prices(sol, idx)
    assert len(pr) == wd.n_hours
    assert pr.max() <= max(mcs) + 1e-3
    assert pr.min() >= -1e-9


def test_synth_storage_levels_and_closure(synth_invest):
    cfg, wd, p, idx, sol = synth_invest
    ax = p.A @ sol.x
    for (cat, item), rows in idx.rows.items():
        if cat == "level":
            assert np.abs(ax[rows] - p.rhs[rows]).max() <= 1e-6  # includes the wrap-around row 0
    for (cat, item), cols in idx.vars.items():
        if cat != "level":
            continue
        lvl = sol.x[cols]
        assert lvl.min() >= -1e-9
        key = f"flex.{item}" if f"flex.{item}" in idx.capacity else f"{item}.energy"
        cap = sol.x[idx.capacity[key]] if key in idx.capacity else idx.fixed.get(key, idx.fixed.get(f"flex.{item}"))
        assert lvl.max() <= cap + 1e-6


def test_synth_industry_energy_conserved(synth_invest, synth_data):
    cfg, wd, p, idx, sol = synth_invest
    for opt in synth_data.flex:
        if opt.family is not FlexFamily.INDUSTRY:
            continue
        charged = sol.x[idx.var("charge", opt.id)].sum()
        reduced = sum(sol.x[idx.var("reduce", f"{opt.id}.{k}")].sum() for k in range(len(opt.activation_cost_tiers)))
        assert opt.storage_efficiency * charged == pytest.approx(reduced / opt.storage_efficiency, abs=1e-6)


def test_synth_index_is_bijective_and_used(synth_invest, tmp_path):
    cfg, wd, p, idx, sol = synth_invest
    cols = np.concatenate(list(idx.vars.values()) + [np.array(list(idx.capacity.values()))])
    assert len(cols) == len(set(cols.tolist())) == p.n_vars
    rows = np.concatenate(list(idx.rows.values()))
    assert len(rows) == len(set(rows.tolist())) == p.n_rows
    nnz = np.diff(p.A.tocsc().indptr)
    assert np.all((nnz > 0) | (p.c != 0))
    idx.to_csv(tmp_path / "idx.csv")
    back = ModelIndex.from_csv(tmp_path / "idx.csv", idx.stage, idx.n_hours)
    assert back.capacity == idx.capacity
    assert {k: v.tolist() for k, v in back.vars.items()} == {k: v.tolist() for k, v in idx.vars.items()}
    assert back.firm_row == idx.firm_row


def test_synth_firm_target_helper(synth_data, span_windows):
    wd = synth_data.for_window(span_windows[1], 670.0)
    target = firm_target_for(synth_data, wd)
    assert target > 5.0
    assert electric_demand(synth_data, wd).max() >= target - 5.0


def test_merged_industry_portfolio_is_a_tight_relaxation(synth_data, span_windows, flex_inputs):
    from capmech.domain import ModelData
    from capmech.flex import build_portfolio

    window = span_windows[1]
    cfg = ScenarioConfig(Mechanism.capacity_market(110.0), invest_window=window, dispatch_windows=(window,))
    objectives = []
    for aggregate in (False, True):
        data = ModelData(synth_data.technologies, tuple(build_portfolio(flex_inputs, aggregate=aggregate)),
                         synth_data.series, synth_data.process_heat)
        objectives.append(solve(build_invest(cfg, data, data.for_window(window, 670.0))[0]).objective)
    # pooling storage and cost pieces across processes of a bucket can only help
    assert objectives[1] <= objectives[0] * (1 + 1e-9)
    assert objectives[1] == pytest.approx(objectives[0], rel=1e-3)
