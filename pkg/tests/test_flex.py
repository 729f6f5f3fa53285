import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from capmech.domain import INDUSTRY_DURATIONS, FlexFamily
from capmech.flex import (IndustryProcessRecord, ProcessHeatInput, RevenueRequirementInput, aggregate_by_duration,
                          build_portfolio, calibrate_bucket_weights, charge_power_cap, district_heating_option,
                          export_portfolio, heat_pump_power, import_portfolio, industry_portfolio,
                          process_heat_electricity, process_heat_flex_invest, process_heat_option,
                          process_heat_storage_bound, resistance_heater_power, revenue_requirement)

# Hand-computed arithmetic, frozen.
RR = {"electric_arc_furnace": 0.25 * 600 / 0.53, "aluminum": 0.20 * 2000 / 15, "cement": 0.40 * 80 / 0.1}
HEAT_EL = {"<100": 67 / 3.7, "100-160": 70.2 / 3.7, "160-500": 33.1 / 0.99}
FLEX_INVEST = 40 / (0.9 * 0.99) + 80 * 0.7 / 0.99  # 101.459...
INDUSTRY_MW = 1097 * .99 + 543 * .95 + 312 * .95 + 360 * .9 + 1484 * .54 + 570 * .7 + 1050 * .1


def test_revenue_requirement_rows(flex_inputs):
    got = {k: revenue_requirement(v) for k, v in flex_inputs.revenue.items()}
    assert got == pytest.approx(RR, rel=1e-12)
    assert [round(got[k]) for k in RR] == [283, 27, 320]


@given(p=st.floats(1, 1e4), e=st.floats(0.01, 100), k=st.floats(0.1, 10))
def test_revenue_requirement_homogeneity(p, e, k):
    base = revenue_requirement(RevenueRequirementInput(0.3, p, e))
    assert revenue_requirement(RevenueRequirementInput(0.3, k * p, e)) == pytest.approx(k * base, rel=1e-9)
    assert revenue_requirement(RevenueRequirementInput(0.3, p, k * e)) == pytest.approx(base / k, rel=1e-9)


@pytest.mark.parametrize("bad", [(0.3, 10, 0), (0, 10, 1), (0.3, 10, -1)])
def test_revenue_requirement_rejects(bad):
    with pytest.raises(ValueError):
        RevenueRequirementInput(*bad)


def test_heat_conversion_table():
    el = process_heat_electricity(ProcessHeatInput())
    for band, v in HEAT_EL.items():
        assert el[band] == pytest.approx(v, rel=1e-12)
    assert [round(el[b], 1) for b in HEAT_EL] == [18.1, 19.0, 33.4]
    assert el["total"] == pytest.approx(70.5, abs=0.1)


def test_heat_pump_and_resistance_examples():
    assert heat_pump_power(0, 3.7) == (0, 0)
    assert heat_pump_power(87.6, 2.0).average_power == pytest.approx(5000.0)
    assert resistance_heater_power(1, 1) == 1
    assert resistance_heater_power(33.1, 0.9) == pytest.approx(36.78, abs=5e-3)
    with pytest.raises(ValueError):
        heat_pump_power(1, 0)
    with pytest.raises(ValueError):
        resistance_heater_power(1, 0)


def test_storage_bound_defaults():
    inp = ProcessHeatInput()
    bound = process_heat_storage_bound(inp)
    expected = 0.3 * inp.total_thermal * 1000 / 8760 * 72
    assert bound.energy_th == pytest.approx(expected, rel=1e-12)
    assert bound.energy_th == pytest.approx(421.2, rel=0.01)
    assert bound.charge_power == pytest.approx(expected / (72 * 0.9), rel=1e-12)
    assert bound.energy_el == pytest.approx(expected / 0.99)


def test_storage_bound_at_170_2():
    inp = ProcessHeatInput(thermal_demand_by_band={"<100": 67.0, "100-160": 70.1, "160-500": 33.1})
    assert process_heat_storage_bound(inp).energy_th == pytest.approx(419.67, abs=0.01)


def test_storage_bound_edge_cases():
    zero = process_heat_storage_bound(ProcessHeatInput(storage_share=0))
    assert zero.energy_th == 0 and zero.charge_power == 0
    assert charge_power_cap(421.2, 72, 0.9) == pytest.approx(6.50, abs=5e-3)
    with pytest.raises(ValueError):
        process_heat_storage_bound(ProcessHeatInput(tau_s=0))


def test_flex_invest_examples():
    assert process_heat_flex_invest(ProcessHeatInput()) == pytest.approx(FLEX_INVEST, rel=1e-12)
    assert process_heat_flex_invest(ProcessHeatInput()) == pytest.approx(101.46, abs=0.01)
    lossless = ProcessHeatInput(overcapacity_share=0, eta_hs=1, eta_rh=1)
    assert process_heat_flex_invest(lossless) == 40
    assert process_heat_flex_invest(ProcessHeatInput(storage_invest=0)) == pytest.approx(56.57, abs=0.005)


def test_process_heat_input_checks():
    with pytest.raises(ValueError, match="bands"):
        ProcessHeatInput(thermal_demand_by_band={"<100": 1.0})
    with pytest.raises(ValueError):
        ProcessHeatInput(eta_rh=0)
    with pytest.raises(ValueError):
        ProcessHeatInput(cop=0)


def test_process_heat_option():
    opt = process_heat_option(ProcessHeatInput())
    assert opt.family is FlexFamily.PROCESS_HEAT
    assert opt.discharge_power == pytest.approx(33.1 / 0.99 * 1e6 / 8760)
    assert opt.energy_cap == pytest.approx(opt.energy_upper_bound)
    assert not opt.violations()


def test_single_record_portfolio():
    rec = IndustryProcessRecord("x", 1.0, 100, 3, 50)
    [opt] = industry_portfolio([rec])
    assert opt.power == 100 and opt.duration_cap == 3
    assert opt.energy_cap * 1000 == pytest.approx(300)
    assert opt.activation_cost_tiers == ((1.0, 50.0),)
    assert opt.storage_efficiency == 1 and opt.standing_loss == 0
    assert opt.energy_invest_cost == pytest.approx(5240 / 3 / 1000)


def test_two_tier_activation():
    rec = IndustryProcessRecord("x", 1.0, 100, 12, 80, min_load_change_cost=10)
    opts = industry_portfolio([rec])
    assert [o.duration_cap for o in opts] == [3, 12]
    assert all(o.activation_cost_tiers == ((0.2, 10.0), (1.0, 80.0)) for o in opts)


def test_portfolio_errors():
    with pytest.raises(ValueError):
        industry_portfolio([])
    with pytest.raises(ValueError):
        industry_portfolio([IndustryProcessRecord("x", 1.0, 1, 3, 1)], electrification_uplift=-0.1)
    with pytest.raises(ValueError):
        IndustryProcessRecord("x", 1.2, 1, 3, 1)
    with pytest.raises(ValueError):
        IndustryProcessRecord("x", 0.5, 1, 5, 1)
    with pytest.raises(ValueError):
        IndustryProcessRecord("x", 0.5, 1, 3, 1, min_load_change_cost=2)


def test_other_record_uplift():
    rec = IndustryProcessRecord("other", 0.1, 0.0, 3, 1)
    [opt] = industry_portfolio([rec], other_base_load=1000)
    assert opt.power == pytest.approx(139.0)


def test_bundled_industry_total(flex_inputs):
    opts = industry_portfolio(flex_inputs.industry)
    assert sum(o.power for o in opts) == pytest.approx(INDUSTRY_MW, abs=1e-9)
    assert INDUSTRY_MW == pytest.approx(3527.64)


def test_calibrated_three_hour_bucket(flex_inputs):
    weights = calibrate_bucket_weights(flex_inputs.industry)
    opts = industry_portfolio(flex_inputs.industry, bucket_weights=weights)
    three = [o for o in opts if o.duration_cap == 3]
    assert sum(o.power for o in three) == pytest.approx(1558.0, abs=1e-9)
    assert sum(o.energy_cap for o in three) * 1000 == pytest.approx(4674.0, abs=1e-6)
    assert sum(o.power for o in opts) == pytest.approx(INDUSTRY_MW, abs=1e-9)


def test_calibration_unreachable(flex_inputs):
    with pytest.raises(ValueError, match="unreachable"):
        calibrate_bucket_weights(flex_inputs.industry, target_mw=1e6)


records = st.builds(IndustryProcessRecord, name=st.text("abcdefgh", min_size=1, max_size=6),
                    dr_share=st.floats(0, 1), installed_load=st.floats(0, 5000),
                    max_duration=st.sampled_from(INDUSTRY_DURATIONS), load_change_cost=st.floats(0, 500),
                    min_load_change_cost=st.none())


@given(st.lists(records, min_size=1, max_size=6, unique_by=lambda r: r.name))
def test_portfolio_conserves_power_and_is_valid(recs):
    opts = industry_portfolio(recs)
    for r in recs:
        mine = [o for o in opts if o.id.rsplit("_", 1)[0] == r.name]
        assert sum(o.power for o in mine) == pytest.approx(r.flexible_power, abs=1e-9)
        assert all(o.duration_cap <= r.max_duration for o in mine)
    assert all(not o.violations() for o in opts)
    merged = aggregate_by_duration(opts)
    assert sum(o.power for o in merged) == pytest.approx(sum(o.power for o in opts), abs=1e-9)
    assert all(not o.violations() for o in merged)


def test_aggregate_cost_curve_is_exact():
    a = IndustryProcessRecord("a", 1.0, 100, 3, 80, min_load_change_cost=10)
    b = IndustryProcessRecord("b", 1.0, 300, 3, 40)
    [m] = aggregate_by_duration(industry_portfolio([a, b]))
    # pieces: 20 MW at 10, 300 MW at 40, 80 MW at 80
    assert m.power == 400
    fracs, costs = zip(*m.activation_cost_tiers)
    assert fracs == pytest.approx((0.05, 0.8, 1.0))
    assert costs == (10.0, 40.0, 80.0)


def test_district_heating_option():
    opt = district_heating_option(95, 50)
    assert (opt.energy_invest_cost, opt.storage_efficiency, opt.standing_loss) == (50, 0.9, 0.02)
    assert math.isinf(opt.energy_cap)
    assert opt.hourly_loss == pytest.approx(0.000841, abs=5e-7)
    assert district_heating_option(95, 0).energy_invest_cost == 0
    with pytest.raises(ValueError):
        district_heating_option(0)


def test_every_bundled_option_valid(flex_inputs):
    for calibrate in (False, True):
        for aggregate in (False, True):
            opts = build_portfolio(flex_inputs, calibrate=calibrate, aggregate=aggregate)
            assert all(not o.violations() for o in opts)
            assert len({o.id for o in opts}) == len(opts)


def test_portfolio_csv_roundtrip(tmp_path, flex_inputs):
    opts = build_portfolio(flex_inputs)
    export_portfolio(opts, tmp_path / "p.csv")
    assert import_portfolio(tmp_path / "p.csv") == opts
    shed = [replace(opts[0], shedding=True)]
    export_portfolio(shed, tmp_path / "s.csv")
    assert import_portfolio(tmp_path / "s.csv") == shed
