import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from capmech.cli import main, parse_years
from capmech.domain import read_series, Unit

FAST = ["--hours", "168", "--first-hour", "scarcity", "--invest-year", "2009", "--dispatch-years", "2009-2010"]


@pytest.fixture(scope="module")
def series_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("series")
    assert main(["synth", "--out", str(d), "--seed", "42", "--years", "2009-2010"]) == 0
    return d


def test_parse_years():
    assert parse_years("2008-2010") == [2008, 2009, 2010]
    assert parse_years("2009,2011") == [2009, 2011]
    assert parse_years(2012) == [2012]


def test_synth_is_deterministic(tmp_path, series_dir):
    assert main(["synth", "--out", str(tmp_path), "--seed", "42", "--years", "2009-2010"]) == 0
    names = sorted(p.name for p in series_dir.iterdir())
    assert names == sorted(p.name for p in tmp_path.iterdir())
    assert "dh_cop_2011.csv" in names
    for name in names:
        assert (series_dir / name).read_bytes() == (tmp_path / name).read_bytes()


def test_synth_bounds_and_heat_total(series_dir):
    for name in ("solar", "wind_onshore", "wind_offshore", "ror", "reservoir_inflow"):
        s = read_series(series_dir / f"{name}_2010.csv", Unit.FRACTION)
        assert s.values.min() >= 0 and s.values.max() <= 1
    heat = read_series(series_dir / "dh_heat_2010.csv", Unit.GW_TH)
    assert heat.values.sum() / 1000 == pytest.approx(95.0, abs=1e-2)  # six decimals per hour in the file


def test_validate_ok(series_dir, capsys):
    assert main(["validate", "--series", str(series_dir), *FAST]) == 0
    assert capsys.readouterr().out.startswith("OK")


def test_validate_reports_violations(tmp_path, series_dir, monkeypatch):
    monkeypatch.chdir(tmp_path)  # validate has no --out, so the error file lands in the working directory
    bad = tmp_path / "bad"
    bad.mkdir()
    for p in series_dir.iterdir():
        (bad / p.name).write_bytes(p.read_bytes())
    frame = pd.read_csv(bad / "solar_2010.csv")
    frame.loc[3, "value"] = 1.5
    frame.to_csv(bad / "solar_2010.csv", index=False)
    assert main(["validate", "--series", str(bad), *FAST]) == 1
    doc = json.loads((tmp_path / "error.json").read_text())
    assert any("solar" in v and "fraction" in v for v in doc["violations"])


def test_run_writes_error_file(tmp_path, series_dir):
    out = tmp_path / "run"
    code = main(["run", "--series", str(series_dir), *FAST, "--scenario", "reserve", "--activation-price", "100",
                 "--out", str(out)])
    assert code == 1
    doc = json.loads((out / "error.json").read_text())
    assert doc["stage"] == "validate" and doc["exit_code"] == 1
    assert any("activation_price" in v for v in doc["violations"])


def test_run_and_compare(tmp_path, series_dir, capsys):
    a, b = tmp_path / "cm", tmp_path / "rr"
    assert main(["run", "--series", str(series_dir), *FAST, "--out", str(a)]) == 0
    assert main(["run", "--series", str(series_dir), *FAST, "--scenario", "reserve", "--activation-price", "500",
                 "--out", str(b), "--export-lp"]) == 0
    for d in (a, b):
        for name in ("capacities.csv", "metrics.csv", "prices_2009.csv", "dispatch_2010.csv", "reserve_2010.csv",
                     "flex_capacities.csv", "flex_portfolio.csv", "manifest.json"):
            assert (d / name).exists(), name
    manifest = json.loads((b / "manifest.json").read_text())
    assert manifest["config"]["mechanism"]["activation_price"] == 500
    assert manifest["cli"]["seed"] == 42
    assert (b / "lp" / "reliability-reserve_2009_dispatch.mps").exists()
    reserve = pd.read_csv(b / "reserve_2010.csv")
    active = reserve.reserve_gw > 1e-6
    assert np.allclose(reserve.price[active], 500, atol=1e-4)

    capsys.readouterr()
    assert main(["compare", str(a), str(b), "--out", str(tmp_path)]) == 0
    table = pd.read_csv(tmp_path / "comparison.csv")
    assert list(table.columns) == ["section", "item", "value_a", "value_b", "ratio_b_to_a"]
    assert "Scenario B: reliability-reserve" in capsys.readouterr().out


def test_compare_hash_mismatch(tmp_path, series_dir):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--series", str(series_dir), *FAST, "--out", str(a)]) == 0
    assert main(["run", "--series", str(series_dir), *FAST, "--carbon-price", "90", "--out", str(b)]) == 0
    assert main(["compare", str(a), str(b), "--out", str(tmp_path / "c")]) == 1
    assert json.loads((tmp_path / "c" / "error.json").read_text())["stage"] == "compare"


def test_config_file_and_flag_precedence(tmp_path, series_dir, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("hours: 168\nfirst_hour: scarcity\ninvest_year: 2009\ndispatch_years: '2009'\n"
                   "firm_target: 90\ncarbon_price: 50\n")
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--series", str(series_dir), "--carbon-price", "140",
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["carbon_price"] == 140
    assert manifest["config"]["mechanism"]["firm_target"] == 90
    cfg.write_text("bogus: 1\n")
    assert main(["validate", "--config", str(cfg), "--series", str(series_dir)]) == 1


def test_export_lp(tmp_path, series_dir):
    assert main(["export-lp", "--series", str(series_dir), *FAST, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "capacity-market_2009_invest.mps").read_text().startswith("NAME")
    assert (tmp_path / "capacity-market_2009_invest.index.csv").exists()


def test_backend_from_environment(monkeypatch, series_dir, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("CAPMECH_BACKEND", "nope")
    assert main(["validate", "--series", str(series_dir), *FAST]) == 1


def test_missing_series_is_a_config_error(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["validate", *FAST]) == 1
    assert json.loads((tmp_path / "error.json").read_text())["stage"] == "config"


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "capmech.cli", "run", "--no-such-flag"], capture_output=True,
                          text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr
