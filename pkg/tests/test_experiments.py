import copy
import csv
import io
import json

import numpy as np
import pytest

from spectrum_market.errors import MissingGoldenError, ParseError, ValidationError
from spectrum_market.experiments import (
    bundled_names,
    golden_root,
    load_scenario,
    parse_quantity,
    resolve_scenario_path,
    run_scenario,
    scenario_from_dict,
    validate_or_errors,
    verify_golden,
    write_golden,
)
from spectrum_market.market import CapacitySpec, DemandModel
from spectrum_market.type1 import duopoly_ne

BASE = {
    "name": "probe",
    "game": "type1_static",
    "market": {"a": [30, 30], "b": [2, 4], "c": 1.5},
    "capacities": {"q_avail": ["10 MHz", "inf"]},
}


def _table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# scenario_hash=")
    rows = list(csv.DictReader(lines[1:]))
    return rows


def _raw(**changes):
    raw = copy.deepcopy(BASE)
    raw.update(changes)
    return raw


def test_parse_quantity():
    assert parse_quantity("15 MHz", "x") == 15.0
    assert parse_quantity("2.5e-1", "x") == 0.25
    assert parse_quantity("inf", "x") == np.inf
    assert parse_quantity(3, "x") == 3.0
    for bad in ("fifteen", True, None, "15 MHz extra"):
        with pytest.raises(ValueError):
            parse_quantity(bad, "x")


def test_bundled_scenarios_and_aliases():
    names = bundled_names()
    assert len(names) == 19 and names[0] == "fig03_price_vs_capacity"
    assert resolve_scenario_path("fig3_price_vs_capacity").stem == "fig03_price_vs_capacity"
    assert resolve_scenario_path("fig3").stem == "fig03_price_vs_capacity"
    assert resolve_scenario_path("fig16").stem == "fig16_bifurcation_gamma1"
    with pytest.raises(ParseError):
        resolve_scenario_path("fig99")
    for name in names:
        assert validate_or_errors(name) == []


def test_loaded_scenario_builds_demand_model():
    cfg = load_scenario("fig3_price_vs_capacity")
    assert cfg.game == "type1_static"
    np.testing.assert_array_equal(cfg.model.a, [30, 30])
    np.testing.assert_array_equal(cfg.model.b, [2, 4])
    assert cfg.model.cross == 1.5
    assert cfg.sweep["kind"] == "capacity" and cfg.sweep["steps"] == 81
    assert np.isinf(cfg.caps.q_avail[1])


def test_utility_form_market():
    raw = _raw(market={"alpha": [10, 10], "beta": [2, 1], "mu": 0.5})
    cfg = scenario_from_dict(raw)
    np.testing.assert_allclose(cfg.model.b, [0.5714, 1.1429], atol=1e-3)
    assert cfg.params is not None


def test_substitution_above_own_effect_rejected():
    raw = _raw(market={"alpha": [10, 10], "beta": [1, 1], "mu": 1.5})
    with pytest.raises(ValidationError) as exc:
        scenario_from_dict(raw)
    assert any(e.startswith("market.beta") and "beta_i > mu > 0" in e for e in exc.value.errors)


def test_both_market_forms_rejected():
    raw = _raw(market={"a": [30, 30], "b": [2, 4], "c": 1.5, "alpha": [1, 1], "beta": [2, 2], "mu": 0.5})
    with pytest.raises(ValidationError, match="not both"):
        scenario_from_dict(raw)


def test_errors_are_collected_per_field():
    raw = _raw(game="nope", capacities={"q_avail": ["ten", 5]})
    with pytest.raises(ValidationError) as exc:
        scenario_from_dict(raw)
    fields = [e.split(":")[0] for e in exc.value.errors]
    assert "game" in fields and "capacities.q_avail[0]" in " ".join(exc.value.errors)


def test_game_specific_checks():
    with pytest.raises(ValidationError, match="dynamics.rates"):
        scenario_from_dict(_raw(game="type1_dynamic_br"))
    with pytest.raises(ValidationError, match="finite capacities"):
        scenario_from_dict(_raw(game="type2_static", type2={"theta": 0.1}))
    with pytest.raises(ValidationError, match="gamma sweeps"):
        scenario_from_dict(_raw(sweep={"kind": "gamma", "parameter": "gamma1", "from": 0.01, "to": 0.02,
                                       "steps": 3}))


def test_capacities_from_load():
    raw = _raw(capacities={"w": [20, 30], "load": [10, 20], "rate": [2, 4]})
    np.testing.assert_allclose(scenario_from_dict(raw).caps.q_avail, [15, 25])


def test_bad_toml_is_parse_error(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("name = [unclosed\n")
    with pytest.raises(ParseError):
        load_scenario(path)


def test_scenario_hash_tracks_overrides():
    cfg = scenario_from_dict(_raw())
    same = scenario_from_dict(_raw())
    assert cfg.scenario_hash == same.scenario_hash
    assert cfg.with_overrides(seed=3).scenario_hash != cfg.scenario_hash
    assert cfg.with_overrides().scenario_hash == cfg.scenario_hash


def test_capacity_sweep_matches_direct_solves():
    cfg = load_scenario("fig03_price_vs_capacity")
    man = run_scenario(cfg)
    rows = _table(man.texts["equilibria.csv"])
    assert len(rows) == 81
    model = DemandModel([30, 30], [2, 4], 1.5)
    for row in rows[::8]:
        res = duopoly_ne(model, CapacitySpec([float(row["q1a"]), float(row["q2a"])]))
        assert [float(row["p1"]), float(row["p2"])] == res.prices.tolist()
        assert row["case"] == res.case_label.value and row["status"] == "ok"
    traces = man.texts["search_trace.jsonl"].splitlines()
    assert all(json.loads(t)["k"] >= 0 for t in traces)


def test_theta_sweep_prices_rise():
    rows = _table(run_scenario(load_scenario("fig11")).texts["type2_equilibria.csv"])
    assert len(rows) == 121 and all(r["status"] == "ok" for r in rows)
    for col in ("p1", "p2"):
        vals = np.array([float(r[col]) for r in rows])
        assert np.all(np.diff(vals) >= -1e-12)


def test_bifurcation_output():
    man = run_scenario(load_scenario("fig16"))
    text = man.texts["bifurcation.csv"]
    assert text.splitlines()[1] == "param,value_index,p1_sample,p2_sample"
    rec = json.loads(man.texts["records.jsonl"].splitlines()[0])
    assert 0.049 <= rec["first_doubling"] <= 0.053


def test_outputs_written_with_manifest(tmp_path):
    cfg = load_scenario("fig12")
    man = run_scenario(cfg, out_dir=tmp_path, seed=5)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["files"]) == {"orbit_both_ample.csv", "orbit_first_limited.csv", "records.jsonl"}
    assert manifest["scenario_hash"] == man.scenario_hash
    raw = (tmp_path / "orbit_both_ample.csv").read_bytes()
    assert b"\r\n" not in raw
    assert raw.startswith(f"# scenario_hash={man.scenario_hash}\n".encode())
    assert man.within_budget


def test_runs_are_deterministic():
    cfg = load_scenario("fig18")
    assert run_scenario(cfg).files == run_scenario(cfg).files


def test_golden_round_trip_and_perturbation(tmp_path):
    cfg = load_scenario("fig05")
    man = run_scenario(cfg)
    write_golden(man, tmp_path)
    rep = verify_golden(run_scenario(cfg), tmp_path)
    assert rep.passed and rep.checksums_match
    # nudge one price in the golden copy
    lines = (tmp_path / "equilibria.csv").read_text().splitlines()
    header = lines[1].split(",")
    cells = lines[10].split(",")
    col = header.index("p2")
    cells[col] = repr(float(cells[col]) + 1e-3)
    lines[10] = ",".join(cells)
    (tmp_path / "equilibria.csv").write_text("\n".join(lines) + "\n")
    rep = verify_golden(man, tmp_path)
    assert not rep.passed and not rep.checksums_match
    assert any("equilibria.csv:p2" in f for f in rep.failures)
    assert verify_golden(man, tmp_path, tol_override=1e-2).passed


def test_missing_golden(tmp_path):
    man = run_scenario(scenario_from_dict(_raw()))
    with pytest.raises(MissingGoldenError):
        verify_golden(man, tmp_path / "absent")


def test_bundled_golden_matches():
    cfg = load_scenario("fig07")
    rep = verify_golden(run_scenario(cfg), golden_root() / cfg.name)
    assert rep.passed and rep.checksums_match


def test_manifest_serialises():
    man = run_scenario(scenario_from_dict(_raw()))
    buf = io.StringIO()
    json.dump(man.as_dict(), buf)
    assert json.loads(buf.getvalue())["scenario"] == "probe"
