from pathlib import Path

import pytest

from beliefnav.scenario import (
    BUNDLED,
    ConfigError,
    Scenario,
    bundled_path,
    load_config,
    parse_config,
)

DATA = bundled_path("corridor.cfg").parent


def corridor_text():
    return (DATA / "corridor.cfg").read_text()


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_load(name):
    cfg = load_config(name)
    assert cfg.map.is_file() and cfg.domain.is_file()


def test_battery_configs():
    assert load_config("battery80").initial_charge_pct == 80
    assert load_config("battery40").initial_charge_pct == 40
    assert load_config("battery80").trace_bound == 0.2
    assert load_config("corridor").initial_charge_pct is None


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown key frobnicate"):
        parse_config(corridor_text() + "frobnicate = 1\n", DATA)


def test_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate key delta_s"):
        parse_config(corridor_text() + "delta_s = 2\n", DATA)


def test_bad_value():
    text = corridor_text().replace("d_factor = 2", "d_factor = two")
    with pytest.raises(ConfigError, match="d_factor"):
        parse_config(text, DATA)


def test_invalid_number_is_config_error():
    text = corridor_text().replace("delta_s = 1.0", "delta_s = -1")
    assert text != corridor_text()
    with pytest.raises(ConfigError):
        parse_config(text, DATA)


def test_missing_map_names_path(tmp_path):
    text = corridor_text().replace("map = corridor.map", "map = nowhere.map")
    with pytest.raises(ConfigError, match="map file not found: .*nowhere.map"):
        parse_config(text, DATA)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="config file not found"):
        load_config(tmp_path / "absent.cfg")


def test_hash_depends_on_values_and_file_contents(tmp_path):
    cfg = load_config("corridor")
    assert cfg.hash() == load_config("corridor").hash()
    assert cfg.replace(delta_s=2.0).hash() != cfg.hash()
    lm = tmp_path / "lm.txt"
    lm.write_text(cfg.landmarks.read_text() + "9 1.0 1.0\n")
    assert cfg.replace(landmarks=lm).hash() != cfg.hash()


def test_hash_ignores_file_location(tmp_path):
    cfg = load_config("corridor")
    copy = tmp_path / "copy.map"
    copy.write_bytes(cfg.map.read_bytes())
    assert cfg.replace(map=copy).hash() == cfg.hash()


def test_relative_paths_resolve_against_config(tmp_path):
    for name in ("corridor.map", "corridor.lm", "corridor_domain.pddl", "corridor_problem.pddl"):
        (tmp_path / name).write_bytes((DATA / name).read_bytes())
    (tmp_path / "c.cfg").write_text(corridor_text())
    cfg = load_config(tmp_path / "c.cfg")
    assert cfg.map == (tmp_path / "corridor.map").resolve()
    assert cfg.hash() == load_config("corridor").hash()


def test_pregenerated_graph_is_used(tmp_path):
    sc = Scenario.load(load_config("corridor"))
    g = tmp_path / "g.txt"
    sc.graph.save(g)
    text = corridor_text() + f"graph = {g}\n"
    sc2 = Scenario.load(parse_config(text, DATA))
    assert sc2.graph.to_text() == sc.graph.to_text()


def test_model_cached_per_dfactor():
    sc = Scenario.load(load_config("battery80"))
    assert sc.model(2) is sc.model(2)
    assert sc.model(1) is not sc.model(2)
    m = sc.model(2)
    assert m.init_fluents[m.fluent_slot("charge")] == 80
    assert m.static_fluents[next(f for f in m.static_fluents if f.name == "dfactor")] == 2
