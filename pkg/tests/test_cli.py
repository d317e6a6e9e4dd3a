import csv
import subprocess
import sys

import pytest

from beliefnav.cli import (
    EXIT_INFEASIBLE,
    EXIT_INVALID,
    EXIT_OK,
    EXIT_USAGE,
    SWEEP_COLUMNS,
    main,
)
from beliefnav.scenario import bundled_path, load_config

ARTIFACTS = ("graph.txt", "plan.txt", "ticks.csv", "stats.txt", "validation.txt")


@pytest.fixture(scope="module")
def fast_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("plan")
    codes = [main(["plan", "--config", "corridor", "--delta", "2", "--out", str(root / d)])
             for d in ("a", "b")]
    return codes, root / "a", root / "b"


def test_plan_exit_and_layout(fast_runs):
    codes, a, _ = fast_runs
    assert codes == [EXIT_OK, EXIT_OK]
    assert sorted(p.name for p in a.iterdir()) == sorted(ARTIFACTS)


def test_every_artifact_names_config_hash(fast_runs):
    _, a, _ = fast_runs
    h = load_config("corridor").replace(delta_s=2.0).hash()
    for name in ARTIFACTS:
        assert f"config_hash {h}" in (a / name).read_text(), name


def test_reruns_byte_identical(fast_runs):
    _, a, b = fast_runs
    for name in ARTIFACTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_plan_records_final_trace(fast_runs):
    _, a, _ = fast_runs
    text = (a / "plan.txt").read_text()
    assert text.startswith("plan-trace v1\n")
    assert "status plan" in text and "final_trace 0." in text
    assert "planning_time" not in text


def test_validate_subcommand(fast_runs, capsys):
    _, a, _ = fast_runs
    code = main(["validate", "--plan", str(a / "plan.txt"), "--config", "corridor",
                 "--refine", "20"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "status valid" in out and "refinement 20" in out


def test_timing_flag_adds_wall_time(tmp_path):
    assert main(["plan", "--config", "corridor", "--delta", "3", "--timing",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert "planning_time_s" in (tmp_path / "plan.txt").read_text()


def test_infeasible_exit(tmp_path, capsys):
    code = main(["plan", "--config", "battery40", "--out", str(tmp_path)])
    assert code == EXIT_INFEASIBLE
    assert "infeasible (exhausted)" in capsys.readouterr().out
    assert "reason exhausted" in (tmp_path / "plan.txt").read_text()


def test_invalid_exit(tmp_path, capsys):
    code = main(["plan", "--config", "battery80", "--delta", "3", "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    text = (tmp_path / "validation.txt").read_text()
    assert "status invalid" in text and "violated_event battery_status" in text


def test_missing_map_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    text = bundled_path("corridor.cfg").read_text()
    base = bundled_path("corridor.cfg").parent
    text = text.replace("map = corridor.map", f"map = {tmp_path / 'gone.map'}")
    for key in ("landmarks", "domain", "problem"):
        text = text.replace(f"{key} = corridor", f"{key} = {base}/corridor")
    cfg.write_text(text)
    assert main(["plan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert str(tmp_path / "gone.map") in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["plan", "--config", str(tmp_path / "x.cfg"), "--out", str(tmp_path)]) == \
        EXIT_USAGE


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["plan", "--config", "corridor"]) == EXIT_USAGE
    assert main(["plan", "--config", "corridor", "--out", "x", "--delta", "-1"]) == EXIT_USAGE


def test_sweep_rows(tmp_path):
    code = main(["sweep", "--config", "corridor", "--deltas", "2,3", "--dfactors", "1",
                 "--out", str(tmp_path), "--figures"])
    assert code == EXIT_OK
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash ")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 2
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [r["delta_s"] for r in rows] == ["2.0", "3.0"]
    assert all(r["status"] == "plan" and r["valid"] == "yes" for r in rows)
    assert (tmp_path / "sweep.png").stat().st_size > 0


def test_sweep_empty_delta_list(tmp_path):
    assert main(["sweep", "--config", "corridor", "--deltas", "", "--dfactors", "1",
                 "--out", str(tmp_path)]) == EXIT_USAGE


def test_plan_figures_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["plan", "--config", "corridor", "--delta", "3", "--figures",
                     "--out", str(tmp_path / d)]) == EXIT_OK
    for name in ("trajectory.png", "trace.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "beliefnav.cli", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "plan" in out.stdout
