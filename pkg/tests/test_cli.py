from pathlib import Path

import pytest

import cosmos
from src.dtree import write_dataset

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(autouse=True)
def quiet_env(monkeypatch):
    for var in ("COSMOS_MIN_ROWS", "COSMOS_LOG_LEVEL", "COSMOS_CRITICAL_FILE", "COSMOS_STORE"):
        monkeypatch.delenv(var, raising=False)


def test_evaluate(capsys):
    assert cosmos.main(["evaluate", "--table1", str(DATA / "table1.csv"), "--table2", str(DATA / "table2.csv")]) == 0
    out = capsys.readouterr().out
    assert "17.85" in out
    assert "79.97" in out


def test_evaluate_needs_a_table():
    assert cosmos.main(["evaluate"]) == 2


def test_missing_input_is_a_runtime_error(tmp_path):
    assert cosmos.main(["evaluate", "--table1", str(tmp_path / "nope.csv")]) == 1


def test_bad_environment_is_a_usage_error(monkeypatch):
    monkeypatch.setenv("COSMOS_MIN_ROWS", "many")
    assert cosmos.main(["evaluate", "--table1", str(DATA / "table1.csv")]) == 2


def test_generate_then_simulate(tmp_path):
    scenario = tmp_path / "scenario.txt"
    assert cosmos.main(["generate", "--out", str(scenario), "--seed", "4", "--ticks", "80"]) == 0
    assert scenario.read_text().startswith("seed;4\n")

    report, trace = tmp_path / "report.csv", tmp_path / "trace.csv"
    code = cosmos.main([
        "simulate", "--scenario", str(scenario), "--user", str(DATA / "demo_user.txt"),
        "--sessions", "2", "--report", str(report), "--trace", str(trace),
    ])
    assert code == 0
    assert len(report.read_text().splitlines()) == 4
    assert len(trace.read_text().splitlines()) == 81


def test_simulate_demo_scenario_without_user(capsys):
    assert cosmos.main(["simulate", "--scenario", str(DATA / "demo_scenario.txt")]) == 0
    assert "never left training" in capsys.readouterr().out


def test_train_and_classify(tmp_path, weather, capsys):
    data, model = tmp_path / "weather.csv", tmp_path / "model.json"
    write_dataset(data, weather, label_name="play")
    assert cosmos.main(["train", "--data", str(data), "--out", str(model)]) == 0
    assert model.exists()
    assert cosmos.main(["classify", "--model", str(model), "--row", "overcast,70,70,false"]) == 0
    assert "purity" in capsys.readouterr().out
    assert cosmos.main(["classify", "--model", str(model), "--row", "overcast,70"]) == 2


def test_demo(capsys):
    assert cosmos.main(["demo", "--ticks", "80", "--sessions", "1"]) == 0
    out = capsys.readouterr().out
    assert "COSMOS demo" in out
    assert "Simulated battery hours" in out
