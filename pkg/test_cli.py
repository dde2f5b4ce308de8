import csv
import json

import pytest
from click.testing import CliRunner

from discqueue import __version__
from discqueue.cli import cli


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def runner():
    return CliRunner()


def read_csv(path):
    meta, body = {}, []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("# "):
                key, value = line[2:].rstrip("\n").split(": ", 1)
                meta[key] = value
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def run_csv(runner, args, path="out.csv", code=0):
    result = runner.invoke(cli, ["--output", path] + args)
    assert result.exit_code == code, result.output
    return read_csv(path)


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_transient_initial_condition(runner):
    meta, rows = run_csv(runner, ["transient", "--lambda", "1", "--mu", "1", "--tau", "0",
                                  "--kmax", "3", "--eps", "1e-12"])
    assert [float(row["p"]) for row in rows] == [1.0, 0.0, 0.0, 0.0]
    assert meta["command"] == "transient"
    assert meta["truncation_order"] == "0"
    assert meta["alpha_sq"] == "1"


def test_transient_stdout(runner):
    result = runner.invoke(cli, ["transient", "--lambda", "1", "--mu", "1", "--tau", "1/2", "--kmax", "2"])
    assert result.exit_code == 0
    assert "k,p,tail_bound" in result.output


def test_transient_matches_validate(runner):
    base = ["--lambda", "1", "--mu", "1", "--tau", "1", "--kmax", "10", "--eps", "1e-10"]
    _, series = run_csv(runner, ["transient"] + base, "series.csv")
    meta, checked = run_csv(runner, ["validate"] + base, "validate.csv")
    assert meta["verdict"] == "pass"
    assert len(series) == len(checked) == 11
    for s, v in zip(series, checked):
        assert abs(float(s["p"]) - float(v["oracle"])) <= 1e-8
        assert v["verdict"] == "pass"


def test_physical_time_is_rescaled(runner):
    common = ["--lambda", "2", "--mu", "1", "--kmax", "10", "--eps", "1e-10"]
    meta_t, by_t = run_csv(runner, ["transient", "--t", "0.5"] + common, "t.csv")
    _, by_tau = run_csv(runner, ["transient", "--tau", "1.0"] + common, "tau.csv")
    assert meta_t["tau"] == "1"
    assert meta_t["t"] == "1/2"
    assert [row["p"] for row in by_t] == [row["p"] for row in by_tau]


@pytest.mark.parametrize("times", [[], ["--t", "1", "--tau", "1"]])
def test_transient_needs_one_time(runner, times):
    result = runner.invoke(cli, ["transient", "--lambda", "1", "--mu", "1", "--kmax", "2"] + times)
    assert result.exit_code == 2


def test_bad_parameters_exit_2(runner):
    result = runner.invoke(cli, ["transient", "--lambda", "0", "--mu", "1", "--tau", "1", "--kmax", "2"])
    assert result.exit_code == 2
    assert "Error:" in result.output


def test_depth_limit_exit_2(runner):
    result = runner.invoke(cli, ["transient", "--lambda", "1", "--mu", "1", "--tau", "1", "--kmax", "2",
                                 "--depth", "5000"])
    assert result.exit_code == 2


def test_uncertifiable_tau_exit_3(runner):
    result = runner.invoke(cli, ["transient", "--lambda", "1", "--mu", "1", "--tau", "10", "--kmax", "10",
                                 "--eps", "1e-10"])
    assert result.exit_code == 3
    assert "increase depth to at least" in result.output


def test_low_precision_exit_3(runner):
    result = runner.invoke(cli, ["transient", "--lambda", "1", "--mu", "1", "--tau", "1", "--kmax", "2",
                                 "--precision-bits", "64"])
    assert result.exit_code == 3
    assert "bits" in result.output


def test_exact_summation(runner):
    meta, rows = run_csv(runner, ["transient", "--lambda", "1", "--mu", "1", "--tau", "1/2", "--kmax", "3",
                                  "--exact"])
    assert meta["precision_mode"] == "exact-rational"
    assert meta["precision_bits"] == "null"
    assert len(rows) == 4


def test_embedded_preset(runner):
    meta, rows = run_csv(runner, ["embedded", "--lambda", "1", "--mu", "1", "--n", "3"])
    assert meta["verdict"] == "equal"
    assert meta["normalized"] == "true"
    assert meta["parity"] == "true"
    values = {(int(row["n"]), int(row["k"])): row for row in rows}
    assert values[(3, 1)]["p"] == "20/21"
    assert values[(3, 3)]["p_num"] == "1"
    assert values[(3, 3)]["p_den"] == "21"
    assert values[(2, 0)]["p"] == "2/3"


@pytest.mark.parametrize("method", ["recursion", "closed"])
def test_embedded_single_method(runner, method):
    meta, rows = run_csv(runner, ["embedded", "--lambda", "1", "--mu", "2", "--n", "4", "--method", method])
    assert "verdict" not in meta
    assert len(rows) == 15


def test_embedded_rates_file(runner, workdir):
    (workdir / "rates.json").write_text('{"birth": ["1", "2", "1/2", "3"], "death": ["0", "1", "1", "2"]}',
                                        encoding="utf-8")
    meta, rows = run_csv(runner, ["embedded", "--rates", "rates.json", "--n", "4"])
    assert meta["verdict"] == "equal"
    assert json.loads(meta["rates"])["birth"] == ["1", "2", "1/2", "3"]
    assert sum(float(row["p_float"]) for row in rows if row["n"] == "4") == pytest.approx(1)


def test_embedded_bad_rates_file(runner, workdir):
    (workdir / "bad.json").write_text('{"birth": ["1", "x"], "death": ["0", "1"]}', encoding="utf-8")
    result = runner.invoke(cli, ["embedded", "--rates", "bad.json", "--n", "2"])
    assert result.exit_code == 2
    assert "bad.json:1:" in result.output


def test_embedded_rates_conflict(runner):
    result = runner.invoke(cli, ["embedded", "--rates", "r.json", "--lambda", "1", "--n", "2"])
    assert result.exit_code == 2


def test_bessel(runner):
    _, rows = run_csv(runner, ["bessel", "--depth", "5"])
    assert [int(row["bessel"]) for row in rows] == [1, 1, 2, 5, 14, 43]

    _, entries = run_csv(runner, ["bessel", "--depth", "5", "--triangle"], "m.csv")
    assert len(entries) == 21
    assert entries[-1] == {"i": "5", "k": "5", "m": "1"}


def test_validate_failure_exit_1(runner):
    result = runner.invoke(cli, ["--output", "v.csv", "validate", "--lambda", "1", "--mu", "1", "--tau", "1",
                                 "--kmax", "3", "--eps", "1e-3", "--tol", "1e-12", "--report"])
    assert result.exit_code == 1
    assert "VALIDATION REPORT" in result.output
    meta, rows = read_csv("v.csv")
    assert meta["verdict"] == "fail"
    assert any(row["verdict"] == "fail" for row in rows)


def test_simulate_is_reproducible(runner, workdir):
    args = ["simulate", "--lambda", "1", "--mu", "1", "--t", "1", "--paths", "200", "--seed", "3"]
    meta, rows = run_csv(runner, args, "a.csv")
    run_csv(runner, args, "b.csv")
    assert (workdir / "a.csv").read_text() == (workdir / "b.csv").read_text()
    assert meta["mode"] == "continuous"
    assert sum(int(row["count"]) for row in rows) == 200


def test_simulate_embedded(runner):
    meta, rows = run_csv(runner, ["simulate", "--lambda", "1", "--mu", "1", "--steps", "3",
                                  "--paths", "100", "--seed", "1"])
    assert meta["mode"] == "embedded"
    assert all(int(row["count"]) == 0 for row in rows if int(row["k"]) % 2 == 0)


def test_simulate_needs_one_horizon(runner):
    result = runner.invoke(cli, ["simulate", "--lambda", "1", "--mu", "1", "--t", "1", "--steps", "2"])
    assert result.exit_code == 2


def test_json_format(runner, workdir):
    result = runner.invoke(cli, ["--format", "json", "--output", "out.json", "bessel", "--depth", "3"])
    assert result.exit_code == 0
    payload = json.loads((workdir / "out.json").read_text())
    assert payload["meta"]["command"] == "bessel"
    assert payload["rows"] == [{"i": 0, "bessel": 1}, {"i": 1, "bessel": 1},
                               {"i": 2, "bessel": 2}, {"i": 3, "bessel": 5}]


def test_config_file(runner, workdir):
    (workdir / "settings.yaml").write_text("output_format: json\nepsilon: 1.0e-12\n", encoding="utf-8")
    result = runner.invoke(cli, ["--config", "settings.yaml", "transient", "--lambda", "1", "--mu", "1",
                                 "--tau", "1/2", "--kmax", "2"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["meta"]["epsilon"] == 1e-12


@pytest.mark.parametrize("command", ["transient", "validate"])
def test_metadata_records_window(runner, workdir, command):
    (workdir / "settings.yaml").write_text("window: 7\n", encoding="utf-8")
    meta, _ = run_csv(runner, ["--config", "settings.yaml", command, "--lambda", "1", "--mu", "1",
                               "--tau", "1/2", "--kmax", "2"])
    assert meta["window"] == "7"
    assert meta["gamma_power"] == "2"


@pytest.mark.parametrize("text", ["depth: -1\n", "precision_mode: decimal\n", "- just\n- a list\n"])
def test_invalid_config_exit_2(runner, workdir, text):
    (workdir / "bad.yaml").write_text(text, encoding="utf-8")
    result = runner.invoke(cli, ["--config", "bad.yaml", "bessel", "--depth", "2"])
    assert result.exit_code == 2


def test_missing_config_exit_2(runner):
    result = runner.invoke(cli, ["--config", "absent.json", "bessel", "--depth", "2"])
    assert result.exit_code == 2


def test_cache_dir(runner, workdir):
    args = ["--cache-dir", "cache", "transient", "--lambda", "1", "--mu", "1", "--tau", "1/2", "--kmax", "2",
            "--depth", "40"]
    _, first = run_csv(runner, args, "first.csv")
    _, second = run_csv(runner, args, "second.csv")
    assert len(list((workdir / "cache").glob("L_*_40.json"))) == 1
    assert first == second
