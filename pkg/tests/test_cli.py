import json
import time

import numpy as np
import pytest

from gasinar.cli import main, read_counts_csv
from gasinar.exceptions import InputError


def _write(path, text):
    path.write_text(text)
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip().splitlines()[-1]
    return code, json.loads(out)


def test_read_plain_column(tmp_path):
    assert read_counts_csv(_write(tmp_path / "a.csv", "3\n5\n2\n")).tolist() == [3, 5, 2]


def test_read_header_and_date(tmp_path):
    f = _write(tmp_path / "b.csv", "date,count\n1995-01,12\n1995-02,9\n")
    assert read_counts_csv(f).tolist() == [12, 9]


def test_read_named_column(tmp_path):
    f = _write(tmp_path / "c.csv", "t,y,true_alpha\n0,4,0.5\n1,6,0.4\n")
    assert read_counts_csv(f).tolist() == [4, 6]


@pytest.mark.parametrize("text,line", [("3\n2.5\n", 2), ("count\n1\n-4\n", 3), ("1\nabc\n", 2)])
def test_read_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(InputError, match=f"line {line}"):
        read_counts_csv(_write(tmp_path / "bad.csv", text))


def test_read_empty(tmp_path):
    with pytest.raises(InputError):
        read_counts_csv(_write(tmp_path / "e.csv", ""))


def test_simulate_fit_forecast_round_trip(tmp_path, capsys):
    sim_dir, fit_dir, fc_dir = tmp_path / "sim", tmp_path / "fit", tmp_path / "fc"
    code, doc = _run(capsys, "simulate", "--T", 500, "--seed", 4, "--output", sim_dir)
    assert code == 0 and doc["status"] == "ok"
    series = sim_dir / "series.csv"
    before = series.read_bytes()

    code, _ = _run(capsys, "fit", "--input", series, "--output", fit_dir, "--restarts", 2, "--draws", 200)
    assert code == 0
    fit_doc = json.loads((fit_dir / "fit.json").read_text())
    result = fit_doc["result"]
    assert fit_doc["seed"] == 0 and fit_doc["version"]
    assert set(result["fit"]["params"]) == {"omega", "beta", "tau", "mu"}
    assert set(result["fit"]["std_errors"]) == {"omega", "beta", "tau", "mu"}
    assert "aic" in result["fit"] and result["lr_vs_static"]["df"] == 2
    assert {"sufficient_value", "empirical_value"} <= set(result["contraction"])
    assert (fit_dir / "filter_path.csv").exists() and (fit_dir / "bands.csv").exists()

    code, _ = _run(capsys, "forecast", "--input", series, "--fit-json", fit_dir / "fit.json",
                   "--horizon", 6, "--draws", 2000, "--output", fc_dir)
    assert code == 0
    fc = json.loads((fc_dir / "forecast.json").read_text())
    assert [d["horizon"] for d in fc["result"]["forecasts"]] == [1, 2, 3, 4, 5, 6]
    for h in range(1, 7):
        rows = (fc_dir / f"forecast_h{h}.csv").read_text().splitlines()
        assert rows[0] == "x,probability"
        assert abs(sum(float(r.split(",")[1]) for r in rows[1:]) - 1.0) < 1e-9
    assert series.read_bytes() == before


def test_outputs_are_byte_identical(tmp_path, capsys):
    _run(capsys, "simulate", "--model", "inar-negbin", "--T", 200, "--seed", 8, "--output", tmp_path / "s")
    series = tmp_path / "s" / "series.csv"
    for out in ("a", "b"):
        code, _ = _run(capsys, "fit", "--input", series, "--model", "gas-negbin", "--restarts", 1,
                       "--draws", 100, "--seed", 3, "--output", tmp_path / out)
        assert code == 0
        code, _ = _run(capsys, "forecast", "--input", series, "--model", "rc-poisson", "--horizon", 2,
                       "--draws", 1000, "--restarts", 1, "--seed", 3, "--output", tmp_path / out)
        assert code == 0
    for name in ("fit.json", "bands.csv", "filter_path.csv", "forecast.json", "forecast_h2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_error_document_and_no_partial_output(tmp_path, capsys):
    bad = _write(tmp_path / "bad.csv", "4\n2.5\n3\n")
    code, doc = _run(capsys, "fit", "--input", bad, "--output", tmp_path / "out")
    assert code != 0 and doc["status"] == "error" and "line 2" in doc["error"]["message"]
    assert not (tmp_path / "out").exists()

    flat = _write(tmp_path / "zeros.csv", "0\n" * 40)
    code, doc = _run(capsys, "fit", "--input", flat, "--output", tmp_path / "out2")
    assert code != 0 and doc["error"]["type"] == "NoSurvivalInformationError"
    assert not (tmp_path / "out2").exists()


def test_usage_errors_are_machine_readable(capsys, tmp_path):
    code, doc = _run(capsys, "fit", "--model", "garch", "--input", "x.csv")
    assert code == 2 and doc["status"] == "error"
    code, doc = _run(capsys, "replicate", "--study", "table1", "--scale", 5, "--output", tmp_path)
    assert code == 2 and "20" in doc["error"]["message"]


def test_simulate_dgp_and_params(tmp_path, capsys):
    code, _ = _run(capsys, "simulate", "--dgp", "slow-steps", "--T", 100, "--output", tmp_path / "d")
    assert code == 0
    y = read_counts_csv(tmp_path / "d" / "series.csv")
    assert y.size == 100
    code, _ = _run(capsys, "simulate", "--model", "inar-poisson", "--param", "alpha=0.2", "--param", "mu=3",
                   "--T", 50, "--output", tmp_path / "p")
    doc = json.loads((tmp_path / "p" / "simulate.json").read_text())
    assert code == 0 and doc["result"]["model"]["params"]["alpha"] == 0.2
    code, doc = _run(capsys, "simulate", "--model", "inar-poisson", "--param", "beta=0.2", "--output", tmp_path / "q")
    assert code == 2


def test_evaluate_command(tmp_path, capsys):
    _run(capsys, "simulate", "--T", 140, "--seed", 2, "--output", tmp_path / "s")
    code, _ = _run(capsys, "evaluate", "--input", tmp_path / "s" / "series.csv", "--model", "inar-poisson",
                   "--model", "gas-poisson", "--split", 130, "--horizon", 2, "--draws", 1000, "--restarts", 1,
                   "--output", tmp_path / "e")
    assert code == 0
    doc = json.loads((tmp_path / "e" / "evaluate.json").read_text())
    assert set(doc["result"]["reports"]) == {"inar-poisson", "gas-poisson"}
    rows = (tmp_path / "e" / "evaluate.csv").read_text().splitlines()
    assert rows[0] == "model,horizon,mse,log_score,n_origins,skipped" and len(rows) == 5


def test_replicate_smoke_under_ten_minutes(tmp_path, capsys):
    start = time.perf_counter()
    code, _ = _run(capsys, "replicate", "--study", "table1", "--scale", 20, "--restarts", 2, "--output", tmp_path)
    assert code == 0
    assert time.perf_counter() - start < 600
    doc = json.loads((tmp_path / "replicate_table1.json").read_text())
    est = doc["result"]["estimates"]
    assert est["beta"]["n"] == 20 and {"mean", "bias", "sd", "rmse", "mean_se"} <= set(est["beta"])
    assert doc["seed"] == 0 and doc["config"]["replications"] == 20
    rows = (tmp_path / "replicate_table1.csv").read_text().splitlines()
    assert rows[0].startswith("parameter,true,mean") and len(rows) == 5


def test_replicate_table2_small(tmp_path, capsys):
    code, _ = _run(capsys, "replicate", "--study", "table2", "--scale", 20, "--T", 100, "--restarts", 1,
                   "--output", tmp_path)
    assert code == 0
    doc = json.loads((tmp_path / "replicate_table2.json").read_text())
    res = doc["result"]["results"]
    assert set(res) == {"fast-sine", "slow-sine", "fast-steps", "slow-steps"}
    for rows in res.values():
        for r in rows.values():
            assert np.isfinite(r["root_mse"]) and r["n"] + r["failures"] == 20
