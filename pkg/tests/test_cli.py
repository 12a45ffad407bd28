import csv
import io
import json

import numpy as np
import pytest

from rkhsreg import config as cfg
from rkhsreg.cli import main
from rkhsreg.simulation import M1


def write(tmp_path, obj, name="conf.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def scenario(**extra):
    base = {"kind": "scenario", "curve": "M1", "covariance": {"kind": "wiener"}, "n": 100, "m": 10, "h": 0.1, "grid": 81}
    base.update(extra)
    return base


def read_csv(text):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    return rows[0], np.array(rows[1:], dtype=float)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_estimate_noiseless_projection(tmp_path, capsys):
    conf = write(tmp_path, scenario(method="pro", data={"noiseless": True}))
    code, out, _ = run(capsys, "estimate", "--config", conf)
    assert code == 0
    header, data = read_csv(out)
    assert header == ["x", "ghat"]
    inner = (data[:, 0] >= 0.1) & (data[:, 0] <= 0.9)
    assert np.max(np.abs(data[inner, 1] - M1(data[inner, 0]))) < 0.02


def test_estimate_gm_constant(tmp_path, capsys):
    conf = write(tmp_path, scenario(n=20, method="gm", h=0.2, data={"ybar": [2.5] * 20}))
    _, data = read_csv(run(capsys, "estimate", "--config", conf)[1])
    inner = (data[:, 0] >= 0.2) & (data[:, 0] <= 0.8)
    assert np.allclose(data[inner, 1], 2.5, atol=1e-5)


def test_estimate_csv_data(tmp_path, capsys):
    t = (np.arange(1, 11) - 0.5) / 10
    rows = np.vstack([t, M1(t) + 0.1, M1(t) - 0.1])
    path = tmp_path / "y.csv"
    np.savetxt(path, rows, delimiter=",")
    conf = write(tmp_path, scenario(n=10, h=0.3, data={"csv": str(path)}))
    _, data = read_csv(run(capsys, "estimate", "--config", conf)[1])
    assert data.shape == (81, 2)


def test_estimate_simulated_echoes_seed(tmp_path, capsys):
    conf = write(tmp_path, scenario(seed=42))
    out = run(capsys, "estimate", "--config", conf, "--seed", "7")[1]
    assert out.splitlines()[0] == "# seed=7"


def test_bad_method(tmp_path, capsys):
    conf = write(tmp_path, scenario())
    code, out, err = run(capsys, "estimate", "--config", conf, "--method", "loess")
    assert code == 2 and out == ""
    payload = json.loads(err)
    assert payload["valid_methods"] == ["pro", "pro-fast", "pro-asym", "gm", "pc", "cl"]
    assert "pro-fast" in payload["message"]


def test_schema_error_path(tmp_path, capsys):
    bench = {"kind": "bench", "blocks": [{"name": "a", "curve": "M1", "covariance": {"kind": "wiener"}, "n": 10, "m": [], "methods": ["gm"]}]}
    code, _, err = run(capsys, "bench", "--config", write(tmp_path, bench))
    assert code == 2
    assert json.loads(err)["path"] == "$.blocks[0].m"


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["risk"], ["risk", "--config", "missing.json"], ["bench", "--config", "table1", "--threads", "0"]])
def test_usage_errors_are_json(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code != 0
    assert "error" in json.loads(err)


def test_invalid_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run(capsys, "risk", "--config", str(path))
    assert code == 2 and "line 1" in json.loads(err)["message"]


def test_wrong_config_kind(capsys):
    code, _, err = run(capsys, "risk", "--config", "table1")
    assert code == 2 and json.loads(err)["error"] == "config"


def test_risk_outputs(tmp_path, capsys):
    conf = write(tmp_path, scenario(n=10, method="gm", h=0.335, grid=201))
    out = tmp_path / "risk.csv"
    assert run(capsys, "risk", "--config", conf, "--out", str(out))[0] == 0
    text = out.read_text()
    summary = json.loads(text.splitlines()[0][2:])
    assert float(summary["IMSE"]) == pytest.approx(4.658e-2, rel=0.1)
    header, data = read_csv(text)
    assert header == ["x", "bias2", "var", "mse"] and data.shape == (201, 4)


def test_bandwidth(tmp_path, capsys):
    conf = write(tmp_path, scenario(n=10, method="gm", grid=101))
    code, out, _ = run(capsys, "bandwidth", "--config", conf, "--hopt-variant", "paper")
    res = json.loads(out)
    assert code == 0 and res["hopt_variant"] == "paper"
    assert float(res["h_opt"]) == pytest.approx(0.335, abs=0.03)


def test_bench_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "bench", "--config", "table1", "--out", str(a), "--grid", "51")
    run(capsys, "bench", "--config", "table1", "--out", str(b), "--grid", "51", "--threads", "3")
    assert a.read_bytes() == b.read_bytes()
    header, data = read_csv(a.read_text().replace("wiener,", "0,").replace(",gm,", ",0,").replace(",pro,", ",1,"))
    assert header == ["block", "method", "m", "Ibias2", "Ivar", "IMSE", "h_opt"] and data.shape == (6, 7)


def test_figure_small(tmp_path, capsys):
    fig = cfg.preset("figure1")
    fig.update({"n": 30, "m": [5, 50], "h": 0.2, "replications": 20, "grid": 21})
    code, out, _ = run(capsys, "figure", "--config", write(tmp_path, fig))
    assert code == 0
    assert out.splitlines()[0] == "# seed=20240101"
    header, data = read_csv(out)
    assert header == ["x", "g", "mean_m5", "mean_m50"]
    assert np.max(np.abs(data[:, 3] - data[:, 1])) < np.max(np.abs(data[:, 2] - data[:, 1]))


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and all(c["pass"] for c in json.loads(out))


def test_boundary_flag(tmp_path, capsys):
    conf = write(tmp_path, scenario(n=10, method="gm", h=0.3, grid=11))
    renorm = run(capsys, "risk", "--config", conf)[1]
    none = run(capsys, "risk", "--config", conf, "--boundary", "none")[1]
    assert renorm != none
    assert run(capsys, "risk", "--config", conf, "--boundary", "reflect")[0] == 2


@pytest.mark.parametrize("name", cfg.PRESETS)
def test_presets_validate(name):
    cfg.validate(cfg.preset(name))
