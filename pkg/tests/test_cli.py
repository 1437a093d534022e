import json

import numpy as np
import pytest

from rcarpanel.cli import main
from rcarpanel.panelio import read_panel, read_report

BASE_MODEL = """\
model:
  order: 1
  coefficients:
    kind: discrete
    atoms: [[0.2], [0.4]]
  noise:
    kind: constant
    sigma2: 1.0
  n_individuals: {n}
  horizon: {T}
seed: 7
"""


def write_cfg(tmp_path, text, name="model.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_simulate_writes_dense_panel(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=2, T=3))
    out = tmp_path / "panel.csv"
    rc = main(["simulate", cfg, "--out", str(out), "--keep-truth"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "omega,t,y"
    assert len(lines) == 1 + 2 * 4
    truth = (tmp_path / "panel.csv.truth.csv").read_text().splitlines()
    assert truth[0] == "omega,sigma2,alpha1"
    assert len(truth) == 1 + 2
    assert "seed" in capsys.readouterr().out


def test_simulate_same_seed_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=5, T=10))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", cfg, "--out", str(a)]) == 0
    assert main(["simulate", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert main(["simulate", cfg, "--out", str(c), "--seed", "8"]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_seed_env_override(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=3, T=5))
    a, b, c = (tmp_path / x for x in ("a.csv", "b.csv", "c.csv"))
    main(["simulate", cfg, "--out", str(a)])
    monkeypatch.setenv("RCARPANEL_SEED", "99")
    main(["simulate", cfg, "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()
    # an explicit flag beats the environment
    main(["simulate", cfg, "--out", str(c), "--seed", "7"])
    assert a.read_bytes() == c.read_bytes()


def test_panel_round_trip(tmp_path):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=4, T=6))
    out = tmp_path / "panel.csv"
    truth = tmp_path / "truth.csv"
    main(["simulate", cfg, "--out", str(out), "--truth", str(truth)])
    panel = read_panel(str(out), order=1, truth_path=str(truth))
    assert panel.y.shape == (4, 7)
    assert panel.truth_coeffs.shape == (4, 1)
    assert set(np.round(panel.truth_coeffs[:, 0], 10)) <= {0.2, 0.4}


def test_estimate_report_structure(tmp_path):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=300, T=20))
    out = tmp_path / "panel.csv"
    truth = tmp_path / "truth.csv"
    main(["simulate", cfg, "--out", str(out), "--truth", str(truth)])
    rep_path = tmp_path / "report.json"
    rc = main(["estimate", str(out), "--order", "1", "--pathway", "both",
               "--truth", str(truth), "--out", str(rep_path)])
    assert rc == 0
    rep = read_report(str(rep_path))
    assert rep["schema_version"] == 1
    cs = rep["pathways"]["cross_sectional"]
    assert set(cs["upsilon"]) == {"0", "1", "2"}
    assert cs["omega_method"] == "scalar_telescoping"
    assert abs(cs["omega"][0][0] - 1.0) < 0.2
    pi = rep["pathways"]["per_individual"]
    assert pi["n_individuals"] == 300
    assert rep["truth_errors"]["per_individual"]["sigma2_error_mean"] < 0.5
    assert rep["truth_errors"]["cross_sectional"]["omega_error_max"] < 0.5


def test_estimate_zero_panel_degrades(tmp_path, capsys):
    path = tmp_path / "zero.csv"
    rows = ["omega,t,y"]
    for w in range(1, 4):
        for t in range(6):
            rows.append(f"{w},{t},0")
    path.write_text("\n".join(rows) + "\n")
    rc = main(["estimate", str(path), "--order", "1",
               "--pathway", "cross_sectional"])
    assert rc == 0
    cs = json.loads(capsys.readouterr().out)["pathways"]["cross_sectional"]
    assert cs["upsilon"]["0"] == [[0.0]]
    assert "rho" not in cs and cs["omega"] is None
    assert "rank_warning" in cs["diagnostics"]


def test_estimate_pathways_agree_for_degenerate_law(tmp_path):
    cfg = write_cfg(tmp_path, """\
model:
  coefficients: {kind: degenerate, value: [0.5]}
  noise: {kind: constant, sigma2: 1.0}
  n_individuals: 500
  horizon: 40
seed: 3
""")
    out = tmp_path / "panel.csv"
    main(["simulate", cfg, "--out", str(out)])
    rep_path = tmp_path / "rep.json"
    main(["estimate", str(out), "--order", "1", "--pathway", "both",
          "--out", str(rep_path)])
    rep = read_report(str(rep_path))
    rho1 = rep["pathways"]["cross_sectional"]["rho"]["1"]
    mean_a = rep["pathways"]["per_individual"]["a_hat_mean"][0][0]
    assert abs(rho1 - 0.5) < 0.05
    assert abs(mean_a - 0.5) < 0.05


def test_analyze_stationary_report(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=1, T=1))
    rc = main(["analyze", cfg])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["stationarity"]["verdict"] == "stationary"
    assert rep["stationarity"]["second_order"]["stationary"] is True
    assert len(rep["stationarity"]["atoms"]) == 2
    assert "covariances" in rep and "spectral" in rep
    u0 = rep["covariances"]["unconditional"]["0"]
    assert abs(u0[0][0] - 1.1160714285714286) < 1e-9
    assert rep["effective_config"]["model"]["n_individuals"] == 1


def test_analyze_nonstationary_still_exits_zero(tmp_path, capsys):
    cfg = write_cfg(tmp_path, """\
model:
  coefficients: {kind: degenerate, value: [1.2]}
  noise: {kind: constant, sigma2: 1.0}
  n_individuals: 1
  horizon: 1
""")
    rc = main(["analyze", cfg])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["stationarity"]["verdict"] == "nonstationary"
    assert "covariances" not in rep and "spectral" not in rep


def test_config_unknown_key_is_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=1, T=1) + "modle: {}\n")
    rc = main(["analyze", cfg])
    assert rc == 2
    assert "modle" in capsys.readouterr().err


def test_config_nested_unknown_key_dotted_path(tmp_path, capsys):
    text = BASE_MODEL.format(n=1, T=1).replace("sigma2: 1.0",
                                               "sigma2: 1.0\n    sd: 2.0")
    rc = main(["analyze", write_cfg(tmp_path, text)])
    assert rc == 2
    assert "model.noise.sd" in capsys.readouterr().err


def test_missing_config_file_is_exit_2(tmp_path, capsys):
    rc = main(["analyze", str(tmp_path / "nope.yaml")])
    assert rc == 2


def test_malformed_panel_is_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("omega,t,y\n1,0,1.0\n1,0,2.0\n")
    rc = main(["estimate", str(bad), "--order", "1"])
    assert rc == 3
    assert "duplicate" in capsys.readouterr().err
    bad.write_text("omega,t,y\n1,0,huh\n")
    assert main(["estimate", str(bad), "--order", "1"]) == 3


def test_mc_plan_validation_is_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=50, T=10) + """\
mc:
  experiment: clt
  grid: [100]
  replications: 10
  statistics: [normality]
""")
    rc = main(["mc", cfg])
    assert rc == 2
    assert "50" in capsys.readouterr().err


def test_mc_consistency_report(tmp_path):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=50, T=10) + """\
mc:
  experiment: consistency
  grid: [30, 60]
  replications: 5
  lags: [0, 1]
""")
    out = tmp_path / "mc.json"
    rc = main(["mc", cfg, "--out", str(out)])
    assert rc == 0
    rep = read_report(str(out))
    assert rep["result"]["kind"] == "consistency"
    assert [c["grid_value"] for c in rep["result"]["cells"]] == [30, 60]
    assert rep["effective_config"]["mc"]["replications"] == 5


def test_mc_screen_failure_is_exit_5(tmp_path, capsys):
    cfg = write_cfg(tmp_path, """\
model:
  coefficients: {kind: degenerate, value: [0.9]}
  noise: {kind: constant, sigma2: 1.0}
  n_individuals: 5
  horizon: 10
seed: 4
mc:
  experiment: clt
  grid: [5]
  replications: 300
  lags: [0]
  statistics: [normality]
""")
    rc = main(["mc", cfg])
    assert rc == 5
    rep = json.loads(capsys.readouterr().out)
    assert rep["result"]["passed"] is False


def test_mc_diagnostic(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=500, T=5) + """\
mc:
  experiment: diagnostic
  grid: [500]
  replications: 1
""")
    rc = main(["mc", cfg])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["result"]["flagged"] is False


def test_oracle_known_and_unknown(capsys):
    assert main(["oracle", "ar1_gamma0", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "1.3333333333333333" in out
    assert main(["oracle", "no_such_case"]) == 2
    assert main(["oracle", "list"]) == 0
    assert "two_atom_upsilon" in capsys.readouterr().out


def test_mc_workers_flag_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, BASE_MODEL.format(n=40, T=8) + """\
mc:
  experiment: consistency
  grid: [20, 40]
  replications: 6
""")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["mc", cfg, "--out", str(a), "--workers", "1"]) == 0
    assert main(["mc", cfg, "--out", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
