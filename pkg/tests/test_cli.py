import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from etacr.cli import ConfigError, build_config, main, parse_config_text
from etacr.dist import simpson_weights


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def _run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_config_parsing():
    v = parse_config_text("# comment\nA = 0.9  # trailing\n\nT=7\nmethod = particle\n")
    assert v == {"A": 0.9, "T": 7, "method": "particle"}
    cfg = build_config(v)
    assert cfg.system.A == 0.9 and cfg.system.T == 7 and cfg.system.x0 == -2.0


@pytest.mark.parametrize("text, field", [
    ("bogus = 1", "bogus"),
    ("T = 2.5", "T"),
    ("sigma = abc", "sigma"),
    ("no equals sign", "line 1"),
])
def test_config_parse_errors(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert exc.value.field == field


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("method = open-loop\nT = 3\n")
    rc, out, _ = _run(capsys, "coeffs", "--config", str(cfg), "--T", "4")
    assert rc == 0
    rows = _rows(out)
    assert rows[0] == ["n", "pbar", "p", "method"]
    assert len(rows) == 5 and rows[-1][3] == "open-loop"


@pytest.mark.parametrize("argv, field", [
    (["coeffs", "--sigma", "-1"], "sigma"),
    (["acr", "--method", "magic"], "method"),
    (["acr", "--format", "xml"], "format"),
    (["coeffs", "--nodes", "100"], "nodes"),
    (["platoon", "--etas", "1,x"], "etas"),
    (["coeffs", "--config", "/nonexistent/run.cfg"], "config"),
])
def test_config_errors_exit_2(capsys, argv, field):
    rc, out, err = _run(capsys, *argv)
    assert rc == 2 and out == ""
    assert err.count("\n") == 1 and err.startswith("error: config: " + field)


def test_runtime_error_exit_1(capsys):
    rc, _, err = _run(capsys, "coeffs", "--method", "particle", "--eta", "1e-12", "--particles", "200")
    assert rc == 1
    assert err.startswith("error: runtime: DegenerateTruncation") and err.count("\n") == 1


def test_usage_error_is_one_line():
    proc = subprocess.run([sys.executable, "-m", "etacr", "acr", "--nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("error: usage:") and proc.stderr.count("\n") == 1


def test_coeffs_examples(capsys):
    _, out, _ = _run(capsys, "coeffs")
    assert float(_rows(out)[2][1]) == pytest.approx(0.6827, abs=1e-3)
    _, out, _ = _run(capsys, "coeffs", "--method", "open-loop")
    assert float(_rows(out)[3][1]) == pytest.approx(0.4679, abs=1e-3)
    _, out, _ = _run(capsys, "coeffs", "--T", "1")
    assert _rows(out)[1] == ["1", "1.0", "1.0", "quadrature"]


def test_acr_examples(capsys):
    _, out, _ = _run(capsys, "acr", "--horizon", "10")
    rows = _rows(out)
    assert rows[0] == ["k", "quadrature"]
    assert float(rows[4][1]) == pytest.approx(0.2818, abs=2e-3)
    assert rows[-2][0] == "stationary" and rows[-1] == ["jury_stable", "true"]
    _, out, _ = _run(capsys, "acr", "--method", "monte-carlo", "--horizon", "5")
    assert float(_rows(out)[3][1]) == pytest.approx(0.3175, abs=0.015)


def test_acr_all_methods(capsys):
    _, out, _ = _run(capsys, "acr", "--method", "all", "--horizon", "6", "--trials", "2000")
    rows = _rows(out)
    assert rows[0] == ["k", "quadrature", "particle", "open-loop", "open-loop-particle",
                       "monte-carlo"]
    assert [r[0] for r in rows[1:8]] == [str(k) for k in range(7)]
    assert all(len(r) == 6 for r in rows)
    assert rows[-1][-1] == ""  # no Jury verdict for an empirical column


def test_json_document(capsys):
    _, out, _ = _run(capsys, "acr", "--format", "json", "--horizon", "5", "--workers", "2")
    doc = json.loads(out)
    assert set(doc) == {"config", "results", "diagnostics"}
    assert "workers" not in doc["config"] and doc["config"]["T"] == 5
    res = doc["results"]["quadrature"]
    assert len(res["values"]) == 6 and res["jury_stable"] is True


def test_compare_outputs(tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--output", str(out), "--trials", "3000", "--horizon", "10"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(["acr_table.csv", "moments.csv"]
                           + [f"pdf_{w}_k{k}.csv" for w in ("e", "ehat") for k in range(2, 6)])
    acr = _rows((out / "acr_table.csv").read_text())
    assert acr[0] == ["k", "gt", "quadrature", "particle", "open-loop", "open-loop-particle"]
    # holds over the tabulated range k = 3..5 and for the stationary values; the
    # oscillating transients cross at k = 6
    for row in acr[4:7] + [acr[-2]]:
        assert float(row[2]) < float(row[4])
    mom = _rows((out / "moments.csv").read_text())
    k2 = [float(x) for x in mom[2][1:5]]
    assert k2 == pytest.approx([0.0, 0.0, 1.4549, 2.5625], abs=1e-3)
    pdf = np.loadtxt(out / "pdf_ehat_k3.csv", delimiter=",", skiprows=1)
    assert pdf.shape[1] == 2
    h = pdf[1, 0] - pdf[0, 0]
    assert simpson_weights(len(pdf), h) @ pdf[:, 1] == pytest.approx(1.0, abs=1e-6)
    assert not list(out.glob(".*"))  # no temporary files left behind


def test_platoon_outputs(tmp_path):
    out = tmp_path / "pl"
    assert main(["platoon", "--output", str(out), "--trials", "3000", "--plot"]) == 0
    sweep = _rows((out / "sweep.csv").read_text())
    assert len(sweep) == 5 and all(float(r[4]) > 1 for r in sweep[1:])
    track = _rows((out / "tracking.csv").read_text())
    assert track[0] == ["t", "mean_gap", "mean_velocity", "leader_velocity"]
    assert len(track) - 1 == 401
    traj = np.loadtxt(out / "acr_eta1.csv", delimiter=",", skiprows=1)
    assert traj.shape == (401, 5)
    assert np.std(traj[-40:, 2]) < 1e-2
    for name in ("tracking.png", "sweep.png", "acr_eta1.png"):
        assert (out / name).read_bytes()[:4] == b"\x89PNG"


def test_plot_is_opt_in(tmp_path):
    out = tmp_path / "pl"
    main(["platoon", "--output", str(out), "--trials", "500", "--duration", "2", "--etas", "1"])
    assert not list(out.glob("*.png"))
