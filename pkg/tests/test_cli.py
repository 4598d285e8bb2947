import csv
import io
import json
import math
import subprocess
import sys

import pytest
from numpy.testing import assert_allclose

from extremal_locus.cli import dumps, run


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def report(*argv):
    code, out, err = invoke(*argv)
    assert code == 0, err
    return json.loads(out)


# ----------------------------------------------------------- serialisation


def test_dumps_float_format():
    text = dumps({"a": 1.0, "b": 0.1, "c": float("nan"), "d": [2, math.inf], "e": None, "f": "x"})
    data = json.loads(text)
    assert data == {"a": 1.0, "b": 0.1, "c": None, "d": [2, None], "e": None, "f": "x"}
    assert '"a": 1.0' in text and '"b": 0.10000000000000001' in text


def test_dumps_round_trips_exactly():
    vals = [math.pi, 1 / 3, 1e-300, -2.5e17, 123456789.123]
    assert json.loads(dumps({"v": vals}))["v"] == vals


# -------------------------------------------------------------- subcommands


def test_constants_dim3():
    rep = report("constants", "--dim", "3")
    assert rep["schema"] == 1 and rep["command"] == "constants"
    res = rep["results"]
    assert_allclose(res["lambda1"], math.pi**2, rtol=1e-13)
    assert_allclose(res["c1"], -math.sqrt(2 * math.pi**2 / (4 * math.pi)), rtol=1e-13)
    for key in ("K1", "K2", "K3", "K4"):
        assert_allclose(res["K_assembled"][key], res["K"][key], rtol=1e-10)
    assert set(rep) == {"schema", "command", "config", "results", "provenance", "metadata"}
    assert rep["config"]["dim"] == 3


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["h-spectrum", "--dim", "2", "--degree", "4", "--report", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_h_spectrum_csv(tmp_path):
    path = tmp_path / "h.csv"
    rep = report("h-spectrum", "--dim", "2", "--degree", "3", "--csv", str(path))
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["j", "alpha", "closed_form"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]
    modes = rep["results"]["modes"]
    assert abs(modes[0]["alpha"]) < 1e-7
    assert_allclose(modes[1]["alpha"], modes[1]["closed_form"], rtol=1e-7)


def test_invariants_builtin_analytic_and_numeric():
    base = ("invariants", "--metric", "sphere", "--param", "a=2.0", "--point", "1.0,0.5")
    exact = report(*base)["results"]["invariants"]
    num = report(*base, "--numeric")
    assert_allclose(exact["R"], 0.5, rtol=1e-14)
    assert_allclose(num["results"]["invariants"]["R"], 0.5, rtol=1e-7)
    assert num["provenance"]["curvature_method"] == "finite-difference"


def test_phi_on_metric_file(tmp_path):
    doc = tmp_path / "conf.metric"
    doc.write_text("dim 2\ng11 = exp(x1*x2/3)\ng12 = 0\ng22 = exp(x1*x2/3)\nbounds x1 = [-2, 2]\nbounds x2 = [-2, 2]\n")
    rep = report("phi", "--metric", str(doc), "--point", "0.3,0.4", "--eps", "0.1,0.05")
    vals = rep["results"]["values"]
    assert [v["eps"] for v in vals] == [0.1, 0.05]
    for v in vals:
        assert_allclose(v["eps_sq_phi"], v["eps"] ** 2 * v["phi"], rtol=1e-15)
    assert_allclose(rep["results"]["r_two_path"], rep["results"]["r"], rtol=1e-9)
    r0 = report("phi", "--metric", str(doc), "--point", "0.3,0.4", "--eps", "0.1", "--order", "0")
    assert r0["results"]["values"][0]["phi"] == r0["results"]["invariants"]["R"]


def test_critical_points_flat_torus():
    rep = report("critical-points", "--metric", "flat_torus", "--eps", "0.1", "--grid", "5")
    assert rep["results"]["constant"] is True
    assert rep["results"]["message"] == "Phi constant; all points critical"


def test_critical_points_perturbed_sphere():
    rep = report("critical-points", "--metric", "perturbed_sphere", "--eps", "0.1", "--region", "0.2:1.8,-0.8:0.8", "--grid", "9")
    (cp,) = rep["results"]["points"]
    assert cp["kind"] == "maximum" and cp["hessian_signs"] == [-1, -1]
    assert_allclose(cp["point"], [1.0265, 0.0], atol=1e-3)


def test_verify_expansion_flags_lambda():
    rep = report("verify", "expansion", "--dim", "2", "--kappa", "1", "--quantity", "eigenvalue", "--samples", "6")
    ev = rep["results"]["eigenvalue"]
    assert_allclose(ev["coefficients"][0], -1.0 / 3.0, rtol=1e-2)
    assert any("candidate transcription issue" in f for f in ev["flags"]) == (ev["relative_errors"]["Lambda"] > 0.02)


def test_verify_volume():
    rep = report("verify", "expansion", "--dim", "3", "--kappa", "-1", "--quantity", "volume")
    vol = rep["results"]["volume"]
    assert vol["relative_errors"]["W0"] < 5e-3 and vol["relative_errors"]["W"] < 2e-2


def test_verify_shape_henry():
    rep = report("verify", "shape-derivative", "--mode", "henry", "--degree", "3")
    assert rep["results"]["volume_error"] < 1e-3 and rep["results"]["boundary_error"] < 1e-3


# ------------------------------------------------------------------ errors


@pytest.mark.parametrize(
    "argv,needle",
    [
        (["constants", "--dim", "1"], "at least 2"),
        (["invariants", "--metric", "no_such_thing", "--point", "0,0"], "neither a builtin"),
        (["invariants", "--metric", "sphere", "--point", "1.0"], "needs 2 coordinates"),
        (["invariants", "--metric", "sphere", "--point", "5.0,0.0"], "outside the chart bounds"),
        (["invariants", "--metric", "sphere", "--param", "bogus=1", "--point", "1,0"], "bad parameters"),
        (["phi", "--metric", "sphere", "--point", "1,0", "--eps", "-0.1"], "positive"),
        (["verify", "expansion", "--dim", "2", "--kappa", "1", "--window", "0.1:2"], "injectivity"),
        (["critical-points", "--metric", "euclidean", "--eps", "0.1"], "search region"),
    ],
)
def test_usage_errors(argv, needle):
    code, out, err = invoke(*argv)
    assert code == 2 and out == ""
    assert needle in err


def test_syntax_error_in_metric_file(tmp_path):
    doc = tmp_path / "bad.metric"
    doc.write_text("dim 2\ng11 = 1 +\n")
    code, _, err = invoke("invariants", "--metric", str(doc), "--point", "0,0")
    assert code == 2 and "line 2" in err


@pytest.mark.parametrize(
    "argv",
    [["constants"], ["constants", "--dim", "3", "--bogus"], ["verify"], ["phi", "--metric", "sphere", "--point", "1,0", "--eps", "x"]],
)
def test_argparse_errors(argv, capsys):
    assert run(argv) == 2


def test_computational_failure_exit_code(tmp_path):
    doc = tmp_path / "singular.metric"
    doc.write_text("dim 2\ng11 = x1^2\ng12 = 0\ng22 = 1\nbounds x1 = [-1, 1]\nbounds x2 = [-1, 1]\n")
    code, _, err = invoke("invariants", "--metric", str(doc), "--point", "0.0,0.0")
    assert code == 1 and "near-singular" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "extremal_locus", "constants", "--dim", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert_allclose(json.loads(proc.stdout)["results"]["lambda1"], 5.783185962946784, rtol=1e-13)
