import csv
import io
import json
from contextlib import redirect_stdout

import pytest

from keysec import __version__
from keysec.cli import main, parse_eps

MARKOV_EXPECTED = """{
  "command": "guarantee markov",
  "config": {
    "eps": 9.5367431640625e-07
  },
  "result": {
    "bound": 0.0009765625,
    "confidence": 0.9990234375,
    "eps_total": 9.5367431640625e-07,
    "log2_bound": -10.0,
    "log2_eps_total": -20.0,
    "provenance": "computed"
  },
  "tool": "keysec",
  "version": "%s"
}
""" % __version__


def run(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    return code, buf.getvalue()


@pytest.mark.parametrize("text,value", [("2^-20", 2.0 ** -20), ("2**-3", 0.125), ("2^(-4)", 0.0625),
                                        ("0.01", 0.01), ("9.5367e-7", 9.5367e-7)])
def test_parse_eps(text, value):
    assert parse_eps(text) == value


def test_markov_report_is_byte_exact():
    code, out = run("guarantee", "markov", "--eps", "2^-20")
    assert code == 0
    assert out == MARKOV_EXPECTED


def test_markov_decimal_input():
    code, out = run("guarantee", "markov", "--eps", "9.5367e-7")
    res = json.loads(out)["result"]
    assert res["bound"] == pytest.approx(2.0 ** -10, rel=1e-5)


def test_metrics_uniform_file(tmp_path):
    path = tmp_path / "u.json"
    path.write_text(json.dumps({"n": 4, "p": [1 / 16] * 16}))
    code, out = run("metrics", "--input", str(path), "--m", "2")
    assert code == 0
    recs = {r["metric"]: r["value"] for r in json.loads(out)["result"]["metrics"]}
    assert recs["entropy"] == 4.0 and recs["delta_E"] == 0.0 and recs["p1"] == 0.0625
    assert recs["p1_subset"] == 0.25


def test_construct_delta_spike():
    code, out = run("construct", "theorem2", "--n", "8", "--l", "3")
    c = json.loads(out)["result"]["construction"]
    assert c["delta_E"] == {"value": 0.125, "exact": "1/8"}
    assert c["p1"]["exact"] == "33/256"


def test_construct_parity_and_search():
    _, out = run("construct", "theorem3", "--n", "3")
    c = json.loads(out)["result"]["construction"]
    assert c["I_E_per_bit"]["exact"] == "1/4" and c["extension_bit_prediction"]["value"] == 1.0
    _, out = run("construct", "search", "--n", "6", "--eps", "0.125", "--m", "3", "--seed", "0")
    s = json.loads(out)["result"]["search"]
    assert s["verified"] and s["objective_value"] == pytest.approx(0.25, abs=1e-9)


def test_randomized_commands_need_seed():
    code, out = run("quantum", "d", "--n", "1", "--dim", "2")
    assert code == 1
    assert json.loads(out)["error"]["type"] == "UsageError"


def test_identical_config_gives_identical_bytes():
    for argv in (["quantum", "eq22", "--n", "1", "--dim", "2", "--seed", "9", "--outcomes", "6"],
                 ["couplings", "eq12", "--n", "2", "--seed", "4"],
                 ["lfsr", "kpa", "--width", "9", "--seed", "2", "--m", "5", "--start", "3"],
                 ["construct", "search", "--n", "5", "--eps", "0.1", "--constraint", "I_E", "--seed", "3"]):
        assert run(*argv) == run(*argv)


def test_validation_error_exit_1():
    code, out = run("guarantee", "markov", "--eps", "1.5")
    assert code == 1
    err = json.loads(out)["error"]
    assert err["type"] == "ValidationError" and "(0, 1)" in err["message"]


def test_unknown_subcommand_is_json_error():
    code, out = run("frobnicate")
    assert code == 1 and "error" in json.loads(out)


def test_size_guard_exit_2(monkeypatch):
    monkeypatch.setenv("KEYSEC_MAX_DIM", "4")
    code, out = run("quantum", "d", "--n", "2", "--dim", "2", "--seed", "1")
    assert code == 2
    assert json.loads(out)["error"]["type"] == "SizeGuardError"
    code, _ = run("construct", "search", "--n", "13", "--eps", "0.1", "--seed", "0")
    assert code == 2


def test_envelope_fields(tmp_path):
    out_path = tmp_path / "r.json"
    code, out = run("lfsr", "entropy", "--width", "6", "--output", str(out_path))
    assert code == 0 and out == ""
    doc = json.loads(out_path.read_text())
    assert doc["tool"] == "keysec" and doc["version"] == __version__
    assert doc["config"] == {"width": 6}
    assert doc["result"]["provenance"] == "computed"


def test_sweep_csv_grid_order_independent_of_jobs():
    argv = ["sweep", "--l-list", "2,5", "--n-list", "8,32", "--m", "4"]
    _, serial = run(*argv)
    _, parallel = run(*argv, "--jobs", "2")
    assert serial == parallel
    rows = list(csv.DictReader(io.StringIO(serial)))
    assert list(rows[0]) == ["criterion", "epsilon", "n", "metric", "value", "provenance"]
    assert [r["criterion"] for r in rows][:1] == ["p1"]
    assert {r["provenance"] for r in rows} == {"computed", "paper-reported"}


def test_table_format_for_guarantee():
    code, out = run("guarantee", "table1", "--criterion", "delta_E", "--eps", "0.01", "--n", "8",
                    "--quantum-memory", "--format", "table")
    assert code == 0
    assert "f ~ ?" in out and "paper-reported" in out


def test_quantum_helstrom_and_mixture(tmp_path):
    ens = {"n": 1, "states": [{"dim": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
                              {"dim": 2, "re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]}]}
    path = tmp_path / "e.json"
    path.write_text(json.dumps(ens))
    _, out = run("quantum", "helstrom", "--input", str(path))
    assert json.loads(out)["result"]["measured"] == pytest.approx(1.0)
    _, out = run("quantum", "eq18", "--input", str(path))
    assert json.loads(out)["result"]["mixture"]["min_eigenvalue"] == pytest.approx(-0.125)


def test_couplings_from_file(tmp_path):
    pair = {"p": {"n": 1, "p": [0.5, 0.5]}, "q": {"n": 1, "p": [0.5, 0.5]}}
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(pair))
    _, out = run("couplings", "independent", "--input", str(path))
    res = json.loads(out)["result"]
    assert res["pr_neq"] == 0.5 and res["lp_min_pr_neq"] == pytest.approx(0.0, abs=1e-12)
