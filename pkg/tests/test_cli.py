import csv
import io
import json
import subprocess
import sys

import pytest

from tmcdma import cli, serialize
from tmcdma.snrmodel import ComplexityProfile, FixedPhi2, snr_curve

SIM = ["--k", "2:3", "--n", "16", "--symbols", "300", "--detectors", "conv,ml,tm"]


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_sweep_example():
    cfg = cli.parse_config(["sweep", "--scenario", "light", "--seed", "7",
                            "--out", "run.csv"])
    assert cfg.command == "sweep"
    assert cfg["scenario"] == "light" and cfg["seed"] == 7
    assert cfg.out == "run.csv" and cfg.format == "csv"
    assert cfg["tau"] == 1.0 and cfg["s_max"] == 10


def test_parse_values():
    cfg = cli.parse_config(["simulate", "--k", "5", "--ebn0", "0,2.5",
                            "--detectors", "tm,conv", "--tau", "0.5"])
    assert cfg["k"] == (5, 5)
    assert cfg["ebn0"] == [0.0, 2.5]
    assert cfg["tau"] == 0.5
    assert cli.parse_config(["snr-model", "--phi2", "fixed:0.4"])["phi2"] == "fixed:0.4"


def test_sweep_requires_out(capsys):
    assert cli.main(["sweep", "--scenario", "light"]) == 2
    assert "out" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["simulate", "--bogus", "1"],
    ["simulate", "--k", "4:2"],
    ["simulate", "--detectors", "mmse"],
    ["nocommand"],
    ["calibrate", "--k", "22"],
    ["codes", "--codes", "walsh-hadamard", "--n", "12"],
])
def test_usage_errors_exit_2(argv):
    assert cli.main(argv) == 2


def test_domain_error_exit_1(capsys):
    assert cli.main(["calibrate", "--target-db", "6", "--k", "3"]) == 1
    assert "error" in capsys.readouterr().err


def test_config_file_and_precedence(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"k": "2", "n": 16, "symbols": 200, "seed": 3,
                                "detectors": "conv"}))
    cfg = cli.parse_config(["simulate", "--config", str(conf), "--seed", "9"])
    assert cfg["seed"] == 9 and cfg["n"] == 16 and cfg["k"] == (2, 2)
    conf.write_text(json.dumps({"colour": "red"}))
    assert cli.main(["simulate", "--config", str(conf)]) == 2
    assert "colour" in capsys.readouterr().err


def test_out_suffix_contradicts_format(tmp_path):
    assert cli.main(["simulate", *SIM, "--out", str(tmp_path / "x.json"),
                     "--format", "csv"]) == 2


def test_unwritable_out(tmp_path):
    assert cli.main(["simulate", *SIM, "--out", str(tmp_path / "no" / "x.csv")]) == 2


def test_simulate_to_stdout(capsys):
    assert cli.main(["simulate", *SIM]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert [r["algorithm"] for r in rows] == ["conv", "ml", "tm"] * 2
    assert list(rows[0]) == list(serialize.COLUMNS)
    assert all(r["symbols"] == "300" for r in rows)


def test_sweep_csv_and_meta(tmp_path):
    out = tmp_path / "run.csv"
    assert cli.main(["sweep", *SIM, "--seed", "4", "--out", str(out)]) == 0
    meta = json.loads((tmp_path / "run.csv.meta.json").read_text())
    assert meta["config"]["seed"] == 4 and meta["config"]["tau"] == 1.0
    assert "workers" not in meta["config"]
    assert len(rows_of(out.read_text())) == 6


def test_workers_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", *SIM, "--ebn0", "2,6"]
    assert cli.main(args + ["--workers", "1", "--out", str(a)]) == 0
    assert cli.main(args + ["--workers", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.meta.json").read_bytes() == \
        (tmp_path / "b.csv.meta.json").read_bytes()


def test_json_round_trip(tmp_path):
    out = tmp_path / "run.json"
    assert cli.main(["simulate", *SIM, "--format", "json", "--out", str(out)]) == 0
    rows, meta = serialize.read_json_rows(out)
    assert len(rows) == 6 and meta["command"] == "simulate"
    assert isinstance(rows[0]["K"], int)


def test_empty_rows_header_only():
    assert serialize.render_csv([]) == ",".join(serialize.COLUMNS) + "\n"


def test_undefined_sentinel(capsys):
    assert cli.main(["snr-model", "--profile", "tm", "--k", "2:14",
                     "--phi2", "fixed:0.5"]) == 0
    rows = rows_of(capsys.readouterr().out)
    by_k = {int(r["K"]): r for r in rows}
    assert by_k[5]["gamma_db"] == "undefined"
    assert by_k[14]["gamma_db"] != "undefined"
    pts = snr_curve(ComplexityProfile("tm"), [5], 1.0, FixedPhi2(0.5))
    doc = serialize.json_document(pts, {})
    assert doc["rows"][0]["gamma_db"] == "undefined"


def test_real_formatting():
    assert serialize.format_value("phi2", 0.31628745877050727) == "0.3162874588"
    assert serialize.format_value("K", 22.0) == "22"
    assert serialize.format_value("ber", float("nan")) == ""


def test_calibrate_prints_phi2(capsys):
    assert cli.main(["calibrate", "--profile", "tm", "--k", "72",
                     "--target-db", "36"]) == 0
    assert "phi2 = 0.5159428014" in capsys.readouterr().out


def test_figures_json_stdout(capsys):
    assert cli.main(["figures", "--fig", "3", "--policy", "calibrated"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rows = doc["figures"][0]["rows"]
    at22 = {r["algorithm"]: r["gamma_db"] for r in rows if r["K"] == 22}
    assert at22 == pytest.approx({"tm": 6.5, "nd": 5.8, "ml": 5.5}, abs=1e-9)


def test_figures_csv_layout(tmp_path):
    out = tmp_path / "figs.csv"
    assert cli.main(["figures", "--fig", "7,8", "--out", str(out)]) == 0
    assert (tmp_path / "figs_fig7.csv").exists()
    assert (tmp_path / "figs_fig8.csv").exists()
    meta = json.loads((tmp_path / "figs_meta.json").read_text())
    assert set(meta["figures"]) == {"7", "8"}


def test_codes_command(capsys):
    assert cli.main(["codes", "--k", "4", "--n", "8", "--codes", "walsh-hadamard",
                     "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["correlation"] == [[1.0 if i == j else 0.0 for j in range(4)]
                                  for i in range(4)]
    assert len(doc["codes"]) == 4 and len(doc["codes"][0]) == 8


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tmcdma", "calibrate", "--k", "102",
                          "--target-db", "45"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "0.4552434337" in res.stdout
