import csv
import json
import math
import subprocess
import sys

import pytest

from mlcrelay import cli


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_rates_rows_and_summary(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["rates", "--snr-db", "7", "--theta-steps", "4", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == "# schema=mlcrelay.rates_vs_theta.v1"
    assert len(rows) == 4 * 36 + 1
    summary = rows[-1]
    assert summary["theta_rad"] == "universal"
    data = rows[:-1]
    best = min(max(float(r["rate_bits_per_binary_symbol"]) for r in data if r["theta_rad"] == t)
               for t in {r["theta_rad"] for r in data})
    assert float(summary["rate_bits_per_binary_symbol"]) == best
    for r in data:
        terms = [float(r[k]) for k in ("term_{1}{2}", "term_{1}", "term_{2}", "term_{1,2}")]
        rate = float(r["rate_bits_per_binary_symbol"])
        assert rate == pytest.approx(min(terms[0] / 2, *terms[1:]), abs=1e-15)
        assert float(r["sum_rate_bits_per_symbol"]) == pytest.approx(2 * rate, abs=1e-15)


def test_function_filter(tmp_path):
    out = tmp_path / "x.csv"
    assert cli.main(["rates", "--theta-steps", "3", "--functions", "xor", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert {r["f_id"] for r in rows[:-1]} == {"xor"} and len(rows) == 4


def test_grid_2d_schema(tmp_path):
    out = tmp_path / "g.csv"
    assert cli.main(["rates", "--theta-steps", "2", "--grid-2d", "--functions", "xor,rxor", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header.endswith("rates_vs_theta_2d.v1")
    assert len(rows) == 4 * 2 + 1 and "theta_b_rad" in rows[0]


def test_universal_rows(tmp_path):
    out = tmp_path / "u.csv"
    assert cli.main(["universal", "--snr-range", "0:4:4", "--theta-steps", "4", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == "# schema=mlcrelay.universal_vs_snr.v1"
    assert [float(r["snr_db"]) for r in rows] == [0.0, 4.0]
    for r in rows:
        vals = [float(r[k]) for k in ("mlc_universal", "gf4_universal", "fixed_xor_baseline")]
        assert all(0 <= v <= 2 for v in vals)
        assert vals[0] >= vals[1] and vals[0] >= vals[2]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    out = tmp_path / "c.csv"
    cfg.write_text(json.dumps({"theta_steps": 2, "functions": "xor", "snr_db": 3.0, "out": str(out)}))
    assert cli.main(["rates", "--config", str(cfg), "--functions", "rxor"]) == 0
    _, rows = read_csv(out)
    assert {r["f_id"] for r in rows[:-1]} == {"rxor"}


@pytest.mark.parametrize("argv", [
    ["rates", "--ell", "3"],
    ["rates", "--functions", "bogus"],
    ["rates", "--theta-steps", "0"],
    ["universal", "--snr-range", "5:1:1"],
    ["universal", "--snr-range", "nope"],
    ["ldpc-threshold", "--trials", "3"],
    ["ldpc-threshold", "--seed", "1", "--block-length", "97"],
])
def test_config_errors(argv, tmp_path):
    out = tmp_path / "never.csv"
    assert cli.main(argv + ["--out", str(out)]) == cli.EXIT_CONFIG
    assert not out.exists()


@pytest.mark.parametrize("argv", [["rates", "--no-such-flag"], ["frobnicate"], []])
def test_argparse_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == cli.EXIT_CONFIG


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["rates", "--config", str(bad)]) == cli.EXIT_CONFIG
    bad.write_text(json.dumps({"unknown_key": 1}))
    assert cli.main(["rates", "--config", str(bad)]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path):
    out = tmp_path / "l.csv"
    code = cli.main(["ldpc-threshold", "--seed", "1", "--trials", "2", "--block-length", "200",
                     "--thetas", "0", "--window", "15:16", "--out", str(out)])
    assert code == cli.EXIT_NUMERIC
    assert not out.exists()
    assert not list(tmp_path.glob(".tmp-*"))


def test_ldpc_rows(tmp_path):
    out = tmp_path / "l.csv"
    code = cli.main(["ldpc-threshold", "--seed", "1", "--trials", "2", "--block-length", "300",
                     "--thetas", "0,pi/2", "--out", str(out)])
    assert code == 0
    header, rows = read_csv(out)
    assert header == "# schema=mlcrelay.ldpc_threshold.v1"
    assert [float(r["theta_rad"]) for r in rows] == [0.0, math.pi / 2]
    for r in rows:
        assert r["f_policy"].startswith("best:")
        assert float(r["gap_db"]) >= 0
        assert float(r["gap_db"]) == pytest.approx(float(r["simulated_snr_db"]) - float(r["theoretical_snr_db"]))


@pytest.mark.parametrize("text,value", [("0", 0.0), ("pi/4", math.pi / 4), ("3pi/2", 1.5 * math.pi),
                                        ("-pi", -math.pi), ("0.25", 0.25)])
def test_parse_angle(text, value):
    assert cli.parse_angle(text) == pytest.approx(value)


def test_parse_range_inclusive():
    assert cli.parse_range("0:20:5") == [0.0, 5.0, 10.0, 15.0, 20.0]
    assert cli.parse_range("1:1.3:0.1") == [1.0, 1.1, 1.2, 1.3]


def test_console_entry_point(tmp_path):
    out = tmp_path / "e.csv"
    res = subprocess.run([sys.executable, "-m", "mlcrelay.cli", "rates", "--theta-steps", "1",
                          "--functions", "xor", "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert out.read_text().startswith("# schema=")
