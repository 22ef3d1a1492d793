import csv
import io
import json
import subprocess
import sys

import pytest

from berezin.cli import UsageError, _run, parse_k_list, run_command
from berezin.scalars import parse_scalar


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code, _ = _run(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def arith_tagged(node):
    """Every record carrying a value also carries an arith tag."""
    if isinstance(node, dict):
        if "value" in node or "coefficients" in node:
            assert node.get("arith") in ("exact", "float")
        for v in node.values():
            arith_tagged(v)
    elif isinstance(node, list):
        for v in node:
            arith_tagged(v)


@pytest.mark.parametrize("text, expected", [
    ("8..16", list(range(8, 17))), ("8..64:8", [8, 16, 24, 32, 40, 48, 56, 64]), ("8,16,3", [8, 16, 3]),
])
def test_k_lists(text, expected):
    assert parse_k_list(text) == expected


def test_bad_k_list():
    with pytest.raises(UsageError):
        parse_k_list("8..x")


CANNED = [
    (["models"], 0),
    (["rho", "--model", "fs:0", "--base", "0,0", "--cap", "4"], 0),
    (["acoeff", "--model", "flat:1", "--ell", "1", "--alpha", "1", "--beta", "1"], 0),
    (["bmap", "--model", "fs:0", "--f", "h", "--cap", "3"], 0),
    (["oracle-offdiag", "--k", "8..16"], 0),
    (["--bogus"], 2),
    (["rho", "--base", "0.5,0"], 2),
    (["frobnicate"], 2),
    (["acoeff", "--model", "flat:1", "--ell", "1", "--alpha", "2", "--beta", "0"], 3),
    (["sweep", "/nonexistent/config.txt"], 3),
]


@pytest.mark.parametrize("argv, code", CANNED)
def test_exit_codes(argv, code):
    assert run(argv)[0] == code


def test_rho_example():
    code, out, _ = run(["rho", "--model", "fs:0", "--base", "0,0", "--cap", "4"])
    rep = json.loads(out)
    assert code == 0 and rep["summary"]["coefficients"] == ["1", "1", "0", "0", "0"]
    arith_tagged(rep)


def test_bogus_prints_usage():
    code, _, err = run(["--bogus"])
    assert code == 2 and "usage" in err


def test_exact_values_round_trip():
    _, out, _ = run(["binv", "--model", "fs:0", "--base", "1/2,1/3", "--f", "h", "--cap", "2"])
    rep = json.loads(out)
    arith_tagged(rep)
    for rec in rep["records"]:
        if rec["arith"] == "exact":
            v = parse_scalar(rec["value"])
            assert str(v.numerator) in rec["value"] or rec["value"] == "0"


def test_float_flag():
    code, out, _ = run(["rho", "--model", "fs:0", "--base", "0.5,0.25", "--float", "--cap", "2"])
    assert code == 0
    arith_tagged(json.loads(out))


def test_product_csv():
    code, out, _ = run(["oracle-product", "--f", "h", "--g", "h", "--N", "1", "--k", "8..24:4"])
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["k", "N", "residual", "slope_so_far"]
    assert [r[0] for r in rows[1:]] == ["8", "12", "16", "20", "24"]


def test_precondition_message():
    code, _, err = run(["star", "--model", "fs:0", "--f", "h", "--g", "h", "--cap", "3", "--order", "1"])
    assert code == 3 and "order" in err


def _config(tmp_path):
    cfg = tmp_path / "sweep.txt"
    cfg.write_text("# two jobs\ncommand=oracle-bergman\nk=8,16,24,32,40\nformat=csv\n\n"
                   "command=rho\nmodel=pflat:1/10\ncap=5\n")
    return cfg


@pytest.mark.parametrize("jobs", [1, 2])
def test_sweep_deterministic(tmp_path, jobs):
    cfg = _config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert run(["sweep", str(cfg), "--outdir", str(a), "--jobs", str(jobs)])[0] == 0
    assert run(["sweep", str(cfg), "--outdir", str(b), "--jobs", "1"])[0] == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == ["job001.csv", "job002.json", "sweep-summary.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = list(csv.reader(open(a / "job001.csv")))
    assert len(rows) == 6


def test_malformed_config(tmp_path):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("command=rho\nthis line is wrong\n")
    code, _, err = run(["sweep", str(cfg), "--outdir", str(tmp_path)])
    assert code == 3 and "bad.txt:2" in err


def test_output_file(tmp_path):
    path = tmp_path / "r.json"
    assert run(["rho", "--cap", "2", "--output", str(path)])[0] == 0
    assert json.loads(path.read_text())["summary"]["coefficients"] == ["1", "1", "0"]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "berezin.cli", "rho", "--cap", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["records"][1]["value"] == "1"
    assert run_command(["--bogus"]) == 2


def test_float_mode_matches_exact():
    _, fl, _ = run(["bmap", "--f", "h", "--cap", "3", "--base", "0.5,0.25", "--float"])
    _, ex, _ = run(["bmap", "--f", "h", "--cap", "3", "--base", "1/2,1/4"])
    fv = [float(r["value"]) for r in json.loads(fl)["records"]]
    ev = [float(parse_scalar(r["value"])) for r in json.loads(ex)["records"]]
    assert fv == pytest.approx(ev, rel=1e-25, abs=1e-28)
