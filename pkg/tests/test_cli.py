import csv
import io
import json
import os
import subprocess
import sys
from math import log, sqrt

import pytest

from hardylab.cli import EXIT_OK, EXIT_USAGE, load_campaign, main, run_campaign
from hardylab.errors import PreconditionError


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_alpha_scan_csv(capsys):
    code, out, _ = run(["alpha-scan", "--n-min", "3", "--n-max", "4"], capsys)
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    general = [r for r in rows if r["condition"] == "general"]
    assert [int(r["n"]) for r in general] == [3, 4]
    assert float(general[1]["upper"]) == pytest.approx(6 - 2 * sqrt(3), abs=1e-12)


def test_singular_json(capsys):
    code, out, _ = run(["singular", "--n", "10"], capsys)
    rec = json.loads(out)
    assert code == EXIT_OK and rec["nonnegative"] and rec["residual"] <= 1e-8


def test_singular_n9_finds_witness(capsys):
    # the check passes when the sign of Q agrees with the predicted stability
    code, out, _ = run(["singular", "--n", "9"], capsys)
    rec = json.loads(out)
    assert code == EXIT_OK and not rec["nonnegative"] and rec["witness"][1] < 0


def test_solve_liouville(capsys):
    code, out, _ = run(["solve", "--n", "2", "--lambda", "1.0", "--steps", "400"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == EXIT_OK and rows[0] == ["r", "u", "uprime"]
    d = 3 - 2 * sqrt(2)
    assert float(rows[1][1]) == pytest.approx(2 * log(1 + d), abs=1e-9)


def test_output_file(tmp_path, capsys):
    target = tmp_path / "a.csv"
    assert main(["-o", str(target), "alpha-scan", "--n-max", "5"]) == EXIT_OK
    assert target.read_text().startswith("n,condition,lower,upper")


@pytest.mark.parametrize("argv", [
    ["estimate", "--n", "3", "--lambda", "2", "--kind", "weighted", "--alpha", "2.5"],
    ["solve", "--n", "2", "--lambda", "5"],
    ["solve", "--n", "2", "--lambda", "1", "--f", "bogus"],
])
def test_domain_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_USAGE and "error" in err


@pytest.mark.parametrize("argv", [["frobnicate"], ["solve", "--n", "2", "--lambda", "1", "--bogus"], []])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_USAGE


def test_estimate_and_hardy(capsys):
    code, out, _ = run(["estimate", "--n", "3", "--lambda", "2", "--kind", "pipeline", "--steps", "500"], capsys)
    assert code == EXIT_OK and len(out.strip().splitlines()) == 11
    code, out, _ = run(["hardy", "--n", "5", "--surface", "sphere", "--alpha", "3.5"], capsys)
    assert code == EXIT_OK


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hardylab", "alpha-scan", "--n-max", "3"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.count("\n") == 4


# campaigns ---------------------------------------------------------------------------------

CAMPAIGN = """
[campaign]
f = exp
steps = 400

[job:scan]
op = alpha-scan
n_max = 10
output = out/scan.csv

[job:solve]
op = solve
n = 3
lambda = 1.5
output = out/solve.csv

[job:sz]
op = estimate
kind = sz
n = 2
lambda = 1.0
output = out/sz.csv

[job:singular]
op = singular
n = 12
output = out/singular.json
"""


def _outputs(root):
    return {p: (root / "out" / p).read_bytes() for p in sorted(os.listdir(root / "out"))}


def test_campaign_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        (d / "c.ini").write_text(CAMPAIGN)
    s1 = run_campaign(str(a / "c.ini"), jobs=1)
    s2 = run_campaign(str(b / "c.ini"), jobs=2)
    assert [s["job"] for s in s1] == ["scan", "solve", "sz", "singular"]
    assert all(s["ok"] for s in s1) and s1 == s2
    assert _outputs(a) == _outputs(b)
    run_campaign(str(a / "c.ini"), jobs=2)
    assert _outputs(a) == _outputs(b)


def test_campaign_env_jobs(tmp_path, monkeypatch, capsys):
    (tmp_path / "c.ini").write_text(CAMPAIGN)
    monkeypatch.setenv("HARDYLAB_JOBS", "2")
    code, out, _ = run(["campaign", str(tmp_path / "c.ini")], capsys)
    assert code == EXIT_OK and len(out.splitlines()) == 4


def test_campaign_validated_before_running(tmp_path):
    bad = CAMPAIGN + "\n[job:broken]\nop = solve\nn = three\nlambda = 1\noutput = out/x.csv\n"
    (tmp_path / "c.ini").write_text(bad)
    with pytest.raises(PreconditionError):
        run_campaign(str(tmp_path / "c.ini"))
    assert not (tmp_path / "out").exists()


def test_campaign_jobs_key(tmp_path):
    (tmp_path / "c.ini").write_text(CAMPAIGN.replace("steps = 400", "steps = 400\njobs = 3"))
    jobs, cap = load_campaign(str(tmp_path / "c.ini"))
    assert cap == 3 and len(jobs) == 4 and jobs[0].output.endswith(os.path.join("out", "scan.csv"))


def test_demo_campaign_parses():
    path = os.path.join(os.path.dirname(__file__), "..", "campaigns", "demo.ini")
    jobs, _ = load_campaign(path)
    assert [j.op for j in jobs] == ["alpha-scan", "solve", "branch", "estimate", "singular"]
