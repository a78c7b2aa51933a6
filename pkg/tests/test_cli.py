import csv
import io
import json
import math
import subprocess
import sys

import pytest

from kpzlab import cli, verify


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_grid():
    assert cli.parse_grid("1.5") == [1.5]
    assert cli.parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    for bad in ("a", "1:2", "1:0:0.1", "0:1:0", "nan"):
        with pytest.raises(cli.UsageError):
            cli.parse_grid(bad)


def test_rate_row(capsys):
    code, out, _ = run_cli(capsys, "rate", "--y", "1")
    assert code == 0
    (row,) = parse_csv(out)
    assert float(row["phi"]) == pytest.approx(1.333333, abs=1e-6)
    assert float(row["chernoff"]) == pytest.approx(-1.333333, abs=1e-6)
    assert float(row["crossover"]) == pytest.approx(-0.916667, abs=1e-6)
    assert out.splitlines()[0] == "y,phi,chernoff,crossover"


def test_seventeen_digits(capsys):
    _, out, _ = run_cli(capsys, "rate", "--y", "0.5")
    row = parse_csv(out)[0]
    assert float(row["phi"]) == 4.0 / 3.0 * 0.5**1.5
    assert row["crossover"] == "%.17g" % (1.0 / 12.0 - 0.5)


def test_moment_row(capsys):
    code, out, _ = run_cli(capsys, "moment", "--p", "1", "--t", "1", "--threads", "1")
    assert code == 0
    (row,) = parse_csv(out)
    assert float(row["p"]) == 1.0 and float(row["t"]) == 1.0
    assert float(row["log_moment"]) == pytest.approx(math.log(0.306608), abs=1e-3)
    assert set(row) == {"p", "t", "log_moment", "log_leading", "log_leading_hat",
                        "log_remainder_sum"}


def test_json_schema_and_determinism(capsys):
    argv = ["laplace", "--s", "0.5:1:0.5", "--t", "1", "--format", "json", "--nodes", "120"]
    _, first, _ = run_cli(capsys, *argv)
    _, second, _ = run_cli(capsys, *argv, "--threads", "3")
    assert first == second
    doc = json.loads(first)
    assert set(doc) == {"metadata", "columns", "rows"}
    assert doc["metadata"]["node_count"] == 120 and doc["metadata"]["timestamp"] is None
    assert doc["columns"] == ["s", "t", "det", "largest_eigenvalue"]
    assert [r["s"] for r in doc["rows"]] == [0.5, 1.0]
    assert all(0 < r["largest_eigenvalue"] < 1 for r in doc["rows"])


def test_progress_on_stderr_only(capsys):
    _, out, err = run_cli(capsys, "laplace", "--s", "1", "--t", "1:2:1", "--nodes", "100")
    assert "laplace" in err
    assert out.splitlines()[0] == "s,t,det,largest_eigenvalue"
    assert len(out.splitlines()) == 3


def test_trace_command(capsys):
    _, out, _ = run_cli(capsys, "trace", "--s", "1", "--t", "1", "--order", "1")
    (row,) = parse_csv(out)
    assert float(row["trace_nystrom"]) == pytest.approx(float(row["trace_exact"]), rel=1e-6)


def test_nonunique_command(capsys):
    _, out, _ = run_cli(capsys, "nonunique", "--blend", "0.5")
    rows = parse_csv(out)
    assert len(rows) == 5
    assert max(abs(float(r["difference"])) for r in rows) <= 1e-6


def test_bounds_command(capsys, tmp_path):
    path = tmp_path / "b.json"
    code, out, _ = run_cli(capsys, "bounds", "--t", "1:5:4", "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    doc = json.loads(path.read_text())
    assert "calibrated_constants" in doc["metadata"]
    assert {r["name"] for r in doc["rows"]} >= {"airy_laplace_sandwich", "trace_bound(n=0)"}


def test_usage_errors(capsys):
    assert run_cli(capsys, "moment", "--p", "9", "--t", "1")[0] == 2
    assert run_cli(capsys, "moment", "--t", "1")[0] == 2
    assert run_cli(capsys, "nosuch")[0] == 2
    assert run_cli(capsys, "rate", "--y", "1:0:1")[0] == 2
    code, _, err = run_cli(capsys, "rate", "--y", "-1")
    assert code == 2 and "y" in err


def test_verify_table_covers_all_criteria(capsys, monkeypatch):
    # aggregation only: each criterion is replaced by a stub
    def stub(k):
        def f():
            res = verify.CriterionResult(k, f"stub {k}")
            res.add("x", 0.0, 1.0, passed=k % 2 == 0)
            return res
        return f

    monkeypatch.setattr(verify, "CRITERIA", {k: stub(k) for k in range(1, 12)})
    code, out, _ = run_cli(capsys, "verify", "--suite", "all")
    assert code == 0
    rows = parse_csv(out)
    assert sorted({int(r["criterion"]) for r in rows}) == list(range(1, 12))
    assert {r["pass"] for r in rows} == {"true", "false"}


def test_verify_fast_suite(capsys):
    code, out, _ = run_cli(capsys, "verify", "--suite", "fast", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert sorted(int(k) for k in doc["metadata"]["criteria"]) == list(verify.FAST)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kpzlab", "rate", "--y", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("y,phi,chernoff,crossover")
