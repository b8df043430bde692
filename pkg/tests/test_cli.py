import csv
import io
import json

import pytest

from gtnb import cli
from gtnb.errors import NumericalError, ResourceGuardError

MOM = ["moments", "--n", "500", "--k", "10", "--p", "0.1", "--T", "100"]


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_moments_csv(capsys):
    code, out, _ = run(MOM, capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 4 and float(rows[0]["G"]) == pytest.approx(14.08882, abs=1e-5)


def test_moments_smax_zero(capsys):
    code, out, _ = run(MOM + ["--smax", "0"], capsys)
    assert code == 0 and out == "s,G,Z,Y,X,H\n"


def test_moments_json(capsys):
    code, out, _ = run(MOM + ["--format", "json"], capsys)
    doc = json.loads(out)
    assert doc["schema"] == "gtnb.output/1"
    assert doc["negbin"]["r"] == pytest.approx(3.6614, abs=1e-4)


@pytest.mark.parametrize("argv", [
    ["moments", "--n", "5", "--k", "9", "--p", "0.1", "--T", "3"],
    ["moments", "--n", "5", "--k", "1", "--p", "1.5", "--T", "3"],
    ["stein", "--n", "500", "--k", "10"],
    ["bogus"],
    ["plan", "--n", "500", "--k", "10", "--budget", "3"],
    ["simulate", "--n", "50", "--k", "2", "--p", "0.5", "--T", "5", "--trials", "10", "--seed", "-1"],
])
def test_usage_errors(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 2


def test_degenerate_fit_exit_code(capsys):
    code, _, err = run(["moments", "--n", "3", "--k", "2", "--p", "0.5", "--T", "10"], capsys)
    assert code == 2 and "n - k >= 2" in err


def test_resource_guard_exit_code(monkeypatch, capsys):
    def too_big(a):
        raise ResourceGuardError("too big")

    monkeypatch.setattr(cli, "cmd_simulate", too_big)
    argv = ["simulate", "--n", "50", "--k", "2", "--p", "0.5", "--T", "5", "--trials", "10", "--seed", "1"]
    code, _, err = run(argv, capsys)
    assert code == 4 and "resource guard" in err


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def fails(a):
        raise NumericalError("no convergence")

    monkeypatch.setattr(cli, "cmd_stein", fails)
    code, _, err = run(["stein", "--n", "500", "--grid"], capsys)
    assert code == 3 and "numerical failure" in err


def test_stein_single_and_table(capsys):
    code, out, _ = run(["stein", "--n", "500", "--k", "10", "--p", "0.1", "--T", "100"], capsys)
    rows = {r["quantity"]: r for r in csv.DictReader(io.StringIO(out))}
    assert rows["total"]["display"] == "--"
    assert float(rows["total"]["value"]) == pytest.approx(1.7996, abs=1e-3)


def test_plan(capsys):
    code, out, _ = run(["plan", "--n", "500", "--k", "10", "--budget", "200"], capsys)
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 0 and rows["T1"] == "79" and rows["T2"] == "121"


def test_file_output_and_rerun_byte_identical(tmp_path, capsys):
    out = tmp_path / "m.json"
    assert cli.main(MOM + ["--format", "json", "--out", str(out)]) == 0
    man = tmp_path / "m.json.manifest.json"
    m = json.loads(man.read_text())
    assert m["schema"] == "gtnb.manifest/1" and m["outputs"] == ["m.json"]
    first = out.read_bytes()
    other = tmp_path / "again"
    assert cli.main(["rerun", str(man), "--out", str(other)]) == 0
    assert (other / "m.json").read_bytes() == first
    assert (other / "m.json.manifest.json").read_bytes() == man.read_bytes()


def test_simulate_rerun(tmp_path):
    out = tmp_path / "sim.csv"
    argv = ["simulate", "--n", "80", "--k", "3", "--p", "0.3", "--T", "12", "--trials", "5000", "--seed", "8",
            "--engine", "matrix", "--out", str(out)]
    assert cli.main(argv) == 0
    first = out.read_bytes()
    out.unlink()
    assert cli.main(["rerun", str(tmp_path / "sim.csv.manifest.json")]) == 0
    assert out.read_bytes() == first


def test_stdout_run_writes_no_manifest(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    run(MOM, capsys)
    assert list(tmp_path.iterdir()) == []


def test_figure_env_dir_and_rerun(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GTNB_OUTPUT_DIR", str(tmp_path / "fig"))
    code, out, _ = run(["figure", "--id", "3", "--trials", "3000", "--seed", "1"], capsys)
    assert code == 0
    fig = tmp_path / "fig"
    files = sorted(p.name for p in fig.iterdir())
    assert "manifest.json" in files and len(files) == 5
    before = {p.name: p.read_bytes() for p in fig.iterdir()}
    code, _, _ = run(["rerun", str(fig / "manifest.json"), "--out", str(tmp_path / "b")], capsys)
    assert code == 0
    assert {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()} == before


def test_figure_needs_output_dir(monkeypatch, capsys):
    monkeypatch.delenv("GTNB_OUTPUT_DIR", raising=False)
    code, _, err = run(["figure", "--id", "2", "--trials", "10"], capsys)
    assert code == 2 and "GTNB_OUTPUT_DIR" in err


def test_rerun_rejects_unknown_schema(tmp_path, capsys):
    bad = tmp_path / "x.json"
    bad.write_text(json.dumps({"schema": "nope"}))
    assert run(["rerun", str(bad)], capsys)[0] == 2
