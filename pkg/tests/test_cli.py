import json

import pytest

from cutfem import cli
from cutfem.geometry import GeometryError
from cutfem.io import read_csv
from cutfem.linalg import SolverError


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(args + ["-o", str(out), "--no-vtk"] if args[0] != "run" else args + ["-o", str(out)])
    return code, out


def test_converge_rows_and_rates(tmp_path):
    code, out = run(["converge", "--scenario", "manufactured", "--p", "1,2", "--h", "1/8,1/16,1/32"], tmp_path)
    assert code == 0
    rows = read_csv(out / "summary.csv")
    assert len(rows) == 6
    assert {"rate", "energy_rate", "fit_rate"} <= set(rows[0])
    p2 = [float(r["rate"]) for r in rows if r["p"] == "2" and r["rate"]]
    assert all(abs(r - 3) < 0.25 for r in p2)
    meta = json.loads((out / "meta.json").read_text())
    assert meta["status"] == "ok" and meta["config"]["command"] == "converge"
    assert "version" in meta and meta["backend"] in ("pardiso", "superlu")


def test_cond_table_columns(tmp_path):
    code, out = run(["cond-table", "--variant", "sliver", "--delta", "1e-3", "--p", "1..2"], tmp_path)
    assert code == 0
    rows = read_csv(out / "summary.csv")
    assert [r["p"] for r in rows] == ["1", "2"]
    for col in ("A_plain", "A_precond", "A_stab", "A_stab_precond"):
        assert float(rows[1][col]) > 1


def test_summary_is_deterministic(tmp_path):
    args = ["run-static", "--h", "0.25", "--p", "1,2", "--theta", "0,pi/9"]
    c1, o1 = run(args, tmp_path, "a")
    c2, o2 = run(args, tmp_path, "b")
    assert c1 == c2 == 0
    assert (o1 / "summary.csv").read_bytes() == (o2 / "summary.csv").read_bytes()
    assert len(read_csv(o1 / "summary.csv")) == 4


def test_jobs_give_same_rows(tmp_path):
    args = ["run-static", "--h", "0.25", "--p", "1,2"]
    _, o1 = run(args, tmp_path, "serial")
    _, o2 = run(args + ["--jobs", "2"], tmp_path, "parallel")
    assert (o1 / "summary.csv").read_bytes() == (o2 / "summary.csv").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "run-static", "h": [0.5], "p": [1]}))
    code, out = run(["run-static", "--config", str(cfg), "--p", "2"], tmp_path)
    assert code == 0
    assert read_csv(out / "summary.csv")[0]["p"] == "2"
    code, out = run(["run", str(cfg)], tmp_path, "generic")
    assert code == 0 and read_csv(out / "summary.csv")[0]["p"] == "1"


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "command": "run-eig",\n "k": 6,\n "wat": 1\n}\n')
    assert cli.main(["run", str(bad)]) == 2
    assert "bad.json:4:" in capsys.readouterr().err
    assert cli.main(["run-eig", "--k", "0", "-o", str(tmp_path / "x")]) == 2
    assert cli.main(["run-static", "--geometry", "{not json", "-o", str(tmp_path / "y")]) == 2
    wrong = tmp_path / "wrong.json"
    wrong.write_text('{"command": "run-eig"}')
    assert cli.main(["run-static", "--config", str(wrong)]) == 2


@pytest.mark.parametrize("exc, code", [(SolverError("singular"), 3), (GeometryError("outside"), 4)])
def test_failure_exit_codes_keep_partial_output(tmp_path, monkeypatch, exc, code):
    def boom(cfg, out):
        raise cli.RunFailed(exc, [{"a": 1}])

    monkeypatch.setitem(cli.RUNNERS, "run-static", boom)
    rc, out = run(["run-static"], tmp_path)
    assert rc == code
    assert read_csv(out / "summary.csv") == [{"a": "1"}]
    assert json.loads((out / "meta.json").read_text())["status"] == "failed"


def test_resonant_sweep_point_fails(tmp_path):
    code, out = run(["run-freq", "--h", "0.1", "--p", "1", "--n-omega", "4"], tmp_path, "ok")
    assert code == 0
    rows = read_csv(out / "summary.csv")
    assert float(rows[0]["omega"]) == 0.0
    meta = json.loads((out / "meta.json").read_text())
    w1 = meta["results"]["eigenfrequencies"][0]
    code, out = run(["run-freq", "--h", "0.1", "--p", "1", "--omegas", f"{w1!r}"], tmp_path, "res")
    rows = read_csv(out / "summary.csv")
    assert rows[0]["status"] == "resonance"
    assert code == 3


def test_dump_quadrature(tmp_path):
    code, out = run(["dump-quadrature", "--h", "0.25", "--p", "2"], tmp_path)
    assert code == 0
    rows = read_csv(out / "summary.csv")
    assert rows and all(float(r["abs_error"]) < 1e-14 for r in rows)
    pts = read_csv(out / "quadrature.csv")
    assert len(pts) == sum(int(r["n_points"]) for r in rows)


@pytest.mark.parametrize("cmd", ["thin-demo --kind cantilever --p 1 --h 0.1",
                                 "fibre-demo --h 0.25 --configs bulk,trusses",
                                 "compound-demo --kind halves --h 0.25 --p 1",
                                 "run-eig --h 0.15 --p 2 --index 6",
                                 "two-grid --H 0.2 --h 0.1 --p 1"])
def test_demo_commands_run(tmp_path, cmd):
    code, out = run(cmd.split(), tmp_path)
    assert code == 0
    assert read_csv(out / "summary.csv")


def test_vtk_written(tmp_path):
    out = tmp_path / "v"
    assert cli.main(["run-static", "--h", "0.5", "--p", "1", "-o", str(out)]) == 0
    assert list(out.glob("*.vtk"))
