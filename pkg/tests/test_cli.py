import csv
import io
import json

import numpy as np
import pytest

from shifted_sgmres.cli import (DIVERGED, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, RunConfig,
                                bench, main, parse_shifts, read_config_file, run)
from shifted_sgmres.sparse_core import gen_random_sparse, identity, write_matrix_market


@pytest.fixture
def identity_file(tmp_path):
    path = tmp_path / "eye.mtx"
    with open(path, "w") as fh:
        write_matrix_market(identity(10), fh)
    return path


def test_parse_shifts():
    assert parse_shifts("0, 0.4,2") == [0, 0.4, 2]
    assert parse_shifts("1+2i,-1j") == [1 + 2j, -1j]


def test_run_identity_file(identity_file, tmp_path, capsys):
    out = tmp_path / "out"
    status = main(["run", "--matrix", str(identity_file), "--alg", "ad_sgmres_sh",
                   "--shifts", "0", "--out", str(out)])
    assert status == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outer_mv"] == 1 and summary["converged"]
    assert summary["source"] == "eye" and summary["n"] == 10
    assert "outer mv=1" in capsys.readouterr().out


def test_run_outputs(tmp_path):
    out = tmp_path / "o"
    status, report = run(RunConfig(gen="bidiag1:200", out=str(out)))
    assert status == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["algorithm"] == "fad_sgmres_dr_sh"
    assert summary["config"]["e"] == 3 and summary["config"]["preconditioner"] == "igmres:10"
    assert set(summary["counters"]) >= {"outer_mv", "inner_mv", "gevp_solves"}
    raw = (out / "history.csv").read_bytes()
    assert b"\r\n" in raw
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert rows[0] == ["shift_index", "alpha_real", "alpha_imag", "outer_mv", "rel_residual"]
    assert {r[0] for r in rows[1:]} == {"0", "1", "2"}
    first = [r for r in rows[1:] if r[0] == "1"][0]
    assert float(first[1]) == 0.4 and float(first[4]) == 1.0
    # full precision round trip
    final = [r for r in rows[1:] if r[0] == "0"][-1]
    assert float(final[4]) == report.states[0].history[-1][1]


def test_missing_file_is_config_error(tmp_path, capsys):
    status = main(["run", "--matrix", str(tmp_path / "nope.mtx")])
    assert status == EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ["run", "--gen", "bidiag1:50", "--alg", "gmres"],
    ["run", "--gen", "bidiag1:50", "--matrix", "x.mtx"],
    ["run"],
    ["run", "--gen", "bidiag1:50", "--prec", "jacobi"],
    ["run", "--gen", "bidiag1:50", "--m", "5", "--e", "5"],
    ["run", "--gen", "bidiag1:50", "--shifts", "a,b"],
    ["bench", "--alg", "ad_sgmres_sh"],
])
def test_bad_arguments(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_not_converged_exit(capsys):
    status = main(["run", "--gen", "bidiag1:1000", "--alg", "ad_sgmres_sh", "--max-mv", "30"])
    assert status == EXIT_NOT_CONVERGED
    assert "NOT converged" in capsys.readouterr().out


def test_bench_grid(tmp_path, capsys):
    mtx = tmp_path / "rand.mtx"
    with open(mtx, "w") as fh:
        write_matrix_market(gen_random_sparse(80, seed=1), fh)
    out = tmp_path / "grid.csv"
    status = main(["bench", "--gen", "bidiag2:300", "--matrix", str(mtx),
                   "--alg", "ad_sgmres_sh", "--alg", "fad_sgmres_sh",
                   "--alg", "fad_sgmres_dr_sh,e=2,prec=ilu0", "--out", str(out)])
    assert status == EXIT_OK
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["matrix", "ad_sgmres_sh", "fad_sgmres_sh,igmres:10",
                       "fad_sgmres_dr_sh,e=2,ilu0"]
    assert [r[0] for r in rows[1:]] == ["rand", "bidiag2:300"]
    for r in rows[1:]:
        for cell in r[1:]:
            assert cell.endswith("s)") and int(cell.split()[0]) > 0
    assert "matrix,ad_sgmres_sh" in capsys.readouterr().out


def test_bench_dagger_and_errors():
    cfgs = [RunConfig(gen="bidiag1:1000", alg="ad_sgmres_sh", max_mv=20),
            RunConfig(gen="bidiag1:100", alg="fad_sgmres_dr_sh", prec="ilu0"),
            RunConfig(gen="bidiag1:100", alg="fad_sgmres_sh", prec="jacobi")]
    columns, rows = bench(cfgs)
    assert rows["bidiag1:1000"]["ad_sgmres_sh"] == DIVERGED
    assert rows["bidiag1:100"]["fad_sgmres_sh,jacobi"].startswith("error:")
    assert rows["bidiag1:100"]["fad_sgmres_dr_sh,e=3,ilu0"][0].isdigit()


def test_bench_repeats_spread():
    columns, rows = bench([RunConfig(gen="bidiag2:500", alg="ad_sgmres_sh")], repeats=3)
    cell = rows["bidiag2:500"]["ad_sgmres_sh"]
    assert "[" in cell and "-" in cell


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ngen = bidiag1:100\nalg = fad_sgmres_sh\nm = 12\n"
                   "shifts = 0, 1\nmax-mv = 500  # budget\n")
    values = read_config_file(cfg)
    assert values == {"gen": "bidiag1:100", "alg": "fad_sgmres_sh", "m": 12,
                      "shifts": [0, 1], "max_mv": 500}
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--m", "8", "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["m"] == 8 and len(summary["shifts"]) == 2


@pytest.mark.parametrize("text", ["m 10\n", "colour = red\n", "m = ten\n"])
def test_config_file_errors(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG


def test_reflect(tmp_path):
    status, report = run(RunConfig(gen="identity:5", reflect=3.0, shifts=[0.0],
                                   alg="ad_sgmres_sh"))
    assert status == EXIT_OK
    assert np.allclose(report.solutions[0], report.states[0].x)
    b = np.asarray(RunConfig(gen="identity:5").build_problem().rhs)
    assert np.allclose(report.solutions[0], b / 2)


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "shifted_sgmres", "run", "--gen", "bidiag1:50"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "outer mv=" in proc.stdout
