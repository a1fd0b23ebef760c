import csv
import io

import numpy as np
import pytest

import fracocp.study
from fracocp import cli
from fracocp.manufactured import ManufacturedCase
from fracocp.mesh import build_structured_mesh
from fracocp.norms import ConvergenceReport, energy_error, l2_error
from fracocp.ocp import project_control


def run(argv, monkeypatch=None):
    out = io.StringIO()
    code = cli.main(argv, out=out)
    return code, out.getvalue()


def printed(text, key):
    for line in text.splitlines():
        if line.startswith(key + " = "):
            return float(line.split("=")[1])
    raise KeyError(key)


@pytest.fixture(autouse=True)
def no_env(monkeypatch):
    monkeypatch.delenv(cli.OUTPUT_ENV, raising=False)


def test_solve_alpha19_nx25(tmp_path):
    code, text = run(["solve", "--alpha", "1.9", "--nx", "25", "--output-dir", str(tmp_path)])
    assert code == 0
    x, y, v = cli.read_xyz(tmp_path / "u_h.csv")
    assert len(v) == 26 * 26
    assert v.max() == pytest.approx(0.625, rel=0.02)
    grid = v.reshape(26, 26)
    # the collapsed triangle rule is not permutation invariant, so symmetry holds to quadrature accuracy
    np.testing.assert_allclose(grid, grid.T, atol=1e-5)
    np.testing.assert_allclose(grid, grid[::-1, ::-1], atol=1e-5)
    qx, qy, qv = cli.read_xyz(tmp_path / "q_h.csv")
    assert len(qv) == 101 * 101 and qv.min() >= -3 and qv.max() <= -0.1
    rows = list(csv.reader(open(tmp_path / "iterations.csv")))
    assert rows[0] == ["iteration", "update_norm", "cost"] and float(rows[-1][1]) <= 1e-12
    assert "cost = " in text


def test_invalid_alpha_rejected_before_assembly(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise AssertionError("assembly must not run")

    monkeypatch.setattr(fracocp.study, "assemble_stiffness", boom)
    code, _ = run(["solve", "--alpha", "2.5", "--nx", "5", "--output-dir", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    assert capsys.readouterr().err.startswith("error kind=config message=")


def test_roundtrip_and_solve_matches_convergence(tmp_path):
    sdir, cdir = tmp_path / "s", tmp_path / "c"
    code, text = run(["solve", "--alpha", "1.3", "--nx", "8", "--output-dir", str(sdir)])
    assert code == 0
    case = ManufacturedCase(1.3)
    mesh = build_structured_mesh(case.domain, 8, 8)
    u_h = cli.field_from_csv(mesh, sdir / "u_h.csv")
    p_h = cli.field_from_csv(mesh, sdir / "p_h.csv")
    e_u = energy_error(mesh, u_h, case.u, case.order)
    e_p = energy_error(mesh, p_h, case.p, case.order)
    e_q = l2_error(mesh, lambda x, y: project_control(p_h(x, y), 1.0, -3.0, -0.1), case.exact_q)
    assert e_u == pytest.approx(printed(text, "err_u_eng"), rel=1e-12)
    assert e_p == pytest.approx(printed(text, "err_p_eng"), rel=1e-12)
    assert e_q == pytest.approx(printed(text, "err_q_L2"), rel=1e-12)

    code, _ = run(["convergence", "--alpha", "1.3", "--nx", "6", "8", "--output-dir", str(cdir)])
    assert code == 0
    rep = ConvergenceReport.from_csv(cdir / "convergence_alpha1.3.csv")
    single = ConvergenceReport.from_csv(sdir / "errors.csv")
    assert (rep.err_q[1], rep.err_p[1], rep.err_u[1]) == (single.err_q[0], single.err_p[0], single.err_u[0])


def test_convergence_outputs(tmp_path):
    code, text = run(["convergence", "--alpha", "1.1", "1.9", "--nx", "4", "6", "--jobs", "2",
                      "--output-dir", str(tmp_path)])
    assert code == 0
    for tag in ("_alpha1.1", "_alpha1.9"):
        assert (tmp_path / f"convergence{tag}.csv").exists()
        for v in "qpu":
            assert (tmp_path / f"loglog_{v}{tag}.csv").read_text().startswith("h,err")
        assert (tmp_path / f"mesh{tag}_nx4.csv").exists()
    assert text.count("order") >= 6


def test_single_mesh_rejected(tmp_path):
    code, _ = run(["convergence", "--nx", "10", "--output-dir", str(tmp_path)])
    assert code == cli.EXIT_CONFIG


def test_nonconvergence_exit_and_partial_flag(tmp_path, capsys):
    code, text = run(["convergence", "--nx", "4", "6", "--max-iter", "2", "--output-dir", str(tmp_path)])
    assert code == cli.EXIT_NONCONVERGENCE
    assert "PARTIAL" in text
    assert (tmp_path / "convergence_alpha1.3.partial.csv").exists()
    assert "error kind=nonconvergence" in capsys.readouterr().err


def test_verify_only_spd():
    code, text = run(["verify", "--only", "spd"])
    assert code == 0
    lines = [ln for ln in text.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) == 15 and all(ln.startswith("PASS spd/") for ln in lines)


def test_verify_flags_degraded_quadrature(capsys):
    code, text = run(["verify", "--only", "quadrature", "--n-transverse", "2", "--n-axial", "2"])
    assert code == cli.EXIT_ORACLE
    assert "FAIL quadrature/" in text
    assert "error kind=oracle" in capsys.readouterr().err


def test_verify_unknown_family():
    assert run(["verify", "--only", "nope"])[0] == cli.EXIT_CONFIG


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 1.4\nnx = 5, 7\ngamma = 2\noutput-dir = from_file\n# trailing comment\n")
    args = cli.build_parser().parse_args(["convergence", "--config", str(cfg), "--gamma", "3"])
    c = cli.build_config(args, environ={})
    assert (c.alpha, c.nx, c.gamma, c.output_dir) == ([1.4], [5, 7], 3.0, "from_file")
    c = cli.build_config(args, environ={cli.OUTPUT_ENV: "from_env"})
    assert c.output_dir == "from_env"
    args = cli.build_parser().parse_args(["convergence", "--config", str(cfg), "--output-dir", "flag"])
    assert cli.build_config(args, environ={cli.OUTPUT_ENV: "from_env"}).output_dir == "flag"


@pytest.mark.parametrize("body", ["alpha 1.3\n", "colour = red\n", "nx = five\n", "v1 = 1\nv2 = 0\n"])
def test_bad_config_file(tmp_path, body, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    assert run(["solve", "--config", str(cfg)])[0] == cli.EXIT_CONFIG
    assert "error kind=config" in capsys.readouterr().err


def test_custom_problem_and_matrix_dump(tmp_path):
    code, text = run(["solve", "--problem", "custom", "--g", "10*sin(pi*x)*sin(pi*y)", "--u-d", "0*x",
                      "--alpha", "1.5", "--nx", "5", "--dump-matrices", "--output-dir", str(tmp_path)])
    assert code == 0
    assert "err_u_eng" not in text
    A = np.loadtxt(tmp_path / "stiffness.csv", delimiter=",")
    assert A.shape == (16, 16) and np.allclose(A, A.T)
    assert np.loadtxt(tmp_path / "mass.csv", delimiter=",").shape == (16, 16)


def test_custom_problem_needs_expressions():
    assert run(["solve", "--problem", "custom"])[0] == cli.EXIT_CONFIG
    assert run(["solve", "--problem", "custom", "--g", "x +", "--u-d", "y"])[0] == cli.EXIT_CONFIG


def test_help_exits_cleanly(capsys):
    assert run(["--help"])[0] == 0
