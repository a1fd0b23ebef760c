"""``fracocp`` command line: solve, convergence and verify."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import shlex
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from fracocp.assembly import OracleFailure, QuadratureSpec, assemble_mass
from fracocp.fracops import FracOrder
from fracocp.manufactured import CASES
from fracocp.mesh import Domain, Mesh
from fracocp.norms import ConvergenceReport
from fracocp.ocp import ConvergenceError, OCPProblem
from fracocp.solver import DiscreteField, NotSPDError, ResidualError
from fracocp.study import StudyAborted, has_exact, run_convergence, solve_case


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_ORACLE = 4
EXIT_NUMERICAL = 5

OUTPUT_ENV = "FRACOCP_OUTPUT_DIR"
Q_GRID = 101


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "example1"
    alpha: list = field(default_factory=lambda: [1.3])
    gamma: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    v1: float = -3.0
    v2: float = -0.1
    nx: list = field(default_factory=lambda: [10])
    tol: float = 1e-12
    max_iter: int = 500
    relaxation: float = 1.0
    n_transverse: int = 4
    n_axial: int = 6
    output_dir: str = "."
    g: str | None = None
    u_d: str | None = None
    jobs: int = 1
    dump_matrices: bool = False
    only: list = field(default_factory=list)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(self.n_transverse, self.n_axial)

    def validate(self) -> RunConfig:
        if self.problem not in (*CASES, "custom"):
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {[*CASES, 'custom']}")
        if self.problem == "custom" and not (self.g and self.u_d):
            raise ConfigError("problem 'custom' needs both g and u_d expressions")
        if not self.alpha:
            raise ConfigError("at least one alpha is required")
        try:
            for a in self.alpha:
                FracOrder(a)
            QuadratureSpec(self.n_transverse, self.n_axial)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.kappa1 <= 0 or self.kappa2 <= 0:
            raise ConfigError("kappa1 and kappa2 must be positive")
        if not self.v1 < self.v2:
            raise ConfigError(f"need v1 < v2, got [{self.v1}, {self.v2}]")
        if not self.nx or any(n < 2 for n in self.nx):
            raise ConfigError(f"mesh sizes must be integers >= 2, got {self.nx}")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not 0.0 < self.relaxation <= 1.0:
            raise ConfigError("relaxation must lie in (0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        return self


_LIST_FIELDS = {"alpha": float, "nx": int, "only": str}
_SCALAR_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key: str, raw):
    """Parse one config value given as text (file) or already typed (flags)."""
    if key in _LIST_FIELDS:
        items = raw if isinstance(raw, list) else raw.replace(",", " ").split()
        return [_LIST_FIELDS[key](v) for v in items]
    kind = _SCALAR_FIELDS[key].type
    if not isinstance(raw, str):
        return raw
    if kind == "bool":
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names with ``-`` or ``_``."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _SCALAR_FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def build_config(args: argparse.Namespace, environ=None) -> RunConfig:
    """Defaults, then config file, then the output-dir env var, then explicit flags."""
    environ = os.environ if environ is None else environ
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if environ.get(OUTPUT_ENV):
        values["output_dir"] = environ[OUTPUT_ENV]
    for key in _SCALAR_FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _convert(key, flag)
    try:
        cfg = replace(RunConfig(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


@dataclass(frozen=True)
class ExpressionField:
    """A field ``f(x, y)`` given as a numpy expression in ``x`` and ``y``."""

    source: str

    def __post_init__(self):
        try:
            compile(self.source, "<expression>", "eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.source!r}: {exc.msg}") from exc

    def __call__(self, x, y):
        env = {"np": np, "pi": np.pi, "x": np.asarray(x, float), "y": np.asarray(y, float)}
        env.update({name: getattr(np, name) for name in ("sin", "cos", "exp", "sqrt", "abs", "minimum", "maximum")})
        val = eval(self.source, {"__builtins__": {}}, env)  # noqa: S307 - user-supplied run configuration
        return np.broadcast_to(np.asarray(val, float), np.broadcast(env["x"], env["y"]).shape).copy()


@dataclass(frozen=True)
class CustomCase:
    """User problem on the unit square with expression data and no exact solution."""

    alpha: float
    g: ExpressionField
    u_d: ExpressionField
    kappa1: float = 1.0
    kappa2: float = 1.0
    gamma: float = 1.0
    v1: float = -3.0
    v2: float = -0.1

    @property
    def domain(self) -> Domain:
        return Domain(0.0, 1.0, 0.0, 1.0)

    @property
    def order(self) -> FracOrder:
        return FracOrder(self.alpha)

    def problem(self) -> OCPProblem:
        return OCPProblem(self.order, self.kappa1, self.kappa2, self.gamma, self.v1, self.v2, self.g, self.u_d)


def make_case(cfg: RunConfig, alpha: float):
    if cfg.problem == "custom":
        return CustomCase(alpha, ExpressionField(cfg.g), ExpressionField(cfg.u_d),
                          cfg.kappa1, cfg.kappa2, cfg.gamma, cfg.v1, cfg.v2)
    return CASES[cfg.problem](alpha, cfg.kappa1, cfg.kappa2, cfg.gamma, cfg.v1, cfg.v2)


# ---------------------------------------------------------------- csv helpers

def _fmt(v: float) -> str:
    return f"{v:.17e}"


def write_xyz(path, x, y, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("x", "y", "value"))
        for row in zip(np.ravel(x), np.ravel(y), np.ravel(values)):
            w.writerow([_fmt(v) for v in row])


def read_xyz(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def field_from_csv(mesh: Mesh, path) -> DiscreteField:
    """Rebuild a DiscreteField from a nodal dump written by ``solve``."""
    x, y, v = read_xyz(path)
    if x.size != mesh.n_nodes or not (np.allclose(x, mesh.nodes[:, 0]) and np.allclose(y, mesh.nodes[:, 1])):
        raise ValueError(f"{path} does not match the node layout of this mesh")
    return DiscreteField(mesh, v[mesh.interior_nodes])


def write_matrix(path, A) -> None:
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    np.savetxt(path, A, delimiter=",", fmt="%.17e", encoding="utf-8")


def _alpha_tag(alpha: float) -> str:
    return f"_alpha{alpha:g}"


# ---------------------------------------------------------------- commands

def cmd_solve(cfg: RunConfig, out=sys.stdout) -> int:
    if len(cfg.alpha) != 1 or len(cfg.nx) != 1:
        raise ConfigError("solve takes exactly one alpha and one nx")
    case = make_case(cfg, cfg.alpha[0])
    nx = cfg.nx[0]
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    res = solve_case(case, nx, cfg.quad, cfg.tol, cfg.max_iter, cfg.relaxation)
    mesh, sol = res.mesh, res.solution

    P = mesh.nodes
    write_xyz(outdir / "u_h.csv", P[:, 0], P[:, 1], sol.u_h.full_coeffs)
    write_xyz(outdir / "p_h.csv", P[:, 0], P[:, 1], sol.p_h.full_coeffs)
    d = mesh.domain
    gx, gy = np.meshgrid(np.linspace(d.a, d.b, Q_GRID), np.linspace(d.c, d.d, Q_GRID))
    write_xyz(outdir / "q_h.csv", gx, gy, sol.q_h(gx.ravel(), gy.ravel()))
    with open(outdir / "iterations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("iteration", "update_norm", "cost"))
        for k, upd, cost in sol.history:
            w.writerow((k, _fmt(upd), _fmt(cost)))
    if cfg.dump_matrices:
        write_matrix(outdir / "stiffness.csv", res.stiffness)
        write_matrix(outdir / "mass.csv", assemble_mass(mesh))

    print(f"alpha = {case.alpha:g}  nx = {nx}  dofs = {mesh.n_dofs}", file=out)
    print(f"iterations = {sol.iterations}  final_update = {sol.final_update_norm:.3e}", file=out)
    print(f"cost = {_fmt(res.cost)}", file=out)
    print(f"max u_h = {_fmt(sol.u_h.coeffs.max())}", file=out)
    if res.errors is not None:
        rep = ConvergenceReport()
        rep.add(res.h, res.errors["err_q_L2"], res.errors["err_p_eng"], res.errors["err_u_eng"])
        rep.to_csv(outdir / "errors.csv")
        print(rep.format_table(), file=out)
        for key, val in res.errors.items():
            print(f"{key} = {_fmt(val)}", file=out)
        for key, val in res.surrogate.items():
            print(f"surrogate_{key}_eng = {_fmt(val)}", file=out)
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, out=sys.stdout) -> int:
    if len(cfg.nx) < 2:
        raise ConfigError("convergence needs at least two mesh sizes (orders are undefined otherwise)")
    probe = make_case(cfg, cfg.alpha[0])
    if not has_exact(probe):
        raise ConfigError(f"problem {cfg.problem!r} has no exact solution to measure errors against")
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for alpha in cfg.alpha:
        case = make_case(cfg, alpha)
        tag = _alpha_tag(alpha)

        def per_mesh(res, tag=tag):
            row = ConvergenceReport()
            row.add(res.h, res.errors["err_q_L2"], res.errors["err_p_eng"], res.errors["err_u_eng"])
            row.to_csv(outdir / f"mesh{tag}_nx{res.nx}.csv")

        try:
            rep = run_convergence(case, cfg.nx, cfg.quad, cfg.tol, cfg.max_iter, cfg.relaxation,
                                  jobs=cfg.jobs, on_result=per_mesh)
        except StudyAborted as exc:
            exc.report.to_csv(outdir / f"convergence{tag}.partial.csv")
            print(f"alpha = {alpha:g}: PARTIAL results ({len(exc.report.h)} of {len(cfg.nx)} meshes)", file=out)
            if exc.report.h:
                print(exc.report.format_table(), file=out)
            raise exc.cause from exc
        rep.to_csv(outdir / f"convergence{tag}.csv")
        rep.write_loglog(outdir, tag)
        print(f"alpha = {alpha:g}", file=out)
        print(rep.format_table(), file=out)
        times = ", ".join(f"{t:.2f}s" for t in rep.metadata["wall_times"])
        print(f"iterations {rep.metadata['iterations']}  wall {times}", file=out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out=sys.stdout) -> int:
    from fracocp.verify import run_verify

    try:
        results = run_verify(cfg.quad, cfg.only or None, report=lambda line: print(line, file=out))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=out)
    if failed:
        raise OracleFailure(f"{len(failed)} check(s) failed: " + ", ".join(f"{r.family}/{r.name}" for r in failed))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--problem", help="example1 or custom")
    common.add_argument("--alpha", nargs="+", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--kappa1", type=float)
    common.add_argument("--kappa2", type=float)
    common.add_argument("--v1", type=float)
    common.add_argument("--v2", type=float)
    common.add_argument("--nx", nargs="+", type=int, help="mesh sizes (nx = ny)")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--relaxation", type=float)
    common.add_argument("--n-transverse", dest="n_transverse", type=int)
    common.add_argument("--n-axial", dest="n_axial", type=int)
    common.add_argument("--output-dir", dest="output_dir", help=f"overrides ${OUTPUT_ENV}")
    common.add_argument("--g", help="custom source term, numpy expression in x, y")
    common.add_argument("--u-d", dest="u_d", help="custom desired state, numpy expression in x, y")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fracocp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", parents=[common], help="solve on one mesh and dump fields")
    p_solve.add_argument("--dump-matrices", dest="dump_matrices", action="store_const", const=True)
    p_conv = sub.add_parser("convergence", parents=[common], help="mesh-refinement study")
    p_conv.add_argument("--jobs", type=int, help="worker processes (meshes in parallel)")
    p_ver = sub.add_parser("verify", parents=[common], help="run the oracle suite")
    p_ver.add_argument("--only", nargs="+", help="check families to run")
    return parser


def _error_line(kind: str, message: str) -> str:
    return f"error kind={kind} message={shlex.quote(str(message))}"


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, out=out)
    except ConfigError as exc:
        print(_error_line("config", exc), file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(_error_line("nonconvergence", exc), file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OracleFailure as exc:
        print(_error_line("oracle", exc), file=sys.stderr)
        return EXIT_ORACLE
    except (NotSPDError, ResidualError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(_error_line("numerical", exc), file=sys.stderr)
        return EXIT_NUMERICAL


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
