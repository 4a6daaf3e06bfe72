"""Configuration-driven command line: solve, verify, list-cases.

Config files are plain ``key = value`` lines with dotted keys and ``#``
comments.  Unknown keys are errors, not warnings, so typos cannot
silently fall back to defaults.  Two kinds of setup are supported:

* ``case = <id>`` pulls a registered manufactured case (exact solution
  available, so all verification suites apply);
* explicit setup via ``mesh.*``, ``mu``, ``nfunction.*``,
  ``load.expression.*`` and ``dirichlet.expression.*`` (rate-based suites
  need an exact solution and are rejected here; the energy-estimate suite
  still applies).

Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 verification failure.
"""

import argparse
import os
import sys

import numpy as np

from . import verify as verify_mod
from .expressions import ExpressionError, parse_expression
from .energy import Problem
from .mesh import MeshFormatError, generate_rectangle, load_mesh
from .nfunction import make_family
from .solver import LineSearchError, SolverConfig, solve
from .tensorfield import DisplacementField, LoadSource, LoadTensor

__all__ = ["main", "run_case", "list_cases", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_VERIFY_FAILED = 4

_KNOWN_KEYS = {
    "case",
    "mesh.file",
    "mesh.grid",
    "mesh.extent",
    "mesh.bc",
    "mu",
    "nfunction.family",
    "nfunction.kappa",
    "nfunction.p",
    "nfunction.beta",
    "nfunction.lambda_tilde",
    "load.expression.xx",
    "load.expression.xy",
    "load.expression.yy",
    "dirichlet.expression.x",
    "dirichlet.expression.y",
    "solver.tol_residual",
    "solver.max_newton",
    "solver.linear_solver",
    "solver.cg_tol",
    "solver.seed",
    "verify.suite",
    "verify.levels",
    "verify.k_margin",
    "verify.min_order",
    "output.vtk",
}

_RATE_SUITES = ("harmonic", "curl", "mms")
_ALL_SUITES = ("harmonic", "curl", "estimate", "mms")


class ConfigError(ValueError):
    """Configuration problem; maps to exit code 2."""


class Config:
    """Parsed key=value file with typed accessors that carry line context."""

    def __init__(self, entries):
        self.entries = entries  # key -> (value string, line number)

    @classmethod
    def parse(cls, path):
        entries = {}
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for ln, line in enumerate(raw, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{ln}: expected 'key = value', got {body!r}")
            key, value = (part.strip() for part in body.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{ln}: unknown config key {key!r}")
            if key in entries:
                raise ConfigError(f"{path}:{ln}: duplicate key {key!r}")
            entries[key] = (value, ln)
        return cls(entries)

    def has(self, key):
        return key in self.entries

    def get(self, key, default=None):
        return self.entries[key][0] if key in self.entries else default

    def _typed(self, key, default, cast, what):
        if key not in self.entries:
            return default
        value, ln = self.entries[key]
        try:
            return cast(value)
        except ValueError:
            raise ConfigError(f"line {ln}: {key} needs {what}, got {value!r}") from None

    def get_float(self, key, default=None):
        return self._typed(key, default, float, "a number")

    def get_int(self, key, default=None):
        return self._typed(key, default, int, "an integer")

    def get_bool(self, key, default=False):
        return self._typed(
            key, default, lambda v: {"true": True, "false": False}[v.lower()], "true/false"
        )

    def get_floats(self, key, count, default=None):
        def cast(v):
            parts = [float(p) for p in v.split(",")]
            if len(parts) != count:
                raise ValueError
            return parts

        return self._typed(key, default, cast, f"{count} comma-separated numbers")


def _parse_bc(spec_text):
    tags = {}
    for item in spec_text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(f"mesh.bc entries look like 'left:D', got {item!r}")
        side, tag = (p.strip() for p in item.split(":", 1))
        if side not in ("left", "right", "bottom", "top") or tag not in ("D", "N"):
            raise ConfigError(f"bad mesh.bc entry {item!r}")
        tags[side] = tag
    return tags


def _build_mesh(cfg):
    if cfg.has("mesh.file"):
        try:
            return load_mesh(cfg.get("mesh.file"))
        except (OSError, MeshFormatError, ValueError) as exc:
            raise ConfigError(f"mesh.file: {exc}") from None
    grid = cfg.get_floats("mesh.grid", 2, default=[16, 16])
    nx, ny = int(grid[0]), int(grid[1])
    extent = cfg.get_floats("mesh.extent", 4, default=[0.0, 1.0, 0.0, 1.0])
    bc = _parse_bc(cfg.get("mesh.bc")) if cfg.has("mesh.bc") else None
    try:
        return generate_rectangle(nx, ny, extent=extent, boundary_spec=bc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_phi(cfg):
    family = cfg.get("nfunction.family", "quadratic")
    try:
        return make_family(
            family,
            kappa=cfg.get_float("nfunction.kappa", 0.0),
            p=cfg.get_float("nfunction.p", 2.0),
            beta=cfg.get_float("nfunction.beta", 0.0),
            lambda_tilde=cfg.get_float("nfunction.lambda_tilde", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"nfunction: {exc}") from None


def _expression(cfg, key, default="0"):
    try:
        return parse_expression(cfg.get(key, default))
    except ExpressionError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _build_explicit_problem(cfg):
    mesh = _build_mesh(cfg)
    phi = _build_phi(cfg)
    mu = cfg.get_float("mu", 1.0)
    source = LoadSource.from_expressions(
        _expression(cfg, "load.expression.xx"),
        _expression(cfg, "load.expression.xy"),
        _expression(cfg, "load.expression.yy"),
    )
    load = LoadTensor.from_source(mesh, source)
    ex = _expression(cfg, "dirichlet.expression.x")
    ey = _expression(cfg, "dirichlet.expression.y")
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u0 = DisplacementField(
        mesh,
        np.stack(
            [np.broadcast_to(ex(x, y), x.shape), np.broadcast_to(ey(x, y), x.shape)],
            axis=1,
        ),
    )
    try:
        return Problem(mesh, mu, phi, load, u0=u0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _case_grid(cfg):
    grid = cfg.get_floats("mesh.grid", 2, default=[16, 16])
    nx, ny = int(grid[0]), int(grid[1])
    if nx != ny:
        raise ConfigError("registry cases use square grids; set mesh.grid = n,n")
    return nx


def build_problem(cfg):
    """Returns ``(problem, case_id_or_None)``; case configs keep their id."""
    if cfg.has("case"):
        clash = [
            k
            for k in cfg.entries
            if k.startswith(("nfunction.", "load.", "dirichlet.")) or k == "mesh.file"
        ]
        if clash:
            raise ConfigError(f"'case' conflicts with explicit setup key {clash[0]!r}")
        case_id = cfg.get("case")
        if case_id not in verify_mod.case_ids():
            raise ConfigError(
                f"unknown case {case_id!r}; known: {', '.join(verify_mod.case_ids())}"
            )
        prob, _ = verify_mod.manufactured(case_id, n=_case_grid(cfg))
        return prob, case_id
    return _build_explicit_problem(cfg), None


def _solver_config(cfg):
    try:
        return SolverConfig(
            tol_residual=cfg.get_float("solver.tol_residual", 1e-10),
            max_newton=cfg.get_int("solver.max_newton", 50),
            linear_solver=cfg.get("solver.linear_solver", "direct"),
            cg_tol=cfg.get_float("solver.cg_tol", 1e-12),
            seed=cfg.get_int("solver.seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None


def _selected_suites(cfg, override=None):
    text = override if override is not None else cfg.get("verify.suite", "none")
    text = text.strip().lower()
    if text in ("", "none"):
        return []
    if text == "all":
        return list(_ALL_SUITES)
    suites = [s.strip() for s in text.split(",") if s.strip()]
    for s in suites:
        if s not in _ALL_SUITES:
            raise ConfigError(f"unknown verification suite {s!r}")
    return suites


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_solution_csv(path, mesh, u):
    rows = [
        (i, mesh.nodes[i, 0], mesh.nodes[i, 1], u.values[i, 0], u.values[i, 1])
        for i in range(mesh.n_nodes)
    ]
    _write_csv(path, ["node", "x", "y", "u_x", "u_y"], rows)


def write_report_csv(path, report):
    est = report.estimate_A_report
    header = [
        "converged",
        "iterations",
        "residual_initial",
        "residual_final",
        "shear",
        "bulk",
        "load",
        "total",
        "estimate_lhs",
        "estimate_rhs_sum",
        "estimate_ratio",
        "estimate_bound_ok",
        "competitor_ok",
    ]
    row = [
        report.converged,
        report.iterations,
        report.residual_history[0],
        report.residual_history[-1],
        report.breakdown.shear,
        report.breakdown.bulk,
        report.breakdown.load,
        report.breakdown.total,
        est.lhs,
        est.rhs_sum,
        est.ratio,
        est.bound_ok,
        est.competitor_ok,
    ]
    _write_csv(path, header, [row])


def write_vtk(path, mesh, u):
    """Legacy ASCII VTK unstructured grid with the displacement as point data."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("orlicz-elastica displacement\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} float\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}\n")
        for i, j, k in mesh.elements:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {mesh.n_elements}\n")
        for _ in range(mesh.n_elements):
            fh.write("5\n")
        fh.write(f"POINT_DATA {mesh.n_nodes}\n")
        fh.write("VECTORS displacement float\n")
        for ux, uy in u.values:
            fh.write(f"{ux:.17g} {uy:.17g} 0\n")


def _incremental_rates(hs, errs):
    out = [""]
    for k in range(1, len(errs)):
        if errs[k] > 0 and errs[k - 1] > 0:
            out.append(float(np.log(errs[k - 1] / errs[k]) / np.log(hs[k - 1] / hs[k])))
        else:
            out.append("")
    return out


def write_ladder_csv(path, ladder):
    hs = [r.h for r in ladder.rows]
    rates = {
        name: _incremental_rates(hs, [getattr(r, name) for r in ladder.rows])
        for name in ("h1_error", "harmonic_defect", "curl_residual")
    }
    header = [
        "case",
        "n",
        "h",
        "h1_error",
        "h1_rate",
        "harmonic_defect",
        "harmonic_rate",
        "curl_residual",
        "curl_rate",
        "estimate_ratio",
    ]
    rows = []
    for k, r in enumerate(ladder.rows):
        rows.append(
            (
                ladder.case,
                r.n,
                r.h,
                r.h1_error,
                rates["h1_error"][k],
                r.harmonic_defect,
                rates["harmonic_defect"][k],
                r.curl_residual,
                rates["curl_residual"][k],
                r.estimate_ratio,
            )
        )
    _write_csv(path, header, rows)


def _run_verification(case_id, prob, report, suites, cfg, out_dir):
    """Run selected suites; returns (all_passed, summary lines)."""
    lines = []
    passed = True
    min_order = cfg.get_float("verify.min_order", 0.9)
    k_margin = cfg.get_float("verify.k_margin", None)

    rate_suites = [s for s in suites if s in _RATE_SUITES]
    if rate_suites and case_id is None:
        raise ConfigError(
            "rate-based suites (harmonic, curl, mms) need a registry case "
            "with a known exact solution; use 'case = <id>'"
        )

    if rate_suites:
        levels_n = cfg.get_int("verify.levels", 4)
        base = prob.mesh  # ladder starts from the configured grid size
        nx = int(round(np.sqrt(base.n_elements / 2)))
        levels = tuple(nx * 2**k for k in range(levels_n))
        ladder = verify_mod.refinement_ladder(
            case_id, levels=levels, cfg=_solver_config(cfg), K_margin=k_margin
        )
        write_ladder_csv(os.path.join(out_dir, "ladder.csv"), ladder)
        checks = {
            "mms": ("H1 convergence", ladder.h1_rate),
            "harmonic": ("harmonic defect decay", ladder.harmonic_rate),
            "curl": ("curl residual decay", ladder.curl_rate),
        }
        for s in rate_suites:
            label, rate = checks[s]
            ok = rate >= min_order or rate == float("inf")
            passed &= ok
            lines.append(f"{s}: {'PASS' if ok else 'FAIL'} ({label} rate {rate:.3f})")
        if "estimate" in suites:
            trend = ladder.ratio_trend()
            comp = all(r.competitor_ok for r in ladder.rows)
            est = report.estimate_A_report
            ok = comp and est.bound_ok and trend >= -0.1
            passed &= ok
            lines.append(
                f"estimate: {'PASS' if ok else 'FAIL'} "
                f"(ratio trend {trend:+.3f}, bound_ok {est.bound_ok}, competitor_ok {comp})"
            )
    elif "estimate" in suites:
        est = report.estimate_A_report
        ok = est.bound_ok and est.competitor_ok
        passed &= ok
        lines.append(
            f"estimate: {'PASS' if ok else 'FAIL'} "
            f"(ratio {est.ratio:.4g}, bound_ok {est.bound_ok}, competitor_ok {est.competitor_ok})"
        )
    return passed, lines


def run_case(config_path, out_dir=".", suite_override=None, overrides=None):
    """Execute a config: solve, export, then run the selected verifications.

    ``overrides`` maps config keys (e.g. ``mesh.grid`` from the command
    line) onto replacement values.  Returns the process exit code (see
    module docstring).
    """
    try:
        cfg = Config.parse(config_path)
        for key, value in (overrides or {}).items():
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            cfg.entries[key] = (value, 0)
        prob, case_id = build_problem(cfg)
        solver_cfg = _solver_config(cfg)
        suites = _selected_suites(cfg, suite_override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(out_dir, exist_ok=True)
    try:
        u, report = solve(prob, solver_cfg)
    except LineSearchError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    write_solution_csv(os.path.join(out_dir, "solution.csv"), prob.mesh, u)
    write_report_csv(os.path.join(out_dir, "report.csv"), report)
    if cfg.get_bool("output.vtk", False):
        write_vtk(os.path.join(out_dir, "solution.vtk"), prob.mesh, u)

    print(
        f"solve: converged={report.converged} iterations={report.iterations} "
        f"residual={report.residual_history[-1]:.3e} energy={report.breakdown.total:.12g}"
    )
    if not report.converged:
        print("solver did not converge within the newton budget", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    if suites:
        try:
            ok, lines = _run_verification(case_id, prob, report, suites, cfg, out_dir)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for line in lines:
            print(line)
        if not ok:
            print("VERIFY: FAIL")
            return EXIT_VERIFY_FAILED
        print("VERIFY: PASS")
    return EXIT_OK


def list_cases(stream=None):
    """Print the registered case ids with one-line descriptions."""
    stream = stream or sys.stdout
    for name, desc in verify_mod.case_descriptions().items():
        stream.write(f"{name}: {desc}\n")
    return EXIT_OK


def _apply_thread_cap():
    value = os.environ.get("ORLICZ_ELASTICA_THREADS")
    if not value:
        return
    try:
        n = int(value)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"ORLICZ_ELASTICA_THREADS must be a positive integer, got {value!r}")
    try:  # caps BLAS pools; assembly itself is vectorized single-process
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="orlicz-elastica",
        description="nonlinear-bulk elasticity solver and verification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_flags = argparse.ArgumentParser(add_help=False)
    mesh_flags.add_argument("--mesh", help="mesh file path (overrides mesh.file)")
    mesh_flags.add_argument("--grid", help="nx,ny (overrides mesh.grid)")
    mesh_flags.add_argument("--extent", help="x0,x1,y0,y1 (overrides mesh.extent)")
    mesh_flags.add_argument("--bc", help="left:D,right:N,... (overrides mesh.bc)")

    p_solve = sub.add_parser(
        "solve", parents=[mesh_flags], help="solve a configured case and export results"
    )
    p_solve.add_argument("--config", required=True, help="path to a key=value config file")
    p_solve.add_argument("--out", default=".", help="output directory")

    p_verify = sub.add_parser(
        "verify", parents=[mesh_flags], help="run verification suites for a case"
    )
    sel = p_verify.add_mutually_exclusive_group(required=True)
    sel.add_argument("--config", help="path to a key=value config file")
    sel.add_argument("--case", help="registry case id (see list-cases)")
    p_verify.add_argument(
        "--suite", default="all", help="all | none | comma list of harmonic,curl,estimate,mms"
    )
    p_verify.add_argument("--levels", type=int, default=4, help="ladder depth")
    p_verify.add_argument("--out", default=".", help="output directory")

    sub.add_parser("list-cases", help="list registered manufactured cases")

    args = parser.parse_args(argv)
    try:
        _apply_thread_cap()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "list-cases":
        return list_cases()
    overrides = {}
    for flag, key in (("mesh", "mesh.file"), ("grid", "mesh.grid"),
                      ("extent", "mesh.extent"), ("bc", "mesh.bc")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if args.command == "solve":
        return run_case(args.config, out_dir=args.out, overrides=overrides)
    # verify
    if args.case:
        import tempfile

        with tempfile.NamedTemporaryFile(
            "w", suffix=".cfg", delete=False, encoding="utf-8"
        ) as fh:
            fh.write(f"case = {args.case}\n")
            fh.write("mesh.grid = 16,16\n")
            fh.write(f"verify.levels = {args.levels}\n")
            path = fh.name
        try:
            return run_case(path, out_dir=args.out, suite_override=args.suite,
                            overrides=overrides)
        finally:
            os.unlink(path)
    return run_case(args.config, out_dir=args.out, suite_override=args.suite,
                    overrides=overrides)


if __name__ == "__main__":
    sys.exit(main())
