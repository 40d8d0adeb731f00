"""Command line entry point.

    tvfcgcg run CONFIG [--tol T] [--max-iter K] [--mode onecut|dinkelbach] [--out DIR]
    tvfcgcg compare CONFIG [same flags]
    tvfcgcg mesh N JITTER SEED OUT
    tvfcgcg oracle-cut MESH WEIGHTS

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, build_problem, load_config, serialize_config
from .curvature_cut import brute_force_mincut, solve_mincut
from .fcgcg import FCGCGSolver, run_comparison, write_outputs
from .mesh import MeshFormatError, generate_square_mesh, load_field, load_mesh, save_field, save_mesh

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tvfcgcg", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("run", "compare"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--mode", choices=["onecut", "dinkelbach"])
        p.add_argument("--out")

    p = sub.add_parser("mesh")
    p.add_argument("n", type=int)
    p.add_argument("jitter", type=float)
    p.add_argument("seed", type=int)
    p.add_argument("out")

    p = sub.add_parser("oracle-cut")
    p.add_argument("mesh")
    p.add_argument("weights")
    return parser


def _apply_overrides(cfg, args):
    solver = cfg.solver
    if args.tol is not None:
        solver = dataclasses.replace(solver, tolerance=args.tol)
    if args.max_iter is not None:
        solver = dataclasses.replace(solver, max_iter=args.max_iter)
    if args.mode is not None:
        solver = dataclasses.replace(solver, mode=args.mode)
    cfg.solver = solver
    if args.out is not None:
        cfg.output = dataclasses.replace(cfg.output, directory=args.out)
    if not cfg.solver.tolerance > 0:
        raise ConfigError("solver.tolerance out of range: must be > 0")
    if cfg.solver.max_iter < 0:
        raise ConfigError("solver.max_iter out of range: must be >= 0")
    return cfg


def _write_run(out: Path, cfg, result, mesh):
    write_outputs(result, mesh, out)
    (out / "config.toml").write_text(serialize_config(cfg))
    if not cfg.output.emit_fields:
        (out / "solution.p0field").unlink()


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    problem = build_problem(cfg)
    result = FCGCGSolver(problem, cfg.solver_config()).run()
    out = Path(cfg.output.directory)
    _write_run(out, cfg, result, problem.mesh)
    s = result.summary()
    print(f"converged={s['converged']} iterations={s['iterations']} J={s['final_J']!r} "
          f"pde_solves={s['pde_solves']} cuts={s['cuts']}")
    return EXIT_OK if result.converged else EXIT_SOLVER


def _cmd_compare(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    problem = build_problem(cfg)
    one, dink = run_comparison(problem, cfg.solver_config())
    out = Path(cfg.output.directory)
    for mode, res in (("onecut", one), ("dinkelbach", dink)):
        mode_cfg = dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, mode=mode))
        _write_run(out / mode, mode_cfg, res, problem.mesh)
    table = {"onecut": one.summary(), "dinkelbach": dink.summary(),
             "J_difference": abs(one.final_J - dink.final_J)}
    (out / "comparison.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    for mode, s in (("onecut", table["onecut"]), ("dinkelbach", table["dinkelbach"])):
        print(f"{mode:>10}: iterations={s['iterations']} pde_solves={s['pde_solves']} "
              f"cuts={s['cuts']} J={s['final_J']!r}")
    return EXIT_OK if one.converged and dink.converged else EXIT_SOLVER


def _cmd_mesh(args) -> int:
    try:
        mesh = generate_square_mesh(args.n, args.jitter, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    save_mesh(args.out, mesh)
    print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles -> {args.out}")
    return EXIT_OK


def _cmd_oracle_cut(args) -> int:
    mesh = load_mesh(args.mesh)
    kind, c = load_field(args.weights, mesh)
    if kind != "P0":
        raise ConfigError("weights must be a P0 field")
    try:
        best, minimizers = brute_force_mincut(mesh, c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sol = solve_mincut(mesh, c)
    maximal = np.flatnonzero(minimizers.any(axis=0))
    report = {
        "oracle_energy": best / sol.graph.scale,
        "oracle_integer_energy": best,
        "oracle_minimizers": int(len(minimizers)),
        "oracle_maximal_minimizer": maximal.tolist(),
        "cut_energy": sol.energy,
        "cut_integer_energy": sol.integer_energy,
        "cut_subset": sol.subset.tolist(),
        "agree": bool(best == sol.integer_energy and np.array_equal(maximal, sol.subset)),
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["agree"] else EXIT_SOLVER


_COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "mesh": _cmd_mesh,
             "oracle-cut": _cmd_oracle_cut}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, MeshFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
