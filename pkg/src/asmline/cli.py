"""Command-line entry point: ``asmline <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .balance import BalanceProblem, solve_balance
from .config import OUTPUT_DIR_ENV, RunConfig, load_run_config, load_sweep_spec
from .digraph import CutsetDigraph, WeightConfig, generate_digraph
from .errors import (
    AsmlineError, AssemblyError, ConfigError, GeometryError, GraphSizeError, MeshError,
    PlanningInfeasible,
)
from .geometry import build_constraints, export_geometry_constraints, import_geometry_constraints
from .lpexport import export_lp
from .model import load_part_graph, normalize_attributes
from .pipeline import StageError, load_meshes, run_pipeline
from .reduction import ReductionConfig, reduce_edges
from .report import dump_solution, export_dot, export_report, solution_from_document
from .sweep import sweep_experiment

log = logging.getLogger("asmline")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_TIMEOUT = 4
EXIT_INPUT = 5
EXIT_SIZE = 6


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, PlanningInfeasible):
        return EXIT_INFEASIBLE
    if isinstance(exc, GraphSizeError):
        return EXIT_SIZE
    if isinstance(exc, (AssemblyError, MeshError, GeometryError, FileNotFoundError)):
        return EXIT_INPUT
    return EXIT_ERROR


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _emit(text: str, out: str | None, default_name: str) -> None:
    """Write to ``out``, else into $ASMLINE_OUTPUT_DIR, else to stdout."""
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = str(Path(os.environ[OUTPUT_DIR_ENV]) / default_name)
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text)
    log.info("wrote %s", out)


def _weights(vals) -> WeightConfig:
    try:
        return WeightConfig(*vals)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- subcommands -------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    g = load_part_graph(_read(args.assembly))
    if not Path(args.meshes).is_dir():
        raise ConfigError(f"mesh directory not found: {args.meshes}")
    cons = build_constraints(load_meshes(args.meshes, g.part_ids), g.joints)
    _emit(export_geometry_constraints(cons.relations, cons.dofs, cons.frames) + "\n", args.output,
          "constraints.json")
    return EXIT_OK


def cmd_plan(args) -> int:
    g = load_part_graph(_read(args.assembly))
    geo = import_geometry_constraints(_read(args.constraints)) if args.constraints else None
    d = generate_digraph(g, normalize_attributes(g), _weights(args.weights), geo, max_edges=args.max_edges)
    _emit(d.dumps(), args.output, "digraph.json")
    if args.dot:
        _emit(export_dot(d), args.dot, "digraph.dot")
    log.info("digraph: %d nodes, %d edges", d.n_nodes, d.n_edges)
    return EXIT_OK


def cmd_reduce(args) -> int:
    d = CutsetDigraph.from_document(_read(args.digraph))
    try:
        cfg = ReductionConfig(args.fraction, args.k_paths, args.protected_layers, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    r = reduce_edges(d, cfg)
    _emit(r.dumps(), args.output, "reduced.json")
    log.info("reduced %d -> %d edges", d.n_edges, r.n_edges)
    return EXIT_OK


def cmd_balance(args) -> int:
    g = load_part_graph(_read(args.assembly))
    d = CutsetDigraph.from_document(_read(args.digraph))
    times = {j.id: j.time for j in g.joints}
    try:
        problem = BalanceProblem.build(d, times, args.phases, args.lam, args.c, args.gap, args.time_limit)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.lp:
        _emit(export_lp(problem), args.lp, "model.lp")
    s = solve_balance(problem)
    _emit(dump_solution(s, g), args.output, "solution.json")
    if s.status == "timeout":
        log.warning("time limit reached; best solution has relative gap %.4f", s.relative_gap)
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_report(args) -> int:
    g = load_part_graph(_read(args.assembly))
    s = solution_from_document(_read(args.solution))
    _emit(export_report(s, g).to_csv(), args.output, "report.csv")
    return EXIT_OK


def _run_config(args) -> RunConfig:
    if args.config:
        cfg = load_run_config(args.config)
    elif getattr(args, "assembly", None):
        cfg = RunConfig(assembly=args.assembly)
    else:
        raise ConfigError("give --config or --assembly")
    red = cfg.reduction
    red_kw = {k: getattr(args, k, None) for k in ("fraction", "k_paths", "seed")}
    if getattr(args, "protected_layers", None) is not None:
        red_kw["protected_outer_layers"] = args.protected_layers
    red_kw = {k: v for k, v in red_kw.items() if v is not None}
    output_dir = getattr(args, "output_dir", None) or os.environ.get(OUTPUT_DIR_ENV)
    try:
        return cfg.with_overrides(
            assembly=getattr(args, "assembly", None), meshes=getattr(args, "meshes", None),
            constraints=getattr(args, "constraints", None),
            use_dof=True if getattr(args, "use_dof", False) else None,
            weights=getattr(args, "weights", None), lam=getattr(args, "lam", None),
            phases=getattr(args, "phases", None), gap=getattr(args, "gap", None),
            c=getattr(args, "c", None), time_limit=getattr(args, "time_limit", None),
            output_dir=output_dir,
            reduction=ReductionConfig(**{**_reduction_kw(red), **red_kw}) if red_kw else None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _reduction_kw(red: ReductionConfig) -> dict:
    return {"fraction": red.fraction, "k_paths": red.k_paths,
            "protected_outer_layers": red.protected_outer_layers, "seed": red.seed}


def cmd_run(args) -> int:
    cfg = _run_config(args)
    result = run_pipeline(cfg)
    s = result.solution
    print(json.dumps({"output_dir": str(result.output_dir), "objective": s.objective,
                      "alpha": s.alpha, "status": s.status, "operations": list(s.ops)}))
    return EXIT_TIMEOUT if s.status == "timeout" else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    cfg.validate()
    spec = load_sweep_spec(args.spec)
    result = sweep_experiment(spec, cfg, threads=args.threads, timing_repeats=args.timing_repeats)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_rows.csv").write_text(result.rows_csv())
    (out / "sweep_summary.csv").write_text(result.summary_csv())
    failed = sum(1 for r in result.rows if r.get("status") == "failed")
    print(json.dumps({"output_dir": str(out), "rows": len(result.rows), "failed": failed}))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _add_solver_flags(p, defaults: bool):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--phases", "-P", type=int, default=d(1), help="number of stations")
    p.add_argument("--lam", type=float, default=d(0.5), help="weight of the bottleneck term, in [0, 1]")
    p.add_argument("--c", type=float, default=None, help="contribution factor (default: equal contribution)")
    p.add_argument("--gap", type=float, default=d(0.0), help="relative optimality gap")
    p.add_argument("--time-limit", type=float, default=None, help="solver wall-time limit in seconds")


def _add_reduction_flags(p, defaults: bool):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--fraction", type=float, default=d(0.0), help="share of removable edges to drop")
    p.add_argument("--k-paths", type=int, default=d(10), help="shortest paths to protect")
    p.add_argument("--protected-layers", type=int, default=d(1), help="outer layers left untouched")
    p.add_argument("--seed", type=int, default=d(0), help="reduction RNG seed")


def _add_run_flags(p):
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--assembly", help="assembly document (overrides config)")
    p.add_argument("--meshes", help="directory with one <part id>.stl per part")
    p.add_argument("--constraints", help="constraint document")
    p.add_argument("--use-dof", action="store_true", help="apply the DoF collision check")
    p.add_argument("--weights", type=float, nargs=3, metavar=("TECH", "HAND", "TOL"))
    p.add_argument("--output-dir", help=f"output directory (env {OUTPUT_DIR_ENV})")
    _add_solver_flags(p, defaults=False)
    _add_reduction_flags(p, defaults=False)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asmline", description="Assembly sequence and line balancing planner.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="meshes -> constraint document")
    p.add_argument("--assembly", required=True)
    p.add_argument("--meshes", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("plan", help="assembly -> cutset digraph")
    p.add_argument("--assembly", required=True)
    p.add_argument("--constraints", help="constraint document; enables the DoF check")
    p.add_argument("--weights", type=float, nargs=3, metavar=("TECH", "HAND", "TOL"),
                   default=(1 / 3, 1 / 3, 1 / 3))
    p.add_argument("--max-edges", type=int, default=5_000_000)
    p.add_argument("--dot", help="also write a DOT rendering here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("reduce", help="randomized edge reduction")
    p.add_argument("--digraph", required=True)
    _add_reduction_flags(p, defaults=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("balance", help="sequence and station assignment")
    p.add_argument("--digraph", required=True)
    p.add_argument("--assembly", required=True)
    _add_solver_flags(p, defaults=True)
    p.add_argument("--lp", help="also write the LP-format model here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("report", help="solution -> CSV report")
    p.add_argument("--solution", required=True)
    p.add_argument("--assembly", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="parameter sweep")
    _add_run_flags(p)
    p.add_argument("--spec", required=True, help="SweepSpec JSON file")
    p.add_argument("--threads", type=int, default=None, help="parallel cells (env ASMLINE_THREADS)")
    p.add_argument("--timing-repeats", type=int, default=1, help="solve each cell this often, keep the fastest time")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="full pipeline")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AsmlineError, FileNotFoundError) as exc:
        code = exit_code_for(exc)
        log.error("%s", exc)
        return code


if __name__ == "__main__":
    sys.exit(main())
