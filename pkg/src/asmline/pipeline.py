"""End-to-end run: preprocess, plan, reduce, balance, report."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .balance import BalanceProblem, Solution, solve_balance
from .config import RunConfig
from .digraph import CutsetDigraph, generate_digraph
from .errors import AsmlineError
from .geometry import (
    GeometryConstraints, build_constraints, export_geometry_constraints,
    import_geometry_constraints, read_stl,
)
from .lpexport import export_lp
from .model import PartGraph, load_part_graph, normalize_attributes
from .reduction import reduce_edges
from .report import dump_solution, export_dot, export_report, solution_document, strip_timing

logger = logging.getLogger(__name__)


class StageError(AsmlineError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, cause: Exception):
        code = getattr(cause, "code", None) or "stage-failed"
        super().__init__(f"stage {stage!r} failed: {cause}", code)
        self.stage = stage
        self.cause = cause


@dataclass
class RunResult:
    output_dir: Path
    graph: PartGraph
    digraph: CutsetDigraph
    reduced: CutsetDigraph
    solution: Solution
    manifest: dict
    constraints: GeometryConstraints | None = None
    files: dict[str, Path] = field(default_factory=dict)


def sha256(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def load_meshes(mesh_dir: str | Path, part_ids) -> dict:
    """One STL file per part, named ``<part id>.stl``."""
    mesh_dir = Path(mesh_dir)
    meshes = {}
    for pid in part_ids:
        path = mesh_dir / f"{pid}.stl"
        if not path.is_file():
            raise FileNotFoundError(f"no mesh for part {pid!r} at {path}")
        meshes[pid] = read_stl(path, pid)
    return meshes


class _Recorder:
    def __init__(self, out: Path):
        self.out = out
        self.files: dict[str, Path] = {}

    def write(self, name: str, text: str) -> str:
        path = self.out / name
        path.write_text(text)
        self.files[name] = path
        return sha256(text)

    def stage(self, name, fn):
        t0 = time.monotonic()
        try:
            result = fn()
        except AsmlineError as exc:
            if isinstance(exc, StageError):
                raise
            raise StageError(name, exc) from exc
        except (OSError, ValueError, KeyError) as exc:
            raise StageError(name, exc) from exc
        return result, time.monotonic() - t0


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Run every stage, writing artifacts and ``manifest.json`` to ``cfg.output_dir``.

    Artifacts written before a failing stage are left in place.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = _Recorder(out)
    timings: dict[str, float] = {}
    stages: list[dict] = []

    assembly_text = Path(cfg.assembly).read_text()
    assembly_hash = sha256(assembly_text)

    def _load():
        return load_part_graph(assembly_text)

    g, timings["load"] = rec.stage("load", _load)
    stages.append({"stage": "load", "input": assembly_hash, "output": assembly_hash,
                   "artifact": None})

    geo = None
    plan_inputs = [assembly_hash]
    if cfg.use_dof:
        def _preprocess():
            if cfg.constraints is not None:
                text = Path(cfg.constraints).read_text()
                return import_geometry_constraints(text), text
            meshes = load_meshes(cfg.meshes, g.part_ids)
            cons = build_constraints(meshes, g.joints)
            text = export_geometry_constraints(cons.relations, cons.dofs, cons.frames)
            return cons, text

        (geo, cons_text), timings["preprocess"] = rec.stage("preprocess", _preprocess)
        h = rec.write("constraints.json", cons_text)
        stages.append({"stage": "preprocess", "input": assembly_hash, "output": h,
                       "artifact": "constraints.json"})
        plan_inputs.append(h)

    def _plan():
        return generate_digraph(g, normalize_attributes(g), cfg.weights, geo, max_edges=cfg.max_edges)

    digraph, timings["plan"] = rec.stage("plan", _plan)
    h_plan = rec.write("digraph.json", digraph.dumps())
    stages.append({"stage": "plan", "input": sha256("".join(plan_inputs)), "output": h_plan,
                   "artifact": "digraph.json"})
    if cfg.write_dot:
        rec.write("assembly.dot", export_dot(g))
        rec.write("digraph.dot", export_dot(digraph))

    reduced, timings["reduce"] = rec.stage("reduce", lambda: reduce_edges(digraph, cfg.reduction))
    h_red = rec.write("reduced.json", reduced.dumps())
    stages.append({"stage": "reduce", "input": h_plan, "output": h_red, "artifact": "reduced.json"})

    times = {j.id: j.time for j in g.joints}

    def _balance():
        problem = BalanceProblem.build(reduced, times, cfg.phases, cfg.lam, cfg.c, cfg.gap, cfg.time_limit)
        return problem, solve_balance(problem)

    (problem, solution), timings["balance"] = rec.stage("balance", _balance)
    rec.write("solution.json", dump_solution(solution, g))
    h_sol = sha256(json.dumps(strip_timing(solution_document(solution, g)), sort_keys=True))
    stages.append({"stage": "balance", "input": h_red, "output": h_sol, "artifact": "solution.json"})
    if cfg.write_lp:
        rec.write("model.lp", export_lp(problem))

    report, timings["report"] = rec.stage("report", lambda: export_report(solution, g))
    h_rep = rec.write("report.csv", report.to_csv())
    stages.append({"stage": "report", "input": h_sol, "output": h_rep, "artifact": "report.csv"})

    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seeds": {"reduction": cfg.reduction.seed},
        "graph_sizes": {
            "parts": len(g.parts), "joints": len(g.joints),
            "digraph_nodes": digraph.n_nodes, "digraph_edges": digraph.n_edges,
            "reduced_nodes": reduced.n_nodes, "reduced_edges": reduced.n_edges,
        },
        "contribution_factor": problem.c,
        "solver_status": solution.status,
        "stages": stages,
        "artifacts": sorted(rec.files) + ["manifest.json"],
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    rec.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("run finished: objective %.6g, status %s", solution.objective, solution.status)
    return RunResult(out, g, digraph, reduced, solution, manifest, geo, dict(rec.files))
