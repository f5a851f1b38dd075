"""Parameter sweeps over lambda, weights, reduction fraction and gap."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import timeit
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .balance import BalanceProblem, equal_contribution_factor, solve_balance
from .config import RunConfig, SweepSpec, thread_count
from .digraph import CutsetDigraph, WeightConfig, generate_digraph
from .errors import AsmlineError
from .geometry import import_geometry_constraints
from .model import PartGraph, load_part_graph, normalize_attributes
from .reduction import ReductionConfig, reduce_edges

logger = logging.getLogger(__name__)

ROW_COLUMNS = ("lam", "mu_tech", "mu_hand", "mu_tol", "fraction", "gap", "seed", "replication",
               "reduction_seed", "edges_before", "edges_after", "status", "objective", "alpha",
               "weight", "full_objective", "relative_error", "technology_changes", "solve_time",
               "baseline_time", "speedup", "error")
TIMING_COLUMNS = ("solve_time", "baseline_time", "speedup")
SUMMARY_STATS = ("objective", "alpha", "relative_error", "technology_changes", "solve_time", "speedup")


def replication_seed(seed: int, replication: int) -> int:
    """Independent 64-bit reduction seed for one replication of one cell."""
    ss = np.random.SeedSequence([seed, replication])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class _Cell:
    lam: float
    mu: WeightConfig
    fraction: float
    gap: float
    seed: int


@dataclass
class SweepResult:
    rows: list[dict]
    summary: list[dict]

    def rows_csv(self) -> str:
        return _to_csv(ROW_COLUMNS, self.rows)

    def summary_csv(self) -> str:
        cols = ["lam", "mu_tech", "mu_hand", "mu_tol", "fraction", "gap", "seed", "n_ok", "n_failed"]
        for s in SUMMARY_STATS:
            cols += [f"{s}_mean", f"{s}_std"]
        return _to_csv(cols, self.summary)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.9g}"
    return str(v)


def _to_csv(cols, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _timed_solve(problem: BalanceProblem, repeats: int):
    """Solve once, then report the fastest of ``repeats`` timed solves (gc paused, as in timeit)."""
    sol = solve_balance(problem)
    return sol, min(timeit.repeat(lambda: solve_balance(problem), number=1, repeat=repeats))


def sweep_experiment(spec: SweepSpec, cfg: RunConfig, graph: PartGraph | None = None,
                     threads: int | None = None, timing_repeats: int = 1) -> SweepResult:
    """One row per (cell, replication), plus per-cell mean and standard deviation.

    A cell is one combination of lambda, weights, fraction, gap and seed.
    Replication r of a cell reduces with ``replication_seed(seed, r)``. The
    baseline for ``speedup`` is the unreduced graph solved with the same
    lambda, weights and gap. A failing cell is recorded in its row and the
    sweep carries on.
    """
    if graph is None:
        graph = load_part_graph(Path(cfg.assembly).read_text())
    geo = None
    if cfg.use_dof and cfg.constraints:
        geo = import_geometry_constraints(Path(cfg.constraints).read_text())
    times = {j.id: j.time for j in graph.joints}
    techs = {j.id: j.technology for j in graph.joints}
    norm = normalize_attributes(graph)
    digraphs: dict[WeightConfig, CutsetDigraph] = {}
    for mu in spec.weights:
        if mu not in digraphs:
            digraphs[mu] = generate_digraph(graph, norm, mu, geo, max_edges=cfg.max_edges)

    baselines: dict[tuple, tuple] = {}
    for lam, mu, gap in itertools.product(spec.lams, spec.weights, spec.gaps):
        d = digraphs[mu]
        c = cfg.c if cfg.c is not None else equal_contribution_factor(d, times, cfg.phases)
        p = BalanceProblem(d, times, cfg.phases, lam, c, gap, cfg.time_limit)
        sol, t = _timed_solve(p, timing_repeats)
        baselines[(lam, mu, gap)] = (sol.objective, t, c)

    jobs = [(cell, r) for cell in itertools.starmap(_Cell, itertools.product(
        spec.lams, spec.weights, spec.fractions, spec.gaps, spec.seeds)) for r in range(spec.replications)]

    def run(job):
        cell, r = job
        full_obj, base_t, c = baselines[(cell.lam, cell.mu, cell.gap)]
        d = digraphs[cell.mu]
        rseed = replication_seed(cell.seed, r)
        row = {"lam": cell.lam, "mu_tech": cell.mu.tech, "mu_hand": cell.mu.hand, "mu_tol": cell.mu.tol,
               "fraction": cell.fraction, "gap": cell.gap, "seed": cell.seed, "replication": r,
               "reduction_seed": rseed, "edges_before": d.n_edges, "full_objective": full_obj,
               "baseline_time": base_t, "error": ""}
        try:
            reduced = reduce_edges(d, ReductionConfig(cell.fraction, cfg.reduction.k_paths,
                                                      cfg.reduction.protected_outer_layers, rseed))
            row["edges_after"] = reduced.n_edges
            p = BalanceProblem(reduced, times, cfg.phases, cell.lam, c, cell.gap, cfg.time_limit)
            sol, t = _timed_solve(p, timing_repeats)
        except (AsmlineError, ValueError) as exc:
            row["status"] = "failed"
            row["error"] = f"{type(exc).__name__}: {exc}"
            logger.warning("sweep cell %s replication %d failed: %s", cell, r, row["error"])
            return row
        row.update(status=sol.status, objective=sol.objective, alpha=sol.alpha, weight=sol.weight,
                   relative_error=(sol.objective - full_obj) / full_obj if full_obj else 0.0,
                   technology_changes=sum(1 for a, b in zip(sol.ops, sol.ops[1:]) if techs[a] != techs[b]),
                   solve_time=t, speedup=base_t / t if t > 0 else math.inf)
        return row

    n = threads if threads is not None else thread_count()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    return SweepResult(rows, summarize(rows))


def summarize(rows: list[dict]) -> list[dict]:
    keyf = lambda r: (r["lam"], r["mu_tech"], r["mu_hand"], r["mu_tol"], r["fraction"], r["gap"], r["seed"])
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(keyf(r), []).append(r)
    out = []
    for key, rs in groups.items():
        ok = [r for r in rs if r.get("status") != "failed"]
        s = dict(zip(("lam", "mu_tech", "mu_hand", "mu_tol", "fraction", "gap", "seed"), key))
        s["n_ok"] = len(ok)
        s["n_failed"] = len(rs) - len(ok)
        for stat in SUMMARY_STATS:
            vals = np.array([float(r[stat]) for r in ok], dtype=float)
            s[f"{stat}_mean"] = float(vals.mean()) if len(vals) else math.nan
            s[f"{stat}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0 if len(vals) else math.nan
        out.append(s)
    return out
