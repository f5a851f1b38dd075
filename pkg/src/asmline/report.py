"""Solution documents, CSV operation reports and DOT renderings."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass

from .balance import Solution, count_attribute_changes
from .digraph import CutsetDigraph
from .model import PartGraph

REPORT_COLUMNS = ("step", "joint_id", "layer", "phase", "technology", "tolerance", "handling",
                  "time", "cum_tolerance", "cum_handling", "part_a", "part_b")
TIMING_FIELDS = ("wall_time",)


def inserted_handling(g: PartGraph, ops) -> list[int]:
    """Raw handling difficulty of the part each operation brings in.

    The first joint brings in both of its parts (their max counts); a joint
    between two parts already in the assembly brings in nothing (0).
    """
    assembled: set[str] = set()
    out = []
    for k, jid in enumerate(ops):
        j = g.joint(jid)
        if k == 0:
            out.append(max(g.part(j.part_a).handling, g.part(j.part_b).handling))
        else:
            new = [p for p in j.parts if p not in assembled]
            out.append(g.part(new[0]).handling if new else 0)
        assembled.update(j.parts)
    return out


def solution_document(s: Solution, g: PartGraph) -> dict:
    hand = inserted_handling(g, s.ops)
    ops = []
    for k, (jid, p) in enumerate(zip(s.ops, s.layer_phase)):
        j = g.joint(jid)
        ops.append({"joint": jid, "layer": k + 1, "phase": p, "technology": j.technology,
                    "tolerance": j.tolerance, "handling": hand[k], "time": j.time})
    return {
        "status": s.status,
        "proven": s.proven,
        "path": list(s.path),
        "operations": ops,
        "loads": list(s.loads),
        "alpha": s.alpha,
        "weight": s.weight,
        "objective": s.objective,
        "bound": s.bound,
        "gap": s.relative_gap,
        "wall_time": s.wall_time,
    }


def dump_solution(s: Solution, g: PartGraph) -> str:
    return json.dumps(solution_document(s, g), indent=2, sort_keys=True) + "\n"


def solution_from_document(doc: dict | str) -> Solution:
    if isinstance(doc, str):
        doc = json.loads(doc)
    ops = doc["operations"]
    return Solution(
        path=tuple(doc.get("path", ())),
        ops=tuple(o["joint"] for o in ops),
        layer_phase=tuple(int(o["phase"]) for o in ops),
        loads=tuple(float(x) for x in doc["loads"]),
        alpha=float(doc["alpha"]),
        weight=float(doc["weight"]),
        objective=float(doc["objective"]),
        bound=float(doc["bound"]),
        proven=bool(doc["proven"]),
        status=doc.get("status", "optimal"),
        wall_time=float(doc.get("wall_time", 0.0)),
    )


def strip_timing(doc):
    """Copy of a JSON-like document with timing fields removed (recursively)."""
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items()
                if k not in TIMING_FIELDS and not k.endswith("_seconds") and k != "timings"}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc


@dataclass
class Report:
    rows: list[dict]
    loads: list[float]
    alpha: float
    technology_changes: int
    cum_tolerance: list[float]
    cum_handling: list[float]

    def summary(self) -> list[tuple[str, str]]:
        out = [(f"load_phase_{p}", _num(x)) for p, x in enumerate(self.loads)]
        out.append(("alpha", _num(self.alpha)))
        out.append(("total_time", _num(math.fsum(self.loads))))
        out.append(("technology_changes", str(self.technology_changes)))
        out.append(("cum_tolerance", " ".join(_num(x) for x in self.cum_tolerance)))
        out.append(("cum_handling", " ".join(_num(x) for x in self.cum_handling)))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(r[c]) for c in REPORT_COLUMNS])
        w.writerow([])
        w.writerow(["summary", "value"])
        w.writerows(self.summary())
        return buf.getvalue()


def _num(x: float) -> str:
    return f"{x:.6f}"


def _cell(v) -> str:
    return _num(v) if isinstance(v, float) else str(v)


def export_report(s: Solution, g: PartGraph) -> Report:
    """One row per operation plus a summary of loads and attribute series."""
    hand = inserted_handling(g, s.ops)
    tols = [g.joint(o).tolerance for o in s.ops]
    cum_t = list(itertools.accumulate(float(t) for t in tols))
    cum_h = list(itertools.accumulate(float(h) for h in hand))
    rows = []
    for k, (jid, p) in enumerate(zip(s.ops, s.layer_phase)):
        j = g.joint(jid)
        rows.append({"step": k + 1, "joint_id": jid, "layer": k + 1, "phase": p,
                     "technology": j.technology, "tolerance": j.tolerance, "handling": hand[k],
                     "time": float(j.time), "cum_tolerance": cum_t[k], "cum_handling": cum_h[k],
                     "part_a": j.part_a, "part_b": j.part_b})
    n_phases = max(len(s.loads), (max(s.layer_phase) + 1) if s.layer_phase else 0)
    loads = [0.0] * n_phases
    for jid, p in zip(s.ops, s.layer_phase):
        loads[p] += g.joint(jid).time
    techs = [g.joint(o).technology for o in s.ops]
    return Report(rows, loads, max(loads) if loads else 0.0, count_attribute_changes(techs), cum_t, cum_h)


# -- DOT --------------------------------------------------------------------------


def _q(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _part_graph_dot(g: PartGraph) -> str:
    lines = ["graph assembly {", "  node [shape=box];"]
    for p in g.parts:
        label = f"{p.id}\\nmass={p.mass:.3f}\\nhandling={p.handling}"
        lines.append(f"  {_q(p.id)} [label={_q(label)}];")
    for j in g.joints:
        label = f"{j.id}\\ntime={j.time:.3f}\\ntol={j.tolerance}\\ntech={j.technology}"
        lines.append(f"  {_q(j.part_a)} -- {_q(j.part_b)} [label={_q(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _digraph_dot(d: CutsetDigraph) -> str:
    lines = ["digraph cutsets {", "  rankdir=LR;", "  node [shape=ellipse];"]
    for v in range(d.n_nodes):
        members = ",".join(sorted(d.cutset(v)))
        lines.append(f"  n{v} [label={_q('{' + members + '}')}];")
    for e in range(d.n_edges):
        lines.append(f"  n{d.src[e]} -> n{d.dst[e]} [label={_q(f'{d.op_id(e)} {d.weight[e]:.6f}')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(graph: PartGraph | CutsetDigraph) -> str:
    if isinstance(graph, PartGraph):
        return _part_graph_dot(graph)
    if isinstance(graph, CutsetDigraph):
        return _digraph_dot(graph)
    raise TypeError(f"cannot render {type(graph).__name__} as DOT")
