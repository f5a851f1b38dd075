"""Joint sequence selection and station balancing.

Minimizes ``(1 - lam) * sum(w_e on path) + lam * c * alpha`` over start-to-end
paths of a cutset digraph and contiguous assignments of its layers to
``phases`` stations, where ``alpha`` is the largest station load.

``solve_balance`` is an exact best-first branch and bound over labels
``(node, phase, current load, max closed load, weight)`` with dominance
pruning, followed by a depth-first pass that returns the canonical optimum:
smallest operation sequence, then smallest alpha, then smallest phase vector.
``brute_force_balance`` enumerates everything and serves as the oracle.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .digraph import CutsetDigraph
from .errors import PlanningInfeasible, SolverError

logger = logging.getLogger(__name__)

TIE_TOL = 1e-9  # objectives closer than this are equal
GAP_EPS = 1e-12
DOM_EPS = 1e-12


@dataclass(frozen=True)
class BalanceProblem:
    digraph: CutsetDigraph
    times: Mapping[str, float]
    phases: int
    lam: float
    c: float
    gap: float = 0.0
    time_limit: float | None = None

    def __post_init__(self):
        L = self.digraph.L
        if not 1 <= self.phases <= L:
            raise ValueError(f"phase count must be in [1, {L}], got {self.phases}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if not self.c > 0:
            raise ValueError(f"contribution factor must be positive, got {self.c}")
        if not 0.0 <= self.gap < 1.0:
            raise ValueError(f"relative gap must be in [0, 1), got {self.gap}")
        missing = [j for j in self.digraph.joint_order if j not in self.times]
        if missing:
            raise ValueError(f"no operation time for joints {missing}")
        if any(not self.times[j] > 0 for j in self.digraph.joint_order):
            raise ValueError("operation times must be positive")

    @classmethod
    def build(cls, digraph: CutsetDigraph, times: Mapping[str, float], phases: int, lam: float,
              c: float | None = None, gap: float = 0.0, time_limit: float | None = None) -> "BalanceProblem":
        """Like the constructor, computing ``c`` with :func:`equal_contribution_factor` when omitted."""
        if c is None:
            c = equal_contribution_factor(digraph, times, phases)
        return cls(digraph, dict(times), phases, lam, c, gap, time_limit)

    def objective(self, weight: float, alpha: float) -> float:
        return (1.0 - self.lam) * weight + self.lam * self.c * alpha


@dataclass
class Solution:
    path: tuple[int, ...]
    ops: tuple[str, ...]
    layer_phase: tuple[int, ...]
    loads: tuple[float, ...]
    alpha: float
    weight: float
    objective: float
    bound: float
    proven: bool
    status: str = "optimal"
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def op_phase(self) -> dict[str, int]:
        return dict(zip(self.ops, self.layer_phase))

    @property
    def eng_cost(self) -> float:
        return self.weight

    @property
    def relative_gap(self) -> float:
        return (self.objective - self.bound) / max(abs(self.objective), GAP_EPS)


def equal_contribution_factor(d: CutsetDigraph, times: Mapping[str, float], phases: int) -> float:
    """c = (weight of the lightest full path) / (perfectly balanced station load)."""
    if phases < 1:
        raise ValueError("phase count must be >= 1")
    dist = d.dist_to_end()
    if d.start is None or not math.isfinite(dist[d.start]):
        raise PlanningInfeasible("digraph has no start-to-end path")
    w_ref = dist[d.start]
    alpha_ref = math.fsum(times[j] for j in d.joint_order) / phases
    if w_ref == 0:
        return 1.0
    return w_ref / alpha_ref


# -- fixed-sequence partitioning -----------------------------------------------


def best_partition_alpha(ts: Sequence[float], phases: int) -> float:
    """Minimum bottleneck over splits of ``ts`` into ``phases`` contiguous non-empty blocks."""
    n = len(ts)
    prefix = [0.0]
    for t in ts:
        prefix.append(prefix[-1] + t)
    inf = math.inf
    # best[p][i]: first i items in p blocks
    best = [[inf] * (n + 1) for _ in range(phases + 1)]
    best[0][0] = 0.0
    for p in range(1, phases + 1):
        for i in range(p, n - (phases - p) + 1):
            b = inf
            for j in range(p - 1, i):
                v = max(best[p - 1][j], prefix[i] - prefix[j])
                if v < b:
                    b = v
            best[p][i] = b
    return best[phases][n]


def _min_blocks(ts: Sequence[float], cap: float) -> float:
    blocks, load = 0, 0.0
    for t in ts:
        if t > cap:
            return math.inf
        if blocks == 0 or load + t > cap:
            blocks += 1
            load = t
        else:
            load += t
    return blocks


def _exact_blocks_ok(ts: Sequence[float], m: int, cap: float) -> bool:
    if m == 0:
        return len(ts) == 0
    return _min_blocks(ts, cap) <= m <= len(ts)


def lex_smallest_phases(ts: Sequence[float], phases: int, cap: float) -> list[int]:
    """Lexicographically smallest monotone onto phase vector with every load <= cap."""
    n = len(ts)

    def feasible(i, p, cur):
        # items i.. remain; current block (phase p) holds ``cur``
        load = cur
        for j in range(i, n + 1):
            if _exact_blocks_ok(ts[j:], phases - 1 - p, cap):
                return True
            if j < n:
                load += ts[j]
                if load > cap:
                    return False
        return False

    if not feasible(1, 0, ts[0]) or ts[0] > cap:
        raise SolverError("no partition meets the load cap")
    out, p, cur = [0], 0, ts[0]
    for i in range(1, n):
        if cur + ts[i] <= cap and feasible(i + 1, p, cur + ts[i]):
            cur += ts[i]
        else:
            p += 1
            cur = ts[i]
        out.append(p)
    return out


def phase_loads_of(ts: Sequence[float], layer_phase: Sequence[int], phases: int) -> list[float]:
    buckets: list[list[float]] = [[] for _ in range(phases)]
    for t, p in zip(ts, layer_phase):
        buckets[p].append(t)
    return [math.fsum(b) for b in buckets]


def _finish(problem: BalanceProblem, path: Sequence[int], bound: float, proven: bool,
            status: str, started: float, stats: dict) -> Solution:
    d = problem.digraph
    ops = tuple(d.path_ops(path))
    ts = [problem.times[o] for o in ops]
    alpha_min = best_partition_alpha(ts, problem.phases)
    cap = alpha_min * (1 + 1e-12) + 1e-12
    phases = lex_smallest_phases(ts, problem.phases, cap)
    loads = phase_loads_of(ts, phases, problem.phases)
    alpha = max(loads)
    weight = d.path_weight(path)
    obj = problem.objective(weight, alpha)
    return Solution(tuple(path), ops, tuple(phases), tuple(loads), alpha, weight, obj,
                    min(bound, obj), proven, status, time.monotonic() - started, stats)


# -- exact solver ----------------------------------------------------------------


class _Ctx:
    """Per-problem precomputation shared by both search passes."""

    def __init__(self, p: BalanceProblem):
        d = p.digraph
        self.d = d
        self.P = p.phases
        self.L = d.L
        self.lam = p.lam
        self.c = p.c
        self.t = [p.times[j] for j in d.joint_order]
        total = math.fsum(self.t)
        self.h = d.dist_to_end()
        self.trem = []
        self.tmax = []
        for m in d.masks:
            rem = [self.t[i] for i in range(self.L) if not m >> i & 1]
            self.trem.append(total - math.fsum(self.t[i] for i in range(self.L) if m >> i & 1))
            self.tmax.append(max(rem) if rem else 0.0)
        self.use_w = p.lam < 1.0
        self.use_a = p.lam > 0.0

    def alpha_lb(self, v, p, cur, mx):
        left = self.P - p
        return max(mx, cur, (cur + self.trem[v]) / left, self.tmax[v])

    def lb(self, v, p, cur, mx, w):
        return (1.0 - self.lam) * (w + self.h[v]) + self.lam * self.c * self.alpha_lb(v, p, cur, mx)

    def dominates(self, a, b) -> bool:
        """Label a = (p, cur, mx, w) dominates b at the same node."""
        if a[0] > b[0]:
            return False
        if self.use_a and (a[1] > b[1] + DOM_EPS or a[2] > b[2] + DOM_EPS):
            return False
        if self.use_w and a[3] > b[3] + DOM_EPS:
            return False
        return True

    def children(self, v, k, p, cur, mx):
        """Yield (edge, p', cur', mx') transitions; k is the layer of v."""
        d = self.d
        after = self.L - k - 1  # layers left once the edge is taken
        for e in d.out_edges[v]:
            te = self.t[d.op[e]]
            if after >= self.P - 1 - p:
                yield e, p, cur + te, mx
            if k >= 1 and p < self.P - 1 and after >= self.P - 2 - p:
                yield e, p + 1, te, max(mx, cur)


def _heuristic_incumbent(ctx: _Ctx, problem: BalanceProblem):
    """Lightest path with its best partition, plus a greedy alpha-oriented path."""
    d = ctx.d
    cands = []
    v, path = d.start, []
    while v != d.end:
        e = min(d.out_edges[v], key=lambda e: (d.weight[e] + ctx.h[d.dst[e]], d.op[e]))
        path.append(e)
        v = d.dst[e]
    cands.append(path)
    v, path = d.start, []
    while v != d.end:  # largest remaining operations first tends to balance well
        e = min(d.out_edges[v], key=lambda e: (-ctx.t[d.op[e]], d.op[e]))
        path.append(e)
        v = d.dst[e]
    cands.append(path)
    best = None
    for path in cands:
        ts = [ctx.t[d.op[e]] for e in path]
        obj = problem.objective(d.path_weight(path), best_partition_alpha(ts, ctx.P))
        if best is None or obj < best[0]:
            best = (obj, path)
    return best


def _best_first(ctx: _Ctx, problem: BalanceProblem, deadline: float | None, stats: dict):
    d = ctx.d
    inc_obj, inc_path = _heuristic_incumbent(ctx, problem)
    # label storage: parallel lists; parent pointers for path recovery
    lab_node, lab_par, lab_edge, lab_dead = [], [], [], []
    labels_at: list[list[int]] = [[] for _ in range(d.n_nodes)]
    lab_val: list[tuple] = []

    def add(v, par, e, val):
        for other in labels_at[v]:
            if ctx.dominates(lab_val[other], val):
                return None
        keep = []
        for other in labels_at[v]:
            if ctx.dominates(val, lab_val[other]):
                lab_dead[other] = True
            else:
                keep.append(other)
        i = len(lab_node)
        lab_node.append(v)
        lab_par.append(par)
        lab_edge.append(e)
        lab_dead.append(False)
        lab_val.append(val)
        keep.append(i)
        labels_at[v] = keep
        return i

    def recover(i):
        out = []
        while lab_par[i] is not None:
            out.append(lab_edge[i])
            i = lab_par[i]
        return out[::-1]

    root = add(d.start, None, None, (0, 0.0, 0.0, 0.0))
    heap = [(ctx.lb(d.start, 0, 0.0, 0.0, 0.0), 0, root)]
    counter = 1
    bound = heap[0][0]
    pops = 0
    timed_out = False
    while heap:
        lb, _, i = heapq.heappop(heap)
        bound = lb
        if inc_obj - lb <= problem.gap * max(abs(inc_obj), GAP_EPS) + GAP_EPS * max(1.0, abs(inc_obj)):
            break
        if lab_dead[i]:
            continue
        pops += 1
        if deadline is not None and pops % 64 == 1 and time.monotonic() > deadline:
            timed_out = True
            break
        v = lab_node[i]
        p, cur, mx, w = lab_val[i]
        k = d.node_layer(v)
        for e, p2, cur2, mx2 in ctx.children(v, k, p, cur, mx):
            v2 = d.dst[e]
            w2 = w + d.weight[e]
            if v2 == d.end:
                if p2 != ctx.P - 1:
                    continue
                obj = problem.objective(w2, max(mx2, cur2))
                if obj < inc_obj - GAP_EPS * max(1.0, abs(obj)):
                    inc_obj, inc_path = obj, recover(i) + [e]
                continue
            lb2 = ctx.lb(v2, p2, cur2, mx2, w2)
            if lb2 >= inc_obj:
                continue
            j = add(v2, i, e, (p2, cur2, mx2, w2))
            if j is not None:
                heapq.heappush(heap, (lb2, counter, j))
                counter += 1
    else:
        bound = inc_obj
    stats.update(labels=len(lab_node), pops=pops)
    return inc_obj, inc_path, min(bound, inc_obj), timed_out


def _canonical_search(ctx: _Ctx, problem: BalanceProblem, target: float, deadline: float | None):
    """Depth-first over paths in operation-id order; first hit is the canonical optimum.

    Each path prefix carries the Pareto set of (phase, current, max closed)
    labels reachable along it. Prefixes proven unable to reach ``target`` are
    remembered per node and used to prune dominated labels later.
    """
    d = ctx.d
    failed: list[list[tuple]] = [[] for _ in range(d.n_nodes)]
    P = ctx.P

    def dead(v, lab, w):
        val = (lab[0], lab[1], lab[2], w)
        return any(ctx.dominates(f, val) for f in failed[v])

    def pareto(labs):
        labs = sorted(set(labs))
        out = []
        for lab in labs:
            if not any(ctx.dominates(o + (0.0,), lab + (0.0,)) for o in out):
                out = [o for o in out if not ctx.dominates(lab + (0.0,), o + (0.0,))] + [lab]
        return out

    def rec(v, k, labs, w, path):
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutError
        labs = [lab for lab in labs if ctx.lb(v, lab[0], lab[1], lab[2], w) <= target and not dead(v, lab, w)]
        if not labs:
            return None
        if v == d.end:
            if any(lab[0] == P - 1 and problem.objective(w, max(lab[1], lab[2])) <= target for lab in labs):
                return path
            return None
        for e in sorted(d.out_edges[v], key=lambda e: d.op[e]):
            nxt = []
            te = ctx.t[d.op[e]]
            after = ctx.L - k - 1
            for p, cur, mx in labs:
                if after >= P - 1 - p:
                    nxt.append((p, cur + te, mx))
                if k >= 1 and p < P - 1 and after >= P - 2 - p:
                    nxt.append((p + 1, te, max(mx, cur)))
            if not nxt:
                continue
            found = rec(d.dst[e], k + 1, pareto(nxt), w + d.weight[e], path + [e])
            if found is not None:
                return found
        failed[v].extend((p, cur, mx, w) for p, cur, mx in labs)
        return None

    return rec(d.start, 0, [(0, 0.0, 0.0)], 0.0, [])


def solve_balance(problem: BalanceProblem) -> Solution:
    """Optimal (or within ``problem.gap``) path and station assignment."""
    started = time.monotonic()
    deadline = None if problem.time_limit is None else started + problem.time_limit
    d = problem.digraph
    if d.start is None or d.end is None:
        raise PlanningInfeasible("digraph has no start-to-end path")
    ctx = _Ctx(problem)
    if not math.isfinite(ctx.h[d.start]):
        raise PlanningInfeasible("digraph has no start-to-end path")
    stats: dict = {}
    inc_obj, inc_path, bound, timed_out = _best_first(ctx, problem, deadline, stats)
    if timed_out:
        logger.warning("balance: time limit hit; returning incumbent (bound %.6g)", bound)
        return _finish(problem, inc_path, bound, False, "timeout", started, stats)
    try:
        path = _canonical_search(ctx, problem, inc_obj + TIE_TOL, deadline)
    except TimeoutError:
        path = None
        logger.warning("balance: time limit hit during canonicalization")
    if path is None:
        path = inc_path
    status = "optimal" if problem.gap == 0 else "gap"
    return _finish(problem, path, bound, True, status, started, stats)


# -- oracle -------------------------------------------------------------------


def _all_paths(d: CutsetDigraph):
    stack = [(d.start, [])]
    while stack:
        v, path = stack.pop()
        if v == d.end:
            yield path
            continue
        for e in d.out_edges[v]:
            stack.append((d.dst[e], path + [e]))


def brute_force_balance(problem: BalanceProblem, max_layers: int = 8) -> Solution:
    """Exhaustive search over every full path and every contiguous phase split."""
    started = time.monotonic()
    d = problem.digraph
    L, P = d.L, problem.phases
    if L > max_layers:
        raise SolverError(f"brute force is capped at {max_layers} layers (got {L})", "oracle-cap")
    if d.start is None or d.end is None:
        raise PlanningInfeasible("digraph has no start-to-end path")
    records = []
    for path in _all_paths(d):
        ops = tuple(d.op_id(e) for e in path)
        ts = [problem.times[o] for o in ops]
        weight = math.fsum(d.weight[e] for e in path)
        for cuts in itertools.combinations(range(1, L), P - 1):
            bounds = (0,) + cuts + (L,)
            loads = [math.fsum(ts[a:b]) for a, b in zip(bounds, bounds[1:])]
            phases = tuple(p for p in range(P) for _ in range(bounds[p + 1] - bounds[p]))
            alpha = max(loads)
            obj = (1.0 - problem.lam) * weight + problem.lam * problem.c * alpha
            records.append((obj, ops, round(alpha, 9), phases, path, loads, alpha, weight))
    if not records:
        raise PlanningInfeasible("no full path")
    best = min(r[0] for r in records)
    chosen = min((r for r in records if r[0] <= best + TIE_TOL), key=lambda r: (r[1], r[2], r[3]))
    obj, ops, _, phases, path, loads, alpha, weight = chosen
    return Solution(tuple(path), ops, phases, tuple(loads), alpha, weight, obj, obj, True,
                    "optimal", time.monotonic() - started, {"enumerated": len(records)})


# -- analytics ------------------------------------------------------------------


def phase_loads(s: Solution, times: Mapping[str, float], phases: int | None = None) -> tuple[list[float], float]:
    """Per-phase total operation time and the bottleneck load."""
    n = phases if phases is not None else (max(s.layer_phase) + 1 if s.layer_phase else 0)
    loads = phase_loads_of([times[o] for o in s.ops], s.layer_phase, n)
    return loads, max(loads) if loads else 0.0


def count_attribute_changes(s: Solution | Sequence[str], attr: Mapping[str, object] | None = None) -> int:
    """Number of consecutive operations whose attribute value differs.

    Accepts a Solution with a per-joint mapping, or a plain sequence of values.
    """
    values = list(s) if attr is None else [attr[o] for o in s.ops]
    return sum(1 for a, b in zip(values, values[1:]) if a != b)


def cumulative_attribute(s: Solution | Sequence[float], attr: Mapping[str, float] | None = None) -> list[float]:
    values = list(s) if attr is None else [attr[o] for o in s.ops]
    return list(itertools.accumulate(values))
