"""Shortest-path-protected randomized edge removal."""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from .digraph import CutsetDigraph
from .errors import PlanningInfeasible

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReductionConfig:
    fraction: float = 0.0
    k_paths: int = 10
    protected_outer_layers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise ValueError(f"reduction fraction must be in [0, 1), got {self.fraction}")
        if self.k_paths < 1:
            raise ValueError("k_paths must be >= 1")
        if self.protected_outer_layers < 0:
            raise ValueError("protected_outer_layers must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; identical draws on every platform for a given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def k_shortest_paths(d: CutsetDigraph, k: int) -> list[list[int]]:
    """Up to ``k`` loopless start-to-end paths (edge lists) in non-decreasing weight.

    Deviation search in the style of Yen. In a layered DAG a spur path can
    never revisit root nodes, so the best spur path from a spur node is one
    allowed out-edge followed by the precomputed shortest tail. Ties are
    broken by the operation-id sequence.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    dist = d.dist_to_end()
    if d.start is None or not math.isfinite(dist[d.start]):
        raise PlanningInfeasible("digraph has no start-to-end path")

    def step_key(e):
        return (d.weight[e] + dist[d.dst[e]], d.op_id(e))

    best_next = [min(d.out_edges[v], key=step_key) if d.out_edges[v] else None
                 for v in range(d.n_nodes)]

    def tail(v):
        out = []
        while v != d.end:
            e = best_next[v]
            out.append(e)
            v = d.dst[e]
        return out

    def key(path):
        return (math.fsum(d.weight[e] for e in path), tuple(d.path_ops(path)))

    first = tail(d.start)
    accepted = [first]
    seen = {tuple(first)}
    heap: list = []
    while len(accepted) < k:
        last = accepted[-1]
        for i in range(len(last)):
            root = last[:i]
            spur = d.src[last[i]]
            banned = {p[i] for p in accepted if p[:i] == root}
            for e in d.out_edges[spur]:
                if e in banned:
                    continue
                cand = root + [e] + tail(d.dst[e])
                t = tuple(cand)
                if t in seen:
                    continue
                seen.add(t)
                heapq.heappush(heap, (key(cand), cand))
        if not heap:
            break
        accepted.append(heapq.heappop(heap)[1])
    return accepted


def protected_layer(layer: int, L: int, outer: int) -> bool:
    return layer <= outer or layer > L - outer


def reduce_edges(d: CutsetDigraph, cfg: ReductionConfig) -> CutsetDigraph:
    """Randomly drop ``floor(fraction * removable)`` edges per unprotected layer.

    Removable edges are those not on any of the ``k_paths`` shortest paths.
    Nodes left without a start-to-end path are pruned afterwards.
    """
    if cfg.fraction == 0.0:
        return d
    paths = k_shortest_paths(d, cfg.k_paths)
    keep_set = {e for p in paths for e in p}
    rng = make_rng(cfg.seed)
    removed: set[int] = set()
    for layer, edges in enumerate(d.edges_by_layer()):
        if layer == 0 or protected_layer(layer, d.L, cfg.protected_outer_layers):
            continue
        removable = [e for e in edges if e not in keep_set]
        n = math.floor(cfg.fraction * len(removable) + 1e-9)
        if n == 0:
            continue
        picks = rng.choice(len(removable), size=n, replace=False)
        removed.update(removable[i] for i in picks)
    out = d.subgraph(e for e in range(d.n_edges) if e not in removed)
    logger.info("reduction %.2f: %d -> %d edges", cfg.fraction, d.n_edges, out.n_edges)
    return out
