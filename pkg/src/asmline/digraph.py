"""Layered cutset digraph of assembly states.

Nodes are cutsets (sets of already executed joints) encoded as bitmasks over
``joint_order`` (joint ids sorted). Layer k holds the k-joint cutsets; every
edge adds one joint and goes from layer k to k+1. Edge layer numbering is
1-based on the target layer.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError, GraphSizeError, PlanningInfeasible
from .model import Joint, NormalizedAttributes, PartGraph

logger = logging.getLogger(__name__)

DEFAULT_MAX_EDGES = 5_000_000
DEFAULT_SNAP_DEG = 1.0


@dataclass(frozen=True)
class WeightConfig:
    tech: float = 1 / 3
    hand: float = 1 / 3
    tol: float = 1 / 3

    def __post_init__(self):
        for name in ("tech", "hand", "tol"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"weight {name}={v} outside [0, 1]")
        if abs(self.tech + self.hand + self.tol - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {self.tech + self.hand + self.tol}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.tech, self.hand, self.tol)


def max_edge_bound(J: int) -> int:
    """Upper bound on digraph edges: sum_{j=0}^{J-1} (J - j) * C(J, j)."""
    if J < 1:
        raise ValueError("joint count must be >= 1")
    return sum((J - j) * math.comb(J, j) for j in range(J))


def edge_weight(w_tech: float, w_hand: float, w_tol: float, mu: WeightConfig, layer: int) -> float:
    if layer < 1:
        raise ValueError("edge layer is 1-based; got 0")
    return (mu.tech * w_tech + mu.hand * w_hand + mu.tol * w_tol) / layer


# -- feasibility predicates ------------------------------------------------


def _assembled_parts(joint_ids: Iterable[str], g: PartGraph) -> set[str]:
    parts: set[str] = set()
    for jid in joint_ids:
        parts.update(g.joint(jid).parts)
    return parts


def is_single_piece(cutset: Iterable[str], g: PartGraph) -> bool:
    """At most one connected component with two or more parts."""
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for jid in cutset:
        a, b = g.joint(jid).parts
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    roots = {find(x) for x in parent}
    return len(roots) <= 1


def _snap(v: np.ndarray, cos_tol: float) -> tuple[int, int] | None:
    k = int(np.argmax(np.abs(v)))
    n = float(np.linalg.norm(v))
    if n == 0 or abs(v[k]) / n < cos_tol:
        return None
    return (k, 1 if v[k] > 0 else -1)


def collision_feasible(cutset: Iterable[str], new_joint: Joint, g: PartGraph, geo,
                       snap_deg: float = DEFAULT_SNAP_DEG) -> bool:
    """DoF-based insertion check for adding ``new_joint`` to ``cutset``.

    The part being inserted is the end of ``new_joint`` not yet in the
    subassembly. Every joint of that part whose mate is already assembled
    contributes its allowed translations, rotated into the new joint's frame
    and snapped to the nearest signed axis. The insertion is feasible when
    the directions allowed by all contributing constraints intersect.
    """
    assembled = _assembled_parts(cutset, g)
    new_parts = [p for p in new_joint.parts if p not in assembled]
    if len(new_parts) != 1:
        # first joint (nothing to collide with) or loop closure (nothing moves)
        return True
    inserted = new_parts[0]
    ref = geo.frame(new_joint.id)
    if ref is None:
        raise GeometryError(f"no frame for joint {new_joint.id!r}", "missing-frame")
    cos_tol = math.cos(math.radians(snap_deg))
    allowed: set[tuple[int, int]] | None = None
    for k in g.incident(inserted):
        mate = k.other(inserted)
        if mate not in assembled:
            continue
        dof = geo.dof(k.id, inserted)
        if dof is None:
            raise GeometryError(f"no DoF matrix for part {inserted!r} at joint {k.id!r}", "missing-dof")
        frame = geo.frame(dof.frame_id)
        if frame is None:
            raise GeometryError(f"no frame {dof.frame_id!r} for joint {k.id!r}", "missing-frame")
        to_ref = ref.rotation.T @ frame.rotation
        dirs = {s for s in (_snap(to_ref @ d, cos_tol) for d in dof.allowed_translations()) if s}
        allowed = dirs if allowed is None else allowed & dirs
        if not allowed:
            return False
    return True


# -- digraph -----------------------------------------------------------------


class CutsetDigraph:
    """Immutable layered DAG; build with :func:`generate_digraph` or :meth:`from_document`."""

    def __init__(self, joint_order: Sequence[str], masks: Sequence[int],
                 src: Sequence[int], dst: Sequence[int], op: Sequence[int],
                 weight: Sequence[float]):
        self.joint_order = tuple(joint_order)
        self.masks = tuple(int(m) for m in masks)
        self.src = tuple(int(x) for x in src)
        self.dst = tuple(int(x) for x in dst)
        self.op = tuple(int(x) for x in op)
        self.weight = tuple(float(w) for w in weight)
        self.L = len(self.joint_order)
        self._index = {m: i for i, m in enumerate(self.masks)}
        self.out_edges: list[list[int]] = [[] for _ in self.masks]
        self.in_edges: list[list[int]] = [[] for _ in self.masks]
        for e, (s, d) in enumerate(zip(self.src, self.dst)):
            self.out_edges[s].append(e)
            self.in_edges[d].append(e)
        full = (1 << self.L) - 1
        self.start = self._index.get(0)
        self.end = self._index.get(full)

    # basic views
    @property
    def n_nodes(self) -> int:
        return len(self.masks)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def node_layer(self, v: int) -> int:
        return self.masks[v].bit_count()

    def edge_layer(self, e: int) -> int:
        return self.node_layer(self.dst[e])

    def op_id(self, e: int) -> str:
        return self.joint_order[self.op[e]]

    def cutset(self, v: int) -> frozenset[str]:
        m = self.masks[v]
        return frozenset(j for i, j in enumerate(self.joint_order) if m >> i & 1)

    def node_of(self, joint_ids: Iterable[str]) -> int:
        m = 0
        for j in joint_ids:
            m |= 1 << self.joint_order.index(j)
        return self._index[m]

    def layers(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.L + 1)]
        for v in range(self.n_nodes):
            out[self.node_layer(v)].append(v)
        return out

    def edges_by_layer(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.L + 1)]
        for e in range(self.n_edges):
            out[self.edge_layer(e)].append(e)
        return out

    def path_ops(self, path: Sequence[int]) -> list[str]:
        return [self.op_id(e) for e in path]

    def path_weight(self, path: Sequence[int]) -> float:
        return math.fsum(self.weight[e] for e in path)

    def is_full_path(self, path: Sequence[int]) -> bool:
        if len(path) != self.L or self.start is None:
            return False
        v = self.start
        for e in path:
            if self.src[e] != v:
                return False
            v = self.dst[e]
        return v == self.end

    def edge_key(self, e: int) -> tuple[int, int]:
        return (self.masks[self.src[e]], self.op[e])

    def __eq__(self, other):
        if not isinstance(other, CutsetDigraph):
            return NotImplemented
        return (self.joint_order == other.joint_order and self.masks == other.masks
                and self.src == other.src and self.dst == other.dst and self.op == other.op
                and self.weight == other.weight)

    __hash__ = None

    # shortest weight-to-go (used by reduction, balancing, contribution factor)
    def dist_to_end(self) -> list[float]:
        dist = [math.inf] * self.n_nodes
        if self.end is None:
            return dist
        dist[self.end] = 0.0
        for layer in reversed(self.layers()):
            for v in layer:
                for e in self.out_edges[v]:
                    cand = self.weight[e] + dist[self.dst[e]]
                    if cand < dist[v]:
                        dist[v] = cand
        return dist

    def subgraph(self, keep_edges: Iterable[int]) -> "CutsetDigraph":
        """Keep the given edges, then drop nodes off every start-to-end path."""
        keep = sorted(set(keep_edges))
        return _pruned(self.joint_order, self.masks,
                       [(self.src[e], self.dst[e], self.op[e], self.weight[e]) for e in keep])

    # persistence
    def to_document(self) -> dict:
        return {
            "format": "asmline.cutset-digraph/1",
            "joints": list(self.joint_order),
            "nodes": [[self.joint_order[i] for i in range(self.L) if m >> i & 1] for m in self.masks],
            "edges": [
                {"source": s, "target": d, "op": self.joint_order[o], "layer": self.node_layer(d), "weight": w}
                for s, d, o, w in zip(self.src, self.dst, self.op, self.weight)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=1)

    @classmethod
    def from_document(cls, doc: dict | str) -> "CutsetDigraph":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        joints = list(doc["joints"])
        idx = {j: i for i, j in enumerate(joints)}
        masks = []
        for node in doc["nodes"]:
            m = 0
            for j in node:
                m |= 1 << idx[j]
            masks.append(m)
        edges = doc["edges"]
        return cls(joints, masks, [e["source"] for e in edges], [e["target"] for e in edges],
                   [idx[e["op"]] for e in edges], [e["weight"] for e in edges])


def _canonical_node_key(mask: int) -> tuple:
    return (mask.bit_count(), tuple(i for i in range(mask.bit_length()) if mask >> i & 1))


def _pruned(joint_order, masks, edges) -> CutsetDigraph:
    """Build a digraph from (src, dst, op, weight) over ``masks``, removing dead ends."""
    L = len(joint_order)
    full = (1 << L) - 1
    n = len(masks)
    out: list[list[int]] = [[] for _ in range(n)]
    inn: list[list[int]] = [[] for _ in range(n)]
    for k, (s, d, _, _) in enumerate(edges):
        out[s].append(k)
        inn[d].append(k)
    order = sorted(range(n), key=lambda v: masks[v].bit_count())
    alive_back = [False] * n
    for v in reversed(order):
        if masks[v] == full:
            alive_back[v] = True
        else:
            alive_back[v] = any(alive_back[edges[k][1]] for k in out[v])
    alive = [False] * n
    for v in order:
        if not alive_back[v]:
            continue
        if masks[v] == 0:
            alive[v] = True
        else:
            alive[v] = any(alive[edges[k][0]] for k in inn[v])
    live_nodes = sorted((v for v in range(n) if alive[v]), key=lambda v: _canonical_node_key(masks[v]))
    new_id = {v: i for i, v in enumerate(live_nodes)}
    live_edges = [(new_id[s], new_id[d], o, w) for s, d, o, w in edges if alive[s] and alive[d]]
    live_edges.sort(key=lambda t: (t[0], t[2]))
    return CutsetDigraph(joint_order, [masks[v] for v in live_nodes],
                         [t[0] for t in live_edges], [t[1] for t in live_edges],
                         [t[2] for t in live_edges], [t[3] for t in live_edges])


def generate_digraph(g: PartGraph, norm: NormalizedAttributes, mu: WeightConfig, geo=None,
                     max_edges: int = DEFAULT_MAX_EDGES,
                     snap_deg: float = DEFAULT_SNAP_DEG) -> CutsetDigraph:
    """Enumerate single-piece-flow cutsets layer by layer and connect subset-adjacent ones.

    With ``geo`` (a GeometryConstraints) each transition must also pass
    :func:`collision_feasible`. Dead ends are pruned at the end.
    """
    joints = sorted(g.joints, key=lambda j: j.id)
    order = [j.id for j in joints]
    L = len(order)
    if L == 0:
        raise PlanningInfeasible("assembly has no joints to sequence")
    pidx = {p: i for i, p in enumerate(sorted(g.part_ids))}
    jparts = [(1 << pidx[j.part_a]) | (1 << pidx[j.part_b]) for j in joints]
    rev_part = sorted(g.part_ids)

    masks = [0]
    part_mask = [0]
    index = {0: 0}
    edges: list[tuple[int, int, int, float]] = []
    frontier = [0]
    for k in range(L):
        layer = k + 1
        nxt: list[int] = []
        for v in frontier:
            m, pm = masks[v], part_mask[v]
            assembled = None
            for j in range(L):
                bit = 1 << j
                if m & bit:
                    continue
                if m and not (jparts[j] & pm):
                    continue  # would start a second subassembly
                if assembled is None:
                    assembled = frozenset(rev_part[i] for i in range(len(rev_part)) if pm >> i & 1)
                if geo is not None:
                    cut = [order[i] for i in range(L) if m >> i & 1]
                    if not collision_feasible(cut, joints[j], g, geo, snap_deg):
                        continue
                jid = order[j]
                w = edge_weight(norm.tech[jid], norm.joint_handling(jid, assembled), norm.tolerance[jid],
                                mu, layer)
                nm = m | bit
                t = index.get(nm)
                if t is None:
                    t = len(masks)
                    index[nm] = t
                    masks.append(nm)
                    part_mask.append(pm | jparts[j])
                    nxt.append(t)
                edges.append((v, t, j, w))
                if len(edges) > max_edges:
                    raise GraphSizeError(f"digraph exceeds {max_edges} edges at layer {layer}")
        frontier = nxt
        if not frontier:
            break
    d = _pruned(order, masks, edges)
    if d.start is None or d.end is None:
        raise PlanningInfeasible("no feasible full assembly sequence")
    logger.info("cutset digraph: %d nodes, %d edges (bound %d)", d.n_nodes, d.n_edges, max_edge_bound(L))
    return d
