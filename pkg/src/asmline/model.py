"""Assembly part/joint graph: loading, validation and attribute normalization."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx

from .errors import AssemblyError

logger = logging.getLogger(__name__)

HANDLING_RANGE = (1, 3)


@dataclass(frozen=True)
class Part:
    id: str
    name: str
    mass: float
    handling: int


@dataclass(frozen=True)
class Joint:
    id: str
    part_a: str
    part_b: str
    time: float
    tolerance: int
    technology: str

    @property
    def parts(self) -> tuple[str, str]:
        return (self.part_a, self.part_b)

    def other(self, part_id: str) -> str:
        if part_id == self.part_a:
            return self.part_b
        if part_id == self.part_b:
            return self.part_a
        raise KeyError(f"part {part_id!r} is not an end of joint {self.id!r}")


@dataclass(frozen=True)
class PartGraph:
    """Undirected graph of parts (nodes) and joints (edges).

    Construction does not enforce invariants so that ``validate_graph`` can
    report on arbitrary instances; ``load_part_graph`` is the checked path.
    """

    parts: tuple[Part, ...]
    joints: tuple[Joint, ...]
    handling_range: tuple[int, int] = HANDLING_RANGE

    def part(self, part_id: str) -> Part:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise KeyError(part_id)

    def joint(self, joint_id: str) -> Joint:
        for j in self.joints:
            if j.id == joint_id:
                return j
        raise KeyError(joint_id)

    @property
    def part_ids(self) -> list[str]:
        return [p.id for p in self.parts]

    @property
    def joint_ids(self) -> list[str]:
        return [j.id for j in self.joints]

    def incident(self, part_id: str) -> list[Joint]:
        return [j for j in self.joints if part_id in j.parts]

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        for p in self.parts:
            g.add_node(p.id, name=p.name, mass=p.mass, handling=p.handling)
        for j in self.joints:
            g.add_edge(j.part_a, j.part_b, key=j.id, time=j.time,
                       tolerance=j.tolerance, technology=j.technology)
        return g

    def canonical(self) -> "PartGraph":
        """Same graph with parts and joints sorted by id."""
        return PartGraph(
            tuple(sorted(self.parts, key=lambda p: p.id)),
            tuple(sorted(self.joints, key=lambda j: j.id)),
            self.handling_range,
        )


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    subject: str = ""


def validate_graph(g: PartGraph) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant (empty list when valid)."""
    diags: list[Diagnostic] = []
    lo, hi = g.handling_range

    seen: set[str] = set()
    for p in g.parts:
        if p.id in seen:
            diags.append(Diagnostic("duplicate-id", f"duplicate part id {p.id!r}", p.id))
        seen.add(p.id)
        if not math.isfinite(p.mass) or p.mass < 0:
            diags.append(Diagnostic("negative-mass", f"part {p.id!r} has mass {p.mass}", p.id))
        if not lo <= p.handling <= hi:
            diags.append(Diagnostic(
                "handling-out-of-range",
                f"part {p.id!r} handling {p.handling} outside [{lo}, {hi}]", p.id))
    part_ids = seen

    joint_seen: set[str] = set()
    for j in g.joints:
        if j.id in joint_seen:
            diags.append(Diagnostic("duplicate-id", f"duplicate joint id {j.id!r}", j.id))
        joint_seen.add(j.id)
        for ref in j.parts:
            if ref not in part_ids:
                diags.append(Diagnostic(
                    "dangling-reference", f"joint {j.id!r} references missing part {ref!r}", j.id))
        if j.part_a == j.part_b:
            diags.append(Diagnostic("self-joint", f"joint {j.id!r} joins part {j.part_a!r} to itself", j.id))
        if not math.isfinite(j.time) or j.time <= 0:
            diags.append(Diagnostic("nonpositive-time", f"joint {j.id!r} has time {j.time}", j.id))
        if j.tolerance < 1:
            diags.append(Diagnostic("tolerance-below-one", f"joint {j.id!r} has tolerance {j.tolerance}", j.id))

    if g.parts and not any(d.code == "dangling-reference" for d in diags):
        nxg = nx.Graph()
        nxg.add_nodes_from(part_ids)
        nxg.add_edges_from(j.parts for j in g.joints)
        if not nx.is_connected(nxg):
            n = nx.number_connected_components(nxg)
            diags.append(Diagnostic("disconnected-graph", f"part graph has {n} connected components"))
    elif not g.parts:
        diags.append(Diagnostic("empty-assembly", "assembly has no parts"))
    return diags


_LOAD_FATAL = ("duplicate-id", "dangling-reference", "disconnected-graph")


def parse_part_graph(doc: dict) -> PartGraph:
    """Build a PartGraph from an already-decoded assembly document."""
    if not isinstance(doc, dict) or "parts" not in doc or "joints" not in doc:
        raise AssemblyError("document must be an object with 'parts' and 'joints'", "malformed")
    try:
        parts = tuple(
            Part(str(p["id"]), str(p.get("name", p["id"])), float(p["mass_kg"]), _as_int(p["handling"]))
            for p in doc["parts"]
        )
        joints = tuple(
            Joint(str(j["id"]), str(j["part_a"]), str(j["part_b"]), float(j["time"]),
                  _as_int(j["tolerance"]), str(j["technology"]))
            for j in doc["joints"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AssemblyError(f"malformed assembly record: {exc}", "malformed") from exc
    handling_range = tuple(doc.get("handling_range", HANDLING_RANGE))
    if len(handling_range) != 2:
        raise AssemblyError("handling_range must have two entries", "malformed")
    g = PartGraph(parts, joints, (int(handling_range[0]), int(handling_range[1])))

    diags = validate_graph(g)
    for code in _LOAD_FATAL:
        hits = [d for d in diags if d.code == code]
        if hits:
            raise AssemblyError("; ".join(d.message for d in hits), code)
    if diags:
        raise AssemblyError("; ".join(d.message for d in diags), diags[0].code)
    return g


def load_part_graph(document: str | bytes) -> PartGraph:
    """Parse and validate an assembly description (JSON text)."""
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AssemblyError(f"assembly document is not valid JSON: {exc}", "malformed") from exc
    return parse_part_graph(doc)


def _as_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not an integer level")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"expected integer level, got {value}")
    return int(value)


def part_graph_to_dict(g: PartGraph) -> dict:
    doc = {
        "parts": [
            {"id": p.id, "name": p.name, "mass_kg": p.mass, "handling": p.handling}
            for p in g.parts
        ],
        "joints": [
            {"id": j.id, "part_a": j.part_a, "part_b": j.part_b, "time": j.time,
             "tolerance": j.tolerance, "technology": j.technology}
            for j in g.joints
        ],
    }
    if g.handling_range != HANDLING_RANGE:
        doc["handling_range"] = list(g.handling_range)
    return doc


def dump_part_graph(g: PartGraph) -> str:
    return json.dumps(part_graph_to_dict(g), indent=2)


# -- normalization ---------------------------------------------------------


def minmax(values: Sequence[float]) -> list[float]:
    """Min-max scale to [0, 1]; a constant sequence maps to zeros."""
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0 for _ in values]
    span = hi - lo
    return [(v - lo) / span for v in values]


def ordinal_codes(labels: Iterable[str]) -> dict[str, float]:
    """Equally spaced codes in [0, 1] by lexicographic rank of the distinct labels."""
    distinct = sorted(set(labels))
    if len(distinct) <= 1:
        return {lab: 0.0 for lab in distinct}
    step = len(distinct) - 1
    return {lab: i / step for i, lab in enumerate(distinct)}


@dataclass(frozen=True)
class NormalizedAttributes:
    tech: dict[str, float]
    tolerance: dict[str, float]
    time: dict[str, float]
    handling: dict[str, float]
    mass: dict[str, float]
    joint_parts: dict[str, tuple[str, str]] = field(repr=False)

    def joint_handling(self, joint_id: str, assembled: frozenset[str] | set[str]) -> float:
        """Handling cost of executing ``joint_id`` when ``assembled`` parts are already joined.

        The newly inserted part carries the cost. On the first joint (nothing
        assembled) both parts are new and the larger value is used; a joint
        closing a loop inserts no part and costs nothing.
        """
        a, b = self.joint_parts[joint_id]
        new = [p for p in (a, b) if p not in assembled]
        if not new:
            return 0.0
        return max(self.handling[p] for p in new)


def normalize_attributes(g: PartGraph) -> NormalizedAttributes:
    joints = list(g.joints)
    parts = list(g.parts)
    codes = ordinal_codes(j.technology for j in joints)
    return NormalizedAttributes(
        tech={j.id: codes[j.technology] for j in joints},
        tolerance=dict(zip((j.id for j in joints), minmax([float(j.tolerance) for j in joints]))),
        time=dict(zip((j.id for j in joints), minmax([j.time for j in joints]))),
        handling=dict(zip((p.id for p in parts), minmax([float(p.handling) for p in parts]))),
        mass=dict(zip((p.id for p in parts), minmax([p.mass for p in parts]))),
        joint_parts={j.id: j.parts for j in joints},
    )
