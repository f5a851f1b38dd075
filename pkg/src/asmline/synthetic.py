"""Random and hand-made assembly fixtures for tests, sweeps and demos."""
from __future__ import annotations

import numpy as np

from .model import Joint, Part, PartGraph


def random_part_graph(n_joints: int, n_parts: int | None = None, seed: int = 0,
                      technologies=("MAG", "MAG2"), time_range=(1.0, 10.0),
                      integer_times: bool = False) -> PartGraph:
    """Connected random assembly: a random spanning tree plus extra (cycle) joints.

    ``n_parts`` defaults to ``n_joints + 1`` (a tree). Parallel joints between
    the same pair are avoided.
    """
    rng = np.random.default_rng(seed)
    if n_parts is None:
        n_parts = n_joints + 1
    if not 2 <= n_parts <= n_joints + 1:
        raise ValueError("need 2 <= n_parts <= n_joints + 1 for a connected simple graph")
    max_pairs = n_parts * (n_parts - 1) // 2
    if n_joints > max_pairs:
        raise ValueError("too many joints for a simple graph on n_parts parts")
    width = len(str(max(n_parts, n_joints)))
    pids = [f"P{i:0{width}d}" for i in range(n_parts)]
    pairs = []
    order = rng.permutation(n_parts)
    for k in range(1, n_parts):
        a = order[k]
        b = order[rng.integers(0, k)]
        pairs.append(tuple(sorted((int(a), int(b)))))
    used = set(pairs)
    while len(pairs) < n_joints:
        a, b = sorted(int(x) for x in rng.choice(n_parts, size=2, replace=False))
        if (a, b) not in used:
            used.add((a, b))
            pairs.append((a, b))
    parts = tuple(
        Part(pid, f"part {pid}", float(np.round(rng.uniform(0.1, 20.0), 3)), int(rng.integers(1, 4)))
        for pid in pids
    )
    joints = []
    for k, (a, b) in enumerate(pairs):
        t = rng.uniform(*time_range)
        t = float(np.round(t)) if integer_times else float(np.round(t, 3))
        joints.append(Joint(f"J{k:0{width}d}", pids[a], pids[b], max(t, 1e-3),
                            int(rng.integers(1, 11)), str(technologies[int(rng.integers(0, len(technologies)))])))
    return PartGraph(parts, tuple(joints))


def looped_part_graph(n_joints: int, seed: int = 0, **kw) -> PartGraph:
    """Random assembly with about two closed loops (fewest parts near ``n_joints - 1``)."""
    n = max(2, n_joints - 1)
    while n * (n - 1) // 2 < n_joints:
        n += 1
    return random_part_graph(n_joints, n, seed=seed, **kw)


def simple_graph(parts: str, edges: list[str], times=None, tolerances=None, technologies=None,
                 handling=None) -> PartGraph:
    """Tiny hand-written assemblies: parts as letters, joints as two-letter strings."""
    ps = tuple(Part(p, p, 1.0, (handling or {}).get(p, 1)) for p in parts)
    js = []
    for i, e in enumerate(edges):
        js.append(Joint(e, e[0], e[1],
                        float(times[i]) if times else 1.0,
                        int(tolerances[i]) if tolerances else 1,
                        technologies[i] if technologies else "MAG"))
    return PartGraph(ps, tuple(js))


def triangle() -> PartGraph:
    return simple_graph("ABC", ["AB", "BC", "AC"])


def path4() -> PartGraph:
    return simple_graph("ABCD", ["AB", "BC", "CD"])


def two_technology_fixture(seed: int = 7) -> PartGraph:
    """13-joint, 14-part tree with two technologies ("MAG", "MAG2").

    The MAG joints form a connected core and the MAG2 joints hang off it, so
    a sequence with a single technology change is feasible.
    """
    rng = np.random.default_rng(seed)
    n_core = 8  # MAG joints
    parts = [f"P{i:02d}" for i in range(14)]
    pairs = []
    for k in range(1, n_core + 1):  # core tree over P00..P08
        pairs.append((parts[int(rng.integers(0, k))], parts[k], "MAG"))
    for k in range(n_core + 1, 14):  # leaves attached to core or earlier leaves
        pairs.append((parts[int(rng.integers(0, k))], parts[k], "MAG2"))
    ps = tuple(Part(p, f"part {p}", float(np.round(rng.uniform(0.2, 15.0), 2)), int(rng.integers(1, 4)))
               for p in parts)
    js = tuple(
        Joint(f"J{i:02d}", a, b, float(np.round(rng.uniform(20.0, 120.0), 1)), int(rng.integers(1, 11)), tech)
        for i, (a, b, tech) in enumerate(pairs)
    )
    return PartGraph(ps, js)
