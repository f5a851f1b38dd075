"""Spatial relationships, DoF matrices, joint frames and the constraint document."""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import GeometryError
from .mesh import TriangleMesh, rotation_about
from .predicates import default_tolerance, meshes_overlap, meshes_touch, rays_hit

logger = logging.getLogger(__name__)

SELF, CONTACT, BLOCKING, FREE = 0, 1, 2, 3

AXES = ("x", "y", "z")
COLUMNS = ("T+", "T-", "R+", "R-")

DEFAULT_DISTANCE_FACTORS = (0.01, 0.1, 0.5)
DEFAULT_ANGLES_DEG = (5.0, 15.0)


@dataclass(frozen=True, eq=False)
class JointFrame:
    """Joint coordinate system: columns of ``rotation`` are the local axes in world coordinates."""

    joint_id: str
    origin: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "rotation", r)

    def __eq__(self, other):
        if not isinstance(other, JointFrame):
            return NotImplemented
        return (self.joint_id == other.joint_id and np.array_equal(self.origin, other.origin)
                and np.array_equal(self.rotation, other.rotation))

    __hash__ = None

    def check(self, tol: float = 1e-9) -> None:
        r = self.rotation
        if not np.all(np.isfinite(r)) or not np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0):
            raise GeometryError(f"frame {self.joint_id!r} rotation is not orthonormal", "invalid-frame")
        if abs(np.linalg.det(r) - 1.0) > tol:
            raise GeometryError(f"frame {self.joint_id!r} rotation has determinant != +1", "invalid-frame")

    def axis(self, k: int) -> np.ndarray:
        return self.rotation[:, k]

    @classmethod
    def identity(cls, joint_id: str, origin=(0.0, 0.0, 0.0)) -> "JointFrame":
        return cls(joint_id, np.asarray(origin, dtype=float), np.eye(3))


@dataclass(frozen=True)
class DofMatrix:
    """3x4 binary matrix; rows x, y, z; columns T+, T-, R+, R- (1 = motion allowed)."""

    joint_id: str
    part_id: str
    frame_id: str
    matrix: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self):
        m = tuple(tuple(int(v) for v in row) for row in np.asarray(self.matrix).tolist())
        if len(m) != 3 or any(len(row) != 4 for row in m):
            raise GeometryError("DoF matrix must be 3x4", "bad-dof")
        if any(v not in (0, 1) for row in m for v in row):
            raise GeometryError("DoF matrix entries must be 0 or 1", "bad-dof")
        object.__setattr__(self, "matrix", m)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=int)

    def allowed_translations(self) -> list[np.ndarray]:
        """Allowed translation directions as signed unit vectors in the frame."""
        out = []
        for k in range(3):
            for col, sign in ((0, 1.0), (1, -1.0)):
                if self.matrix[k][col]:
                    d = np.zeros(3)
                    d[k] = sign
                    out.append(d)
        return out


@dataclass(frozen=True, eq=False)
class RelationalMatrix:
    part_order: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.int64)
        n = len(self.part_order)
        if m.shape != (n, n):
            raise GeometryError(f"relational matrix must be {n}x{n}, got {m.shape}", "bad-shape")
        if not np.array_equal(m, m.T) or np.any(np.diag(m) != SELF) or not np.isin(m, (0, 1, 2, 3)).all():
            raise GeometryError("relational matrix must be symmetric with zero diagonal and codes 0-3",
                                "bad-relations")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "part_order", tuple(self.part_order))

    def __eq__(self, other):
        if not isinstance(other, RelationalMatrix):
            return NotImplemented
        return self.part_order == other.part_order and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def relation(self, a: str, b: str) -> int:
        i, j = self.part_order.index(a), self.part_order.index(b)
        return int(self.matrix[i, j])


# -- relationship detection ------------------------------------------------


def detect_contact(a: TriangleMesh, b: TriangleMesh, tol: float | None = None) -> bool:
    """Surfaces intersect or lie within ``tol`` of each other, or one contains the other."""
    if tol is None:
        tol = default_tolerance(a, b)
    return meshes_touch(a, b, tol)


AXIS_DIRECTIONS = np.vstack([np.eye(3), -np.eye(3)])


def detect_blocking(a: TriangleMesh, b: TriangleMesh, directions: Sequence | None = None,
                    eps: float | None = None) -> bool:
    """Does any ray from a vertex of ``a`` along any of ``directions`` hit ``b``?"""
    dirs = AXIS_DIRECTIONS if directions is None else np.asarray(directions, dtype=float).reshape(-1, 3)
    if len(dirs) == 0:
        raise GeometryError("blocking test needs at least one direction", "no-directions")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    if eps is None:
        eps = default_tolerance(a, b)
    origins = np.repeat(a.vertices, len(dirs), axis=0)
    rays = np.tile(dirs, (len(a.vertices), 1))
    return rays_hit(origins, rays, b, eps)


def build_relational_matrix(meshes: Sequence[TriangleMesh], tol: float | None = None,
                            directions: Sequence | None = None) -> RelationalMatrix:
    """Pairwise contact (1) / blocking (2) / free (3) codes, zero diagonal.

    Blocking is tested in both directions so the matrix is symmetric.
    """
    if len(meshes) < 2:
        raise GeometryError("relational matrix needs at least two meshes", "too-few-meshes")
    n = len(meshes)
    m = np.zeros((n, n), dtype=np.int64)
    for i, j in itertools.combinations(range(n), 2):
        a, b = meshes[i], meshes[j]
        t = default_tolerance(a, b) if tol is None else tol
        if meshes_touch(a, b, t):
            code = CONTACT
        elif detect_blocking(a, b, directions, t) or detect_blocking(b, a, directions, t):
            code = BLOCKING
        else:
            code = FREE
        m[i, j] = m[j, i] = code
    return RelationalMatrix(tuple(mesh.part_id for mesh in meshes), m)


# -- DoF extraction ----------------------------------------------------------


def probe_distances(moved: TriangleMesh, factors=DEFAULT_DISTANCE_FACTORS) -> tuple[float, ...]:
    diag = moved.diagonal
    return tuple(f * diag for f in factors)


def extract_dof_matrix(moved: TriangleMesh, fixed: TriangleMesh, frame: JointFrame,
                       distances: Iterable[float] | None = None,
                       angles: Iterable[float] | None = None,
                       pivot=None, eps: float | None = None,
                       check_relation: bool = True) -> DofMatrix:
    """Probe ``moved`` against ``fixed`` along/about each frame axis.

    An entry is 0 when any probe displacement (translation by each distance,
    rotation by each angle in degrees about the axis through ``pivot``,
    default the frame origin) makes the solids overlap.
    """
    frame.check()
    distances = tuple(probe_distances(moved) if distances is None else distances)
    angles = tuple(DEFAULT_ANGLES_DEG if angles is None else angles)
    if not distances or not angles:
        raise GeometryError("probe distance and angle sets must be non-empty", "empty-probes")
    if eps is None:
        eps = default_tolerance(moved, fixed)
    if check_relation:
        related = (meshes_touch(moved, fixed, eps) or detect_blocking(moved, fixed, eps=eps)
                   or detect_blocking(fixed, moved, eps=eps))
        if not related:
            raise GeometryError(
                f"parts {moved.part_id!r} and {fixed.part_id!r} are free; no DoF matrix defined",
                "free-pair")
    pivot = frame.origin if pivot is None else np.asarray(pivot, dtype=float)

    rows = []
    for k in range(3):
        axis = frame.axis(k)
        row = []
        for sign in (1.0, -1.0):
            blocked = any(meshes_overlap(moved.transformed(translation=sign * d * axis), fixed, eps)
                          for d in distances)
            row.append(0 if blocked else 1)
        for sign in (1.0, -1.0):
            blocked = any(
                meshes_overlap(moved.transformed(rotation_about(axis, sign * math.radians(a)), pivot=pivot),
                               fixed, eps)
                for a in angles)
            row.append(0 if blocked else 1)
        rows.append(tuple(row))
    return DofMatrix(frame.joint_id, moved.part_id, frame.joint_id, tuple(rows))


def default_frame(joint_id: str, a: TriangleMesh, b: TriangleMesh) -> JointFrame:
    """World-aligned frame at the centre of the overlap of the two bounding boxes."""
    lo = np.maximum(a.bounds[0], b.bounds[0])
    hi = np.minimum(a.bounds[1], b.bounds[1])
    origin = np.where(lo <= hi, 0.5 * (lo + hi), 0.5 * (a.vertices.mean(0) + b.vertices.mean(0)))
    return JointFrame(joint_id, origin, np.eye(3))


# -- constraint document ---------------------------------------------------


@dataclass
class GeometryConstraints:
    relations: RelationalMatrix | None = None
    frames: dict[str, JointFrame] = field(default_factory=dict)
    dofs: list[DofMatrix] = field(default_factory=list)

    def __post_init__(self):
        self._index = {(d.joint_id, d.part_id): d for d in self.dofs}

    def dof(self, joint_id: str, part_id: str) -> DofMatrix | None:
        return self._index.get((joint_id, part_id))

    def frame(self, frame_id: str) -> JointFrame | None:
        return self.frames.get(frame_id)

    def __eq__(self, other):
        if not isinstance(other, GeometryConstraints):
            return NotImplemented
        return (self.relations == other.relations and self.frames == other.frames
                and self.dofs == other.dofs)


def export_geometry_constraints(relations: RelationalMatrix | None, dofs: Sequence[DofMatrix],
                                frames: Iterable[JointFrame] | dict) -> str:
    frame_map = dict(frames) if isinstance(frames, dict) else {f.joint_id: f for f in frames}
    for d in dofs:
        if d.frame_id not in frame_map:
            raise GeometryError(f"DoF matrix for joint {d.joint_id!r} references unknown frame "
                                f"{d.frame_id!r}", "dangling-frame")
    doc = {
        "relations": [] if relations is None else relations.matrix.tolist(),
        "part_order": [] if relations is None else list(relations.part_order),
        "frames": {
            fid: {"origin": f.origin.tolist(), "rotation": f.rotation.tolist()}
            for fid, f in frame_map.items()
        },
        "dof": [
            {"joint_id": d.joint_id, "part_id": d.part_id, "frame_id": d.frame_id,
             "matrix": [list(r) for r in d.matrix]}
            for d in dofs
        ],
    }
    return json.dumps(doc, indent=2)


def import_geometry_constraints(text: str) -> GeometryConstraints:
    try:
        doc = json.loads(text)
        frames = {
            fid: JointFrame(fid, np.array(f["origin"], dtype=float), np.array(f["rotation"], dtype=float))
            for fid, f in doc.get("frames", {}).items()
        }
        dofs = [DofMatrix(d["joint_id"], d["part_id"], d["frame_id"], tuple(map(tuple, d["matrix"])))
                for d in doc.get("dof", [])]
        order = doc.get("part_order", [])
        rel = doc.get("relations", [])
    except (json.JSONDecodeError, AttributeError, KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"malformed constraint document: {exc}", "malformed") from exc
    for d in dofs:
        if d.frame_id not in frames:
            raise GeometryError(f"DoF matrix references unknown frame {d.frame_id!r}", "dangling-frame")
    relations = None
    if order:
        m = np.array(rel, dtype=np.int64).reshape(len(order), len(order))
        relations = RelationalMatrix(tuple(order), m)
    return GeometryConstraints(relations, frames, dofs)


def build_constraints(meshes: dict[str, TriangleMesh], joints, frames: dict[str, JointFrame] | None = None,
                      distances=None, angles=None) -> GeometryConstraints:
    """Relational matrix plus both-way DoF matrices for every joint whose parts relate.

    ``joints`` is an iterable of objects with ``id``, ``part_a``, ``part_b``.
    Frames not supplied are derived with :func:`default_frame`.
    """
    order = sorted(meshes)
    relations = build_relational_matrix([meshes[p] for p in order])
    frames = dict(frames or {})
    dofs = []
    for j in joints:
        a, b = meshes[j.part_a], meshes[j.part_b]
        if j.id not in frames:
            frames[j.id] = default_frame(j.id, a, b)
        if relations.relation(j.part_a, j.part_b) == FREE:
            logger.warning("joint %s: parts %s and %s are free; no DoF matrix", j.id, j.part_a, j.part_b)
            continue
        for moved, fixed in ((a, b), (b, a)):
            dofs.append(extract_dof_matrix(moved, fixed, frames[j.id], distances, angles,
                                           check_relation=False))
    return GeometryConstraints(relations, frames, dofs)
