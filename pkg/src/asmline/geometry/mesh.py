"""Triangle meshes and rigid transforms."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int64
    part_id: str = ""
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshError("mesh has non-finite coordinates", "non-finite")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range", "bad-index")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (self.part_id == other.part_id
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles))

    __hash__ = None

    @property
    def corners(self) -> np.ndarray:
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def diagonal(self) -> float:
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    def transformed(self, rotation=None, translation=None, pivot=None) -> "TriangleMesh":
        """Rotate about ``pivot`` (default origin), then translate."""
        v = self.vertices
        if rotation is not None:
            p = np.zeros(3) if pivot is None else np.asarray(pivot, dtype=float)
            v = (v - p) @ np.asarray(rotation, dtype=float).T + p
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriangleMesh(v, self.triangles, self.part_id)


def triangle_areas(corners: np.ndarray) -> np.ndarray:
    return 0.5 * np.linalg.norm(
        np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)


def from_triangle_soup(corners: np.ndarray, part_id: str = "", tol: float | None = None) -> TriangleMesh:
    """Build an indexed mesh from (m, 3, 3) corners, merging vertices within ``tol``.

    Degenerate (zero-area) triangles are dropped and recorded as diagnostics.
    """
    corners = np.asarray(corners, dtype=np.float64).reshape(-1, 3, 3)
    if not np.all(np.isfinite(corners)):
        raise MeshError("mesh has non-finite coordinates", "non-finite")
    diags: list[str] = []
    if len(corners) == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), part_id)

    pts = corners.reshape(-1, 3)
    if tol is None:
        span = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        tol = 1e-9 * max(span, 1.0)
    keys = np.round(pts / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    # renumber by first occurrence so vertex order follows the file
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    vertices = pts[first[order]]
    tris = rank[inverse].reshape(-1, 3)

    collapsed = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    areas = triangle_areas(vertices[tris])
    scale = max(float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))), 1e-300)
    degenerate = collapsed | (areas <= 1e-14 * scale * scale)
    if degenerate.any():
        idx = np.flatnonzero(degenerate)
        msg = f"dropped {len(idx)} degenerate triangle(s): {idx.tolist()[:10]}"
        logger.warning("%s%s", f"{part_id}: " if part_id else "", msg)
        diags.append(msg)
        tris = tris[~degenerate]
        used = np.unique(tris)
        remap = np.full(len(vertices), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        vertices = vertices[used]
        tris = remap[tris]
    return TriangleMesh(vertices, tris, part_id, tuple(diags))


_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # z-
    [4, 5, 6], [4, 6, 7],  # z+
    [0, 1, 5], [0, 5, 4],  # y-
    [2, 3, 7], [2, 7, 6],  # y+
    [1, 2, 6], [1, 6, 5],  # x+
    [0, 4, 7], [0, 7, 3],  # x-
])


def box(lo, hi, part_id: str = "") -> TriangleMesh:
    """Axis-aligned box with outward-facing triangles."""
    (x0, y0, z0), (x1, y1, z1) = np.asarray(lo, float), np.asarray(hi, float)
    v = np.array([
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ])
    return TriangleMesh(v, _BOX_FACES, part_id)


def merge(meshes, part_id: str = "") -> TriangleMesh:
    """Concatenate meshes into one (shells are kept separate, not unioned)."""
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return TriangleMesh(np.vstack(verts), np.vstack(tris), part_id)


def rotation_about(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle_rad) * kx + (1 - np.cos(angle_rad)) * (kx @ kx)
