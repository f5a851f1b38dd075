"""Binary and ASCII STL reading/writing."""
from __future__ import annotations

import re
import struct

import numpy as np

from ..errors import MeshError
from .mesh import TriangleMesh, from_triangle_soup

HEADER_SIZE = 80
RECORD = np.dtype([
    ("normal", "<f4", (3,)),
    ("corners", "<f4", (3, 3)),
    ("attr", "<u2"),
])  # 50 bytes

_FLOAT = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?(?:nan|inf|infinity))"
_VERTEX = re.compile(rb"vertex\s+" + (_FLOAT + r"\s+").encode() * 2 + _FLOAT.encode(), re.I)
_FACET = re.compile(rb"facet(.*?)endfacet", re.S | re.I)


def _looks_ascii(data: bytes) -> bool:
    if not data.lstrip().lower().startswith(b"solid"):
        return False
    # Some binary exporters also start their header with "solid"; trust the size.
    if len(data) >= HEADER_SIZE + 4:
        (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
        if len(data) == HEADER_SIZE + 4 + count * RECORD.itemsize:
            return False
    return b"facet" in data or b"endsolid" in data


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) < HEADER_SIZE + 4:
        raise MeshError("binary STL shorter than its header", "truncated")
    (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
    body = len(data) - HEADER_SIZE - 4
    expected = count * RECORD.itemsize
    if body < expected:
        raise MeshError(
            f"binary STL declares {count} triangles but holds {body // RECORD.itemsize}", "truncated")
    if body > expected:
        raise MeshError(
            f"binary STL declares {count} triangles but has {body - expected} trailing bytes",
            "count-mismatch")
    records = np.frombuffer(data, dtype=RECORD, count=count, offset=HEADER_SIZE + 4)
    return records["corners"].astype(np.float64)


def _parse_ascii(data: bytes) -> np.ndarray:
    corners = []
    for i, facet in enumerate(_FACET.finditer(data)):
        verts = _VERTEX.findall(facet.group(1))
        if len(verts) != 3:
            raise MeshError(f"ASCII facet {i} has {len(verts)} vertices", "count-mismatch")
        corners.append([[float(x) for x in v] for v in verts])
    n_facet_kw = len(re.findall(rb"\bfacet\b", data, re.I))
    if n_facet_kw != len(corners):
        raise MeshError("ASCII STL has an unterminated facet", "truncated")
    return np.array(corners, dtype=np.float64).reshape(-1, 3, 3)


def parse_stl(data: bytes, part_id: str = "", tol: float | None = None) -> TriangleMesh:
    """Parse STL bytes (format auto-detected) into an indexed mesh.

    Vertices closer than ``tol`` are merged; degenerate triangles are dropped
    with a diagnostic on the returned mesh.
    """
    corners = _parse_ascii(data) if _looks_ascii(data) else _parse_binary(data)
    if not np.all(np.isfinite(corners)):
        raise MeshError("STL contains non-finite coordinates", "non-finite")
    return from_triangle_soup(corners, part_id, tol)


def read_stl(path, part_id: str | None = None) -> TriangleMesh:
    from pathlib import Path

    path = Path(path)
    return parse_stl(path.read_bytes(), part_id if part_id is not None else path.stem)


def _normals(corners: np.ndarray) -> np.ndarray:
    n = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)


def dump_stl_binary(mesh: TriangleMesh, header: bytes = b"asmline") -> bytes:
    corners = mesh.corners
    rec = np.zeros(len(corners), dtype=RECORD)
    rec["normal"] = _normals(corners)
    rec["corners"] = corners
    head = header[:HEADER_SIZE].ljust(HEADER_SIZE, b"\0")
    return head + struct.pack("<I", len(corners)) + rec.tobytes()


def dump_stl_ascii(mesh: TriangleMesh, name: str = "") -> bytes:
    name = name or mesh.part_id or "mesh"
    lines = [f"solid {name}"]
    for n, tri in zip(_normals(mesh.corners), mesh.corners):
        lines.append("  facet normal " + " ".join(repr(float(x)) for x in n))
        lines.append("    outer loop")
        for v in tri:
            lines.append("      vertex " + " ".join(repr(float(x)) for x in v))
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return ("\n".join(lines) + "\n").encode("ascii")
