"""Vectorized triangle predicates: ray casting, distances, penetration.

Two notions of "meshes meet" are provided:

* ``meshes_touch`` - surfaces within ``tol`` of each other (or containment).
  Used for contact detection, where resting face-on-face counts.
* ``meshes_overlap`` - the solids share interior volume: some edge crosses a
  triangle strictly, or a sample point of one mesh lies strictly inside the
  other. Sliding contact (coplanar faces) does not count. Used for DoF probing.
"""
from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

# Generic (irrational-ish) directions for parity tests; avoids grazing
# axis-aligned edges of typical CAD geometry.
_PARITY_DIRS = np.array([
    [0.31415926, 0.57721566, 0.75487766],
    [-0.66016181, 0.26149721, 0.70370116],
    [0.43828293, -0.80939402, 0.39104140],
])
_PARITY_DIRS /= np.linalg.norm(_PARITY_DIRS, axis=1, keepdims=True)


def default_tolerance(*meshes: TriangleMesh) -> float:
    return 1e-6 * max(max(m.diagonal for m in meshes), 1e-12)


def ray_triangle_t(origins: np.ndarray, dirs: np.ndarray, tris: np.ndarray,
                   bary_eps: float = 1e-12) -> np.ndarray:
    """Line parameter of each (ray, triangle) hit, NaN where the line misses.

    ``origins`` and ``dirs`` are (r, 3); ``tris`` is (m, 3, 3). Returns (r, m).
    Hits on triangle borders count (barycentric >= -bary_eps). Negative t is
    returned as-is so callers can pick rays or full lines.
    """
    v0 = tris[:, 0][None]
    e1 = (tris[:, 1] - tris[:, 0])[None]
    e2 = (tris[:, 2] - tris[:, 0])[None]
    d = dirs[:, None, :]
    p = np.cross(d, e2)
    det = np.einsum("rmk,rmk->rm", np.broadcast_to(e1, p.shape), p)
    scale = np.linalg.norm(e1, axis=-1) * np.linalg.norm(e2, axis=-1)
    ok = np.abs(det) > 1e-12 * scale
    inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
    s = origins[:, None, :] - v0
    u = np.einsum("rmk,rmk->rm", s, p) * inv
    q = np.cross(s, np.broadcast_to(e1, s.shape))
    v = np.einsum("rmk,rmk->rm", np.broadcast_to(d, q.shape), q) * inv
    t = np.einsum("rmk,rmk->rm", np.broadcast_to(e2, q.shape), q) * inv
    hit = ok & (u >= -bary_eps) & (v >= -bary_eps) & (u + v <= 1 + bary_eps)
    return np.where(hit, t, np.nan)


def rays_hit(origins: np.ndarray, dirs: np.ndarray, mesh: TriangleMesh, eps: float,
             chunk: int = 4096) -> bool:
    """True if any ray (origin_i, dir_i) meets ``mesh`` at distance > eps."""
    tris = mesh.corners
    for start in range(0, len(origins), chunk):
        t = ray_triangle_t(origins[start:start + chunk], dirs[start:start + chunk], tris)
        if np.any(t > eps):
            return True
    return False


def points_inside(points: np.ndarray, mesh: TriangleMesh, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Classify points against a closed mesh.

    Returns (inside, on_surface). ``inside`` is a majority vote of ray
    parity along three generic directions and excludes surface points.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0 or len(mesh.triangles) == 0:
        z = np.zeros(len(points), dtype=bool)
        return z, z.copy()
    tris = mesh.corners
    votes = np.zeros(len(points), dtype=int)
    on_surface = np.zeros(len(points), dtype=bool)
    for d in _PARITY_DIRS:
        t = ray_triangle_t(points, np.broadcast_to(d, points.shape), tris)
        with np.errstate(invalid="ignore"):
            on_surface |= np.any(np.abs(t) <= eps, axis=1)
            votes += (np.sum(t > eps, axis=1) % 2).astype(int)
    inside = (votes >= 2) & ~on_surface
    return inside, on_surface


# -- distances ---------------------------------------------------------------


def _dot(a, b):
    return np.einsum("...k,...k->...", a, b)


def point_segment_distance(p, a, b):
    ab = b - a
    denom = np.maximum(_dot(ab, ab), 1e-300)
    t = np.clip(_dot(p - a, ab) / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def point_triangle_distance(p, tri):
    """Distance from points p (..., 3) to triangles tri (..., 3, 3)."""
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    n = np.cross(b - a, c - a)
    nn = np.maximum(_dot(n, n), 1e-300)
    dist_plane = _dot(p - a, n) / np.sqrt(nn)
    proj = p - (_dot(p - a, n) / nn)[..., None] * n
    # barycentric sign test of the projection
    c0 = _dot(np.cross(b - a, proj - a), n)
    c1 = _dot(np.cross(c - b, proj - b), n)
    c2 = _dot(np.cross(a - c, proj - c), n)
    inside = (c0 >= 0) & (c1 >= 0) & (c2 >= 0)
    edge = np.minimum(np.minimum(point_segment_distance(p, a, b), point_segment_distance(p, b, c)),
                      point_segment_distance(p, c, a))
    return np.where(inside, np.abs(dist_plane), edge)


def segment_segment_distance(p1, q1, p2, q2):
    """Closest distance between segments (vectorized, after Ericson)."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = _dot(d1, d1), _dot(d2, d2), _dot(d2, r)
    c, b = _dot(d1, r), _dot(d1, d2)
    a = np.maximum(a, 1e-300)
    e = np.maximum(e, 1e-300)
    denom = a * e - b * b
    par = denom <= 1e-12 * a * e
    s = np.where(par, 0.0, np.clip((b * f - c * e) / np.where(par, 1.0, denom), 0.0, 1.0))
    t = (b * s + f) / e
    s = np.where(t < 0, np.clip(-c / a, 0.0, 1.0), np.where(t > 1, np.clip((b - c) / a, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm((p1 + s[..., None] * d1) - (p2 + t[..., None] * d2), axis=-1)


_EDGES = ((0, 1), (1, 2), (2, 0))


def _edges_cross(ta, tb, strict_eps: float | None):
    """For paired triangles, does an edge of ``ta`` pass through ``tb``?

    With ``strict_eps`` the edge endpoints must lie strictly on opposite sides
    of tb's plane and the crossing point strictly inside tb; otherwise the
    test is inclusive.
    """
    a, b, c = tb[:, 0], tb[:, 1], tb[:, 2]
    n = np.cross(b - a, c - a)
    nlen = np.maximum(np.linalg.norm(n, axis=-1), 1e-300)
    n_hat = n / nlen[:, None]
    area2 = nlen
    out = np.zeros(len(ta), dtype=bool)
    for i, j in _EDGES:
        p, q = ta[:, i], ta[:, j]
        dp, dq = _dot(p - a, n_hat), _dot(q - a, n_hat)
        if strict_eps is None:
            crosses = (dp * dq <= 0) & (np.abs(dp - dq) > 1e-300)
        else:
            crosses = ((dp > strict_eps) & (dq < -strict_eps)) | ((dp < -strict_eps) & (dq > strict_eps))
        denom = np.where(np.abs(dp - dq) > 1e-300, dp - dq, 1.0)
        x = p + (dp / denom)[:, None] * (q - p)
        # barycentric weights scaled by 2*area
        w0 = _dot(np.cross(c - b, x - b), n_hat) / area2
        w1 = _dot(np.cross(a - c, x - c), n_hat) / area2
        w2 = _dot(np.cross(b - a, x - a), n_hat) / area2
        lim = 1e-9 if strict_eps is not None else -1e-12
        inside = (w0 > lim) & (w1 > lim) & (w2 > lim) if strict_eps is not None else \
            (w0 >= lim) & (w1 >= lim) & (w2 >= lim)
        out |= crosses & inside
    return out


def _candidate_pairs(a: TriangleMesh, b: TriangleMesh, pad: float):
    ca, cb = a.corners, b.corners
    lo_a, hi_a = ca.min(axis=1) - pad, ca.max(axis=1) + pad
    lo_b, hi_b = cb.min(axis=1), cb.max(axis=1)
    ok = np.all((lo_a[:, None] <= hi_b[None]) & (lo_b[None] <= hi_a[:, None]), axis=-1)
    ia, ib = np.nonzero(ok)
    return ca[ia], cb[ib]


def triangle_distances(ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """Exact distance between paired triangles (0 where they intersect)."""
    if len(ta) == 0:
        return np.zeros(0)
    d = np.full(len(ta), np.inf)
    for k in range(3):
        d = np.minimum(d, point_triangle_distance(ta[:, k], tb))
        d = np.minimum(d, point_triangle_distance(tb[:, k], ta))
    for i, j in _EDGES:
        for k, l in _EDGES:
            d = np.minimum(d, segment_segment_distance(ta[:, i], ta[:, j], tb[:, k], tb[:, l]))
    hit = _edges_cross(ta, tb, None) | _edges_cross(tb, ta, None)
    return np.where(hit, 0.0, d)


def mesh_distance_within(a: TriangleMesh, b: TriangleMesh, tol: float) -> bool:
    ta, tb = _candidate_pairs(a, b, tol)
    return bool(len(ta)) and bool(np.any(triangle_distances(ta, tb) <= tol))


def meshes_touch(a: TriangleMesh, b: TriangleMesh, tol: float) -> bool:
    """Surfaces within ``tol``, or one mesh entirely inside the other."""
    if mesh_distance_within(a, b, tol):
        return True
    if len(a.vertices) and points_inside(a.vertices[:1], b, tol)[0][0]:
        return True
    if len(b.vertices) and points_inside(b.vertices[:1], a, tol)[0][0]:
        return True
    return False


def _samples(m: TriangleMesh) -> np.ndarray:
    return np.vstack([m.vertices, m.corners.mean(axis=1)])


def meshes_overlap(a: TriangleMesh, b: TriangleMesh, eps: float) -> bool:
    """Positive-volume overlap of two closed meshes (see module docstring)."""
    ta, tb = _candidate_pairs(a, b, 0.0)
    if len(ta) and (np.any(_edges_cross(ta, tb, eps)) or np.any(_edges_cross(tb, ta, eps))):
        return True
    lo = np.maximum(a.bounds[0], b.bounds[0])
    hi = np.minimum(a.bounds[1], b.bounds[1])
    if np.any(hi - lo <= eps):
        return False
    for src, dst in ((a, b), (b, a)):
        pts = _samples(src)
        box_ok = np.all((pts > lo + eps) & (pts < hi - eps), axis=1)
        if box_ok.any() and points_inside(pts[box_ok], dst, eps)[0].any():
            return True
    return False
