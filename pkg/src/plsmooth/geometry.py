"""Low-level geometric primitives shared by the mesh and smoothing modules.

Everything here is plain numpy: frames, simplex measures, point/simplex
distances, convex clipping, and the exact polygon/disk intersection area
used by the difference-set volume computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull


def normalize(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


def orthonormal_tangents(n):
    """Two unit vectors completing ``n`` to a right-handed orthonormal basis."""
    n = np.asarray(n, dtype=float)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t2 = np.cross(n, a)
    t2 /= np.linalg.norm(t2)
    t3 = np.cross(n, t2)
    return t2, t3


def rotation_to_e3(v):
    """Rotation matrix Q with Q @ (v/|v|) = e3."""
    v = np.asarray(v, dtype=float)
    u = v / np.linalg.norm(v)
    e3 = np.array([0.0, 0.0, 1.0])
    c = float(u @ e3)
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        # 180 degree turn about the x-axis
        return np.diag([1.0, -1.0, -1.0])
    axis = np.cross(u, e3)
    s = np.linalg.norm(axis)
    axis = axis / s
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


@dataclass(frozen=True)
class Frame:
    """Rigid motion y = R (x - origin); rows of R are the frame axes."""

    origin: np.ndarray
    R: np.ndarray

    def to_local(self, x):
        return (np.asarray(x, dtype=float) - self.origin) @ self.R.T

    def to_world(self, y):
        return np.asarray(y, dtype=float) @ self.R + self.origin


# ---------------------------------------------------------------------------
# simplex measures and barycentric queries


def tet_volume(p):
    p = np.asarray(p, dtype=float)
    return float(np.linalg.det(p[1:] - p[0])) / 6.0


def tet_edge_matrix(p):
    p = np.asarray(p, dtype=float)
    return (p[1:] - p[0]).T


def barycentric(p, x):
    """Barycentric coordinates of points ``x`` (N,3) in tetrahedron ``p`` (4,3)."""
    T = tet_edge_matrix(p)
    lam = np.linalg.solve(T, (np.atleast_2d(x) - p[0]).T).T
    lam0 = 1.0 - lam.sum(axis=1, keepdims=True)
    return np.hstack([lam0, lam])


def points_in_tet(p, x, tol=1e-12):
    lam = barycentric(p, x)
    return (lam >= -tol).all(axis=1)


def triangle_area(p):
    p = np.asarray(p, dtype=float)
    return 0.5 * float(np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])))


# ---------------------------------------------------------------------------
# distances


def dist_point_segment(x, a, b):
    ab = b - a
    t = float(np.dot(x - a, ab) / np.dot(ab, ab))
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(x - (a + t * ab)))


def dist_point_triangle(x, tri):
    a, b, c = [np.asarray(v, dtype=float) for v in tri]
    n = np.cross(b - a, c - a)
    nn = np.dot(n, n)
    if nn < 1e-300:
        return min(dist_point_segment(x, a, b), dist_point_segment(x, a, c))
    # project and test barycentric membership of the projection
    t = np.dot(x - a, n) / nn
    proj = x - t * n
    M = np.column_stack([b - a, c - a])
    uv, *_ = np.linalg.lstsq(M, proj - a, rcond=None)
    u, v = uv
    if u >= 0 and v >= 0 and u + v <= 1:
        return abs(t) * np.sqrt(nn)
    return min(dist_point_segment(x, a, b),
               dist_point_segment(x, b, c),
               dist_point_segment(x, a, c))


def dist_point_simplex(x, verts):
    """Distance from ``x`` to a simplex given by its vertex array (k,3)."""
    verts = np.asarray(verts, dtype=float)
    x = np.asarray(x, dtype=float)
    k = len(verts)
    if k == 1:
        return float(np.linalg.norm(x - verts[0]))
    if k == 2:
        return dist_point_segment(x, verts[0], verts[1])
    if k == 3:
        return dist_point_triangle(x, verts)
    # tetrahedron: zero if inside, else min over faces
    if points_in_tet(verts, x[None])[0]:
        return 0.0
    return min(dist_point_triangle(x, verts[list(f)])
               for f in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)])


def dist_segment_simplex(a, b, verts, n=64):
    """Distance from segment [a,b] to a simplex, by dense sampling of the
    segment plus endpoint refinement; adequate for parameter selection."""
    ts = np.linspace(0.0, 1.0, n)
    pts = a[None] + ts[:, None] * (b - a)[None]
    return min(dist_point_simplex(p, verts) for p in pts)


# ---------------------------------------------------------------------------
# convex intersection (tet/tet overlap detection and volume)


def halfspaces_of_tet(p):
    """Rows (a, b) with a.x + b <= 0 describing the tetrahedron interior."""
    p = np.asarray(p, dtype=float)
    faces = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0)]
    H = np.zeros((4, 4))
    for r, (i, j, k, opp) in enumerate(faces):
        n = np.cross(p[j] - p[i], p[k] - p[i])
        n /= np.linalg.norm(n)
        if np.dot(n, p[opp] - p[i]) > 0:
            n = -n
        H[r, :3] = n
        H[r, 3] = -np.dot(n, p[i])
    return H


def convex_interior_overlap(pa, pb, tol=1e-10):
    """Interior-overlap test of two tetrahedra.

    Returns (volume, witness) where volume is the Lebesgue measure of the
    intersection of the open interiors and witness is a point well inside it,
    or (0.0, None).  Uses the Chebyshev centre LP followed by a hull volume.
    """
    H = np.vstack([halfspaces_of_tet(pa), halfspaces_of_tet(pb)])
    A, b = H[:, :3], -H[:, 3]
    # maximize r s.t. A x + r <= b
    c = np.array([0.0, 0.0, 0.0, -1.0])
    A_ub = np.hstack([A, np.ones((len(A), 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=[(None, None)] * 3 + [(0, None)],
                  method="highs")
    if not res.success or res.x[3] <= tol:
        return 0.0, None
    center = res.x[:3]
    from scipy.spatial import HalfspaceIntersection
    hs = HalfspaceIntersection(H, center)
    vol = ConvexHull(hs.intersections).volume
    return float(vol), center


def halfspace_polytope(H, tol=1e-12):
    """Vertices of the polytope {x: a.x + b <= 0 per row (a,b)}; an empty
    array when the interior is empty."""
    from scipy.spatial import HalfspaceIntersection
    A, b = H[:, :3], -H[:, 3]
    c = np.array([0.0, 0.0, 0.0, -1.0])
    A_ub = np.hstack([A, np.ones((len(A), 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b,
                  bounds=[(None, None)] * 3 + [(0, None)], method="highs")
    if not res.success or res.x[3] <= tol:
        return np.zeros((0, 3))
    hs = HalfspaceIntersection(H, res.x[:3])
    return np.asarray(hs.intersections)


def polytope_tets(vertices):
    """Fan tetrahedralization of a convex polytope from its hull centroid."""
    vertices = np.asarray(vertices, dtype=float)
    if len(vertices) < 4:
        return []
    hull = ConvexHull(vertices)
    ctr = vertices[hull.vertices].mean(axis=0)
    tets = []
    for simplex in hull.simplices:
        tet = np.vstack([vertices[simplex], ctr])
        if abs(tet_volume(tet)) > 1e-300:
            tets.append(tet)
    return tets


def polytope_plane_section(vertices, n, c):
    """Ordered polygon of {x: n.x = c} ∩ conv(vertices), as 3D points."""
    vertices = np.asarray(vertices, dtype=float)
    if len(vertices) < 4:
        return []
    n = np.asarray(n, dtype=float)
    hull = ConvexHull(vertices)
    d = vertices @ n - c
    pts = []
    seen = set()
    for simplex in hull.simplices:
        idx = list(simplex)
        for a in range(3):
            i, j = idx[a], idx[(a + 1) % 3]
            key = (min(i, j), max(i, j))
            if key in seen:
                continue
            seen.add(key)
            if abs(d[i]) < 1e-14:
                pts.append(vertices[i])
            if d[i] * d[j] < 0:
                t = d[i] / (d[i] - d[j])
                pts.append(vertices[i] + t * (vertices[j] - vertices[i]))
    if len(pts) < 3:
        return []
    pts = np.array(pts)
    t2, t3 = orthonormal_tangents(n / np.linalg.norm(n))
    ctr = pts.mean(axis=0)
    ang = np.arctan2((pts - ctr) @ t3, (pts - ctr) @ t2)
    return [pts[i] for i in np.argsort(ang)]


# ---------------------------------------------------------------------------
# 2D primitives: polygon clipping and polygon/disk intersection area


def clip_polygon_halfplane(poly, a, b):
    """Clip CCW polygon (list of 2-vectors) against {x: a.x + b >= 0}."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        dp = a[0] * p[0] + a[1] * p[1] + b
        dq = a[0] * q[0] + a[1] * q[1] + b
        if dp >= 0:
            out.append(p)
        if (dp > 0 and dq < 0) or (dp < 0 and dq > 0):
            t = dp / (dp - dq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    P = np.asarray(poly, dtype=float)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segment_disk_area(p, q, r):
    # area contribution of directed edge p->q for the intersection of the
    # polygon with the disk of radius r centred at the origin
    rp, rq = np.hypot(*p), np.hypot(*q)
    cross = p[0] * q[1] - p[1] * q[0]
    if rp <= r and rq <= r:
        return 0.5 * cross
    d = (q[0] - p[0], q[1] - p[1])
    dd = d[0] * d[0] + d[1] * d[1]
    if dd < 1e-300:
        return 0.0
    # intersect segment with circle
    pb = p[0] * d[0] + p[1] * d[1]
    disc = pb * pb - dd * (rp * rp - r * r)
    ts = []
    if disc > 0:
        sq = np.sqrt(disc)
        for t in ((-pb - sq) / dd, (-pb + sq) / dd):
            if 0.0 < t < 1.0:
                ts.append(t)
    pts = [np.asarray(p, dtype=float)] + \
          [np.asarray(p, dtype=float) + t * np.asarray(d) for t in sorted(ts)] + \
          [np.asarray(q, dtype=float)]
    area = 0.0
    for u, v in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (u + v)
        if np.hypot(*mid) <= r:
            area += 0.5 * (u[0] * v[1] - u[1] * v[0])
        else:
            a0 = np.arctan2(u[1], u[0])
            a1 = np.arctan2(v[1], v[0])
            da = a1 - a0
            # pick the arc on the same side as the chord direction
            while da <= -np.pi:
                da += 2 * np.pi
            while da > np.pi:
                da -= 2 * np.pi
            area += 0.5 * r * r * da
    return area


def polygon_disk_area(poly, center, r):
    """Exact area of (simple CCW polygon) ∩ (disk of radius r at center)."""
    if len(poly) < 3 or r <= 0:
        return 0.0
    c = np.asarray(center, dtype=float)
    P = [np.asarray(p, dtype=float) - c for p in poly]
    area = 0.0
    m = len(P)
    for i in range(m):
        area += _segment_disk_area(P[i], P[(i + 1) % m], r)
    return abs(area)


def tet_plane_section(p, n, c):
    """Ordered polygon (list of 3-vectors) of {x: n.x = c} ∩ tetrahedron."""
    p = np.asarray(p, dtype=float)
    d = p @ n - c
    pts = []
    for i in range(4):
        if abs(d[i]) < 1e-14:
            pts.append(p[i])
        for j in range(i + 1, 4):
            if d[i] * d[j] < 0:
                t = d[i] / (d[i] - d[j])
                pts.append(p[i] + t * (p[j] - p[i]))
    if len(pts) < 3:
        return []
    pts = np.array(pts)
    # order by angle in the section plane
    t2, t3 = orthonormal_tangents(np.asarray(n, dtype=float) / np.linalg.norm(n))
    ctr = pts.mean(axis=0)
    ang = np.arctan2((pts - ctr) @ t3, (pts - ctr) @ t2)
    return [pts[i] for i in np.argsort(ang)]


# ---------------------------------------------------------------------------
# quadrature rules


def gauss_legendre(n, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


_TRI5_PTS = None


def triangle_rule_deg5():
    """Symmetric 7-point degree-5 rule on the reference triangle, as
    (barycentric coordinates (7,3), weights summing to 1)."""
    global _TRI5_PTS
    if _TRI5_PTS is None:
        a = (6.0 + np.sqrt(15.0)) / 21.0
        b = (6.0 - np.sqrt(15.0)) / 21.0
        wa = (155.0 + np.sqrt(15.0)) / 1200.0
        wb = (155.0 - np.sqrt(15.0)) / 1200.0
        pts = [(1 / 3, 1 / 3, 1 / 3)]
        wts = [9.0 / 40.0]
        for x, w in [(a, wa), (b, wb)]:
            pts += [(x, x, 1 - 2 * x), (x, 1 - 2 * x, x), (1 - 2 * x, x, x)]
            wts += [w, w, w]
        _TRI5_PTS = (np.array(pts), np.array(wts))
    return _TRI5_PTS


_TET_RULE = {}


def tet_rule(n=3):
    """Conical-product Gauss rule on the reference tetrahedron; exact for
    polynomials of degree <= 2n-1, all weights positive.

    Returns (points (n^3,3), weights summing to 1/6).
    """
    if n not in _TET_RULE:
        from scipy.special import roots_jacobi
        x1, w1 = roots_jacobi(n, 2, 0)
        x2, w2 = roots_jacobi(n, 1, 0)
        x3, w3 = np.polynomial.legendre.leggauss(n)
        x1, w1 = 0.5 * (x1 + 1), w1 / 8.0
        x2, w2 = 0.5 * (x2 + 1), w2 / 4.0
        x3, w3 = 0.5 * (x3 + 1), w3 / 2.0
        pts, wts = [], []
        for a, wa in zip(x1, w1):
            for b, wb in zip(x2, w2):
                for c, wc in zip(x3, w3):
                    x = a
                    y = b * (1 - a)
                    z = c * (1 - a) * (1 - b)
                    pts.append((x, y, z))
                    wts.append(wa * wb * wc)
        _TET_RULE[n] = (np.array(pts), np.array(wts))
    return _TET_RULE[n]


def map_tet_rule(p, n=3):
    """Quadrature nodes/weights for an arbitrary tetrahedron (4,3)."""
    ref, w = tet_rule(n)
    p = np.asarray(p, dtype=float)
    T = p[1:] - p[0]
    nodes = p[0] + ref @ T
    vol = abs(np.linalg.det(T))
    return nodes, w * vol


def subdivide_tet(p):
    """Split a tetrahedron into 8 via edge midpoints."""
    p = np.asarray(p, dtype=float)
    m = {(i, j): 0.5 * (p[i] + p[j]) for i in range(4) for j in range(i + 1, 4)}
    v0, v1, v2, v3 = p
    m01, m02, m03 = m[(0, 1)], m[(0, 2)], m[(0, 3)]
    m12, m13, m23 = m[(1, 2)], m[(1, 3)], m[(2, 3)]
    return [
        np.array([v0, m01, m02, m03]),
        np.array([m01, v1, m12, m13]),
        np.array([m02, m12, v2, m23]),
        np.array([m03, m13, m23, v3]),
        np.array([m01, m02, m03, m13]),
        np.array([m01, m02, m12, m13]),
        np.array([m02, m03, m13, m23]),
        np.array([m02, m12, m13, m23]),
    ]


def icosphere(subdiv=3):
    """Vertices of a subdivided icosahedron on the unit sphere.

    subdiv=3 gives 642 vertices.
    """
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    verts = normalize(verts)
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [tuple(v) for v in verts]
    index = {v: i for i, v in enumerate(verts)}

    def midpoint(i, j):
        v = normalize(0.5 * (np.array(verts[i]) + np.array(verts[j])))
        key = tuple(np.round(v, 12))
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    for _ in range(subdiv):
        nf = []
        for i, j, k in faces:
            a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            nf += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = nf
    return normalize(np.array(verts, dtype=float))
