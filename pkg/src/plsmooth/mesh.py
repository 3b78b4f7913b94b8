"""Simplicial complexes carrying piecewise affine homeomorphisms.

A complex stores points and 3-cells; all subsimplices and incidence are
derived.  A PLMap attaches one affine piece (matrix + offset) per cell.
The module validates both structures and extracts the local face/edge/vertex
pictures (canonical frames) that the smoothing construction assumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import geometry as geo
from .errors import (ContinuityError, DegenerateSimplexError, DomainError,
                     IntersectionError, NonInjectiveError, OrientationError,
                     ParseError)


# ---------------------------------------------------------------------------
# complex


class SimplicialComplex:
    """Finite 3D simplicial complex with derived incidence structure."""

    def __init__(self, points, cells, validate=True):
        self.points = np.array(points, dtype=float)
        self.cells = np.array(cells, dtype=int)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ParseError("points must be an (n,3) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 4:
            raise ParseError("cells must be an (m,4) array of point indices")
        self._orient_cells()
        self._build_incidence()
        if validate:
            self.validate()

    # -- construction helpers

    def _orient_cells(self):
        for ci, cell in enumerate(self.cells):
            if geo.tet_volume(self.points[cell]) < 0:
                self.cells[ci, [2, 3]] = self.cells[ci, [3, 2]]

    def _build_incidence(self):
        self.faces = []
        self.edges = []
        self.face_cells = {}
        self.edge_cells = {}
        self.vertex_cells = {}
        for ci, cell in enumerate(self.cells):
            for tri in combinations(sorted(cell), 3):
                self.face_cells.setdefault(tri, []).append(ci)
            for seg in combinations(sorted(cell), 2):
                self.edge_cells.setdefault(seg, []).append(ci)
            for v in cell:
                self.vertex_cells.setdefault(int(v), []).append(ci)
        self.faces = sorted(self.face_cells)
        self.edges = sorted(self.edge_cells)
        self.vertices = sorted(self.vertex_cells)
        self.boundary_faces = {f for f, cs in self.face_cells.items() if len(cs) == 1}
        self.boundary_edges = {e for e in self.edges
                               if any(set(e) <= set(f) for f in self.boundary_faces)}
        self.boundary_vertices = {v for v in self.vertices
                                  if any(v in f for f in self.boundary_faces)}

    # -- queries

    @property
    def n_points(self):
        return len(self.points)

    @property
    def n_cells(self):
        return len(self.cells)

    def cell_points(self, ci):
        return self.points[self.cells[ci]]

    def coordinate_scale(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(max(np.max(hi - lo), 1e-300))

    def simplex_points(self, simplex):
        return self.points[list(simplex)]

    def locate(self, x, tol=1e-10):
        """Cell indices containing points ``x`` (N,3); -1 where outside."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), -1, dtype=int)
        todo = np.arange(len(x))
        for ci in range(self.n_cells):
            if len(todo) == 0:
                break
            inside = geo.points_in_tet(self.cell_points(ci), x[todo], tol=tol)
            out[todo[inside]] = ci
            todo = todo[~inside]
        return out

    def contains(self, x, tol=1e-10):
        return self.locate(x, tol=tol) >= 0

    # -- validation

    def validate(self):
        scale = self.coordinate_scale()
        for ci, cell in enumerate(self.cells):
            p = self.points[cell]
            T = geo.tet_edge_matrix(p)
            edge_len = float(np.max(np.linalg.norm(T, axis=0)))
            det = abs(np.linalg.det(T))
            if det < 1e-10 * edge_len ** 3:
                cond = np.linalg.cond(T)
                raise DegenerateSimplexError(
                    f"cell {ci} is degenerate (condition number {cond:.3e})")
        self._check_intersections()

    def _check_intersections(self):
        # pairwise: the geometric intersection must be the simplex spanned by
        # the shared vertex set (possibly empty)
        boxes = np.array([[self.cell_points(ci).min(axis=0),
                           self.cell_points(ci).max(axis=0)]
                          for ci in range(self.n_cells)])
        scale = self.coordinate_scale()
        tol = 1e-10 * scale
        for a in range(self.n_cells):
            for b in range(a + 1, self.n_cells):
                if np.any(boxes[a, 0] > boxes[b, 1] + tol) or \
                   np.any(boxes[b, 0] > boxes[a, 1] + tol):
                    continue
                vol, witness = geo.convex_interior_overlap(
                    self.cell_points(a), self.cell_points(b), tol=tol)
                if vol > tol ** 3:
                    raise IntersectionError(
                        f"cells {a} and {b} overlap with interior volume {vol:.3e}")
                shared = sorted(set(self.cells[a]) & set(self.cells[b]))
                if not self._touching_is_common_subsimplex(a, b, shared, tol):
                    raise IntersectionError(
                        f"cells {a} and {b} intersect in a set that is not a "
                        f"common subsimplex (shared vertices {shared})")

    def _touching_is_common_subsimplex(self, a, b, shared, tol):
        pa, pb = self.cell_points(a), self.cell_points(b)
        span = self.points[shared] if shared else np.zeros((0, 3))
        # sample each simplex of cell a of every dimension and check that any
        # point lying in cell b is within the shared subsimplex
        for k in (1, 2, 3, 4):
            for sub in combinations(range(4), k):
                verts = pa[list(sub)]
                samples = _simplex_samples(verts)
                for s in samples:
                    if geo.dist_point_simplex(s, pb) < tol:
                        if len(span) == 0 or geo.dist_point_simplex(s, span) > tol:
                            return False
        return True

    # -- serialization

    def to_dict(self):
        return {"points": self.points.tolist(),
                "cells": self.cells.tolist()}


def _simplex_samples(verts, n=4):
    """Deterministic barycentric sample points of a simplex."""
    k = len(verts)
    if k == 1:
        return [verts[0]]
    out = []
    grid = np.linspace(0.0, 1.0, n + 2)[1:-1]
    if k == 2:
        for t in grid:
            out.append((1 - t) * verts[0] + t * verts[1])
        out += [verts[0], verts[1]]
    else:
        rng = np.random.default_rng(0)
        W = rng.dirichlet(np.ones(k), size=3 * n)
        out += list(W @ verts)
        out += list(verts)
    return out


# ---------------------------------------------------------------------------
# piecewise affine maps


class PLMap:
    """Per-cell affine pieces on a validated complex."""

    def __init__(self, complex, matrices, offsets, reflected=False):
        self.complex = complex
        self.matrices = np.array(matrices, dtype=float)
        self.offsets = np.array(offsets, dtype=float)
        self.reflected = bool(reflected)
        if self.matrices.shape != (complex.n_cells, 3, 3):
            raise ParseError("need one 3x3 matrix per cell")
        if self.offsets.shape != (complex.n_cells, 3):
            raise ParseError("need one offset per cell")

    def piece(self, ci):
        return self.matrices[ci], self.offsets[ci]

    def apply_piece(self, ci, x):
        return np.atleast_2d(x) @ self.matrices[ci].T + self.offsets[ci]

    def __call__(self, x, tol=1e-10):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ci = self.complex.locate(x, tol=tol)
        if np.any(ci < 0):
            bad = x[ci < 0][0]
            raise DomainError(f"point {bad} lies outside the complex")
        out = np.einsum("nij,nj->ni", self.matrices[ci], x) + self.offsets[ci]
        return out

    def derivative(self, x, tol=1e-10):
        ci = self.complex.locate(x, tol=tol)
        return self.matrices[ci]

    def image_complex(self):
        """The image mesh: same cells over the mapped vertex positions."""
        imgpts = np.zeros_like(self.complex.points)
        counts = np.zeros(len(imgpts))
        for ci, cell in enumerate(self.complex.cells):
            imgpts[cell] += self.apply_piece(ci, self.complex.points[cell])
            counts[cell] += 1
        imgpts /= counts[:, None]
        return SimplicialComplex(imgpts, self.complex.cells, validate=False)

    def inverse_pl(self, y, tol=1e-9, extend=False):
        """Piecewise affine inverse by point location in the image cells.

        With ``extend`` image points that fall (slightly) outside the image
        mesh use the least-violated cell instead of raising."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        img = self._image_cached()
        ci = img.locate(y, tol=tol)
        if np.any(ci < 0):
            if not extend:
                raise NonInjectiveError("point outside the image mesh")
            for k in np.where(ci < 0)[0]:
                best, bestval = 0, np.inf
                for c in range(img.n_cells):
                    lam = geo.barycentric(img.cell_points(c), y[k])
                    v = float(-np.min(lam))
                    if v < bestval:
                        best, bestval = c, v
                ci[k] = best
        M = self.matrices[ci]
        c = self.offsets[ci]
        return np.linalg.solve(M, (y - c)[..., None])[..., 0], ci

    def _image_cached(self):
        if not hasattr(self, "_image"):
            self._image = self.image_complex()
        return self._image

    def to_dict(self):
        d = self.complex.to_dict()
        d["pieces"] = [{"matrix": self.matrices[i].tolist(),
                        "offset": self.offsets[i].tolist()}
                       for i in range(self.complex.n_cells)]
        return d


def pl_map_from_vertex_images(complex, vertex_images):
    """Build the PL map sending each mesh vertex to its image; the pieces are
    the unique affine maps interpolating the four vertex images per cell."""
    vertex_images = np.asarray(vertex_images, dtype=float)
    mats, offs = [], []
    for cell in complex.cells:
        P = complex.points[cell]
        Q = vertex_images[cell]
        T = geo.tet_edge_matrix(P)
        S = (Q[1:] - Q[0]).T
        M = S @ np.linalg.inv(T)
        mats.append(M)
        offs.append(Q[0] - M @ P[0])
    return PLMap(complex, mats, offs)


def normalize_orientation(plmap):
    """If every piece is sense-reversing, pre-compose with the reflection
    (x1,x2,x3) -> (-x1,x2,x3) and record it."""
    dets = np.linalg.det(plmap.matrices)
    if np.all(dets > 0):
        return plmap
    if np.all(dets < 0):
        rho = np.diag([-1.0, 1.0, 1.0])
        pts = plmap.complex.points @ rho
        cx = SimplicialComplex(pts, plmap.complex.cells, validate=False)
        mats = plmap.matrices @ rho
        return PLMap(cx, mats, plmap.offsets, reflected=True)
    raise OrientationError("pieces mix orientation signs")


# ---------------------------------------------------------------------------
# validation report


@dataclass
class ValidationReport:
    orientation: int
    continuity_residual: float
    min_abs_det: float
    injective: bool
    witness: np.ndarray | None = None
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return self.injective and self.orientation != 0


def validate_pl_homeo(plmap, tol_factor=1e-12):
    """Continuity, orientation, and global injectivity of a PL map.

    Injectivity is audited on the image cells: bounding-box pruning then an
    exact interior-overlap test on surviving pairs.
    """
    cx = plmap.complex
    scale = cx.coordinate_scale()
    tol = tol_factor * scale

    dets = np.linalg.det(plmap.matrices)
    if np.all(dets > 0):
        orient = 1
    elif np.all(dets < 0):
        orient = -1
    else:
        bad = int(np.argmin(np.sign(dets) == np.sign(np.median(dets))))
        raise OrientationError(
            f"determinant signs are mixed (first offending cell {bad})")

    # continuity across every shared subsimplex vertex
    resid = 0.0
    for f, cs in cx.face_cells.items():
        for a in range(len(cs)):
            for b in range(a + 1, len(cs)):
                pa = plmap.apply_piece(cs[a], cx.points[list(f)])
                pb = plmap.apply_piece(cs[b], cx.points[list(f)])
                resid = max(resid, float(np.max(np.abs(pa - pb))))
    for e, cs in cx.edge_cells.items():
        for a in range(len(cs)):
            for b in range(a + 1, len(cs)):
                pa = plmap.apply_piece(cs[a], cx.points[list(e)])
                pb = plmap.apply_piece(cs[b], cx.points[list(e)])
                resid = max(resid, float(np.max(np.abs(pa - pb))))
    if resid > tol:
        raise ContinuityError(
            f"pieces disagree on a shared subsimplex (residual {resid:.3e})")

    # injectivity of the image cells
    img = plmap.image_complex()
    boxes = np.array([[img.cell_points(ci).min(axis=0),
                       img.cell_points(ci).max(axis=0)]
                      for ci in range(img.n_cells)])
    witness = None
    injective = True
    gtol = 1e-10 * scale
    for a in range(img.n_cells):
        for b in range(a + 1, img.n_cells):
            if np.any(boxes[a, 0] > boxes[b, 1] + gtol) or \
               np.any(boxes[b, 0] > boxes[a, 1] + gtol):
                continue
            vol, w = geo.convex_interior_overlap(
                img.cell_points(a), img.cell_points(b), tol=gtol)
            if vol > gtol ** 3:
                injective = False
                witness = np.asarray(w)
                break
        if not injective:
            break
    rep = ValidationReport(orientation=orient,
                           continuity_residual=resid,
                           min_abs_det=float(np.min(np.abs(dets))),
                           injective=injective,
                           witness=witness)
    if not injective:
        raise NonInjectiveError(
            f"image cells overlap near {witness}; map is not injective")
    return rep


# ---------------------------------------------------------------------------
# local pictures: face pairs, edge fans, vertex stars


@dataclass
class FacePair:
    face: tuple
    cell_neg: int
    cell_pos: int
    frame: geo.Frame            # row 0 = oriented normal toward the pos side
    M_neg: np.ndarray
    c_neg: np.ndarray
    M_pos: np.ndarray
    c_pos: np.ndarray
    trivial: bool
    boundary: bool

    @property
    def normal(self):
        return self.frame.R[0]


@dataclass
class EdgeFan:
    edge: tuple
    V0: np.ndarray
    direction: np.ndarray       # unit edge direction
    length: float
    Q: np.ndarray               # domain rotation, row 2 = direction
    S: np.ndarray               # image rotation with S (M e) = (0,0,lam)
    b_img: np.ndarray           # image of V0
    lam: float
    angles: np.ndarray          # sorted ray angles in [-pi, pi)
    ray_faces: list             # face tuple per ray
    sector_cells: list          # cell index per sector [theta_i, theta_{i+1})
    pieces: np.ndarray          # framed linear pieces, (m,3,3), per sector
    min_gap: float              # min over |theta_i - theta_j + k*pi|, capped pi/8
    trivial: bool
    boundary: bool
    complete_start: bool        # all cells at the start vertex are in the fan
    complete_end: bool

    @property
    def m(self):
        return len(self.angles)

    def to_frame(self, x):
        return (np.atleast_2d(x) - self.V0) @ self.Q.T

    def from_frame(self, y):
        return np.atleast_2d(y) @ self.Q + self.V0

    def image_to_world(self, z):
        return np.atleast_2d(z) @ self.S + self.b_img

    def sector_of(self, theta):
        """Sector index i with angles[i] <= theta < angles[i+1] (cyclic)."""
        th = np.atleast_1d(theta)
        idx = np.searchsorted(self.angles, th, side="right") - 1
        idx[idx < 0] = self.m - 1
        return idx


@dataclass
class VertexStar:
    vertex: int
    V: np.ndarray
    cells: list
    faces: list
    edges: list
    R: float
    boundary: bool


def face_pairs(plmap, widths=None):
    """One FacePair per interior face, with the oriented frame convention:
    the normal points toward the piece with the larger normal stretch."""
    cx = plmap.complex
    out = []
    for f in cx.faces:
        cs = cx.face_cells[f]
        if len(cs) != 2:
            continue
        p = cx.points[list(f)]
        n = np.cross(p[1] - p[0], p[2] - p[0])
        n = n / np.linalg.norm(n)
        ca, cb = cs
        centa = cx.cell_points(ca).mean(axis=0)
        if np.dot(centa - p[0], n) > 0:
            ca, cb = cb, ca
        # now ca sits on the negative side of n
        Ma, ca_off = plmap.piece(ca)
        Mb, cb_off = plmap.piece(cb)
        trivial = np.allclose(Ma, Mb, atol=1e-14) and \
            np.allclose(ca_off, cb_off, atol=1e-14)
        # orient n toward the larger normal stretch
        v2 = p[1] - p[0]
        v3 = p[2] - p[0]
        nu = np.cross(Ma @ v2, Ma @ v3)
        nun = np.linalg.norm(nu)
        if nun > 0:
            nu = nu / nun
            sa = float(nu @ (Ma @ n))
            sb = float(nu @ (Mb @ n))
            if sa < 0:
                sa, sb = -sa, -sb
            if not trivial and sb < sa:
                n = -n
                ca, cb = cb, ca
                Ma, Mb = Mb, Ma
                ca_off, cb_off = cb_off, ca_off
        t2, t3 = geo.orthonormal_tangents(n)
        R = np.vstack([n, t2, t3])
        if np.linalg.det(R) < 0:
            R = np.vstack([n, t3, t2])
        frame = geo.Frame(origin=p.mean(axis=0), R=R)
        out.append(FacePair(face=f, cell_neg=ca, cell_pos=cb, frame=frame,
                            M_neg=Ma, c_neg=ca_off, M_pos=Mb, c_pos=cb_off,
                            trivial=trivial, boundary=f in cx.boundary_faces))
    return out


def edge_fans(plmap):
    """One EdgeFan per interior edge, in the canonical cylindrical frame."""
    cx = plmap.complex
    out = []
    for e in cx.edges:
        if e in cx.boundary_edges:
            continue
        cells = cx.edge_cells[e]
        va, vb = cx.points[e[0]], cx.points[e[1]]
        direction = vb - va
        L = float(np.linalg.norm(direction))
        direction = direction / L
        Qz = geo.rotation_to_e3(direction)  # world -> frame rotation
        # faces through the edge
        rays = []
        for f in cx.faces:
            if set(e) <= set(f):
                other = [v for v in f if v not in e][0]
                y = Qz @ (cx.points[other] - va)
                rays.append((float(np.arctan2(y[1], y[0])), f))
        rays.sort()
        angles = np.array([r[0] for r in rays])
        ray_faces = [r[1] for r in rays]
        m = len(angles)
        # assign sectors to cells by the angle of the off-edge centroid
        sector_cells = [None] * m
        for ci in cells:
            others = [v for v in cx.cells[ci] if v not in e]
            y = Qz @ (cx.points[others].mean(axis=0) - va)
            th = float(np.arctan2(y[1], y[0]))
            i = int(np.searchsorted(angles, th, side="right") - 1)
            if i < 0:
                i = m - 1
            sector_cells[i] = ci
        if any(s is None for s in sector_cells):
            continue  # non-manifold fan, unsupported
        # image normalization: common edge-image vector
        M0, c0 = plmap.piece(sector_cells[0])
        u = M0 @ (vb - va)
        lam = float(np.linalg.norm(u)) / L
        S = geo.rotation_to_e3(u)
        b_img = M0 @ va + c0
        pieces = np.array([S @ plmap.matrices[ci] @ Qz.T for ci in sector_cells])
        trivial = all(np.allclose(pieces[i], pieces[0], atol=1e-14)
                      for i in range(m))
        gaps = []
        for i in range(m):
            for j in range(i + 1, m):
                d = abs(angles[i] - angles[j])
                d = min(d % np.pi, np.pi - (d % np.pi)) if d % np.pi else 0.0
                gaps.append(d if d > 1e-12 else np.pi)
        min_gap = min(gaps + [np.pi / 8.0])
        completes = []
        for vid in e:
            star = set(cx.vertex_cells[vid])
            completes.append(star <= set(cells))
        out.append(EdgeFan(edge=e, V0=va, direction=direction, length=L,
                           Q=Qz, S=S, b_img=b_img, lam=lam, angles=angles,
                           ray_faces=ray_faces, sector_cells=sector_cells,
                           pieces=pieces, min_gap=min_gap, trivial=trivial,
                           boundary=False,
                           complete_start=completes[0],
                           complete_end=completes[1]))
    return out


def vertex_stars(plmap):
    """One VertexStar per interior vertex, with the outer radius R such that
    B(V, 2R) lies inside the star."""
    cx = plmap.complex
    out = []
    for v in cx.vertices:
        if v in cx.boundary_vertices:
            continue
        V = cx.points[v]
        cells = cx.vertex_cells[v]
        clearance = np.inf
        for ci in range(cx.n_cells):
            for k in (1, 2, 3):
                for sub in combinations(sorted(cx.cells[ci]), k):
                    if v in sub:
                        continue
                    clearance = min(clearance,
                                    geo.dist_point_simplex(V, cx.points[list(sub)]))
        R = 0.4 * clearance
        faces = [f for f in cx.faces if v in f and f not in cx.boundary_faces]
        edges = [e for e in cx.edges if v in e and e not in cx.boundary_edges]
        out.append(VertexStar(vertex=v, V=V, cells=cells, faces=faces,
                              edges=edges, R=R, boundary=False))
    return out


# ---------------------------------------------------------------------------
# document I/O


def load_complex(source):
    """Load a complex (and pieces, if present) from the mesh document.

    ``source`` may be a path, a JSON string, or a dict.  Returns a
    SimplicialComplex, or a PLMap when the document contains pieces.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = None
        try:
            with open(source) as fh:
                text = fh.read()
        except (OSError, TypeError):
            text = source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"mesh document is not valid JSON: {exc}") from exc
    if "points" not in doc or "cells" not in doc:
        raise ParseError("mesh document must contain 'points' and 'cells'")
    cx = SimplicialComplex(doc["points"], doc["cells"])
    if "pieces" in doc:
        try:
            mats = [p["matrix"] for p in doc["pieces"]]
            offs = [p["offset"] for p in doc["pieces"]]
        except (KeyError, TypeError) as exc:
            raise ParseError("each piece needs 'matrix' and 'offset'") from exc
        return PLMap(cx, mats, offs)
    return cx


def save_document(obj, path=None):
    """Serialize a complex or map; round-trips coordinates exactly."""
    doc = obj.to_dict()
    text = json.dumps(doc, indent=1)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
