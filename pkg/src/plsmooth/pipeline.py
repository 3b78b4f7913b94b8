"""Global smoothing pipeline.

choose_params picks per-vertex ball radii R_k, per-edge cylinder radii r_i,
and per-face slab widths w_j so that every local construction is certified
with margin; assemble builds the global smoothed map from vertex, edge, and
face patches over the untouched affine bulk; lambda_sweep scales all
parameters by lambda and tabulates the convergence quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import root as sp_root
from scipy.spatial import ConvexHull

from . import geometry as geo
from .blend import (DEFAULT_PROFILE, ConstantWidth, FaceBlend,
                    face_blend, face_blend_jacobian, sigma_for_face)
from .edge import EdgeSmoother
from .errors import ConstructionError, DomainError, ParameterError
from .mesh import edge_fans, face_pairs, validate_pl_homeo, vertex_stars
from .vertex import VertexSmoother


# ---------------------------------------------------------------------------
# parameters


@dataclass
class SmoothingParams:
    """Baseline (lambda=1) smoothing radii/widths; ``scaled`` applies the
    global shrinking factor."""

    R: dict
    r: dict
    w: dict
    lam: float = 1.0

    def scaled(self, lam):
        if not 0 < lam <= 1:
            raise ParameterError("lambda must be in (0, 1]")
        s = lam / self.lam
        return SmoothingParams(R={k: v * s for k, v in self.R.items()},
                               r={k: v * s for k, v in self.r.items()},
                               w={k: v * s for k, v in self.w.items()},
                               lam=lam)


def _star_trivial(plmap, star):
    M0 = plmap.matrices[star.cells[0]]
    c0 = plmap.offsets[star.cells[0]]
    return all(np.allclose(plmap.matrices[c], M0, atol=1e-14)
               and np.allclose(plmap.offsets[c], c0, atol=1e-14)
               for c in star.cells)


def choose_params(plmap, margin=0.5, validate=True):
    """Certified baseline parameters; every bound is then halved once more
    (``margin``) so the construction holds with 2x headroom."""
    if validate:
        validate_pl_homeo(plmap)
    cx = plmap.complex
    pairs = face_pairs(plmap)
    fans = edge_fans(plmap)
    stars = vertex_stars(plmap)

    R = {}
    for st in stars:
        if _star_trivial(plmap, st):
            continue
        R[st.vertex] = margin * st.R

    r = {}
    fan_by_edge = {}
    for fan in fans:
        if fan.trivial:
            continue
        fan_by_edge[fan.edge] = fan
        e = fan.edge
        a, b = cx.points[e[0]], cx.points[e[1]]
        cand = [0.2 * fan.length]
        ends = ((e[0], fan.complete_start), (e[1], fan.complete_end))
        for vid, complete in ends:
            if vid in R:
                cand.append(0.2 * R[vid])
            elif complete:
                for f in cx.faces:
                    if vid in f and f not in cx.boundary_faces \
                            and not set(e) <= set(f):
                        raise ConstructionError(
                            f"edge {e}: complete endpoint {vid} has an interior "
                            f"face {f} not containing the edge; unsmoothable")
            else:
                raise ConstructionError(
                    f"edge {e}: endpoint {vid} is neither an interior vertex "
                    f"nor axially complete; unsmoothable")
        # clearance to simplices sharing no vertex with the edge
        clear = np.inf
        for f in cx.faces:
            if set(e) & set(f):
                continue
            clear = min(clear, geo.dist_segment_simplex(
                a, b, cx.points[list(f)]))
        if np.isfinite(clear):
            cand.append(0.25 * clear)
        # faces of fan cells meeting the segment only at a ball endpoint
        for vid, complete in ends:
            if complete:
                continue
            z0 = 0.9 * R[vid]
            sgn = 1.0 if vid == e[0] else -1.0
            base = a if vid == e[0] else b
            zs = np.linspace(z0, 0.6 * fan.length, 24)
            seg = base + sgn * zs[:, None] * \
                ((b - a) / fan.length)[None, :]
            for ci in fan.sector_cells:
                for tri in combinations(sorted(cx.cells[ci]), 3):
                    if set(e) <= set(tri) or vid not in tri:
                        continue
                    d = min(geo.dist_point_simplex(p, cx.points[list(tri)])
                            for p in seg)
                    cand.append(0.45 * d)
        r[e] = margin * float(min(cand))

    w = {}
    pair_by_face = {pr.face: pr for pr in pairs}
    for pr in pairs:
        if pr.trivial:
            continue
        f = pr.face
        cand = []
        for e2 in combinations(sorted(f), 2):
            if e2 in r:
                fan = fan_by_edge[e2]
                cand.append(0.45 * (r[e2] / 4.0) * np.tan(fan.min_gap / 8.0))
                cand.append(0.2 * r[e2])
        tri = cx.points[list(f)]
        area = geo.triangle_area(tri)
        for ci in (pr.cell_neg, pr.cell_pos):
            vol = abs(geo.tet_volume(cx.cell_points(ci)))
            cand.append(0.2 * 3.0 * vol / area)
        # separation from unrelated nontrivial faces
        for pr2 in pairs:
            if pr2.trivial or set(pr2.face) & set(f):
                continue
            bary = _triangle_grid(tri, 6)
            d = min(geo.dist_point_simplex(p, cx.points[list(pr2.face)])
                    for p in bary)
            cand.append(0.4 * d)
        w[f] = margin * float(min(cand))
    return SmoothingParams(R=R, r=r, w=w, lam=1.0)


def _triangle_grid(tri, n):
    pts = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            pts.append((i * tri[0] + j * tri[1] + k * tri[2]) / n)
    return np.array(pts)


# ---------------------------------------------------------------------------
# patches


class FacePatch:
    def __init__(self, pair, width, profile=DEFAULT_PROFILE, tri=None):
        self.pair = pair
        self.width = float(width)
        self.blend = FaceBlend(frame_origin=pair.frame.origin,
                               frame_R=pair.frame.R,
                               M_neg=pair.M_neg, c_neg=pair.c_neg,
                               M_pos=pair.M_pos, c_pos=pair.c_pos,
                               width=ConstantWidth(width), profile=profile)
        self.sigma, self.floor = sigma_for_face(self.blend)
        self.tri = np.asarray(tri, dtype=float)
        n, t2, t3 = pair.frame.R
        self.n = n
        o = pair.frame.origin
        T2 = np.vstack([t2, t3]).T
        self.tri2 = (self.tri - o) @ T2
        self._T2 = T2
        self._o = o
        A = np.column_stack([self.tri2[1] - self.tri2[0],
                             self.tri2[2] - self.tri2[0]])
        self._Ainv = np.linalg.inv(A)

    def mask(self, x, tol=1e-12):
        x = np.atleast_2d(x)
        s = (x - self._o) @ self.n
        m = (s > 0.0) & (s < self.width)
        if not np.any(m):
            return m
        p2 = (x[m] - self._o) @ self._T2
        lam = (p2 - self.tri2[0]) @ self._Ainv.T
        inside = (lam[:, 0] >= -tol) & (lam[:, 1] >= -tol) & \
                 (lam.sum(axis=1) <= 1.0 + tol)
        mm = m.copy()
        mm[np.where(m)[0][~inside]] = False
        return mm

    def evaluate(self, x):
        return face_blend(self.blend, x)

    def jacobian(self, x):
        return face_blend_jacobian(self.blend, x)


class EdgePatch:
    def __init__(self, fan, widths, radius, profile=DEFAULT_PROFILE):
        self.fan = fan
        self.r = float(radius)
        self.L = fan.length
        self.smoother = EdgeSmoother(fan, widths, radius, profile=profile)

    def mask(self, x):
        y = self.fan.to_frame(x)
        t = np.hypot(y[:, 0], y[:, 1])
        return (t < self.r) & (y[:, 2] >= 0.0) & (y[:, 2] <= self.L)

    def evaluate(self, x):
        y = self.fan.to_frame(x)
        return self.fan.image_to_world(self.smoother.evaluate(y))

    def jacobian(self, x):
        y = self.fan.to_frame(x)
        J = self.smoother.jacobian(y)
        return np.einsum("ij,njk,kl->nil", self.fan.S.T, J, self.fan.Q)


class VertexPatch:
    def __init__(self, star, radius, stage1, plmap):
        self.V = star.V
        self.R = float(radius)
        self.star = star
        ci = star.cells[0]
        self.fV = (plmap.matrices[ci] @ self.V) + plmap.offsets[ci]
        V, fV = self.V, self.fV

        def hat_g(xrel):
            return stage1.evaluate(np.atleast_2d(xrel) + V) - fV

        def hat_g_jac(xrel):
            return stage1.derivative(np.atleast_2d(xrel) + V)

        self.smoother = VertexSmoother(hat_g, hat_g_jac, self.R, star=star)

    def mask(self, x):
        return np.linalg.norm(np.atleast_2d(x) - self.V, axis=-1) < self.R

    def evaluate(self, x):
        return self.fV + self.smoother.evaluate(np.atleast_2d(x) - self.V)

    def jacobian(self, x):
        return self.smoother.jacobian(np.atleast_2d(x) - self.V)


# ---------------------------------------------------------------------------
# the assembled map


class _Stage1:
    """Dispatch over edge/face patches and bulk only (no vertex balls);
    used to feed hat_g to the vertex smoothers."""

    def __init__(self, owner):
        self.owner = owner

    def evaluate(self, x):
        return self.owner._dispatch(x, use_vertex=False, jac=False)

    def derivative(self, x):
        return self.owner._dispatch(x, use_vertex=False, jac=True)


class SmoothedMap:
    def __init__(self, plmap, params, face_patches, edge_patches,
                 vertex_patch_builders):
        self.plmap = plmap
        self.params = params
        self.face_patches = face_patches
        self.edge_patches = edge_patches
        self.scale = plmap.complex.coordinate_scale()
        self.stage1 = _Stage1(self)
        self.vertex_patches = [build(self.stage1)
                               for build in vertex_patch_builders]
        self._dq = None

    # -- dispatch

    def _bulk_cells(self, x, extend):
        ci = self.plmap.complex.locate(x, tol=1e-10)
        miss = ci < 0
        if np.any(miss):
            if not extend:
                raise DomainError(
                    f"point {x[miss][0]} lies outside the complex")
            cx = self.plmap.complex
            for k in np.where(miss)[0]:
                best, bestval = 0, np.inf
                for c in range(cx.n_cells):
                    lam = geo.barycentric(cx.cell_points(c), x[k])
                    v = float(-np.min(lam))
                    if v < bestval:
                        best, bestval = c, v
                ci[k] = best
        return ci

    def _dispatch(self, x, use_vertex=True, jac=False, extend=False):
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((len(x), 3, 3)) if jac else np.empty_like(x)
        todo = np.ones(len(x), dtype=bool)
        patch_sets = []
        if use_vertex:
            patch_sets.append(self.vertex_patches)
        patch_sets.append(self.edge_patches)
        patch_sets.append(self.face_patches)
        for patches in patch_sets:
            for p in patches:
                if not np.any(todo):
                    break
                m = np.zeros(len(x), dtype=bool)
                m[todo] = p.mask(x[todo])
                if np.any(m):
                    out[m] = p.jacobian(x[m]) if jac else p.evaluate(x[m])
                    todo &= ~m
        if np.any(todo):
            ci = self._bulk_cells(x[todo], extend)
            if jac:
                out[todo] = self.plmap.matrices[ci]
            else:
                out[todo] = np.einsum("nij,nj->ni", self.plmap.matrices[ci],
                                      x[todo]) + self.plmap.offsets[ci]
        return out[0] if single else out

    def evaluate(self, x, extend=False):
        return self._dispatch(x, jac=False, extend=extend)

    def __call__(self, x):
        return self.evaluate(x)

    def derivative(self, x, extend=False):
        return self._dispatch(x, jac=True, extend=extend)

    def contains(self, x, tol=1e-10):
        return self.plmap.complex.contains(x, tol=tol)

    # -- inverse

    def inverse(self, y, seed=None, tol_factor=1e-13, max_iter=60):
        single = np.asarray(y, dtype=float).ndim == 1
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if seed is None:
            x, _ = self.plmap.inverse_pl(y, tol=1e-7, extend=True)
        else:
            x = np.atleast_2d(np.asarray(seed, dtype=float)).copy()
            x = np.broadcast_to(x, y.shape).copy()
        tol = tol_factor * self.scale
        res = self.evaluate(x, extend=True) - y
        rn = np.linalg.norm(res, axis=-1)
        for _ in range(max_iter):
            act = rn > tol
            if not np.any(act):
                break
            J = self.derivative(x[act], extend=True)
            step = np.linalg.solve(J, res[act][..., None])[..., 0]
            alpha = np.ones(int(act.sum()))
            xa = x[act]
            ra = rn[act]
            for _h in range(6):
                trial = xa - alpha[:, None] * step
                tres = self.evaluate(trial, extend=True) - y[act]
                tn = np.linalg.norm(tres, axis=-1)
                worse = tn > ra * (1.0 - 1e-4 * alpha)
                if not np.any(worse):
                    break
                alpha[worse] *= 0.5
            x[act] = xa - alpha[:, None] * step
            res[act] = self.evaluate(x[act], extend=True) - y[act]
            rn[act] = np.linalg.norm(res[act], axis=-1)
        # Powell hybrid fallback for points where the damped Newton cycles
        # (the untwist stage has badly conditioned Jacobians)
        for k in np.where(rn > tol)[0]:
            sol = sp_root(
                lambda xs: self.evaluate(xs, extend=True) - y[k],
                x[k],
                jac=lambda xs: self.derivative(np.atleast_2d(xs),
                                               extend=True)[0],
                method="hybr", tol=1e-14)
            if np.linalg.norm(sol.fun) < rn[k]:
                x[k] = sol.x
                rn[k] = np.linalg.norm(sol.fun)
        if np.any(rn > 100 * tol):
            k = int(np.argmax(rn))
            raise ConstructionError(
                f"inverse Newton stagnated at residual {rn[k]:.3e} for {y[k]}")
        return x[0] if single else x

    # -- difference-set geometry

    def _slab_polytope(self, fp):
        cx = self.plmap.complex
        H = geo.halfspaces_of_tet(cx.cell_points(fp.pair.cell_pos))
        n, o, w = fp.n, fp.pair.frame.origin, fp.width
        rows = np.array([[-n[0], -n[1], -n[2], float(n @ o)],
                         [n[0], n[1], n[2], float(-n @ o - w)]])
        return geo.halfspace_polytope(np.vstack([H, rows]))

    def _in_cyl_or_ball(self, pts):
        m = np.zeros(len(pts), dtype=bool)
        for vp in self.vertex_patches:
            m |= vp.mask(pts)
        for ep in self.edge_patches:
            m |= ep.mask(pts)
        return m

    def difference_quadrature(self):
        """Fixed quadrature nodes and weights covering {g != f}; nodes
        handed to other patches by precedence carry zero weight."""
        if self._dq is not None:
            return self._dq
        pts_all, wts_all = [], []
        for fp in self.face_patches:
            verts = self._slab_polytope(fp)
            for tet in geo.polytope_tets(verts):
                for child in geo.subdivide_tet(tet):
                    p, wq = geo.map_tet_rule(child, 3)
                    pts_all.append(p)
                    wts_all.append(wq)
        if pts_all:
            pts = np.vstack(pts_all)
            wts = np.concatenate(wts_all)
            wts[self._in_cyl_or_ball(pts)] = 0.0
            pts_all, wts_all = [pts], [wts]
        for ep in self.edge_patches:
            p, wq = self._cylinder_nodes(ep)
            keep = ~self._ball_mask(p)
            wq = np.where(keep & self.contains(p), wq, 0.0)
            pts_all.append(p)
            wts_all.append(wq)
        for vp in self.vertex_patches:
            p, wq = self._ball_nodes(vp)
            pts_all.append(p)
            wts_all.append(wq)
        if not pts_all:
            self._dq = (np.zeros((0, 3)), np.zeros(0))
        else:
            self._dq = (np.vstack(pts_all), np.concatenate(wts_all))
        return self._dq

    def _ball_mask(self, pts):
        m = np.zeros(len(pts), dtype=bool)
        for vp in self.vertex_patches:
            m |= vp.mask(pts)
        return m

    def _cylinder_nodes(self, ep, n_t=5, n_th=14, n_z=16):
        r, L, fan = ep.r, ep.L, ep.fan
        tb = np.array([1e-9, 0.4, 7.0 / 15.0, 8.0 / 15.0, 0.6, 0.8, 1.0]) * r
        tn, tw = _panel_gauss(tb, n_t)
        ang = np.append(fan.angles, fan.angles[0] + 2 * np.pi)
        thn, thw = _panel_gauss(ang, n_th)
        zn, zw = geo.gauss_legendre(n_z, 0.0, L)
        T, TH, Z = np.meshgrid(tn, thn, zn, indexing="ij")
        W = tw[:, None, None] * thw[None, :, None] * zw[None, None, :] * T
        y = np.stack([T * np.cos(TH), T * np.sin(TH), Z], axis=-1).reshape(-1, 3)
        world = y @ fan.Q + fan.V0
        return world, W.ravel()

    def _ball_nodes(self, vp, n_r=5, n_pol=8, n_az=16):
        R = vp.R
        rb = np.array([1e-9, 0.5, 0.75, 1.0]) * R
        rn, rw = _panel_gauss(rb, n_r)
        mu, mw = np.polynomial.legendre.leggauss(n_pol)
        phi = np.arccos(mu)
        psi = np.linspace(0, 2 * np.pi, n_az, endpoint=False)
        RR, PH, PS = np.meshgrid(rn, phi, psi, indexing="ij")
        W = rw[:, None, None] * mw[None, :, None] * (2 * np.pi / n_az) * RR ** 2
        pts = np.stack([RR * np.sin(PH) * np.cos(PS),
                        RR * np.sin(PH) * np.sin(PS),
                        RR * np.cos(PH)], axis=-1).reshape(-1, 3)
        return pts + vp.V, W.ravel()

    def volume_difference_set(self, n_gauss=12, n_panels=8):
        """Measure of E_lambda from exact slab clipping, sectioned overlap
        integrals for slab/cylinder and cylinder/domain, and closed forms
        for the (concentric) cylinder/ball overlaps."""
        cx = self.plmap.complex
        total = 0.0
        for fp in self.face_patches:
            verts = self._slab_polytope(fp)
            if len(verts) < 4:
                continue
            v_slab = ConvexHull(verts).volume
            for ep in self.edge_patches:
                if not set(ep.fan.edge) <= set(fp.pair.face):
                    continue
                v_slab -= self._slab_cyl_overlap(verts, ep, n_gauss, n_panels)
            for vp in self.vertex_patches:
                if vp.star.vertex not in fp.pair.face:
                    continue
                v_slab -= self._slab_ball_overlap(fp, verts, vp, n_gauss)
            total += max(v_slab, 0.0)
        for ep in self.edge_patches:
            v_cyl = self._cyl_domain_volume(ep, n_gauss, n_panels)
            for vid in ep.fan.edge:
                for vp in self.vertex_patches:
                    if vp.star.vertex == vid:
                        v_cyl -= _concentric_cyl_ball(ep.r, vp.R)
            total += max(v_cyl, 0.0)
        for vp in self.vertex_patches:
            total += 4.0 / 3.0 * np.pi * vp.R ** 3
        return float(total)

    def _slab_cyl_overlap(self, verts, ep, n_gauss, n_panels):
        fan = ep.fan
        d = fan.direction
        zb = np.linspace(0.0, ep.L, n_panels + 1)
        zn, zw = _panel_gauss(zb, n_gauss)
        acc = 0.0
        for z, wz in zip(zn, zw):
            poly = geo.polytope_plane_section(verts, d, float(d @ fan.V0) + z)
            if len(poly) < 3:
                continue
            poly2 = [((p - fan.V0) @ fan.Q.T)[:2] for p in poly]
            acc += wz * geo.polygon_disk_area(poly2, (0.0, 0.0), ep.r)
        return acc

    def _slab_ball_overlap(self, fp, verts, vp, n_gauss):
        n, o, w = fp.n, fp.pair.frame.origin, fp.width
        t2, t3 = fp.pair.frame.R[1], fp.pair.frame.R[2]
        sn, sw = geo.gauss_legendre(n_gauss, 0.0, w)
        c2 = np.array([(vp.V - o) @ t2, (vp.V - o) @ t3])
        acc = 0.0
        for s, ws in zip(sn, sw):
            if s >= vp.R:
                continue
            poly = geo.polytope_plane_section(verts, n, float(n @ o) + s)
            if len(poly) < 3:
                continue
            poly2 = [np.array([(p - o) @ t2, (p - o) @ t3]) for p in poly]
            acc += ws * geo.polygon_disk_area(poly2, c2,
                                              np.sqrt(vp.R ** 2 - s ** 2))
        return acc

    def _cyl_domain_volume(self, ep, n_gauss, n_panels):
        cx = self.plmap.complex
        fan = ep.fan
        d = fan.direction
        zb = np.linspace(0.0, ep.L, n_panels + 1)
        zn, zw = _panel_gauss(zb, n_gauss)
        acc = 0.0
        for z, wz in zip(zn, zw):
            c = float(d @ fan.V0) + z
            area = 0.0
            for ci in range(cx.n_cells):
                poly = geo.tet_plane_section(cx.cell_points(ci), d, c)
                if len(poly) < 3:
                    continue
                poly2 = [((p - fan.V0) @ fan.Q.T)[:2] for p in poly]
                area += geo.polygon_disk_area(poly2, (0.0, 0.0), ep.r)
            acc += wz * area
        return acc

    # -- stratified sampling for audits

    def sample_patches(self, n_per_patch=500, rng=None):
        rng = np.random.default_rng(rng if rng is not None else 0)
        cx = self.plmap.complex
        groups = []
        for fp in self.face_patches:
            verts = self._slab_polytope(fp)
            tets = geo.polytope_tets(verts)
            if tets:
                vols = np.array([abs(geo.tet_volume(t)) for t in tets])
                pick = rng.choice(len(tets), size=n_per_patch,
                                  p=vols / vols.sum())
                bar = rng.dirichlet(np.ones(4), size=n_per_patch)
                pts = np.einsum("nk,nkj->nj",
                                bar, np.array([tets[i] for i in pick]))
                groups.append(pts)
        for ep in self.edge_patches:
            t = ep.r * np.sqrt(rng.uniform(1e-6, 1.0, 4 * n_per_patch))
            th = rng.uniform(-np.pi, np.pi, 4 * n_per_patch)
            z = rng.uniform(0.0, ep.L, 4 * n_per_patch)
            y = np.stack([t * np.cos(th), t * np.sin(th), z], axis=-1)
            pts = y @ ep.fan.Q + ep.fan.V0
            pts = pts[self.contains(pts)][:n_per_patch]
            groups.append(pts)
        for vp in self.vertex_patches:
            u = rng.normal(size=(n_per_patch, 3))
            u /= np.linalg.norm(u, axis=-1, keepdims=True)
            rad = vp.R * rng.uniform(0, 1, n_per_patch) ** (1 / 3)
            groups.append(vp.V + rad[:, None] * u)
        # bulk
        vols = np.array([abs(geo.tet_volume(cx.cell_points(c)))
                         for c in range(cx.n_cells)])
        pick = rng.choice(cx.n_cells, size=4 * n_per_patch,
                          p=vols / vols.sum())
        bar = rng.dirichlet(np.ones(4), size=4 * n_per_patch)
        pts = np.einsum("nk,nkj->nj", bar,
                        np.array([cx.cell_points(c) for c in pick]))
        groups.append(pts)
        return np.vstack(groups)


def _panel_gauss(breaks, n):
    nodes, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        x, w = geo.gauss_legendre(n, float(a), float(b))
        nodes.append(x)
        wts.append(w)
    return np.concatenate(nodes), np.concatenate(wts)


def _concentric_cyl_ball(r, R):
    """Volume of {t < r} ∩ {|x| < R} on one side of the vertex plane."""
    if r >= R:
        return 2.0 / 3.0 * np.pi * R ** 3
    zs = np.sqrt(R ** 2 - r ** 2)
    return float(np.pi * r ** 2 * zs
                 + np.pi * (R ** 2 * (R - zs) - (R ** 3 - zs ** 3) / 3.0))


# ---------------------------------------------------------------------------
# assembly


def assemble(plmap, params, profile=DEFAULT_PROFILE):
    cx = plmap.complex
    pairs = {pr.face: pr for pr in face_pairs(plmap)}
    fans = {fan.edge: fan for fan in edge_fans(plmap)}
    stars = {st.vertex: st for st in vertex_stars(plmap)}

    face_patches = []
    for f, width in params.w.items():
        pr = pairs[f]
        face_patches.append(FacePatch(pr, width, profile=profile,
                                      tri=cx.points[list(f)]))
    edge_patches = []
    for e, radius in params.r.items():
        fan = fans[e]
        widths = []
        fallback = min(params.w.values()) if params.w else radius / 50.0
        for rf in fan.ray_faces:
            widths.append(params.w.get(rf, min(fallback, radius / 50.0)))
        edge_patches.append(EdgePatch(fan, widths, radius, profile=profile))
    builders = []
    for v, R in params.R.items():
        st = stars[v]
        builders.append(
            lambda stage1, st=st, R=R: VertexPatch(st, R, stage1, plmap))
    return SmoothedMap(plmap, params, face_patches, edge_patches, builders)


# ---------------------------------------------------------------------------
# the lambda sweep


SWEEP_COLUMNS = ("lambda", "vol_E", "linf_f", "w1p_f", "linf_inv",
                 "w1q_inv", "sup_Dg", "sup_Dginv")


def lambda_sweep(plmap, params, lambdas=(1.0, 0.5, 0.25, 0.125, 0.0625),
                 p=2.0, q=2.0, rng=0):
    from .norms import linf_difference
    rows = []
    piece_norms = np.linalg.norm(plmap.matrices, ord=2, axis=(1, 2))
    piece_inv_norms = np.linalg.norm(np.linalg.inv(plmap.matrices),
                                     ord=2, axis=(1, 2))
    for lam in lambdas:
        g = assemble(plmap, params.scaled(lam))
        vol = g.volume_difference_set()
        pts, wts = g.difference_quadrature()
        act = wts > 0
        pa, wa = pts[act], wts[act]
        Dg = g.derivative(pa)
        Df = plmap.derivative(pa)
        diff = np.linalg.norm(Dg - Df, ord=2, axis=(1, 2))
        w1p = float(np.sum(wa * diff ** p) ** (1.0 / p))
        linf = linf_difference(plmap, g, rng=rng)
        # inverse quantities via the change of variables y = g(x)
        Jg = np.linalg.det(Dg)
        Dgi = np.linalg.inv(Dg)
        y = g.evaluate(pa)
        xb, ci = plmap.inverse_pl(y, tol=1e-7, extend=True)
        Dfi = np.linalg.inv(plmap.matrices[ci])
        diff_inv = np.linalg.norm(Dgi - Dfi, ord=2, axis=(1, 2))
        w1q_inv = float(np.sum(wa * diff_inv ** q * Jg) ** (1.0 / q))
        linf_inv = float(np.max(np.linalg.norm(pa - xb, axis=-1)))
        sup_dg = float(max(np.max(np.linalg.norm(Dg, ord=2, axis=(1, 2))),
                           np.max(piece_norms)))
        sup_dgi = float(max(np.max(np.linalg.norm(Dgi, ord=2, axis=(1, 2))),
                            np.max(piece_inv_norms)))
        rows.append(dict(zip(SWEEP_COLUMNS,
                             (float(lam), vol, linf, w1p, linf_inv,
                              w1q_inv, sup_dg, sup_dgi))))
    return rows


def format_table(rows):
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(f"{row[c]:.12g}" for c in SWEEP_COLUMNS))
    return "\n".join(lines)
