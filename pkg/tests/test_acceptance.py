"""Acceptance suite.

Each test exercises one acceptance criterion end to end at its stated
tolerance and prints a single [PASS]/[FAIL] line (run with ``pytest -s``
or read the captured output).
"""

import time

import numpy as np
import pytest

from plsmooth.blend import (ConstantWidth, FaceBlend, face_blend,
                            face_blend_jacobian, sigma_for_face)
from plsmooth.builders import (perturbed_kuhn_map, subdivided_tet,
                               two_tet)
from plsmooth.edge import (EdgeSmoother, RampRadius, circle_isotopy,
                           synthetic_fan, variable_radius_extend, wedge_map)
from plsmooth.errors import (NonInjectiveError, OrientationError,
                             ParameterError)
from plsmooth.mesh import PLMap, pl_map_from_vertex_images, validate_pl_homeo
from plsmooth.norms import RINorm, ri_norm, rozumny_check
from plsmooth.pipeline import assemble, choose_params, lambda_sweep
from plsmooth.vertex import degree, integral_degree, linear_sphere_map


def _report(ok, label):
    print(f"[{'PASS' if ok else 'FAIL'}] {label}")
    assert ok, label


def _make_fan(jump=0.4, angles=(-2.5, 0.3, 1.8), lam=1.1, seed=0):
    angles = np.asarray(angles, dtype=float)
    N = np.array([[-np.sin(a), np.cos(a), 0.0] for a in angles])
    c = np.linalg.svd(N[:, :2].T)[2][-1]
    rng = np.random.default_rng(seed)
    u = rng.normal(size=3)
    u *= jump / np.linalg.norm(u)
    M0 = np.eye(3)
    M0[:, 2] = [0, 0, lam]
    mats = [M0]
    for i in range(1, len(angles)):
        mats.append(mats[-1] + np.outer(c[i] * u, N[i]))
    return synthetic_fan(angles, mats, length=2.0)


def test_criterion_1_face_blend():
    """Face blend exact off strip (1e5 points), det floor, FD Jacobian."""
    t0 = time.time()
    ok = True
    rng = np.random.default_rng(0)
    A1 = np.eye(3)
    d = np.array([0.6, 0.3, -0.2])
    fb = FaceBlend(frame_origin=np.zeros(3), frame_R=np.eye(3),
                   M_neg=A1, c_neg=np.zeros(3),
                   M_pos=A1 + np.outer(d, [1.0, 0, 0]), c_pos=np.zeros(3),
                   width=ConstantWidth(0.02))
    x = rng.uniform(-1.0, 1.0, size=(100_000, 3))
    off = (x[:, 0] <= 0.0) | (x[:, 0] >= fb.width.w)
    lo, hi = x[off & (x[:, 0] <= 0)], x[off & (x[:, 0] >= fb.width.w)]
    ok &= np.array_equal(face_blend(fb, lo), lo @ fb.M_neg.T)
    ok &= np.array_equal(face_blend(fb, hi), hi @ fb.M_pos.T)
    # determinant floor inside the strip
    xin = x.copy()
    xin[:, 0] = rng.uniform(0.0, fb.width.w, len(x))
    _, floor = sigma_for_face(fb)[:2]
    dets = np.linalg.det(face_blend_jacobian(fb, xin[:20000]))
    ok &= np.min(dets) >= floor - 1e-12
    # finite-difference Jacobian check
    pts = xin[:200]
    J = face_blend_jacobian(fb, pts)
    h = 1e-7
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (face_blend(fb, pts + e) - face_blend(fb, pts - e)) / (2 * h)
        ok &= np.max(np.abs(fd - J[:, :, j])) < 1e-5
    ok &= (time.time() - t0) < 10.0
    _report(ok, "criterion 1: face blend suite (exactness, floor, FD)")


def test_criterion_2_edge_smoother():
    """Cylinder smoother: boundary match, plane behaviour, positivity,
    scale invariance of the operator norm."""
    t0 = time.time()
    ok = True
    fan = _make_fan()
    r, scale = 0.2, 2.0
    sm = EdgeSmoother(fan, [0.002] * 3, r)
    rng = np.random.default_rng(1)
    th = rng.uniform(-np.pi, np.pi, 4000)
    z = rng.uniform(0.2, 1.8, 4000)
    bd = np.stack([r * np.cos(th), r * np.sin(th), z], axis=-1)
    ok &= np.max(np.abs(sm.evaluate(bd) - wedge_map(fan, sm.widths, bd))) \
        < 1e-10 * scale
    # axis translation equivariance and post-flattening horizontal planes
    t = rng.uniform(1e-4, r - 1e-6, 4000)
    pts = np.stack([t * np.cos(th), t * np.sin(th), z], axis=-1)
    c = 0.37
    shift = sm.evaluate(pts + [0, 0, c]) - sm.evaluate(pts)
    ok &= np.max(np.abs(shift - np.array([0, 0, fan.lam * c]))) < 1e-10
    inner = t <= 0.8 * r
    ok &= np.max(np.abs(sm.evaluate(pts[inner])[:, 2]
                        - fan.lam * z[inner])) < 1e-10
    # positive Jacobian on a 64^3 cylindrical grid
    tg = np.linspace(1e-3, r * 0.9999, 64)
    thg = np.linspace(-np.pi, np.pi, 64, endpoint=False)
    zg = np.linspace(0.05, 1.95, 64)
    T, TH, Z = np.meshgrid(tg, thg, zg, indexing="ij")
    grid = np.stack([T * np.cos(TH), T * np.sin(TH), Z],
                    axis=-1).reshape(-1, 3)
    ok &= np.min(np.linalg.det(sm.jacobian(grid))) > 0
    # sup |Dg| within 5 percent across lambda in {1, 1/2, 1/4}
    sup = []
    probe = pts[::8]
    for lam in (1.0, 0.5, 0.25):
        sm_l = EdgeSmoother(fan, [0.002 * lam] * 3, r * lam)
        sc = probe.copy()
        sc[:, :2] *= lam
        sup.append(np.max(np.linalg.norm(sm_l.jacobian(sc), ord=2,
                                         axis=(1, 2))))
    ok &= (max(sup) - min(sup)) / max(sup) < 0.05
    ok &= (time.time() - t0) < 60.0
    _report(ok, "criterion 2: edge smoother suite (match, planes, "
                "positivity, scale)")


def test_criterion_3_circle_isotopy():
    """Monotone circle isotopy for H(theta) = theta + 0.3 sin(theta)."""
    iso = circle_isotopy(lambda th: th + 0.3 * np.sin(th),
                         lambda th: 1.0 + 0.3 * np.cos(th))
    th = np.linspace(-np.pi, np.pi, 1441)
    ok = np.max(np.abs(iso.lift(th, 0.0) - th)) < 1e-12
    ok &= np.max(np.abs(iso.lift(th, 1.0)
                        - (th + 0.3 * np.sin(th)))) < 1e-12
    for s in np.linspace(0, 1, 21):
        d = iso.dlift_dtheta(th, s)
        ok &= np.min(d) >= 0.7 - 1e-12 and np.max(d) <= 1.3 + 1e-12
    _report(ok, "criterion 3: circle isotopy (endpoints, derivative range)")


def test_criterion_4_vertex_smoother():
    """Sphere degrees by both methods; vertex smoother shell/core
    exactness."""
    t0 = time.time()
    ok = True
    rng = np.random.default_rng(2)
    for A, want in ((np.eye(3), 1),
                    (np.diag([1.0, 1.0, -1.0]), -1),
                    (np.eye(3) + 0.3 * rng.normal(size=(3, 3)), 1)):
        sm = linear_sphere_map(A)
        ok &= degree(sm) == want
        ok &= round(integral_degree(sm, 32, 64)) == want
    from plsmooth.vertex import VertexSmoother
    A = np.eye(3) + 0.15 * rng.normal(size=(3, 3))
    vs = VertexSmoother(
        lambda x: np.atleast_2d(x) @ A.T,
        lambda x: np.broadcast_to(A, (len(np.atleast_2d(x)), 3, 3)).copy(),
        1.0)
    u = rng.normal(size=(2000, 3))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    outer = u * rng.uniform(1.0, 2.0, 2000)[:, None]
    ok &= np.array_equal(vs.evaluate(outer), outer @ A.T)
    core = u * rng.uniform(0.0, 0.499, 2000)[:, None]
    ok &= np.allclose(vs.evaluate(core), vs.rho * core, atol=1e-14)
    ok &= (time.time() - t0) < 60.0
    _report(ok, "criterion 4: vertex smoother suite (degrees, shell, core)")


@pytest.fixture(scope="module")
def kuhn_sweep():
    pl = perturbed_kuhn_map()
    params = choose_params(pl)
    rows = lambda_sweep(pl, params, p=2.0, q=2.0)
    return pl, params, rows


def test_criterion_5_end_to_end_sweep(kuhn_sweep):
    """Full lambda sweep on the perturbed Kuhn map: volume scaling, row
    inequalities, stable sup norms, convergence below epsilon = 1e-2."""
    t0 = time.time()
    pl, params, rows = kuhn_sweep
    ok = True
    v1 = rows[0]["vol_E"]
    sup_f = np.max(np.linalg.norm(pl.matrices, ord=2, axis=(1, 2)))
    for row in rows:
        lam = row["lambda"]
        ok &= row["vol_E"] <= (lam + 0.05) * v1
        # |Dg - Df| <= sup|Dg| + sup|Df| on E, zero elsewhere
        bound = (row["sup_Dg"] + sup_f) * row["vol_E"] ** 0.5
        ok &= row["w1p_f"] <= bound + 1e-12
    sups = np.array([[r["sup_Dg"], r["sup_Dginv"]] for r in rows])
    ok &= np.all((sups.max(axis=0) - sups.min(axis=0))
                 / sups.max(axis=0) < 0.05)
    for col in ("w1p_f", "w1q_inv"):
        vals = [r[col] for r in rows]
        ok &= all(a >= b for a, b in zip(vals, vals[1:]))
    ok &= rows[-1]["w1p_f"] < 1e-2 and rows[-1]["w1q_inv"] < 1e-2
    _report(ok, "criterion 5: end-to-end sweep (scaling, monotone "
                "convergence below 1e-2)")


def test_criterion_6_inverse_roundtrip(kuhn_sweep):
    """Numerical inverse accurate to 1e-11 * scale at 1e4 samples."""
    pl, params, _ = kuhn_sweep
    g = assemble(pl, params)
    rng = np.random.default_rng(3)
    cx = pl.complex
    vols = np.array([abs(np.linalg.det(cx.cell_points(c)[1:]
                                       - cx.cell_points(c)[0]))
                     for c in range(cx.n_cells)])
    pick = rng.choice(cx.n_cells, size=10_000, p=vols / vols.sum())
    bar = rng.dirichlet(np.ones(4), size=10_000)
    x = np.einsum("nk,nkj->nj", bar,
                  np.array([cx.cell_points(c) for c in pick]))
    err = np.max(np.linalg.norm(g.inverse(g.evaluate(x)) - x, axis=-1))
    ok = err < 1e-11 * g.scale
    _report(ok, f"criterion 6: inverse roundtrip (max error {err:.2e})")


def test_criterion_7_norm_engine():
    """Rearrangement-invariant norms against direct quadrature and the
    closed-form decay of the smallness functional."""
    ok = True
    rng = np.random.default_rng(4)
    for p in (1.0, 2.0, 4.0):
        norm = RINorm("lp", p=p)
        for _ in range(50):
            vals = rng.uniform(0, 5, 200)
            wts = rng.uniform(0.001, 1, 200)
            direct = np.sum(wts * vals ** p) ** (1.0 / p)
            ok &= abs(ri_norm(norm, vals, wts) - direct) < 1e-6 * direct
    deltas = 0.5 ** np.arange(21)
    for norm in (RINorm("lp", p=2.0), RINorm("lp", p=4.0),
                 RINorm("lorentz", p=2.0, q=1.0)):
        rows = rozumny_check(norm, 3.0, deltas, total_measure=2.0)
        vals = [v for _, v in rows]
        ok &= all(a > b for a, b in zip(vals, vals[1:]))
        ok &= vals[-1] < 0.05 * vals[0]
        if norm.kind == "lp":
            for d, v in rows:
                ok &= abs(v - 3.0 * (d * 2.0) ** (1 / norm.p) / 2.0) \
                    < 1e-12 * v
    _report(ok, "criterion 7: norm engine (quadrature oracle, decay)")


def test_criterion_8_negative_controls():
    """Bad inputs are rejected with the documented error types."""
    ok = True
    cx2 = two_tet()
    try:
        validate_pl_homeo(PLMap(cx2,
                                np.array([np.eye(3),
                                          np.diag([-1.0, 1.0, 1.0])]),
                                np.zeros((2, 3))))
        ok = False
    except OrientationError:
        pass
    cx = subdivided_tet()
    images = cx.points.copy()
    images[4] = [0.8, 0.4, 0.4]
    try:
        validate_pl_homeo(pl_map_from_vertex_images(cx, images))
        ok = False
    except (NonInjectiveError, OrientationError) as exc:
        ok &= bool(exc.args)
    fan = _make_fan(jump=0.2)
    sm = EdgeSmoother(fan, [0.002] * 3, 0.2)
    try:
        variable_radius_extend(sm, RampRadius(0.2, 0.02, 1.0, 1.004))
        ok = False
    except ParameterError:
        pass
    _report(ok, "criterion 8: negative controls (orientation, fold, "
                "steep ramp)")
