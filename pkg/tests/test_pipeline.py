"""End-to-end smoothing pipeline: parameter certification, patch
assembly and dispatch, the difference set, inversion, and the sweep."""

import numpy as np
import pytest

from plsmooth.builders import (kuhn_identity, perturbed_kuhn_map,
                               subdivided_tet_map, two_tet_map)
from plsmooth.errors import ParameterError
from plsmooth.pipeline import (SWEEP_COLUMNS, SmoothingParams, assemble,
                               choose_params, format_table, lambda_sweep)


@pytest.fixture(scope="module")
def kuhn_setup():
    pl = perturbed_kuhn_map()
    params = choose_params(pl)
    return pl, params, assemble(pl, params)


@pytest.fixture(scope="module")
def subdiv_setup():
    pl = subdivided_tet_map()
    params = choose_params(pl)
    return pl, params, assemble(pl, params)


def _interior_samples(pl, n, rng):
    cx = pl.complex
    vols = np.array([abs(np.linalg.det(
        cx.cell_points(c)[1:] - cx.cell_points(c)[0])) for c in
        range(cx.n_cells)])
    pick = rng.choice(cx.n_cells, size=n, p=vols / vols.sum())
    bar = rng.dirichlet(np.ones(4), size=n)
    return np.einsum("nk,nkj->nj", bar,
                     np.array([cx.cell_points(c) for c in pick]))


# ---------------------------------------------------------------------------
# parameter certification


def test_choose_params_kuhn_counts(kuhn_setup):
    # the Kuhn cube has six interior faces, one interior edge
    # (the long diagonal), and no interior vertices.
    _, params, _ = kuhn_setup
    assert len(params.w) == 6
    assert len(params.r) == 1
    assert len(params.R) == 0
    assert all(v > 0 for v in params.w.values())
    assert all(v > 0 for v in params.r.values())


def test_choose_params_subdivided_counts(subdiv_setup):
    # barycentric subdivision: one interior vertex, four interior
    # edges and six interior faces.
    _, params, _ = subdiv_setup
    assert len(params.R) == 1
    assert len(params.r) == 4
    assert len(params.w) == 6


def test_radius_orderings(subdiv_setup):
    # ball radius exceeds cylinder radius exceeds slab width for
    # every incident simplex, so the precedence nesting is geometric too.
    _, params, _ = subdiv_setup
    Rmin = min(params.R.values())
    for e, r in params.r.items():
        assert r < Rmin
        for f, w in params.w.items():
            if set(e) <= set(f):
                assert w < r


def test_identity_needs_no_smoothing():
    params = choose_params(kuhn_identity())
    assert not params.R and not params.r and not params.w


def test_params_scaling():
    p = SmoothingParams(R={0: 1.0}, r={(0, 1): 0.5}, w={(0, 1, 2): 0.1})
    half = p.scaled(0.5)
    assert half.lam == 0.5
    assert half.R[0] == 0.5
    assert half.r[(0, 1)] == 0.25
    assert half.w[(0, 1, 2)] == pytest.approx(0.05)
    with pytest.raises(ParameterError):
        p.scaled(0.0)
    with pytest.raises(ParameterError):
        p.scaled(1.5)


# ---------------------------------------------------------------------------
# assembly and dispatch


def test_assemble_patch_counts(subdiv_setup):
    _, params, g = subdiv_setup
    assert len(g.face_patches) == len(params.w)
    assert len(g.edge_patches) == len(params.r)
    assert len(g.vertex_patches) == len(params.R)


def test_smoothed_equals_pl_away_from_skeleton(kuhn_setup):
    # outside every patch the dispatcher must reproduce the PL
    # map exactly (bit-for-bit affine evaluation).
    pl, _, g = kuhn_setup
    rng = np.random.default_rng(3)
    x = _interior_samples(pl, 4000, rng)
    masked = np.zeros(len(x), dtype=bool)
    for p in g.face_patches + g.edge_patches + g.vertex_patches:
        masked |= p.mask(x)
    far = x[~masked]
    assert len(far) > 1000
    assert np.array_equal(g.evaluate(far), pl(far))


def test_dispatch_precedence(subdiv_setup):
    # points inside the vertex ball get the vertex patch even where a slab
    # or cylinder mask also fires
    _, _, g = subdiv_setup
    vp = g.vertex_patches[0]
    rng = np.random.default_rng(5)
    u = rng.normal(size=(200, 3))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    pts = vp.V + 0.999 * vp.R * rng.uniform(0.0, 1.0, 200)[:, None] * u
    assert np.array_equal(g.evaluate(pts), vp.evaluate(pts))


def test_positive_jacobians_on_patch_samples(subdiv_setup):
    _, _, g = subdiv_setup
    pts = g.sample_patches(n_per_patch=400, rng=7)
    dets = np.linalg.det(g.derivative(pts, extend=True))
    assert np.all(dets > 0)


def test_continuity_across_patch_interfaces(kuhn_setup):
    # pairs of points straddling every patch boundary must have
    # images within Lip * gap of each other
    _, _, g = kuhn_setup
    rng = np.random.default_rng(11)
    pts = g.sample_patches(n_per_patch=300, rng=13)
    eps = 1e-8 * g.scale
    a = pts + rng.normal(size=pts.shape) * eps
    keep = g.contains(a) & g.contains(pts)
    lip = 10.0 * np.max(np.linalg.norm(
        g.derivative(pts[keep], extend=True), ord=2, axis=(1, 2)))
    jump = np.linalg.norm(g.evaluate(a[keep]) - g.evaluate(pts[keep]),
                          axis=-1)
    dist = np.linalg.norm(a[keep] - pts[keep], axis=-1)
    assert np.all(jump <= lip * dist + 1e-13 * g.scale)


def test_derivative_matches_finite_differences(kuhn_setup):
    _, _, g = kuhn_setup
    rng = np.random.default_rng(17)
    pts = g.sample_patches(n_per_patch=40, rng=19)
    pts = pts[rng.choice(len(pts), size=60, replace=False)]
    h = 2e-7 * g.scale
    J = g.derivative(pts, extend=True)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (g.evaluate(pts + e, extend=True)
              - g.evaluate(pts - e, extend=True)) / (2 * h)
        # central differences straddle patch interfaces for a few points;
        # require agreement for the vast majority and closeness overall
        err = np.linalg.norm(fd - J[:, :, k], axis=-1)
        assert np.median(err) < 1e-5
        assert np.mean(err < 1e-3) > 0.9


# ---------------------------------------------------------------------------
# the difference set


def test_volume_quadrature_consistency(kuhn_setup):
    # the fixed quadrature over E and the exact/sectioned volume
    # formulas are independent computations of |E|
    _, _, g = kuhn_setup
    vol = g.volume_difference_set()
    pts, wts = g.difference_quadrature()
    assert vol > 0
    assert abs(wts.sum() - vol) < 0.01 * vol


def test_volume_quadrature_consistency_with_ball(subdiv_setup):
    _, _, g = subdiv_setup
    vol = g.volume_difference_set()
    pts, wts = g.difference_quadrature()
    assert abs(wts.sum() - vol) < 0.01 * vol


def test_quadrature_points_lie_in_difference_set(kuhn_setup):
    # every positive-weight node is handled by some patch, never by the
    # bulk affine branch
    _, _, g = kuhn_setup
    pts, wts = g.difference_quadrature()
    act = pts[wts > 0]
    masked = np.zeros(len(act), dtype=bool)
    for p in g.face_patches + g.edge_patches + g.vertex_patches:
        masked |= p.mask(act)
    assert np.all(masked)


def test_volume_shrinks_linearly(kuhn_setup):
    # |E_lambda| = lambda * |E_1| scaling up to the quadrature and
    # clipping tolerances (exact for the slab parts, near-exact overall)
    pl, params, g = kuhn_setup
    v1 = g.volume_difference_set()
    v2 = assemble(pl, params.scaled(0.5)).volume_difference_set()
    assert v2 < 0.55 * v1


# ---------------------------------------------------------------------------
# inversion


def test_inverse_roundtrip(kuhn_setup):
    pl, _, g = kuhn_setup
    rng = np.random.default_rng(23)
    x = _interior_samples(pl, 400, rng)
    y = g.evaluate(x)
    xb = g.inverse(y)
    assert np.max(np.linalg.norm(xb - x, axis=-1)) < 1e-11 * g.scale


def test_inverse_roundtrip_with_vertex_ball(subdiv_setup):
    pl, _, g = subdiv_setup
    pts = g.sample_patches(n_per_patch=80, rng=29)
    y = g.evaluate(pts, extend=True)
    xb = g.inverse(y)
    assert np.max(np.linalg.norm(xb - pts, axis=-1)) < 1e-11 * g.scale


# ---------------------------------------------------------------------------
# the sweep


def test_lambda_sweep_smoke(kuhn_setup):
    pl, params, _ = kuhn_setup
    rows = lambda_sweep(pl, params, lambdas=(1.0, 0.5), p=2.0, q=2.0)
    assert [r["lambda"] for r in rows] == [1.0, 0.5]
    for row in rows:
        assert set(row) == set(SWEEP_COLUMNS)
        # Hoelder: ||Dg - Df||_p <= (sup|Dg| + sup|Df|) |E|^{1/p}
        bound = row["sup_Dg"] + np.max(
            np.linalg.norm(pl.matrices, ord=2, axis=(1, 2)))
        assert row["w1p_f"] <= bound * row["vol_E"] ** 0.5 + 1e-12
    assert rows[1]["vol_E"] < rows[0]["vol_E"]
    assert rows[1]["w1p_f"] <= rows[0]["w1p_f"] * 1.05


def test_format_table(kuhn_setup):
    pl, params, _ = kuhn_setup
    rows = lambda_sweep(pl, params, lambdas=(1.0,))
    txt = format_table(rows)
    lines = txt.splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 2
    assert float(lines[1].split(",")[0]) == 1.0


def test_two_tet_slab_only_volume_exact():
    # with a single interior face and no nontrivial fans the
    # difference set is a clipped slab whose volume both paths compute
    # exactly
    M = np.eye(3)
    d = np.array([0.3, -0.1, 0.2])
    pl = two_tet_map(M, M + np.outer(d, [0.0, 0.0, 1.0]))
    params = choose_params(pl)
    g = assemble(pl, params)
    vol = g.volume_difference_set()
    pts, wts = g.difference_quadrature()
    assert abs(wts.sum() - vol) < 1e-10 * max(vol, 1e-30)
