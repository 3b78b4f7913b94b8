"""Smoothing around 0-subsimplices.

Frame convention: the vertex sits at the origin; an already-smoothed map
``hat_g`` (faces blended, edges cylindrically extended) is available on the
shell B(0,2R) \\ B(0,R/2).  The vertex smoother flattens the image of the
shell onto spheres, untwists the induced sphere map through an isotopy, and
fills the inner ball with the linear map rho*x.
"""

from __future__ import annotations

import numpy as np

from . import geometry as geo
from .blend import eta, eta_prime, time_profile, time_profile_prime
from .errors import (CertificationError, ConstructionError, InvalidInputError,
                     NoIsotopyFound)


def _unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# sphere maps and degree


class SphereMap:
    """A map of the unit sphere obtained by normalizing an ambient map.

    ``ambient`` maps (N,3) to (N,3) nonzero vectors; ``ambient_jac`` returns
    the (N,3,3) derivative of the ambient map with respect to its argument.
    """

    def __init__(self, ambient, ambient_jac):
        self.ambient = ambient
        self.ambient_jac = ambient_jac

    def __call__(self, x):
        return _unit(self.ambient(np.asarray(x, dtype=float)))

    def ambient_derivative(self, x):
        """Derivative of x -> ambient(x)/|ambient(x)| in ambient coordinates."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        G = self.ambient(x)
        J = self.ambient_jac(x)
        n = np.linalg.norm(G, axis=-1, keepdims=True)
        mu = G / n
        P = np.eye(3) - mu[:, :, None] * mu[:, None, :]
        return np.einsum("nij,njk->nik", P, J) / n[:, :, None]

    def tangent_det(self, x):
        """Jacobian determinant of the surface map in oriented tangent frames."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mu = self(x)
        D = self.ambient_derivative(x)
        out = np.empty(len(x))
        for k in range(len(x)):
            u2, u3 = geo.orthonormal_tangents(x[k])
            if np.linalg.det(np.vstack([x[k], u2, u3])) < 0:
                u2, u3 = u3, u2
            v2, v3 = geo.orthonormal_tangents(mu[k])
            if np.linalg.det(np.vstack([mu[k], v2, v3])) < 0:
                v2, v3 = v3, v2
            T = np.array([[v2 @ D[k] @ u2, v2 @ D[k] @ u3],
                          [v3 @ D[k] @ u2, v3 @ D[k] @ u3]])
            out[k] = np.linalg.det(T)
        return out


def linear_sphere_map(M):
    M = np.asarray(M, dtype=float)
    return SphereMap(lambda x: np.atleast_2d(x) @ M.T,
                     lambda x: np.broadcast_to(M, (len(np.atleast_2d(x)), 3, 3)))


def _newton_preimages(mu, y, seeds, tol=1e-12, max_iter=30):
    """Tangent-plane Newton from every seed; converged points deduplicated."""
    found = []
    for x in seeds:
        x = x / np.linalg.norm(x)
        ok = False
        for _ in range(max_iter):
            r = mu(x[None])[0] - y
            if np.linalg.norm(r) < tol:
                ok = True
                break
            u2, u3 = geo.orthonormal_tangents(x)
            D = mu.ambient_derivative(x[None])[0]
            v2, v3 = geo.orthonormal_tangents(y)
            A = np.array([[v2 @ D @ u2, v2 @ D @ u3],
                          [v3 @ D @ u2, v3 @ D @ u3]])
            b = np.array([v2 @ r, v3 @ r])
            try:
                step = np.linalg.solve(A, -b)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 1.0:
                step = step / np.linalg.norm(step)
            x = x + step[0] * u2 + step[1] * u3
            x = x / np.linalg.norm(x)
        if ok and np.linalg.norm(mu(x[None])[0] - y) < 1e-10:
            for p in found:
                if np.linalg.norm(p - x) < 1e-7:
                    break
            else:
                found.append(x)
    return found


def integral_degree(mu, n_polar=32, n_azimuth=64):
    """Degree as the normalized integral of the surface Jacobian."""
    nodes, wts = np.polynomial.legendre.leggauss(n_polar)
    phi = np.arccos(nodes)
    psi = np.linspace(0.0, 2 * np.pi, n_azimuth, endpoint=False)
    PH, PS = np.meshgrid(phi, psi, indexing="ij")
    W = np.broadcast_to(wts[:, None], PH.shape) * (2 * np.pi / n_azimuth)
    pts = np.stack([np.sin(PH) * np.cos(PS), np.sin(PH) * np.sin(PS),
                    np.cos(PH)], axis=-1).reshape(-1, 3)
    dets = mu.tangent_det(pts)
    return float(np.sum(dets * W.ravel()) / (4 * np.pi))


def degree(mu, y=None, rng=None):
    """Topological degree by signed preimage count, cross-checked against
    the integral degree at two quadrature orders."""
    rng = np.random.default_rng(rng if rng is not None else 7)
    coarse = integral_degree(mu, 16, 32)
    fine = integral_degree(mu, 32, 64)
    if abs(fine - round(fine)) > 0.1 or round(fine) != round(coarse):
        fine = integral_degree(mu, 48, 96)
        if abs(fine - round(fine)) > 0.1:
            raise CertificationError(
                f"integral degree does not round robustly ({fine})")
    d_int = int(round(fine))
    seeds = geo.icosphere(3)
    for _ in range(5):
        if y is None or _ > 0:
            y = _unit(rng.normal(size=3))
        pre = _newton_preimages(mu, np.asarray(y, dtype=float), seeds)
        if not pre:
            continue
        dets = mu.tangent_det(np.array(pre))
        if np.min(np.abs(dets)) < 1e-8:
            continue  # y too close to a critical value; re-draw
        d_count = int(np.sum(np.sign(dets)))
        if d_count == d_int:
            return d_int
        # one refinement retry with a denser seed grid
        pre = _newton_preimages(mu, np.asarray(y, dtype=float), geo.icosphere(4))
        dets = mu.tangent_det(np.array(pre))
        if np.min(np.abs(dets)) >= 1e-8 and int(np.sum(np.sign(dets))) == d_int:
            return d_int
        raise CertificationError(
            f"preimage count {int(np.sum(np.sign(dets)))} disagrees with "
            f"integral degree {d_int}")
    raise CertificationError("no regular value found for the degree count")


# ---------------------------------------------------------------------------
# sphere isotopy


class SphereIsotopy:
    """Normalized linear homotopy between the identity and mu on S^2."""

    def __init__(self, mu, s=time_profile, sprime=time_profile_prime,
                 check=True, n_check=2000, rng=None):
        self.mu = mu
        self.s = s
        self.sprime = sprime
        if check:
            rng = np.random.default_rng(rng if rng is not None else 3)
            pts = _unit(rng.normal(size=(n_check, 3)))
            mv = mu(pts)
            for t in np.linspace(0.0, 1.0, 9):
                sv = float(self.s(t))
                V = (1.0 - sv) * pts + sv * mv
                if float(np.min(np.linalg.norm(V, axis=-1))) < 1e-3:
                    raise NoIsotopyFound(
                        "linear interpolant to the sphere map vanishes; "
                        "the default isotopy provider cannot smooth this vertex")
            if degree(mu) != 1:
                raise NoIsotopyFound("sphere map does not have degree 1")

    def interpolant(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sv = np.asarray(self.s(t), dtype=float)
        sv = np.broadcast_to(sv, (len(x),))[:, None]
        return (1.0 - sv) * x + sv * self.mu(x)

    def __call__(self, x, t):
        single = np.asarray(x, dtype=float).ndim == 1
        V = self.interpolant(x, t)
        out = _unit(V)
        return out[0] if single else out

    def derivative(self, x, t):
        """d/dx and d/dt of Psi at unit vectors x, ambient representation."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sv = np.broadcast_to(np.asarray(self.s(t), dtype=float), (len(x),))
        spv = np.broadcast_to(np.asarray(self.sprime(t), dtype=float), (len(x),))
        mv = self.mu(x)
        Dmu = self.mu.ambient_derivative(x)
        V = (1.0 - sv)[:, None] * x + sv[:, None] * mv
        n = np.linalg.norm(V, axis=-1, keepdims=True)
        Psi = V / n
        P = np.eye(3) - Psi[:, :, None] * Psi[:, None, :]
        DV = (1.0 - sv)[:, None, None] * np.eye(3) + sv[:, None, None] * Dmu
        dPsi_dx = np.einsum("nij,njk->nik", P, DV) / n[:, :, None]
        dV_dt = spv[:, None] * (mv - x)
        dPsi_dt = np.einsum("nij,nj->ni", P, dV_dt) / n
        return dPsi_dx, dPsi_dt


def sphere_isotopy(mu, **kw):
    """Default provider: normalized linear homotopy, certified at build."""
    return SphereIsotopy(mu, **kw)


# ---------------------------------------------------------------------------
# the vertex smoother


class VertexSmoother:
    """Assembled vertex-ball map: hat_g outside B(0,R), star flattening on
    B(0,R) \\ B(0,3R/4), isotopy untwist on B(0,3R/4) \\ B(0,R/2), and the
    linear map rho*x on B(0,R/2)."""

    def __init__(self, hat_g, hat_g_jac, R, star=None,
                 isotopy_provider=sphere_isotopy, rng=None):
        self.hat_g = hat_g
        self.hat_g_jac = hat_g_jac
        self.R = float(R)
        self.star = star
        rr = 0.75 * self.R
        self.mu = SphereMap(lambda x: self.hat_g(np.atleast_2d(x) * rr),
                            lambda x: self.hat_g_jac(np.atleast_2d(x) * rr) * rr)
        rng = np.random.default_rng(rng if rng is not None else 5)
        sph = _unit(rng.normal(size=(4096, 3)))
        norms = np.linalg.norm(self.hat_g(sph * rr), axis=-1)
        if float(np.min(norms)) <= 0:
            raise ConstructionError("hat_g vanishes on the flattening sphere")
        self.rho = 0.45 * float(np.min(norms)) / rr
        # radial monotonicity of hat_g on the flattening shell
        shell = sph * rng.uniform(0.75 * self.R, self.R, 4096)[:, None]
        gv = self.hat_g(shell)
        Jv = self.hat_g_jac(shell)
        rad = np.einsum("nij,nj->ni", Jv, _unit(shell))
        dots = np.sum(rad * _unit(gv), axis=-1)
        if float(np.min(dots)) <= 0:
            raise ConstructionError(
                "radial monotonicity of hat_g fails on the flattening shell")
        self.isotopy = isotopy_provider(self.mu)

    # -- evaluation

    def evaluate(self, x):
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        R, rho = self.R, self.rho
        nx = np.linalg.norm(x, axis=-1)
        out = np.empty_like(x)

        outer = nx >= R
        if np.any(outer):
            out[outer] = self.hat_g(x[outer])

        flat = (nx < R) & (nx >= 0.75 * R)
        if np.any(flat):
            out[flat] = star_flatten(self, x[flat])

        mid = (nx < 0.75 * R) & (nx >= 0.5 * R)
        if np.any(mid):
            out[mid] = vertlem_extend(self, x[mid])

        inner = nx < 0.5 * R
        if np.any(inner):
            out[inner] = rho * x[inner]
        return out[0] if single else out

    def __call__(self, x):
        return self.evaluate(x)

    def jacobian(self, x):
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        R, rho = self.R, self.rho
        nx = np.linalg.norm(x, axis=-1)
        out = np.empty((len(x), 3, 3))

        outer = nx >= R
        if np.any(outer):
            out[outer] = self.hat_g_jac(x[outer])

        flat = (nx < R) & (nx >= 0.75 * R)
        if np.any(flat):
            out[flat] = _star_flatten_jac(self, x[flat])

        mid = (nx < 0.75 * R) & (nx >= 0.5 * R)
        if np.any(mid):
            out[mid] = _vertlem_jac(self, x[mid])

        inner = nx < 0.5 * R
        if np.any(inner):
            out[inner] = rho * np.eye(3)
        return out[0] if single else out


def star_flatten(smoother, x):
    """Convex combination of hat_g and its radial projection to spheres,
    on the shell 3R/4 <= |x| <= R."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R, rho = smoother.R, smoother.rho
    nx = np.linalg.norm(x, axis=-1)
    e = eta((4.0 * nx - 3.0 * R) / R)
    g = smoother.hat_g(x)
    mu = _unit(g)
    return e[:, None] * g + ((1.0 - e) * rho * nx)[:, None] * mu


def _star_flatten_jac(smoother, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R, rho = smoother.R, smoother.rho
    nx = np.linalg.norm(x, axis=-1)
    xhat = x / nx[:, None]
    e = eta((4.0 * nx - 3.0 * R) / R)
    de = eta_prime((4.0 * nx - 3.0 * R) / R) * (4.0 / R)
    g = smoother.hat_g(x)
    J = smoother.hat_g_jac(x)
    ng = np.linalg.norm(g, axis=-1, keepdims=True)
    mu = g / ng
    P = np.eye(3) - mu[:, :, None] * mu[:, None, :]
    Dmu = np.einsum("nij,njk->nik", P, J) / ng[:, :, None]
    grad_e = de[:, None] * xhat
    out = e[:, None, None] * J + g[:, :, None] * grad_e[:, None, :]
    out += ((1.0 - e) * rho * nx)[:, None, None] * Dmu
    out += ((1.0 - e) * rho)[:, None, None] * mu[:, :, None] * xhat[:, None, :]
    out -= (rho * nx)[:, None, None] * mu[:, :, None] * grad_e[:, None, :]
    return out


def vertlem_extend(smoother, x):
    """Isotopy fill on the shell R/2 <= |x| <= 3R/4."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R, rho = smoother.R, smoother.rho
    nx = np.linalg.norm(x, axis=-1)
    xhat = x / nx[:, None]
    tau = eta((4.0 * nx - 2.0 * R) / R)
    V = smoother.isotopy.interpolant(xhat, tau)
    Psi = _unit(V)
    return (rho * nx)[:, None] * Psi


def _vertlem_jac(smoother, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R, rho = smoother.R, smoother.rho
    nx = np.linalg.norm(x, axis=-1)
    xhat = x / nx[:, None]
    tau = eta((4.0 * nx - 2.0 * R) / R)
    dtau = eta_prime((4.0 * nx - 2.0 * R) / R) * (4.0 / R)
    Psi = smoother.isotopy(xhat, tau)
    dPsi_dx, dPsi_dt = smoother.isotopy.derivative(xhat, tau)
    Dxhat = (np.eye(3) - xhat[:, :, None] * xhat[:, None, :]) / nx[:, None, None]
    total = np.einsum("nij,njk->nik", dPsi_dx, Dxhat) \
        + dPsi_dt[:, :, None] * (dtau[:, None] * xhat)[:, None, :]
    return rho * Psi[:, :, None] * xhat[:, None, :] \
        + (rho * nx)[:, None, None] * total


# ---------------------------------------------------------------------------
# certification


def certify_radial_subdeterminant(smoother, n=100000, rng=None, floor_tol=None):
    """Sampled minimum of the tangential 2x2 subdeterminant of D hat_g in
    the moving frames along x/|x| and hat_g/|hat_g| over the shell."""
    rng = np.random.default_rng(rng if rng is not None else 11)
    R = smoother.R
    pts = _unit(rng.normal(size=(n, 3))) * rng.uniform(0.5 * R, R, n)[:, None]
    g = smoother.hat_g(pts)
    J = smoother.hat_g_jac(pts)
    best = np.inf
    worst_pt = None
    # vectorized tangent frames
    xhat = _unit(pts)
    ghat = _unit(g)
    scale = float(np.max(np.linalg.norm(g, axis=-1))) / R
    u2 = np.cross(xhat, np.where(np.abs(xhat[:, :1]) < 0.9,
                                 [[1.0, 0, 0]], [[0, 1.0, 0]]))
    u2 = _unit(u2)
    u3 = np.cross(xhat, u2)
    v2 = np.cross(ghat, np.where(np.abs(ghat[:, :1]) < 0.9,
                                 [[1.0, 0, 0]], [[0, 1.0, 0]]))
    v2 = _unit(v2)
    v3 = np.cross(ghat, v2)
    Ju2 = np.einsum("nij,nj->ni", J, u2)
    Ju3 = np.einsum("nij,nj->ni", J, u3)
    a = np.sum(v2 * Ju2, axis=-1)
    b = np.sum(v2 * Ju3, axis=-1)
    c = np.sum(v3 * Ju2, axis=-1)
    d = np.sum(v3 * Ju3, axis=-1)
    dets = np.abs(a * d - b * c)
    k = int(np.argmin(dets))
    best, worst_pt = float(dets[k]), pts[k]
    tol = (1e-6 * scale ** 2) if floor_tol is None else floor_tol
    if best < tol:
        raise CertificationError(
            f"radial subdeterminant floor {best:.3e} below tolerance {tol:.3e} "
            f"at {worst_pt}")
    return best


def ratio_sweep(build, certify, max_halvings=12):
    """Halve a ratio parameter until a certification passes with 2x margin.

    ``build(ratio)`` constructs the object; ``certify(obj)`` returns a floor
    or raises CertificationError.  Returns (ratio, floor, halvings).
    """
    ratio = 1.0
    for k in range(max_halvings + 1):
        try:
            obj = build(ratio)
            floor = certify(obj)
            return ratio, floor, k
        except (CertificationError, ConstructionError, InvalidInputError,
                NoIsotopyFound):
            ratio *= 0.5
    raise CertificationError(
        f"certification failed down to ratio {ratio * 2}")
