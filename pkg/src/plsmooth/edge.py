"""Smoothing around 1-subsimplices.

Everything here works in the canonical edge frame: the edge lies on the
x3-axis, the incident faces become half-planes through the axis at angles
theta_1 < ... < theta_m, the affine pieces become linear maps A_i per
angular sector, and the common image edge direction is (0,0,lam).

The wedge map blends consecutive pieces across each ray plane; the
cylindrical extension replaces the wedge inside radius r by three annular
stages (flatten, radial squeeze, circle-isotopy untwist) and a linear core
diag(rho, rho, lam).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .blend import (DEFAULT_PROFILE, ConstantWidth, FaceBlend, eta, eta_prime,
                    face_blend, face_blend_jacobian, sigma_for_face,
                    time_profile, time_profile_prime)
from .errors import (ConstructionError, InvalidInputError, ParameterError)
from .mesh import EdgeFan

_E3 = np.array([0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# synthetic fans (frame-level, for tests and local studies)


def synthetic_fan(angles, matrices, length=1.0):
    """An EdgeFan already in canonical coordinates.

    ``matrices[i]`` applies on the sector [angles[i], angles[i+1]); all
    matrices must share their action on the rays and on e3 = (0,0,lam).
    """
    angles = np.asarray(angles, dtype=float)
    matrices = np.asarray(matrices, dtype=float)
    m = len(angles)
    if matrices.shape != (m, 3, 3):
        raise InvalidInputError("need one 3x3 matrix per sector")
    if np.any(np.diff(angles) <= 0) or angles[0] < -np.pi or angles[-1] >= np.pi:
        raise InvalidInputError("angles must be sorted in [-pi, pi)")
    v3 = matrices[0] @ _E3
    lam = float(np.linalg.norm(v3))
    if lam <= 0 or np.linalg.norm(v3 - np.array([0, 0, lam])) > 1e-10 * (1 + lam):
        raise InvalidInputError("pieces must map e3 to (0,0,lam)")
    for i in range(m):
        a = angles[i]
        d = np.array([np.cos(a), np.sin(a), 0.0])
        lo, hi = matrices[(i - 1) % m], matrices[i]
        if np.linalg.norm((lo - hi) @ d) > 1e-10 or \
           np.linalg.norm((lo - hi) @ _E3) > 1e-10:
            raise InvalidInputError(f"pieces disagree on ray {i}")
    gaps = []
    for i in range(m):
        for j in range(i + 1, m):
            dth = abs(angles[i] - angles[j]) % np.pi
            dth = min(dth, np.pi - dth)
            gaps.append(dth if dth > 1e-12 else np.pi)
    min_gap = min(gaps + [np.pi / 8.0])
    trivial = all(np.allclose(matrices[i], matrices[0], atol=1e-14)
                  for i in range(m))
    return EdgeFan(edge=(0, 1), V0=np.zeros(3), direction=_E3.copy(),
                   length=float(length), Q=np.eye(3), S=np.eye(3),
                   b_img=np.zeros(3), lam=lam, angles=angles,
                   ray_faces=[None] * m, sector_cells=list(range(m)),
                   pieces=matrices, min_gap=min_gap, trivial=trivial,
                   boundary=False, complete_start=True, complete_end=True)


# ---------------------------------------------------------------------------
# ray blends and the wedge map


def ray_blends(fan, widths, profile=DEFAULT_PROFILE):
    """One FaceBlend per ray, oriented toward the larger normal stretch."""
    m = fan.m
    widths = np.broadcast_to(np.asarray(widths, dtype=float), (m,))
    out = []
    zero = np.zeros(3)
    for i in range(m):
        a = float(fan.angles[i])
        d = np.array([np.cos(a), np.sin(a), 0.0])
        n = np.array([-np.sin(a), np.cos(a), 0.0])
        A_lo = fan.pieces[(i - 1) % m]
        A_hi = fan.pieces[i]
        nu = np.cross(A_hi @ d, A_hi @ _E3)
        nun = np.linalg.norm(nu)
        if nun < 1e-300:
            raise InvalidInputError(f"degenerate image of ray {i}")
        nu = nu / nun
        s_lo = float(nu @ (A_lo @ n))
        s_hi = float(nu @ (A_hi @ n))
        if s_lo < 0:
            s_lo, s_hi = -s_lo, -s_hi
        equal = np.allclose(A_lo, A_hi, atol=1e-14)
        if (not equal) and s_hi < s_lo:
            n = -n
            M_neg, M_pos = A_hi, A_lo
        else:
            M_neg, M_pos = A_lo, A_hi
        t3 = np.cross(n, d)
        R = np.vstack([n, d, t3])
        blend = FaceBlend(frame_origin=zero, frame_R=R,
                          M_neg=M_neg, c_neg=zero, M_pos=M_pos, c_pos=zero,
                          width=ConstantWidth(widths[i]), profile=profile)
        sigma, floor = sigma_for_face(blend)
        blend.sigma, blend.floor = sigma, floor
        out.append(blend)
    return out


def _sector_matrices(fan, theta):
    return fan.pieces[fan.sector_of(theta)]


def wedge_map(fan, widths, x, profile=DEFAULT_PROFILE, blends=None):
    """The sectorwise-blended map in frame coordinates (valid for
    x1^2+x2^2 >= (r/4)^2 if the width condition holds there)."""
    if blends is None:
        blends = ray_blends(fan, widths, profile)
    single = np.asarray(x, dtype=float).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    theta = np.arctan2(x[:, 1], x[:, 0])
    out = np.einsum("nij,nj->ni", _sector_matrices(fan, theta), x)
    for i, blend in enumerate(blends):
        a = float(fan.angles[i])
        d = np.array([np.cos(a), np.sin(a), 0.0])
        u = x @ blend.frame_R[0]
        w = blend.width.w
        mask = (u > 0.0) & (u < w) & (x @ d > 0.0)
        if np.any(mask):
            out[mask] = face_blend(blend, x[mask])
    return out[0] if single else out


def wedge_jacobian(fan, widths, x, profile=DEFAULT_PROFILE, blends=None):
    if blends is None:
        blends = ray_blends(fan, widths, profile)
    single = np.asarray(x, dtype=float).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    theta = np.arctan2(x[:, 1], x[:, 0])
    out = _sector_matrices(fan, theta).copy()
    for i, blend in enumerate(blends):
        a = float(fan.angles[i])
        d = np.array([np.cos(a), np.sin(a), 0.0])
        u = x @ blend.frame_R[0]
        w = blend.width.w
        mask = (u > 0.0) & (u < w) & (x @ d > 0.0)
        if np.any(mask):
            out[mask] = face_blend_jacobian(blend, x[mask])
    return out[0] if single else out


def fan_map(fan, x):
    """The exact piecewise linear map in frame coordinates."""
    single = np.asarray(x, dtype=float).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    theta = np.arctan2(x[:, 1], x[:, 0])
    out = np.einsum("nij,nj->ni", _sector_matrices(fan, theta), x)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# circle isotopy


class CircleIsotopy:
    """Isotopy from the identity to a sense-preserving circle diffeo.

    The target is given by its degree-1 lift H (strictly increasing,
    H(theta + 2pi) = H(theta) + 2pi).  The interpolated lift is
    L(theta, t) = (1 - s(t)) theta + s(t) H(theta) with a time profile s
    that is identically 0 near t=0 and 1 near t=1, so the endpoints are
    met exactly and d/dtheta L lies between 1 and H' pointwise.
    """

    def __init__(self, H, Hprime=None, s=time_profile, sprime=time_profile_prime,
                 check=True):
        self.H = H
        if Hprime is None:
            def Hprime(th, h=1e-6):
                return (np.asarray(H(np.asarray(th) + h))
                        - np.asarray(H(np.asarray(th) - h))) / (2 * h)
        self.Hprime = Hprime
        self.s = s
        self.sprime = sprime
        if check:
            th = np.linspace(-np.pi, np.pi, 513)
            Hv = np.asarray(H(th), dtype=float)
            if np.any(np.diff(Hv) <= 0):
                raise InvalidInputError("lift is not strictly increasing")
            wrap = np.asarray(H(th + 2 * np.pi), dtype=float)
            if np.max(np.abs(wrap - Hv - 2 * np.pi)) > 1e-8:
                raise InvalidInputError("lift is not a degree-1 lift")

    def lift(self, theta, t):
        theta = np.asarray(theta, dtype=float)
        sv = self.s(t)
        return (1.0 - sv) * theta + sv * np.asarray(self.H(theta))

    def dlift_dtheta(self, theta, t):
        sv = self.s(t)
        return (1.0 - sv) + sv * np.asarray(self.Hprime(theta))

    def dlift_dt(self, theta, t):
        theta = np.asarray(theta, dtype=float)
        return self.sprime(t) * (np.asarray(self.H(theta)) - theta)

    def alpha(self, theta, t):
        L = self.lift(theta, t)
        return np.stack([np.cos(L), np.sin(L)], axis=-1)


def circle_isotopy(H, Hprime=None, **kw):
    return CircleIsotopy(H, Hprime, **kw)


# ---------------------------------------------------------------------------
# the cylindrical extension


@dataclass
class EdgeSmoother:
    """Wedge map plus its extension inside the cylinder of radius r.

    The annuli fractions are fixed at (2/5, 3/5, 4/5, 1) of r: flatten on
    [4r/5, r], squeeze on [3r/5, 4r/5], untwist on [2r/5, 3r/5], and the
    linear map diag(rho, rho, lam) inside (the untwist time profile is flat
    near its ends, so the map is already linear for t <= 7r/15).
    """

    fan: EdgeFan
    widths: object
    radius: float
    profile: object = field(default=DEFAULT_PROFILE, repr=False)

    def __post_init__(self):
        m = self.fan.m
        self.widths = np.broadcast_to(
            np.asarray(self.widths, dtype=float), (m,)).copy()
        r = float(self.radius)
        if r <= 0 or np.any(self.widths <= 0):
            raise ParameterError("radius and widths must be positive")
        # width condition at the innermost radius where the wedge is used
        lim = self.fan.min_gap / 8.0
        worst = float(np.max(np.arctan(self.widths / (r / 4.0))))
        if worst >= lim:
            raise ParameterError(
                f"widths too large for the fan: arctan(w/(r/4)) = {worst:.3e} "
                f">= {lim:.3e} (ray slabs would overlap)")
        self.lam = self.fan.lam
        self.blends = ray_blends(self.fan, self.widths, self.profile)
        self._setup_planar()

    # -- planar reduction helpers (exact for constant widths)

    def _G(self, t, theta, x3=None):
        """Horizontal image components of the wedge over the plane x3."""
        t = np.asarray(t, dtype=float)
        theta = np.asarray(theta, dtype=float)
        t, theta = np.broadcast_arrays(t, theta)
        z = np.zeros_like(t) if x3 is None else np.broadcast_to(
            np.asarray(x3, dtype=float), t.shape)
        pts = np.stack([t * np.cos(theta), t * np.sin(theta), z], axis=-1)
        vals = wedge_map(self.fan, self.widths, pts.reshape(-1, 3),
                         blends=self.blends)
        return vals.reshape(t.shape + (3,))[..., :2]

    def _setup_planar(self):
        r = self.radius
        t0 = 0.6 * r
        thg = np.linspace(-np.pi, np.pi, 2049)
        G0 = self._G(np.full_like(thg, t0), thg)
        raw = np.unwrap(np.arctan2(G0[:, 1], G0[:, 0]))
        if abs((raw[-1] - raw[0]) - 2 * np.pi) > 1e-6:
            raise ConstructionError(
                "circle image of the squeeze radius does not have degree 1")
        psi = raw - thg
        # choose the lift branch with the smallest mean twist so the
        # untwist stage never performs a spurious full turn
        psi -= 2 * np.pi * np.round(np.mean(psi) / (2 * np.pi))
        psi[-1] = psi[0]
        self._psi_ref = CubicSpline(thg, psi, bc_type="periodic")
        # squeeze stretch rho: images of all relevant circles stay outside
        tg = np.linspace(r / 4.0, r, 13)
        T, TH = np.meshgrid(tg, np.linspace(-np.pi, np.pi, 1024),
                            indexing="ij")
        vals = np.linalg.norm(self._G(T, TH), axis=-1)
        # stretch ratio: t*rho <= 0.9 |G(t,theta)| pointwise on the annulus
        self.rho = 0.9 * float(np.min(vals / T))
        if self.rho <= 0:
            raise ConstructionError(
                "image of the wedge annulus touches the axis (rho search failed)")
        Hp = self._Hprime(np.linspace(-np.pi, np.pi, 2048))
        if np.min(Hp) <= 0:
            raise ConstructionError(
                "squeeze circle map is not orientation preserving")
        self.isotopy = CircleIsotopy(self._H, self._Hprime, check=False)

    def _H(self, theta, x3=None):
        """Exact lift of the squeeze circle map (spline used only to pick
        the 2pi branch)."""
        theta = np.asarray(theta, dtype=float)
        t0 = 0.6 * self.radius
        G0 = self._G(np.full_like(theta, t0), theta, x3)
        raw = np.arctan2(G0[..., 1], G0[..., 0])
        ref = theta + self._psi_ref(_principal(theta))
        k = np.round((ref - raw) / (2 * np.pi))
        return raw + 2 * np.pi * k

    def _Hprime(self, theta):
        theta = np.asarray(theta, dtype=float)
        t0 = 0.6 * self.radius
        p0 = np.stack([t0 * np.cos(theta), t0 * np.sin(theta),
                       np.zeros_like(theta)], axis=-1)
        Jw = wedge_jacobian(self.fan, self.widths, p0.reshape(-1, 3),
                            blends=self.blends).reshape(theta.shape + (3, 3))
        tang = np.stack([-t0 * np.sin(theta), t0 * np.cos(theta),
                         np.zeros_like(theta)], axis=-1)
        dG = np.einsum("...ij,...j->...i", Jw, tang)[..., :2]
        G0 = self._G(np.full_like(theta, t0), theta)
        num = G0[..., 0] * dG[..., 1] - G0[..., 1] * dG[..., 0]
        return num / np.sum(G0 ** 2, axis=-1)

    # -- evaluation

    def evaluate(self, x, radius=None):
        """The extended map at frame points ``x`` (N,3); for t >= r this is
        the wedge map.  ``radius`` optionally gives a per-point radius."""
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.full(len(x), self.radius) if radius is None \
            else np.broadcast_to(np.asarray(radius, dtype=float), (len(x),))
        t = np.hypot(x[:, 0], x[:, 1])
        theta = np.arctan2(x[:, 1], x[:, 0])
        lam = self.lam
        out = np.empty_like(x)

        outer = t >= r
        if np.any(outer):
            out[outer] = wedge_map(self.fan, self.widths, x[outer],
                                   blends=self.blends)

        p1 = (~outer) & (t >= 0.8 * r)
        if np.any(p1):
            w3 = wedge_map(self.fan, self.widths, x[p1], blends=self.blends)
            h3 = w3[:, 2] - lam * x[p1, 2]
            e1 = eta((5.0 * t[p1] - 4.0 * r[p1]) / r[p1])
            out[p1, :2] = w3[:, :2]
            out[p1, 2] = lam * x[p1, 2] + e1 * h3

        p2 = (t < 0.8 * r) & (t >= 0.6 * r)
        if np.any(p2):
            G = self._G(t[p2], theta[p2], x[p2, 2])
            u = self._unit_dir(theta[p2], x[p2, 2])
            e2 = eta((5.0 * t[p2] - 3.0 * r[p2]) / r[p2])
            out[p2, :2] = e2[:, None] * G \
                + ((1.0 - e2) * t[p2] * self.rho)[:, None] * u
            out[p2, 2] = lam * x[p2, 2]

        p3 = (t < 0.6 * r) & (t >= 0.4 * r)
        if np.any(p3):
            tau = (5.0 * t[p3] - 2.0 * r[p3]) / r[p3]
            H = self._H(theta[p3], x[p3, 2])
            L = theta[p3] + time_profile(tau) * (H - theta[p3])
            out[p3, 0] = t[p3] * self.rho * np.cos(L)
            out[p3, 1] = t[p3] * self.rho * np.sin(L)
            out[p3, 2] = lam * x[p3, 2]

        core = t < 0.4 * r
        if np.any(core):
            out[core, 0] = self.rho * x[core, 0]
            out[core, 1] = self.rho * x[core, 1]
            out[core, 2] = lam * x[core, 2]
        return out[0] if single else out

    def _unit_dir(self, theta, x3=None):
        t0 = 0.6 * self.radius
        G0 = self._G(np.full_like(np.asarray(theta, float), t0), theta, x3)
        return G0 / np.linalg.norm(G0, axis=-1, keepdims=True)

    def __call__(self, x):
        return self.evaluate(x)

    # -- analytic derivative (constant widths, constant radius)

    def jacobian(self, x):
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = self.radius
        lam = self.lam
        rho = self.rho
        t = np.hypot(x[:, 0], x[:, 1])
        theta = np.arctan2(x[:, 1], x[:, 0])
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty((len(x), 3, 3))

        outer = t >= r
        if np.any(outer):
            out[outer] = wedge_jacobian(self.fan, self.widths, x[outer],
                                        blends=self.blends)

        p1 = (~outer) & (t >= 0.8 * r)
        if np.any(p1):
            Jw = wedge_jacobian(self.fan, self.widths, x[p1],
                                blends=self.blends)
            w3 = wedge_map(self.fan, self.widths, x[p1], blends=self.blends)
            h3 = w3[:, 2] - lam * x[p1, 2]
            e1 = eta((5.0 * t[p1] - 4.0 * r) / r)
            de1 = (5.0 / r) * eta_prime((5.0 * t[p1] - 4.0 * r) / r)
            J = Jw.copy()
            J[:, 2, 0] = e1 * Jw[:, 2, 0] + de1 * c[p1] * h3
            J[:, 2, 1] = e1 * Jw[:, 2, 1] + de1 * s[p1] * h3
            J[:, 2, 2] = lam
            out[p1] = J

        p2 = (t < 0.8 * r) & (t >= 0.6 * r)
        if np.any(p2):
            pts = x[p2].copy()
            pts[:, 2] = 0.0
            Jw = wedge_jacobian(self.fan, self.widths, pts,
                                blends=self.blends)
            G = self._G(t[p2], theta[p2])
            u, du = self._unit_dir_deriv(theta[p2])
            e2 = eta((5.0 * t[p2] - 3.0 * r) / r)
            de2 = (5.0 / r) * eta_prime((5.0 * t[p2] - 3.0 * r) / r)
            dt = np.stack([c[p2], s[p2]], axis=-1)          # grad t
            dth = np.stack([-s[p2] / t[p2], c[p2] / t[p2]], axis=-1)
            J = np.zeros((int(p2.sum()), 3, 3))
            # e2 * G term: e2 * DG + de2 (G - t rho u) dt^T handled jointly
            J[:, :2, :2] = e2[:, None, None] * Jw[:, :2, :2] \
                + de2[:, None, None] * (G - t[p2, None] * rho * u)[:, :, None] * dt[:, None, :] \
                + ((1.0 - e2) * rho)[:, None, None] * (
                    u[:, :, None] * dt[:, None, :]
                    + t[p2, None, None] * du[:, :, None] * dth[:, None, :])
            J[:, 2, 2] = lam
            out[p2] = J

        p3 = (t < 0.6 * r) & (t >= 0.4 * r)
        if np.any(p3):
            tau = (5.0 * t[p3] - 2.0 * r) / r
            sv = time_profile(tau)
            dsv = time_profile_prime(tau) * (5.0 / r)
            H = self._H(theta[p3])
            Hp = self._Hprime(theta[p3])
            psi = H - theta[p3]
            L = theta[p3] + sv * psi
            Lth = 1.0 + sv * (Hp - 1.0)
            cl, sl = np.cos(L), np.sin(L)
            dt = np.stack([c[p3], s[p3]], axis=-1)
            dth = np.stack([-s[p3] / t[p3], c[p3] / t[p3]], axis=-1)
            dL = Lth[:, None] * dth + (dsv * psi)[:, None] * dt
            e_r = np.stack([cl, sl], axis=-1)
            e_t = np.stack([-sl, cl], axis=-1)
            J = np.zeros((int(p3.sum()), 3, 3))
            J[:, :2, :2] = rho * e_r[:, :, None] * dt[:, None, :] \
                + (t[p3] * rho)[:, None, None] * e_t[:, :, None] * dL[:, None, :]
            J[:, 2, 2] = lam
            out[p3] = J

        core = t < 0.4 * r
        if np.any(core):
            out[core] = np.diag([rho, rho, lam])
        return out[0] if single else out

    def _unit_dir_deriv(self, theta):
        t0 = 0.6 * self.radius
        theta = np.asarray(theta, dtype=float)
        p0 = np.stack([t0 * np.cos(theta), t0 * np.sin(theta),
                       np.zeros_like(theta)], axis=-1)
        G0 = self._G(np.full_like(theta, t0), theta)
        Jw = wedge_jacobian(self.fan, self.widths, p0, blends=self.blends)
        tang = np.stack([-t0 * np.sin(theta), t0 * np.cos(theta),
                         np.zeros_like(theta)], axis=-1)
        dG = np.einsum("nij,nj->ni", Jw, tang)[:, :2]
        nrm = np.linalg.norm(G0, axis=-1, keepdims=True)
        u = G0 / nrm
        du = (dG - u * np.sum(u * dG, axis=-1, keepdims=True)) / nrm
        return u, du


def _principal(theta):
    return np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi


def seglem_extend(smoother, x):
    """The cylindrical extension at frame points ``x``."""
    return smoother.evaluate(x)


# ---------------------------------------------------------------------------
# variable radius


class RampRadius:
    """Smoothstep radius profile r(x3) between r0 and r1 over [z0, z1]."""

    def __init__(self, r0, r1, z0, z1):
        if r0 <= 0 or r1 <= 0 or z1 <= z0:
            raise ParameterError("need positive radii and z1 > z0")
        self.r0, self.r1, self.z0, self.z1 = map(float, (r0, r1, z0, z1))
        self.max_slope = 2.0 * abs(r1 - r0) / (z1 - z0)

    def value(self, x3):
        u = (np.asarray(x3, dtype=float) - self.z0) / (self.z1 - self.z0)
        return self.r0 + (self.r1 - self.r0) * eta(u)

    def deriv(self, x3):
        u = (np.asarray(x3, dtype=float) - self.z0) / (self.z1 - self.z0)
        return (self.r1 - self.r0) / (self.z1 - self.z0) * eta_prime(u)


class ConstantRadius:
    def __init__(self, r):
        self.r0 = self.r1 = float(r)
        self.max_slope = 0.0

    def value(self, x3):
        return np.full_like(np.asarray(x3, dtype=float), self.r0)

    def deriv(self, x3):
        return np.zeros_like(np.asarray(x3, dtype=float))


class VariableRadiusMap:
    """The cylindrical extension with slicewise radius r(x3).

    Evaluation reuses the constant-radius formulas with per-point radius;
    the derivative is a central finite difference because the slices couple
    through r'(x3).
    """

    def __init__(self, smoother, radius_profile):
        self.smoother = smoother
        self.radius_profile = radius_profile

    def evaluate(self, x):
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = self.radius_profile.value(x[:, 2])
        out = self.smoother.evaluate(x, radius=r)
        return out[0] if single else out

    def __call__(self, x):
        return self.evaluate(x)

    def jacobian(self, x):
        single = np.asarray(x, dtype=float).ndim == 1
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = 1e-6 * self.smoother.radius
        J = np.empty((len(x), 3, 3))
        for j in range(3):
            dx = np.zeros(3)
            dx[j] = h
            J[:, :, j] = (self.evaluate(x + dx) - self.evaluate(x - dx)) / (2 * h)
        return J[0] if single else J


def cylinder_jacobian_floor(smoother, n_t=24, n_th=48, n_z=8, z_range=None):
    """Sampled minimum Jacobian determinant over the cylinder."""
    r = smoother.radius
    if z_range is None:
        z_range = (0.0, smoother.fan.length)
    tg = np.linspace(1e-3 * r, 0.999 * r, n_t)
    thg = np.linspace(-np.pi, np.pi, n_th, endpoint=False)
    zg = np.linspace(z_range[0], z_range[1], n_z)
    T, TH, Z = np.meshgrid(tg, thg, zg, indexing="ij")
    pts = np.stack([T * np.cos(TH), T * np.sin(TH), Z], axis=-1).reshape(-1, 3)
    dets = np.linalg.det(smoother.jacobian(pts))
    return float(np.min(dets))


def variable_radius_extend(smoother, radius_profile, certify=True, n=12000,
                           rng=None):
    """Build the r(x3) variant; with ``certify`` the sampled Jacobian must
    stay above half the constant-radius floor, else a parameter error names
    the offending slope bound."""
    vmap = VariableRadiusMap(smoother, radius_profile)
    if certify:
        floor = cylinder_jacobian_floor(smoother)
        rng = np.random.default_rng(rng if rng is not None else 0)
        z0 = getattr(radius_profile, "z0", 0.0)
        z1 = getattr(radius_profile, "z1", smoother.fan.length)
        span = max(z1 - z0, 1e-12)
        z = rng.uniform(z0 - 0.2 * span, z1 + 0.2 * span, n)
        rloc = radius_profile.value(z)
        t = rloc * np.sqrt(rng.uniform(1e-4, 0.998 ** 2, n))
        th = rng.uniform(-np.pi, np.pi, n)
        pts = np.stack([t * np.cos(th), t * np.sin(th), z], axis=-1)
        dets = np.linalg.det(vmap.jacobian(pts))
        if float(np.min(dets)) < 0.5 * floor:
            raise ParameterError(
                f"radius slope too large (|r'| <= {radius_profile.max_slope:.3e}): "
                f"sampled Jacobian {float(np.min(dets)):.3e} fell below half the "
                f"constant-radius floor {floor:.3e}")
    return vmap


def find_xi(smoother, start_slope=2.0, n=4000, max_halvings=12):
    """Largest certified |r'| bound, found by halving from ``start_slope``."""
    r = smoother.radius
    L = max(smoother.fan.length, 4 * r)
    slope = start_slope
    for _ in range(max_halvings):
        dz = 2.0 * abs(0.5 * r) / slope
        prof = RampRadius(r, 1.5 * r, 0.25 * L, 0.25 * L + max(dz, 1e-9))
        try:
            variable_radius_extend(smoother, prof, certify=True, n=n)
            return slope
        except ParameterError:
            slope *= 0.5
    return 0.0
