"""Smooth step profile and the elementary face-blending map.

The blend replaces a piecewise affine map, given by two affine pieces that
agree on the plane {y1 = 0} of a face frame, with a convex combination
inside the strip 0 < y1 < w(y2, y3).  All derivatives are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DomainError, InvalidInputError


# ---------------------------------------------------------------------------
# the step profile


def eta(t):
    """Smooth step: 0 for t<=0, 1 for t>=1, with 0 <= eta' <= 2."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    lo = t <= 0.0
    hi = t >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    tm = t[mid]
    out[mid] = expit(1.0 / (1.0 - tm) - 1.0 / tm)
    return out if out.ndim else float(out)


def _psi(t):
    # -phi'(t) for phi = 1/t - 1/(1-t)
    return 1.0 / t ** 2 + 1.0 / (1.0 - t) ** 2


def eta_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    e = expit(1.0 / (1.0 - tm) - 1.0 / tm)
    out[mid] = e * (1.0 - e) * _psi(tm)
    return out if out.ndim else float(out)


def eta_second(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    e = expit(1.0 / (1.0 - tm) - 1.0 / tm)
    ep = e * (1.0 - e) * _psi(tm)
    psi_p = -2.0 / tm ** 3 + 2.0 / (1.0 - tm) ** 3
    out[mid] = ep * (1.0 - 2.0 * e) * _psi(tm) + e * (1.0 - e) * psi_p
    return out if out.ndim else float(out)


class BlendProfile:
    """The fixed profile; a construction-time check rejects any variant
    whose derivative exceeds 2."""

    def __init__(self, fn=eta, dfn=eta_prime, d2fn=eta_second, check=True):
        self.eta = fn
        self.eta_prime = dfn
        self.eta_second = d2fn
        if check:
            t = np.linspace(0.0, 1.0, 20001)
            m = float(np.max(dfn(t)))
            if m > 2.0 + 1e-9:
                raise InvalidInputError(f"profile violates eta' <= 2 (sup {m})")


DEFAULT_PROFILE = BlendProfile()


def time_profile(t):
    """Reparameterized step, identically 0 on [0,1/3] and 1 on [2/3,1]."""
    return eta(3.0 * np.asarray(t, dtype=float) - 1.0)


def time_profile_prime(t):
    return 3.0 * eta_prime(3.0 * np.asarray(t, dtype=float) - 1.0)


# ---------------------------------------------------------------------------
# width fields


class ConstantWidth:
    def __init__(self, w):
        if w <= 0:
            raise DomainError("width must be positive")
        self.w = float(w)
        self.grad_bound = 0.0

    def value(self, y2, y3):
        return np.full_like(np.asarray(y2, dtype=float), self.w)

    def gradient(self, y2, y3):
        z = np.zeros_like(np.asarray(y2, dtype=float))
        return z, z


class RampWidth:
    """Smoothstep ramp between two widths along an in-plane direction.

    w(y2,y3) = wa + (wb-wa) * eta((u - u0)/ell) with u = c2*y2 + c3*y3.
    The gradient is analytic; its sup norm is 2|wb-wa|/ell.
    """

    def __init__(self, wa, wb, u0=0.0, ell=1.0, direction=(1.0, 0.0)):
        if wa <= 0 or wb <= 0 or ell <= 0:
            raise DomainError("ramp widths and length must be positive")
        self.wa, self.wb, self.u0, self.ell = float(wa), float(wb), float(u0), float(ell)
        d = np.asarray(direction, dtype=float)
        self.dir = d / np.linalg.norm(d)
        self.grad_bound = 2.0 * abs(wb - wa) / ell

    def value(self, y2, y3):
        u = self.dir[0] * np.asarray(y2, dtype=float) + self.dir[1] * np.asarray(y3, dtype=float)
        return self.wa + (self.wb - self.wa) * eta((u - self.u0) / self.ell)

    def gradient(self, y2, y3):
        u = self.dir[0] * np.asarray(y2, dtype=float) + self.dir[1] * np.asarray(y3, dtype=float)
        g = (self.wb - self.wa) / self.ell * eta_prime((u - self.u0) / self.ell)
        return g * self.dir[0], g * self.dir[1]


# ---------------------------------------------------------------------------
# face blending


@dataclass
class FaceBlend:
    """Blend of two affine pieces across the plane {y1 = 0} of a frame.

    frame_origin/frame_R define local coordinates y = R (x - origin); the
    piece (M_neg, c_neg) applies on y1 <= 0 and (M_pos, c_pos) on y1 >= w.
    ``width`` is a ConstantWidth or RampWidth field on (y2, y3); ``sigma``
    is the certified gradient bound (inf when the pieces coincide).
    """

    frame_origin: np.ndarray
    frame_R: np.ndarray
    M_neg: np.ndarray
    c_neg: np.ndarray
    M_pos: np.ndarray
    c_pos: np.ndarray
    width: object
    sigma: float = np.inf
    floor: float = 0.0
    profile: BlendProfile = field(default=DEFAULT_PROFILE, repr=False)

    def local(self, x):
        return (np.atleast_2d(x) - self.frame_origin) @ self.frame_R.T

    def f(self, x):
        """The unblended piecewise affine map."""
        x = np.atleast_2d(x)
        y1 = self.local(x)[:, 0]
        neg = x @ self.M_neg.T + self.c_neg
        pos = x @ self.M_pos.T + self.c_pos
        return np.where((y1 <= 0.0)[:, None], neg, pos)

    def __call__(self, x):
        return face_blend(self, x)

    def jacobian(self, x):
        return face_blend_jacobian(self, x)


def face_blend(blend, x):
    """Evaluate the blended map at points ``x`` (N,3) or a single point."""
    single = np.asarray(x, dtype=float).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = blend.local(x)
    w = blend.width.value(y[:, 1], y[:, 2])
    if np.any(w <= 0):
        raise DomainError("width field non-positive at a query point")
    u = y[:, 0] / w
    e = blend.profile.eta(u)
    neg = x @ blend.M_neg.T + blend.c_neg
    pos = x @ blend.M_pos.T + blend.c_pos
    out = (1.0 - e)[:, None] * neg + e[:, None] * pos
    # exact equality with f off the strip
    off_neg = y[:, 0] <= 0.0
    off_pos = y[:, 0] >= w
    out[off_neg] = neg[off_neg]
    out[off_pos] = pos[off_pos]
    return out[0] if single else out


def face_blend_jacobian(blend, x):
    """Analytic Jacobian of the blended map, shape (N,3,3)."""
    single = np.asarray(x, dtype=float).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = blend.local(x)
    w = blend.width.value(y[:, 1], y[:, 2])
    if np.any(w <= 0):
        raise DomainError("width field non-positive at a query point")
    u = y[:, 0] / w
    e = blend.profile.eta(u)
    ep = blend.profile.eta_prime(u)
    neg = x @ blend.M_neg.T + blend.c_neg
    pos = x @ blend.M_pos.T + blend.c_pos
    diff = pos - neg
    n = blend.frame_R[0]
    t2 = blend.frame_R[1]
    t3 = blend.frame_R[2]
    g2, g3 = blend.width.gradient(y[:, 1], y[:, 2])
    # grad of u = y1/w(y2,y3) in world coordinates
    gradu = (1.0 / w)[:, None] * n[None, :] \
        - (y[:, 0] / w ** 2)[:, None] * (g2[:, None] * t2[None, :] + g3[:, None] * t3[None, :])
    J = (1.0 - e)[:, None, None] * blend.M_neg[None] + e[:, None, None] * blend.M_pos[None]
    J = J + ep[:, None, None] * diff[:, :, None] * gradu[:, None, :]
    off = (y[:, 0] <= 0.0) | (y[:, 0] >= w)
    J[off & (y[:, 0] <= 0.0)] = blend.M_neg
    J[off & (y[:, 0] > 0.0)] = blend.M_pos
    return J[0] if single else J


def _normalized_frame_data(blend):
    """Quantities of the blend in its fully normalized frame.

    Returns (a1, a2, J2, dnorm, Gamma): the two normal stretches with
    0 < a1 <= a2, the tangential 2x2 determinant, |(Mpos - Mneg) n|, and a
    norm bound on the unperturbed derivative over the strip.
    """
    n = blend.frame_R[0]
    D = blend.M_pos - blend.M_neg
    d = D @ n
    # image plane normal: common tangential image vectors
    v2 = blend.M_neg @ blend.frame_R[1]
    v3 = blend.M_neg @ blend.frame_R[2]
    nu = np.cross(v2, v3)
    nun = np.linalg.norm(nu)
    if nun < 1e-300:
        raise InvalidInputError("degenerate image face (J2 = 0)")
    nu = nu / nun
    s_neg = float(nu @ (blend.M_neg @ n))
    s_pos = float(nu @ (blend.M_pos @ n))
    if s_neg < 0:
        nu, s_neg, s_pos = -nu, -s_neg, -s_pos
    if s_neg <= 0 or s_pos <= 0:
        raise InvalidInputError("pieces do not cross the face plane consistently")
    a1, a2 = min(s_neg, s_pos), max(s_neg, s_pos)
    # tangential 2x2 determinant in orthonormal tangent bases
    t2i = v2 - (nu @ v2) * nu
    t3i = v3 - (nu @ v3) * nu
    b2 = t2i / np.linalg.norm(t2i)
    b3 = np.cross(nu, b2)
    J2 = float((b2 @ t2i) * (b3 @ t3i) - (b3 @ t2i) * (b2 @ t3i))
    Gamma = max(np.linalg.norm(blend.M_neg, 2), np.linalg.norm(blend.M_pos, 2)) \
        + 2.0 * np.linalg.norm(d)
    return a1, a2, abs(J2), float(np.linalg.norm(d)), float(Gamma)


def sigma_for_face(blend, empirical=False, rng=None):
    """Certified width-gradient bound and the matching Jacobian floor.

    The blend's Jacobian is the constant-width Jacobian plus a rank-one
    perturbation bounded by 2|d| |Dw|; an adjugate bound turns that into
    J >= a1*J2 - 2|d| sigma Gamma^2.  sigma is chosen so the right side
    stays above floor = a1*J2/2.

    Returns (sigma, floor) and, with empirical=True, additionally a bisected
    diagnostic sigma_emp from dense Jacobian sampling.
    """
    a1, a2, J2, dnorm, Gamma = _normalized_frame_data(blend)
    if J2 <= 0:
        raise InvalidInputError("degenerate image face (J2 = 0)")
    floor = 0.5 * a1 * J2
    if dnorm == 0.0:
        sigma = np.inf
    else:
        sigma = floor / (2.0 * dnorm * Gamma ** 2)
    if not empirical:
        return sigma, floor
    sigma_emp = _empirical_sigma(blend, floor, rng=rng)
    return sigma, floor, sigma_emp


def _empirical_sigma(blend, floor, rng=None, n=4000):
    """Bisection on the width-gradient magnitude with dense sampling of the
    strip Jacobian; diagnostic only."""
    rng = np.random.default_rng(rng)
    w0 = float(np.min(blend.width.value(np.zeros(1), np.zeros(1))))
    lo, hi = 0.0, 4.0
    pts_loc = np.column_stack([
        rng.uniform(0, 1, n), rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)])

    def ok(slope):
        ramp = RampWidth(w0, w0 * (1 + slope * 6.0 / (2.0 * w0)), u0=-3.0, ell=6.0) \
            if slope > 0 else ConstantWidth(w0)
        trial = FaceBlend(blend.frame_origin, blend.frame_R, blend.M_neg,
                          blend.c_neg, blend.M_pos, blend.c_pos, ramp,
                          profile=blend.profile)
        y = pts_loc.copy()
        y[:, 0] *= ramp.value(y[:, 1], y[:, 2])
        x = y @ trial.frame_R + trial.frame_origin
        J = face_blend_jacobian(trial, x)
        return float(np.min(np.linalg.det(J))) >= floor - 1e-12

    if not ok(0.0):
        return 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        ramp_bound = 2.0 * abs(mid * 6.0 / 2.0) / 6.0  # grad sup of the trial ramp
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
