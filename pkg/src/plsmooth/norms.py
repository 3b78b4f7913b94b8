"""Norm machinery: adaptive tetrahedral quadrature, empirical decreasing
rearrangements, and the supported rearrangement-invariant norms (L^p,
Lorentz L^{p,q}, L^inf) with their fundamental functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import InvalidInputError, ParseError


# ---------------------------------------------------------------------------
# quadrature


class QuadratureScheme:
    """Symmetric order-5+ tetrahedral rule with two-level adaptive
    subdivision (refine until estimates agree to ``rtol`` or ``max_depth``)."""

    def __init__(self, rtol=1e-3, max_depth=8, n=3):
        self.rtol = rtol
        self.max_depth = max_depth
        self.n = n

    def integrate_tet(self, fn, tet):
        tet = np.asarray(tet, dtype=float)
        return self._rec(fn, tet, 0, None)

    def _value(self, fn, tet):
        pts, wts = geo.map_tet_rule(tet, self.n)
        return float(np.dot(np.asarray(fn(pts), dtype=float), wts))

    def _rec(self, fn, tet, depth, coarse):
        if coarse is None:
            coarse = self._value(fn, tet)
        children = geo.subdivide_tet(tet)
        fine_parts = [self._value(fn, c) for c in children]
        fine = float(np.sum(fine_parts))
        ref = max(abs(fine), abs(coarse), 1e-300)
        if abs(fine - coarse) <= self.rtol * ref or depth >= self.max_depth:
            return fine
        return float(sum(self._rec(fn, c, depth + 1, f)
                         for c, f in zip(children, fine_parts)))

    def integrate_complex(self, fn, complex, skip=None):
        total = 0.0
        for ci in range(complex.n_cells):
            if skip is not None and skip(ci):
                continue
            total += self.integrate_tet(fn, complex.cell_points(ci))
        return total

    def nodes_complex(self, complex, skip=None, levels=1):
        """Fixed (points, weights) nodes over all cells, refined ``levels``
        times uniformly; used for sampling-style norms."""
        pts, wts = [], []
        for ci in range(complex.n_cells):
            if skip is not None and skip(ci):
                continue
            stack = [(complex.cell_points(ci), 0)]
            while stack:
                tet, d = stack.pop()
                if d < levels:
                    stack.extend((c, d + 1) for c in geo.subdivide_tet(tet))
                else:
                    p, w = geo.map_tet_rule(tet, self.n)
                    pts.append(p)
                    wts.append(w)
        if not pts:
            return np.zeros((0, 3)), np.zeros(0)
        return np.vstack(pts), np.concatenate(wts)


# ---------------------------------------------------------------------------
# rearrangement


@dataclass
class StepFunction:
    """Nonincreasing right-continuous step function on [0, total)."""

    values: np.ndarray     # descending
    breaks: np.ndarray     # cumulative widths, same length

    @property
    def total(self):
        return float(self.breaks[-1]) if len(self.breaks) else 0.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breaks, s, side="right")
        vals = np.append(self.values, 0.0)
        return vals[np.minimum(idx, len(self.values))]


def rearrangement(values, weights):
    """Empirical decreasing rearrangement of weighted samples."""
    values = np.abs(np.asarray(values, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise InvalidInputError("weights must be nonnegative")
    keep = weights > 0
    values, weights = values[keep], weights[keep]
    order = np.argsort(values)[::-1]
    v = values[order]
    w = weights[order]
    return StepFunction(values=v, breaks=np.cumsum(w))


# ---------------------------------------------------------------------------
# rearrangement-invariant norms


class RINorm:
    """One of L^p, Lorentz L^{p,q}, or L^inf on weighted samples."""

    def __init__(self, kind, p=None, q=None):
        kind = kind.lower()
        if kind not in ("lp", "lorentz", "linf"):
            raise InvalidInputError(f"unsupported norm kind {kind!r}")
        self.kind = kind
        if kind == "lp":
            if p is None or p < 1:
                raise InvalidInputError("Lp needs p >= 1")
            self.p, self.q = float(p), float(p)
        elif kind == "lorentz":
            if p is None or q is None or p < 1 or q < 1:
                raise InvalidInputError("Lorentz needs p, q >= 1")
            self.p, self.q = float(p), float(q)
        else:
            self.p = self.q = np.inf

    def __repr__(self):
        if self.kind == "linf":
            return "Linf"
        if self.kind == "lp":
            return f"L{self.p:g}"
        return f"Lorentz({self.p:g},{self.q:g})"

    def of_step(self, f):
        if len(f.values) == 0:
            return 0.0
        if self.kind == "linf":
            return float(f.values[0])
        p, q = self.p, self.q
        t = np.concatenate([[0.0], f.breaks])
        # integral of (t^{1/p} f(t))^q dt/t on each flat piece, exactly
        seg = (p / q) * (t[1:] ** (q / p) - t[:-1] ** (q / p))
        return float(np.sum(f.values ** q * seg) ** (1.0 / q))

    def __call__(self, values, weights):
        return self.of_step(rearrangement(values, weights))

    def fundamental(self, s):
        """phi_X(s): the norm of an indicator of a measure-s set."""
        s = np.asarray(s, dtype=float)
        if self.kind == "linf":
            return np.where(s > 0, 1.0, 0.0)
        if self.kind == "lp":
            return s ** (1.0 / self.p)
        return (self.p / self.q) ** (1.0 / self.q) * s ** (1.0 / self.p)


def ri_norm(norm, values, weights):
    return norm(values, weights)


def parse_norm(spec):
    """Parse 'lp:2', 'lorentz:2:1', or 'linf'."""
    parts = str(spec).split(":")
    kind = parts[0].lower()
    try:
        if kind == "linf":
            return RINorm("linf")
        if kind == "lp":
            return RINorm("lp", p=float(parts[1]))
        if kind == "lorentz":
            return RINorm("lorentz", p=float(parts[1]), q=float(parts[2]))
    except (IndexError, ValueError) as exc:
        raise ParseError(f"cannot parse norm spec {spec!r}: {exc}") from None
    raise ParseError(f"unknown norm kind in spec {spec!r}")


def rozumny_check(norm, M, deltas, total_measure=1.0):
    """Smallness table for the worst-case indicator family u = M chi_G with
    measure(G) = delta * total_measure; returns rows (delta, norm/measure)."""
    rows = []
    for d in np.asarray(deltas, dtype=float):
        val = float(M * norm.fundamental(d * total_measure)) / total_measure
        rows.append((float(d), val))
    return rows


# ---------------------------------------------------------------------------
# map-difference norms (driven by the pipeline's difference quadrature)


def _matrix_norms(A):
    return np.linalg.norm(A, ord=2, axis=(1, 2))


def w1p_difference(f, g, p):
    """(integral of |Dg - Df|^p over the set where they differ)^{1/p}.

    ``g`` must provide difference_quadrature() -> (points, weights) covering
    {g != f}; cells disjoint from it contribute exactly zero.
    """
    pts, wts = g.difference_quadrature()
    if len(pts) == 0:
        return 0.0
    vals = _matrix_norms(np.asarray(g.derivative(pts))
                         - np.asarray(f.derivative(pts)))
    return float(np.sum(wts * vals ** p) ** (1.0 / p))


def linf_difference(f, g, n_refine=3, rng=None):
    """sup |g - f|, by dense sampling of the difference region with local
    refinement around the running maximum."""
    pts, wts = g.difference_quadrature()
    pts = pts[wts > 0]
    if len(pts) == 0:
        return 0.0
    rng = np.random.default_rng(rng if rng is not None else 0)
    diff = np.linalg.norm(np.asarray(g.evaluate(pts)) - np.asarray(f(pts)),
                          axis=-1)
    best = float(np.max(diff))
    center = pts[int(np.argmax(diff))]
    radius = 0.1 * float(np.max(np.ptp(pts, axis=0)) or 1.0)
    for _ in range(n_refine):
        trial = center + rng.normal(scale=radius, size=(400, 3))
        inside = g.contains(trial)
        trial = trial[inside]
        if len(trial) == 0:
            radius *= 0.5
            continue
        d = np.linalg.norm(np.asarray(g.evaluate(trial))
                           - np.asarray(f(trial)), axis=-1)
        k = int(np.argmax(d))
        if d[k] > best:
            best = float(d[k])
            center = trial[k]
        radius *= 0.5
    return best
