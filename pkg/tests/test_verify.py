"""Certification helper tests."""

import numpy as np
import pytest

from plsmooth.verify import (CertificationReport, fd_check, injectivity_audit,
                             jacobian_grid)

BOX = (np.full(3, -1.0), np.full(3, 1.0))


def _quad_map(x):
    x = np.atleast_2d(x)
    out = np.empty_like(x)
    out[:, 0] = x[:, 0] + 0.1 * x[:, 1] ** 2
    out[:, 1] = x[:, 1]
    out[:, 2] = x[:, 2] + 0.05 * x[:, 0] * x[:, 1]
    return out


def _quad_jac(x):
    x = np.atleast_2d(x)
    J = np.tile(np.eye(3), (len(x), 1, 1))
    J[:, 0, 1] = 0.2 * x[:, 1]
    J[:, 2, 0] = 0.05 * x[:, 1]
    J[:, 2, 1] = 0.05 * x[:, 0]
    return J


def test_fd_check_passes_correct_jacobian():
    rep = fd_check(_quad_map, _quad_jac, BOX, n=200, seed=0)
    assert rep.passed
    assert rep.worst < 1e-5


def test_fd_check_catches_wrong_jacobian():
    def bad_jac(x):
        J = _quad_jac(x)
        J[:, 0, 1] *= 2.0
        return J

    rep = fd_check(_quad_map, bad_jac, BOX, n=200, seed=0)
    assert not rep.passed
    assert rep.witness is not None


def test_jacobian_grid_floor():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, size=(500, 3))
    rep = jacobian_grid(_quad_jac, pts, floor=0.5)
    assert rep.passed
    rep = jacobian_grid(_quad_jac, pts, floor=1.5)
    assert not rep.passed
    assert rep.witness is not None


def test_injectivity_audit_accepts_injective():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(3000, 3))
    rep = injectivity_audit(_quad_map, pts)
    assert rep.passed


def test_injectivity_audit_flags_fold():
    def fold(x):
        x = np.atleast_2d(x)
        out = x.copy()
        out[:, 0] = x[:, 0] ** 2
        return out

    rng = np.random.default_rng(3)
    base = rng.uniform(0.1, 1, size=(500, 3))
    mirror = base.copy()
    mirror[:, 0] *= -1.0          # fold partners with identical images
    pts = np.vstack([base, mirror])
    rep = injectivity_audit(fold, pts)
    assert not rep.passed
    assert rep.witness is not None
    a, b = rep.witness
    assert np.linalg.norm(fold(a) - fold(b)) < 1e-8
    assert np.linalg.norm(np.asarray(a) - np.asarray(b)) > 1e-4


def test_report_str():
    rep = CertificationReport(name="demo", samples=10, worst=0.5,
                              tolerance=1.0, passed=True)
    assert "[PASS]" in str(rep)
    rep.passed = False
    assert "[FAIL]" in str(rep)
