"""Numba kernel backend.

Mirrors the `_numpy` module function for function with @njit loop
implementations. Compiled objects are cached on disk, so the JIT cost is
paid once per machine, not once per process.
"""

import math

import numpy as np
from numba import njit

from ._policy import JITTER_START, JITTER_MAX, CT_OMEGA_FLOOR

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def wrap_angle(x):
    out = np.empty_like(x)
    flat_in = x.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = math.pi - (math.pi - flat_in[i]) % TWO_PI
    return out


@njit(cache=True)
def _chol_one(a, eps, out):
    """Lower Cholesky of a + eps*I into out; returns False on a bad pivot."""
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for j in range(n):
        s = a[j, j] + eps
        for k in range(j):
            s -= out[j, k] * out[j, k]
        if not (s > 0.0) or not math.isfinite(s):
            return False
        d = math.sqrt(s)
        out[j, j] = d
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            out[i, j] = s / d
    return True


@njit(cache=True)
def chol_spd(a):
    b, n, _ = a.shape
    lower = np.zeros((b, n, n))
    ok = np.zeros(b, np.bool_)
    for i in range(b):
        eps = 0.0
        while True:
            if _chol_one(a[i], eps, lower[i]):
                ok[i] = True
                break
            eps = JITTER_START if eps == 0.0 else 2.0 * eps
            if eps > JITTER_MAX:
                for r in range(n):
                    for c in range(n):
                        lower[i, r, c] = 0.0
                break
    return lower, ok


@njit(cache=True)
def _tri_lower_inv(lower, out):
    """Inverse of a lower-triangular matrix by forward substitution."""
    n = lower.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for j in range(n):
        out[j, j] = 1.0 / lower[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s += lower[i, k] * out[k, j]
            out[i, j] = -s / lower[i, i]


@njit(cache=True)
def inv_spd(a):
    b, n, _ = a.shape
    lower, ok = chol_spd(a)
    out = np.zeros((b, n, n))
    linv = np.zeros((n, n))
    for i in range(b):
        if not ok[i]:
            continue
        _tri_lower_inv(lower[i], linv)
        # inv = linv^T @ linv, symmetrized
        for r in range(n):
            for c in range(r, n):
                s = 0.0
                for k in range(max(r, c), n):
                    s += linv[k, r] * linv[k, c]
                out[i, r, c] = s
                out[i, c, r] = s
    return out, ok


@njit(cache=True)
def cubature_points(mean, lower):
    b, n = mean.shape
    root = math.sqrt(n)
    pts = np.empty((b, 2 * n, n))
    for i in range(b):
        for j in range(n):
            for k in range(n):
                step = root * lower[i, k, j]
                pts[i, j, k] = mean[i, k] + step
                pts[i, j + n, k] = mean[i, k] - step
    return pts


@njit(cache=True)
def moments(pts):
    b, p, n = pts.shape
    mean = np.zeros((b, n))
    cov = np.zeros((b, n, n))
    for i in range(b):
        for j in range(p):
            for k in range(n):
                mean[i, k] += pts[i, j, k]
        for k in range(n):
            mean[i, k] /= p
        for j in range(p):
            for r in range(n):
                dr = pts[i, j, r] - mean[i, r]
                for c in range(r, n):
                    cov[i, r, c] += dr * (pts[i, j, c] - mean[i, c])
        for r in range(n):
            for c in range(r, n):
                v = cov[i, r, c] / p
                cov[i, r, c] = v
                cov[i, c, r] = v
    return mean, cov


@njit(cache=True)
def cross_from_centered(dx, dz):
    b, p, n = dx.shape
    m = dz.shape[2]
    out = np.zeros((b, n, m))
    for i in range(b):
        for j in range(p):
            for r in range(n):
                for c in range(m):
                    out[i, r, c] += dx[i, j, r] * dz[i, j, c]
        for r in range(n):
            for c in range(m):
                out[i, r, c] /= p
    return out


@njit(cache=True)
def ct_propagate(pts, dt):
    b = pts.shape[0]
    out = np.empty_like(pts)
    for i in range(b):
        a = pts[i, 0]
        ad = pts[i, 1]
        bb = pts[i, 2]
        bd = pts[i, 3]
        w = pts[i, 4]
        wd = w * dt
        if abs(wd) < CT_OMEGA_FLOOR:
            out[i, 0] = a + dt * ad
            out[i, 1] = ad
            out[i, 2] = bb + dt * bd
            out[i, 3] = bd
        else:
            s = math.sin(wd)
            c = math.cos(wd)
            sin_w = s / w
            omc_w = (1.0 - c) / w
            out[i, 0] = a + sin_w * ad - omc_w * bd
            out[i, 1] = c * ad - s * bd
            out[i, 2] = omc_w * ad + bb + sin_w * bd
            out[i, 3] = s * ad + c * bd
        out[i, 4] = w
    return out


@njit(cache=True)
def range_bearing(pts, px, py):
    b = pts.shape[0]
    out = np.empty((b, 2))
    for i in range(b):
        dx = pts[i, 0] - px
        dy = pts[i, 2] - py
        out[i, 0] = math.sqrt(dx * dx + dy * dy)
        out[i, 1] = math.atan2(dy, dx)
    return out
