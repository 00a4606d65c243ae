"""Pure-numpy kernel backend.

All kernels take one explicit leading batch axis and are vectorized over it.
Shapes are written as (B, n) for stacked vectors and (B, n, n) for stacked
matrices; cubature point sets are (B, 2n, n).

Factorization failures are reported through boolean success flags rather
than exceptions so that callers decide how to escalate; the numba backend
mirrors the same convention.
"""

import numpy as np

from ._policy import JITTER_START, JITTER_MAX, CT_OMEGA_FLOOR

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Wrap angles elementwise to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), TWO_PI)


def _chol_single(a):
    """Cholesky of one matrix with jitter escalation.

    Returns (lower, ok). The jitter ladder adds eps*I with eps doubling
    from JITTER_START; gives up once eps exceeds JITTER_MAX.
    """
    eye = np.eye(a.shape[0])
    eps = 0.0
    while True:
        try:
            lower = np.linalg.cholesky(a + eps * eye if eps else a)
            if np.isfinite(lower).all():
                return lower, True
        except np.linalg.LinAlgError:
            pass
        eps = JITTER_START if eps == 0.0 else 2.0 * eps
        if eps > JITTER_MAX:
            return np.zeros_like(a), False


def chol_spd(a):
    """Batched lower Cholesky factors of (B, n, n) with jitter escalation.

    Returns (lower (B, n, n), ok (B,) bool).
    """
    a = np.asarray(a, dtype=np.float64)
    b = a.shape[0]
    try:
        lower = np.linalg.cholesky(a)
        if np.isfinite(lower).all():
            return lower, np.ones(b, dtype=bool)
    except np.linalg.LinAlgError:
        pass
    # slow path: escalate per matrix
    lower = np.zeros_like(a)
    ok = np.zeros(b, dtype=bool)
    for i in range(b):
        lower[i], ok[i] = _chol_single(a[i])
    return lower, ok


def inv_spd(a):
    """Batched symmetric positive definite inverse via Cholesky.

    Returns (inverse (B, n, n), ok (B,) bool); the inverse is symmetrized.
    """
    lower, ok = chol_spd(a)
    b, n, _ = lower.shape
    # failed slots carry a zero factor; give them identity so inv() is defined
    safe = lower.copy()
    safe[~ok] = np.eye(n)
    linv = np.linalg.inv(safe)
    out = linv.swapaxes(-1, -2) @ linv
    out = 0.5 * (out + out.swapaxes(-1, -2))
    out[~ok] = 0.0
    return out, ok


def cubature_points(mean, lower):
    """Spread (B, n) means into (B, 2n, n) cubature point sets.

    Points are mean +- sqrt(n) * column_j(lower), all with weight 1/(2n).
    """
    mean = np.asarray(mean, dtype=np.float64)
    b, n = mean.shape
    scaled = np.sqrt(n) * lower.swapaxes(-1, -2)  # (B, n, n): row j = sqrt(n)*L[:, j]
    pts = np.empty((b, 2 * n, n))
    pts[:, :n, :] = mean[:, None, :] + scaled
    pts[:, n:, :] = mean[:, None, :] - scaled
    return pts


def moments(pts):
    """Equally weighted mean and central covariance of (B, 2n, n) point sets.

    Returns (mean (B, n), cov (B, n, n)); cov is symmetrized and carries no
    additive noise term, callers add process covariance themselves.
    """
    mean = pts.mean(axis=1)
    d = pts - mean[:, None, :]
    cov = np.einsum("bpi,bpj->bij", d, d) / pts.shape[1]
    cov = 0.5 * (cov + cov.swapaxes(-1, -2))
    return mean, cov


def cross_from_centered(dx, dz):
    """Cross-covariance (B, n, m) from centered point deviations.

    dx is (B, P, n), dz is (B, P, m); both already have their means removed
    (angular components wrapped by the caller).
    """
    return np.einsum("bpi,bpj->bij", dx, dz) / dx.shape[1]


def ct_propagate(pts, dt):
    """Coordinated-turn transition applied to (B, 5) state points.

    State layout is (a, a_dot, b, b_dot, omega). Below CT_OMEGA_FLOOR in
    |omega * dt| the constant-velocity limit is used.
    """
    pts = np.asarray(pts, dtype=np.float64)
    a, ad, b, bd, w = (pts[:, i] for i in range(5))
    wd = w * dt
    small = np.abs(wd) < CT_OMEGA_FLOOR
    w_safe = np.where(small, 1.0, w)
    s = np.sin(wd)
    c = np.cos(wd)
    sin_w = np.where(small, dt, s / w_safe)
    omc_w = np.where(small, 0.0, (1.0 - c) / w_safe)
    s = np.where(small, 0.0, s)
    c = np.where(small, 1.0, c)
    out = np.empty_like(pts)
    out[:, 0] = a + sin_w * ad - omc_w * bd
    out[:, 1] = c * ad - s * bd
    out[:, 2] = omc_w * ad + b + sin_w * bd
    out[:, 3] = s * ad + c * bd
    out[:, 4] = w
    return out


def range_bearing(pts, px, py):
    """Range and bearing of (B, 5) state points from a sensor at (px, py).

    Returns (B, 2) with range in column 0 and bearing (radians, atan2
    convention) in column 1. Zero range yields range 0.0; callers treat
    that as a geometry failure.
    """
    dx = pts[:, 0] - px
    dy = pts[:, 2] - py
    out = np.empty((pts.shape[0], 2))
    out[:, 0] = np.sqrt(dx * dx + dy * dy)
    out[:, 1] = np.arctan2(dy, dx)
    return out
