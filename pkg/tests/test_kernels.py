"""Kernel backends: wrapping, factorizations, propagation, parity."""

import numpy as np
import pytest

from rcif import kernels
from rcif.kernels import _numba, _numpy
from rcif.kernels._policy import CT_OMEGA_FLOOR, JITTER_MAX

BACKENDS = [_numpy, _numba]


def rng_of(seed=0):
    return np.random.default_rng(seed)


def spd_batch(rng, b, n, scale=1.0):
    a = rng.standard_normal((b, n, n))
    return scale * (a @ a.swapaxes(1, 2) + n * np.eye(n))


@pytest.mark.parametrize("backend", BACKENDS)
def test_wrap_angle_interval(backend):
    x = np.array([0.0, np.pi, -np.pi, 3 * np.pi, -3 * np.pi, 7.5, -7.5,
                  np.pi - 1e-12, np.pi + 1e-12])
    w = backend.wrap_angle(x)
    assert (w > -np.pi).all() and (w <= np.pi).all()
    # the interval is half open: both +-pi map to +pi
    assert w[1] == np.pi
    assert w[2] == np.pi
    assert np.allclose(w[3], np.pi)
    assert np.allclose(w[5], 7.5 - 2 * np.pi)


@pytest.mark.parametrize("backend", BACKENDS)
def test_wrap_angle_periodicity(backend):
    x = rng_of(1).uniform(-20, 20, size=257)
    w = backend.wrap_angle(x)
    assert np.allclose(np.sin(w), np.sin(x), atol=1e-12)
    assert np.allclose(np.cos(w), np.cos(x), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_chol_spd_recovers_factor(backend):
    mats = spd_batch(rng_of(2), 6, 5)
    lower, ok = backend.chol_spd(mats)
    assert ok.all()
    assert np.allclose(lower @ lower.swapaxes(1, 2), mats, rtol=1e-10,
                       atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
def test_chol_jitter_rescues_semidefinite(backend):
    # rank-deficient PSD matrix: plain Cholesky fails, jitter succeeds
    v = np.array([[1.0, 2.0, 3.0]])
    mats = (v.T @ v)[None]
    lower, ok = backend.chol_spd(mats)
    assert ok.all()
    assert np.allclose(lower[0] @ lower[0].T, mats[0], atol=1e-5)


@pytest.mark.parametrize("backend", BACKENDS)
def test_chol_gives_up_on_indefinite(backend):
    mats = np.diag([1.0, -1.0])[None]
    lower, ok = backend.chol_spd(mats)
    assert not ok[0]
    assert (lower[0] == 0.0).all()


@pytest.mark.parametrize("backend", BACKENDS)
def test_chol_mixed_batch_flags_only_bad_slot(backend):
    good = spd_batch(rng_of(3), 1, 4)[0]
    mats = np.stack([good, -np.eye(4)])
    lower, ok = backend.chol_spd(mats)
    assert ok.tolist() == [True, False]
    assert np.allclose(lower[0] @ lower[0].T, good, atol=1e-8)


@pytest.mark.parametrize("backend", BACKENDS)
def test_jitter_stays_below_ceiling(backend):
    # perturbation far above the jitter ceiling must not be rescued
    mats = (np.eye(3) * -4 * JITTER_MAX)[None]
    _, ok = backend.chol_spd(mats)
    assert not ok[0]


@pytest.mark.parametrize("backend", BACKENDS)
def test_inv_spd_matches_numpy_inverse(backend):
    mats = spd_batch(rng_of(4), 5, 4)
    inv, ok = backend.inv_spd(mats)
    assert ok.all()
    assert np.allclose(inv, np.linalg.inv(mats), rtol=1e-9, atol=1e-9)
    assert np.allclose(inv, inv.swapaxes(1, 2), atol=0.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_cubature_points_reproduce_moments(backend):
    rng = rng_of(5)
    mean = rng.standard_normal((3, 4))
    covs = spd_batch(rng, 3, 4)
    lower, ok = backend.chol_spd(covs)
    assert ok.all()
    pts = backend.cubature_points(mean, lower)
    assert pts.shape == (3, 8, 4)
    got_mean, got_cov = backend.moments(pts)
    assert np.allclose(got_mean, mean, rtol=1e-12, atol=1e-9)
    assert np.allclose(got_cov, covs, rtol=1e-10, atol=1e-8)


@pytest.mark.parametrize("backend", BACKENDS)
def test_ct_propagate_quarter_turn(backend):
    # omega = pi/2 over dt = 1: sin/omega = (1-cos)/omega = 2/pi
    pts = np.array([[0.0, 1.0, 0.0, 0.0, np.pi / 2]])
    out = backend.ct_propagate(pts, 1.0)
    expect = np.array([2 / np.pi, 0.0, 2 / np.pi, 1.0, np.pi / 2])
    assert np.allclose(out[0], expect, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_ct_propagate_zero_rate_is_constant_velocity(backend):
    pts = np.array([[1.0, 2.0, 3.0, -4.0, 0.0]])
    out = backend.ct_propagate(pts, 0.5)
    assert np.allclose(out[0], [2.0, 2.0, 1.0, -4.0, 0.0], atol=0.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_ct_propagate_continuous_at_rate_floor(backend):
    below = np.array([[1.0, 2.0, 3.0, -4.0, CT_OMEGA_FLOOR / 3]])
    above = np.array([[1.0, 2.0, 3.0, -4.0, CT_OMEGA_FLOOR * 3]])
    out_b = backend.ct_propagate(below, 1.0)
    out_a = backend.ct_propagate(above, 1.0)
    assert np.allclose(out_b, out_a, rtol=0, atol=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_range_bearing_oracle(backend):
    pts = np.array([[1000.0, 0.0, 2000.0, 0.0, 0.0]])
    out = backend.range_bearing(pts, 0.0, 0.0)
    # sqrt(1000^2 + 2000^2) and atan2(2000, 1000), from numpy directly
    assert out[0, 0] == pytest.approx(2236.06797749979, abs=1e-9)
    assert out[0, 1] == pytest.approx(1.1071487177940904, abs=1e-12)
    shifted = backend.range_bearing(pts, 1000.0, 2000.0)
    assert shifted[0, 0] == 0.0


def test_backends_agree_on_random_batches():
    rng = rng_of(6)
    mean = rng.standard_normal((7, 5))
    covs = spd_batch(rng, 7, 5, scale=3.0)
    l_np, ok_np = _numpy.chol_spd(covs)
    l_nb, ok_nb = _numba.chol_spd(covs)
    assert ok_np.all() and ok_nb.all()
    assert np.allclose(l_np, l_nb, rtol=1e-12, atol=1e-12)
    i_np, _ = _numpy.inv_spd(covs)
    i_nb, _ = _numba.inv_spd(covs)
    assert np.allclose(i_np, i_nb, rtol=1e-9, atol=1e-12)
    p_np = _numpy.cubature_points(mean, l_np)
    p_nb = _numba.cubature_points(mean, l_nb)
    assert np.allclose(p_np, p_nb, rtol=1e-13, atol=1e-13)
    m_np, c_np = _numpy.moments(p_np)
    m_nb, c_nb = _numba.moments(p_np)
    assert np.allclose(m_np, m_nb, rtol=1e-12, atol=1e-12)
    assert np.allclose(c_np, c_nb, rtol=1e-10, atol=1e-12)
    states = rng.standard_normal((64, 5))
    states[:, 4] *= 0.1
    assert np.allclose(_numpy.ct_propagate(states, 1.0),
                       _numba.ct_propagate(states, 1.0), rtol=1e-13)
    assert np.allclose(_numpy.range_bearing(states, 3.0, -2.0),
                       _numba.range_bearing(states, 3.0, -2.0), rtol=1e-13)
    assert np.allclose(_numpy.wrap_angle(states.ravel() * 4),
                       _numba.wrap_angle(states.ravel() * 4), atol=1e-13)


def test_backend_selection_roundtrip():
    original = kernels.backend_name
    try:
        kernels.set_backend("numpy")
        assert kernels.backend_name == "numpy"
        assert kernels.active is _numpy
        kernels.set_backend("numba")
        assert kernels.backend_name == "numba"
        assert kernels.active is _numba
        with pytest.raises(ValueError):
            kernels.set_backend("fortran")
    finally:
        kernels.set_backend(original)
