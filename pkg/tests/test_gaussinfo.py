"""Gaussian belief algebra: cubature rule, prediction, information steps."""

import numpy as np
import pytest

from rcif.errors import DimensionError, GeometryError
from rcif.gaussinfo import (GaussianBelief, InformationPair, as_measurement_model,
                            correct, from_information, generate_cubature_points,
                            info_contribution, linearize_measurement, predict,
                            to_information)

from .helpers import kf_step, linear_model, random_spd


@pytest.mark.parametrize("n", [1, 2, 5])
def test_cubature_rule_moments(n):
    cs = generate_cubature_points(n)
    assert cs.points.shape == (2 * n, n)
    assert np.allclose(cs.weights, 1 / (2 * n), atol=0.0)
    assert np.allclose(cs.points.mean(axis=0), 0.0, atol=1e-15)
    cov = cs.points.T @ cs.points / (2 * n)
    assert np.allclose(cov, np.eye(n), atol=1e-14)


def test_belief_rejects_asymmetric_cov():
    cov = np.eye(2)
    cov[0, 1] = 1e-3
    with pytest.raises(GeometryError):
        GaussianBelief(np.zeros(2), cov)


def test_information_roundtrip():
    rng = np.random.default_rng(10)
    belief = GaussianBelief(rng.standard_normal(4), random_spd(rng, 4))
    back = from_information(to_information(belief))
    assert np.allclose(back.mean, belief.mean, rtol=1e-11, atol=1e-11)
    assert np.allclose(back.cov, belief.cov, rtol=1e-10, atol=1e-10)


def test_linear_predict_matches_closed_form():
    rng = np.random.default_rng(11)
    n = 4
    f = rng.standard_normal((n, n))
    q = random_spd(rng, n)
    prior = GaussianBelief(rng.standard_normal(n), random_spd(rng, n))
    belief, info = predict(prior, lambda pts: pts @ f.T, q)
    want_mean = f @ prior.mean
    want_cov = f @ prior.cov @ f.T + q
    assert np.allclose(belief.mean, want_mean, rtol=1e-12, atol=1e-10)
    assert np.allclose(belief.cov, want_cov, rtol=1e-12, atol=1e-9)
    assert np.allclose(info.info_matrix @ belief.cov, np.eye(n), atol=1e-8)


def test_predict_rejects_wrong_noise_shape():
    prior = GaussianBelief(np.zeros(3), np.eye(3))
    with pytest.raises(DimensionError):
        predict(prior, lambda pts: pts, np.eye(2))


def test_turn_propagation_against_monte_carlo():
    """Cubature prediction mean tracks a brute-force sample mean.

    The reference is one million exact draws pushed through the same
    turn equations written out longhand here, so it is independent of
    the library kernels.
    """
    from rcif.scenario import ct_transition

    mean = np.array([1000.0, 50.0, 2000.0, -50.0, 0.053])
    cov = np.diag([10000.0, 100.0, 10000.0, 100.0, 3.04e-6])
    rng = np.random.default_rng(20260823)
    xs = mean + rng.standard_normal((1_000_000, 5)) @ np.linalg.cholesky(cov).T
    a, ad, b, bd, w = xs.T
    s, c = np.sin(w), np.cos(w)
    mc = np.column_stack([
        a + ad * s / w - bd * (1 - c) / w,
        ad * c - bd * s,
        b + ad * (1 - c) / w + bd * s / w,
        ad * s + bd * c,
        w,
    ]).mean(axis=0)
    prior = GaussianBelief(mean, cov)
    belief, _ = predict(prior, lambda pts: ct_transition(pts, 1.0), np.zeros((5, 5)))
    scale = np.abs(mc)
    assert np.all(np.abs(belief.mean - mc) / scale < 5e-4)


def test_linearization_recovers_linear_map():
    rng = np.random.default_rng(12)
    h = rng.standard_normal((2, 3))
    pred = GaussianBelief(rng.standard_normal(3), random_spd(rng, 3))
    pred_info = to_information(pred)
    raw = rng.standard_normal(2)
    lm = linearize_measurement(pred, pred_info, linear_model(h), raw)
    assert np.allclose(lm.pseudo_matrix, h, rtol=1e-9, atol=1e-9)
    assert np.allclose(lm.predicted_meas, h @ pred.mean, rtol=1e-10, atol=1e-9)
    assert np.allclose(lm.adjusted_meas, raw - h @ pred.mean + h @ pred.mean,
                       atol=1e-8)


def test_predicted_range_bearing_of_tight_belief():
    from rcif import kernels

    def meas(pts):
        return kernels.active.range_bearing(np.ascontiguousarray(pts), 0.0, 0.0)

    model = as_measurement_model(meas, dim=2)
    pred = GaussianBelief(np.array([1000.0, 0.0, 2000.0, 0.0, 0.0]),
                          np.eye(5) * 1e-8)
    lm = linearize_measurement(pred, to_information(pred), model,
                               np.array([2236.0, 1.107]))
    assert lm.predicted_meas[0] == pytest.approx(2236.06797749979, abs=1e-5)
    assert lm.predicted_meas[1] == pytest.approx(1.1071487177940904, abs=1e-8)


def test_contribution_scaling_and_zero():
    rng = np.random.default_rng(13)
    h = rng.standard_normal((2, 4))
    pred = GaussianBelief(rng.standard_normal(4), random_spd(rng, 4))
    pred_info = to_information(pred)
    lm = linearize_measurement(pred, pred_info, linear_model(h),
                               rng.standard_normal(2))
    r = random_spd(rng, 2)
    full = info_contribution(lm, r, 1.0)
    half = info_contribution(lm, r, 0.5)
    # scaling happens after symmetrisation, so halving is exact
    assert np.array_equal(half.delta_matrix, 0.5 * full.delta_matrix)
    assert np.array_equal(half.delta_vector, 0.5 * full.delta_vector)
    off = info_contribution(lm, r, 0.0)
    assert not off.delta_matrix.any()
    assert not off.delta_vector.any()
    with pytest.raises(ValueError):
        info_contribution(lm, r, 1.5)
    with pytest.raises(ValueError):
        info_contribution(lm, r, -0.1)


def test_correct_with_nothing_returns_prediction():
    rng = np.random.default_rng(14)
    pred = GaussianBelief(rng.standard_normal(3), random_spd(rng, 3))
    pair, belief = correct(to_information(pred), [])
    assert np.allclose(belief.mean, pred.mean, rtol=1e-10, atol=1e-9)
    assert np.allclose(belief.cov, pred.cov, rtol=1e-9, atol=1e-9)
    assert isinstance(pair, InformationPair)


def test_correct_is_order_invariant():
    rng = np.random.default_rng(15)
    pred = GaussianBelief(rng.standard_normal(3), random_spd(rng, 3))
    pred_info = to_information(pred)
    contribs = []
    for _ in range(3):
        h = rng.standard_normal((2, 3))
        lm = linearize_measurement(pred, pred_info, linear_model(h),
                                   rng.standard_normal(2))
        contribs.append(info_contribution(lm, random_spd(rng, 2), 1.0))
    _, fwd = correct(pred_info, contribs)
    _, rev = correct(pred_info, contribs[::-1])
    assert np.allclose(fwd.mean, rev.mean, rtol=1e-12, atol=1e-12)
    assert np.allclose(fwd.cov, rev.cov, rtol=1e-12, atol=1e-12)


def test_one_step_update_matches_kalman_filter():
    """Predict + linearize + correct against a textbook covariance filter."""
    rng = np.random.default_rng(16)
    n, m = 4, 2
    f = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    q = random_spd(rng, n, scale=0.5)
    h = rng.standard_normal((m, n))
    r = random_spd(rng, m)
    x0 = rng.standard_normal(n)
    p0 = random_spd(rng, n)
    y = rng.standard_normal(m)

    _, _, x_ref, p_ref = kf_step(x0, p0, f, q, h, r, y)

    prior = GaussianBelief(x0, p0)
    pred, pred_info = predict(prior, lambda pts: pts @ f.T, q)
    lm = linearize_measurement(pred, pred_info, linear_model(h), y)
    pair, post = correct(pred_info, [info_contribution(lm, r, 1.0)])
    assert np.allclose(post.mean, x_ref, rtol=1e-10, atol=1e-10)
    assert np.allclose(post.cov, p_ref, rtol=1e-9, atol=1e-10)
    back = from_information(pair)
    assert np.allclose(back.mean, post.mean, atol=1e-12)


def test_measurement_model_shape_guard():
    model = as_measurement_model(lambda pts: pts[:, :3], dim=2)
    pred = GaussianBelief(np.zeros(4), np.eye(4))
    with pytest.raises(DimensionError):
        linearize_measurement(pred, to_information(pred), model, np.zeros(2))


def test_measurement_model_finite_guard():
    def bad(pts):
        out = pts[:, :1].copy()
        out[0] = np.nan
        return out

    model = as_measurement_model(bad, dim=1)
    pred = GaussianBelief(np.zeros(3), np.eye(3))
    with pytest.raises(GeometryError):
        linearize_measurement(pred, to_information(pred), model, np.zeros(1))
