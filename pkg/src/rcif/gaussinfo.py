"""Cubature-transform primitives and the single-sensor information filter.

The filter is parameterized two ways at once:

* moment form, a :class:`GaussianBelief` holding the mean and covariance;
* information form, an :class:`InformationPair` holding the precision
  matrix ``Gamma = P^-1`` and information vector ``gamma = Gamma @ mean``.

Nonlinear maps are propagated with the third-degree cubature rule: ``2n``
equally weighted points placed at ``mean +- sqrt(n) * column(chol(P))``.
Measurement updates statistically linearize the measurement function
through the cubature cross-covariance, producing a pseudo matrix ``H``
that is exact for affine maps, and then fuse additively in information
form. That additivity is what makes multi-sensor fusion, consensus
averaging and indicator weighting cheap downstream.

Angle-valued measurement components (bearings) need circular treatment:
predicted angles are averaged on the circle and every residual is wrapped
to (-pi, pi] before entering any covariance or quadratic form. Measurement
functions therefore travel together with a mask of angular components, see
:class:`MeasurementModel`.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import DecompositionError, DimensionError, GeometryError


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """State estimate in moment form.

    :param mean: state mean, shape (n,)
    :param cov: state covariance, shape (n, n), symmetric positive definite
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionError(
                f"mean {mean.shape} and cov {cov.shape} are inconsistent")
        if not np.allclose(cov, cov.T, rtol=1e-8, atol=1e-8):
            raise GeometryError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size


@dataclass(frozen=True, eq=False)
class InformationPair:
    """State estimate in information form: ``info_matrix = P^-1`` and
    ``info_vector = info_matrix @ mean``."""

    info_matrix: np.ndarray
    info_vector: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.info_matrix, dtype=np.float64)
        v = np.asarray(self.info_vector, dtype=np.float64)
        if v.ndim != 1 or m.shape != (v.size, v.size):
            raise DimensionError(
                f"info_matrix {m.shape} and info_vector {v.shape} are "
                "inconsistent")
        object.__setattr__(self, "info_matrix", m)
        object.__setattr__(self, "info_vector", v)

    @property
    def dim(self):
        return self.info_vector.size


@dataclass(frozen=True, eq=False)
class CubatureSet:
    """The standard-space cubature rule: ``2n`` unit-covariance directions
    with equal weights ``1/(2n)``."""

    points: np.ndarray   # (2n, n)
    weights: np.ndarray  # (2n,)

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class LinearizedMeasurement:
    """Statistical linearization of one measurement at the prediction.

    :param pseudo_matrix: H, shape (m, n), exact for affine measurement maps
    :param predicted_meas: cubature-predicted measurement, shape (m,)
    :param adjusted_meas: residual-adjusted measurement
        ``ytilde = wrap(y - predicted) + H @ predicted_mean``, shape (m,)
    """

    pseudo_matrix: np.ndarray
    predicted_meas: np.ndarray
    adjusted_meas: np.ndarray


@dataclass(frozen=True, eq=False)
class InfoContribution:
    """Additive information-form correction from one measurement."""

    delta_matrix: np.ndarray  # (n, n), PSD
    delta_vector: np.ndarray  # (n,)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """A measurement function bundled with its output geometry.

    :param fn: vectorized map from state points (..., n) to measurements
        (..., m); must be defined at every cubature point it is handed
    :param dim: measurement dimension m
    :param angular: boolean mask (m,) marking angle-valued components that
        need circular averaging and residual wrapping
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    angular: np.ndarray = None

    def __post_init__(self):
        mask = self.angular
        mask = (np.zeros(self.dim, dtype=bool) if mask is None
                else np.asarray(mask, dtype=bool))
        if mask.shape != (self.dim,):
            raise DimensionError("angular mask must have shape (dim,)")
        object.__setattr__(self, "angular", mask)


def as_measurement_model(meas_fn, dim=None):
    """Coerce a bare callable into a :class:`MeasurementModel`.

    Bare callables are treated as having no angular components; ``dim`` is
    probed from the function output when not supplied.
    """
    if isinstance(meas_fn, MeasurementModel):
        return meas_fn
    if dim is None:
        raise DimensionError(
            "a bare measurement callable needs an explicit output dimension")
    return MeasurementModel(fn=meas_fn, dim=dim)


# ---------------------------------------------------------------------------
# batched internals shared with the filter engine


def _chol_batch(mats, what="covariance"):
    lowers, ok = kernels.active.chol_spd(np.ascontiguousarray(mats))
    if not ok.all():
        bad = np.flatnonzero(~ok)
        raise DecompositionError(
            f"{what} not positive definite at batch index {bad.tolist()}")
    return lowers

def _inv_batch(mats, what="matrix"):
    inv, ok = kernels.active.inv_spd(np.ascontiguousarray(mats))
    if not ok.all():
        bad = np.flatnonzero(~ok)
        raise DecompositionError(
            f"{what} not invertible at batch index {bad.tolist()}")
    return inv


def _symmetrize(mats):
    return 0.5 * (mats + np.swapaxes(mats, -1, -2))


def _predict_batch(means, covs, dynamics, process_cov):
    """Cubature prediction over a stack of beliefs.

    means (B, n), covs (B, n, n); dynamics maps (..., n) -> (..., n);
    process_cov is (n, n), shared by the whole stack. Returns
    (pred_means, pred_covs, info_mats, info_vecs).
    """
    lowers = _chol_batch(covs)
    pts = kernels.active.cubature_points(means, lowers)
    b, p, n = pts.shape
    prop = np.asarray(dynamics(pts.reshape(b * p, n)), dtype=np.float64)
    pred_mean, pred_cov = kernels.active.moments(prop.reshape(b, p, n))
    pred_cov = _symmetrize(pred_cov + process_cov)
    info_mat = _inv_batch(pred_cov, "predicted covariance")
    info_vec = np.einsum("bij,bj->bi", info_mat, pred_mean)
    return pred_mean, pred_cov, info_mat, info_vec


def _meas_mean(values, angular):
    """Pointwise measurement average; angular components use the circular
    mean so that clusters straddling +-pi do not cancel."""
    mean = values.mean(axis=0)
    if angular.any():
        ang = values[:, angular]
        mean[angular] = np.arctan2(
            np.sin(ang).mean(axis=0), np.cos(ang).mean(axis=0))
    return mean


def _wrap_components(residual, angular):
    if angular.any():
        residual = residual.copy()
        residual[..., angular] = kernels.active.wrap_angle(
            np.ascontiguousarray(residual[..., angular]))
    return residual


def _eval_model(model, pts):
    """Evaluate a measurement model on (P, n) points, returning (P, m)."""
    values = np.asarray(model.fn(pts), dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape != (pts.shape[0], model.dim):
        raise DimensionError(
            f"measurement function returned {values.shape}, expected "
            f"{(pts.shape[0], model.dim)}")
    if not np.isfinite(values).all():
        raise GeometryError(
            "measurement function produced non-finite values at a cubature "
            "point")
    return values


def _linearize_from_points(pts, pred_mean, info_mat, model, raw_meas):
    """Pseudo matrix and adjusted measurement from prediction points.

    pts (P, n) are cubature points of the predicted belief; info_mat is the
    predicted information matrix. Returns (H (m, n), yhat (m,),
    ytilde (m,)).
    """
    values = _eval_model(model, pts)
    yhat = _meas_mean(values, model.angular)
    dz = _wrap_components(values - yhat, model.angular)
    dx = pts - pred_mean
    pxy = kernels.active.cross_from_centered(dx[None], dz[None])[0]
    pseudo = (info_mat @ pxy).T
    raw = np.atleast_1d(np.asarray(raw_meas, dtype=np.float64))
    residual = _wrap_components(raw - yhat, model.angular)
    ytilde = residual + pseudo @ pred_mean
    return pseudo, yhat, ytilde


# ---------------------------------------------------------------------------
# public operations


def generate_cubature_points(n):
    """Build the third-degree cubature rule for dimension ``n``.

    Returns a :class:`CubatureSet` of ``2n`` points ``+-sqrt(n) * e_i``
    with equal weights ``1/(2n)``; they reproduce a zero mean and identity
    covariance exactly.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionError(f"state dimension must be a positive integer, "
                             f"got {n!r}")
    eye = np.eye(int(n))
    points = np.sqrt(float(n)) * np.vstack([eye, -eye])
    weights = np.full(2 * int(n), 1.0 / (2 * int(n)))
    return CubatureSet(points=points, weights=weights)


def predict(prior, dynamics, process_cov):
    """Propagate a belief through a (possibly nonlinear) transition.

    Cubature points of ``prior`` are pushed through ``dynamics`` (a
    vectorized map (..., n) -> (..., n)); their sample moments plus
    ``process_cov`` form the prediction, returned in both moment and
    information form.

    :raises DecompositionError: when a covariance square root or inverse
        fails even after jitter escalation
    """
    q = np.asarray(process_cov, dtype=np.float64)
    if q.shape != (prior.dim, prior.dim):
        raise DimensionError(
            f"process covariance {q.shape} does not match state dimension "
            f"{prior.dim}")
    mean, cov, info_mat, info_vec = _predict_batch(
        prior.mean[None], prior.cov[None], dynamics, q)
    belief = GaussianBelief(mean=mean[0], cov=cov[0])
    info = InformationPair(info_matrix=info_mat[0], info_vector=info_vec[0])
    return belief, info


def to_information(belief):
    """Convert moment form to information form: ``Gamma = P^-1``,
    ``gamma = Gamma @ mean``."""
    info_mat = _inv_batch(belief.cov[None], "covariance")[0]
    return InformationPair(info_matrix=info_mat,
                           info_vector=info_mat @ belief.mean)


def from_information(pair):
    """Convert information form back to moment form."""
    cov = _inv_batch(pair.info_matrix[None], "information matrix")[0]
    return GaussianBelief(mean=cov @ pair.info_vector, cov=cov)


def linearize_measurement(pred, pred_info, meas_fn, raw_meas):
    """Statistically linearize a measurement function at the prediction.

    The cross-covariance between state and measurement cubature points
    yields the pseudo matrix ``H = (Gamma_pred @ P_xy)^T`` (an (m, n)
    matrix, exact for affine maps), the cubature-predicted measurement
    ``yhat``, and the adjusted measurement
    ``ytilde = wrap(y - yhat) + H @ pred.mean``.

    :param meas_fn: a :class:`MeasurementModel`, or a bare vectorized
        callable for measurement spaces without angular components
    """
    raw = np.atleast_1d(np.asarray(raw_meas, dtype=np.float64))
    model = as_measurement_model(meas_fn, dim=raw.size)
    if raw.size != model.dim:
        raise DimensionError(
            f"raw measurement has dimension {raw.size}, model expects "
            f"{model.dim}")
    lower = _chol_batch(pred.cov[None], "predicted covariance")
    pts = kernels.active.cubature_points(pred.mean[None], lower)[0]
    pseudo, yhat, ytilde = _linearize_from_points(
        pts, pred.mean, pred_info.info_matrix, model, raw)
    return LinearizedMeasurement(pseudo_matrix=pseudo, predicted_meas=yhat,
                                 adjusted_meas=ytilde)


def info_contribution(lm, meas_cov, indicator):
    """Information-form correction terms of one (indicator-weighted)
    measurement: ``z * H^T R^-1 H`` and ``z * H^T R^-1 ytilde``.

    The contribution is homogeneous of degree one in ``indicator``, so a
    discounted measurement shrinks linearly and ``indicator = 0`` discards
    it entirely.
    """
    z = float(indicator)
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"indicator must lie in [0, 1], got {z}")
    r = np.atleast_2d(np.asarray(meas_cov, dtype=np.float64))
    h = lm.pseudo_matrix
    if r.shape != (h.shape[0], h.shape[0]):
        raise DimensionError(
            f"measurement covariance {r.shape} does not match measurement "
            f"dimension {h.shape[0]}")
    rinv = _inv_batch(r[None], "measurement covariance")[0]
    hr = h.T @ rinv
    mat = _symmetrize(hr @ h)
    return InfoContribution(delta_matrix=z * mat,
                            delta_vector=z * (hr @ lm.adjusted_meas))


def correct(pred_info, contributions):
    """Fuse additive contributions into the predicted information pair.

    Fusion is a plain sum, so it is order-invariant and an empty
    contribution list returns the prediction unchanged. Returns the
    posterior in both information and moment form.
    """
    info_mat = pred_info.info_matrix.copy()
    info_vec = pred_info.info_vector.copy()
    for c in contributions:
        info_mat = info_mat + c.delta_matrix
        info_vec = info_vec + c.delta_vector
    info_mat = _symmetrize(info_mat)
    pair = InformationPair(info_matrix=info_mat, info_vector=info_vec)
    return pair, from_information(pair)
