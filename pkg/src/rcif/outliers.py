"""Beta-Bernoulli outlier indicators, inferred by mean-field updates.

Each measurement carries a latent binary indicator ``z`` (1 = nominal,
0 = outlier) whose success probability has a Beta(e, f) prior. Holding the
state posterior fixed, the variational updates are closed form:

* the indicator expectation is a sigmoid of ``digamma(e) - digamma(f)``
  minus half the expected normalized squared residual (the common
  ``digamma(e + f)`` terms cancel);
* the Beta parameters refresh from the priors as ``e = e0 + <z>`` and
  ``f = f0 + 1 - <z>``, conserving ``e + f = e0 + f0 + 1``.

The residual statistic is the posterior expectation of the normalized
squared residual, ``E[(y - h(x))' R^-1 (y - h(x))]`` over the current
state posterior, evaluated with the cubature rule. Writing the expected
outer product as ``S + r r'`` (predicted-measurement spread plus squared
mean residual), the statistic is ``tr((S + r r') R^-1)``; this is the
only reading under which the indicator update is the expectation of a
Gaussian log-likelihood.

Indicators are transient: every time step re-initializes ``(e, f)`` to the
priors and ``<z>`` to 1, so trust must be re-earned from that step's
evidence alone.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .gaussinfo import (_chol_batch, _eval_model, _inv_batch,
                        _wrap_components, as_measurement_model, kernels)

# Asymptotic expansion coefficients for digamma(x) at large x:
# psi(x) ~ ln(x) - 1/(2x) - sum_k c_k / x^(2k), truncated after x^-12.
_SHIFT_THRESHOLD = 6.0
_SERIES = (1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
           1.0 / 132.0, -691.0 / 32760.0)


@dataclass(frozen=True, eq=False)
class IndicatorState:
    """Indicator expectation ``z_mean`` with its Beta(e, f) parameters."""

    z_mean: float
    e: float
    f: float

    def __post_init__(self):
        if not 0.0 <= self.z_mean <= 1.0:
            raise ValueError(f"z_mean must lie in [0, 1], got {self.z_mean}")
        if self.e <= 0.0 or self.f <= 0.0:
            raise ValueError(
                f"beta parameters must be positive, got e={self.e}, "
                f"f={self.f}")


@dataclass(frozen=True, eq=False)
class Discrepancy:
    """The scalar ``tr(D R^-1)`` where ``D`` is the posterior-expected
    outer product of the residual between a raw measurement and the
    predicted measurement."""

    stat: float

    def __post_init__(self):
        if not self.stat >= 0.0:
            raise ValueError(f"discrepancy must be nonnegative, got "
                             f"{self.stat}")


def digamma(x):
    """Digamma function for positive arguments, accurate to about 1e-10.

    Small arguments are shifted upward with ``psi(x) = psi(x + 1) - 1/x``
    until they exceed 6, where the asymptotic series converges fast.
    Accepts scalars or arrays; raises on non-positive input.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not (arr > 0.0).all():
        raise ValueError("digamma is only defined for positive arguments "
                         "here")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).copy()
    acc = np.zeros_like(arr)
    low = arr < _SHIFT_THRESHOLD
    while low.any():
        acc[low] -= 1.0 / arr[low]
        arr[low] += 1.0
        low = arr < _SHIFT_THRESHOLD
    inv2 = 1.0 / (arr * arr)
    tail = np.zeros_like(arr)
    power = inv2.copy()
    for coeff in _SERIES:
        tail += coeff * power
        power *= inv2
    out = acc + np.log(arr) - 0.5 / arr - tail
    return float(out[0]) if scalar else out


def _sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    ex = np.exp(t[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def indicator_mean(e, f, stat):
    """Vectorized indicator expectation ``sigmoid(psi(e) - psi(f) -
    stat / 2)``.

    This is the normalized two-case posterior written in log space; the
    shared ``psi(e + f)`` term of both cases cancels, which keeps the
    expression finite for arbitrarily large statistics.
    """
    return _sigmoid(digamma(e) - digamma(f) - 0.5 * np.asarray(stat))


def residual_stats(means, covs, models, raws, rinvs):
    """Discrepancy statistics for a stack of sensors.

    means (S, n) and covs (S, n, n) are per-sensor state posteriors;
    ``models``, ``raws`` and ``rinvs`` are per-sensor measurement models,
    raw measurements and inverse measurement covariances. Returns the
    (S,) array of ``E[(y_s - h_s(x))' R_s^-1 (y_s - h_s(x))]`` values,
    each the cubature-point average of the normalized squared residual
    under the posterior, wrapped componentwise for angular channels.
    """
    lowers = _chol_batch(covs, "posterior covariance")
    pts = kernels.active.cubature_points(means, lowers)
    out = np.empty(len(models))
    for j, model in enumerate(models):
        values = _eval_model(model, pts[j])
        diffs = _wrap_components(np.asarray(raws[j])[None, :] - values,
                                 model.angular)
        out[j] = np.einsum("pi,ij,pj->", diffs, rinvs[j],
                           diffs) / diffs.shape[0]
    return out


def expected_discrepancy(posterior, meas_fn, raw_meas, meas_cov):
    """Expected normalized squared residual of one measurement.

    Computes ``E[(y - h(x))' R^-1 (y - h(x))]`` over the posterior with
    the cubature rule, equal to ``tr((S + r r') R^-1)`` for predicted
    spread ``S`` and mean residual ``r``. Angular components are wrapped
    per cubature point.
    """
    raw = np.atleast_1d(np.asarray(raw_meas, dtype=np.float64))
    model = as_measurement_model(meas_fn, dim=raw.size)
    r = np.atleast_2d(np.asarray(meas_cov, dtype=np.float64))
    if r.shape != (model.dim, model.dim):
        raise DimensionError(
            f"measurement covariance {r.shape} does not match measurement "
            f"dimension {model.dim}")
    rinv = _inv_batch(r[None], "measurement covariance")[0]
    stat = residual_stats(posterior.mean[None], posterior.cov[None],
                          [model], [raw], [rinv])[0]
    return Discrepancy(stat=float(stat))


def update_indicator(st, d):
    """One indicator update from the current discrepancy; Beta parameters
    pass through unchanged."""
    z = float(indicator_mean(st.e, st.f, d.stat))
    return IndicatorState(z_mean=min(max(z, 0.0), 1.0), e=st.e, f=st.f)


def update_beta(st, priors):
    """Refresh the Beta parameters from the priors and current indicator:
    ``e = e0 + z`` and ``f = f0 + 1 - z``."""
    e0, f0 = priors
    if e0 <= 0.0 or f0 <= 0.0:
        raise ValueError(f"beta priors must be positive, got ({e0}, {f0})")
    return IndicatorState(z_mean=st.z_mean, e=e0 + st.z_mean,
                          f=f0 + 1.0 - st.z_mean)
