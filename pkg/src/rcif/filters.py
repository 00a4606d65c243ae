"""Robust information filters, centralized and consensus-decentralized.

Five algorithms share one engine:

* ``cRCIF``: centralized robust filter. Each time step predicts, then runs
  K mean-field sweeps that alternate a weighted information fusion with an
  indicator refresh. Fusion in sweep k uses the indicators of sweep k - 1
  (all ones in the first sweep), so the returned posterior is weighted by
  the last-but-one indicator set; the final refresh is recorded but not
  fused. Indicators and their Beta parameters reset every step.
* ``dRCIF-1``: every node predicts locally, sensors linearize against
  their own pre-consensus prediction, the network averages priors once
  for L rounds, and each of the K sweeps averages the indicator-weighted
  likelihood slots for L rounds before every node fuses with its
  overweighting correction ``delta``. Sensors refresh indicators from
  their own fused posterior.
* ``dRCIF-2``: the cheap variant. The K sweeps stay local to each sensor
  (consensus prior plus the sensor's own current contribution, no
  ``delta``), and only the final contribution is averaged over the
  network once per step, giving 1/K of the likelihood traffic of
  ``dRCIF-1`` at some accuracy cost.
* ``cCIF-t`` and ``dCIF-t``: clairvoyant baselines that are told which
  measurements are outliers and use the true inflated covariance for
  them. Since contributions are linear in the inverse measurement
  covariance, this is ordinary fusion with oracle weights ``1/alpha`` on
  outliers, one sweep, no indicator machinery.

All decentralized variants run every node, relays included; relays
contribute zero likelihood slots but average and fuse like everyone else.
"""

import re
from dataclasses import dataclass

import numpy as np

from . import kernels
from .consensus import (CommCounter, compute_delta, consensus_rounds,
                        metropolis_weights)
from .errors import ConfigError
from .gaussinfo import (_chol_batch, _inv_batch, _linearize_from_points,
                        _predict_batch, _symmetrize)
from .outliers import indicator_mean, residual_stats


@dataclass(frozen=True)
class FilterParams:
    """Sweep count K, consensus depth L and the Beta indicator priors.

    ``outlier_scale`` declares the covariance inflation of the corrupted
    measurement population when it is known. Left at ``None``, indicator
    refreshes score the nominal fit against a flat alternative; with a
    scale, they score the likelihood ratio of R against scale * R (see
    ``_refresh``).
    """

    sweeps: int = 3
    consensus_rounds: int = 5
    prior_success: float = 0.9
    prior_failure: float = 0.1
    outlier_scale: float | None = None

    def __post_init__(self):
        if self.sweeps < 1:
            raise ConfigError(f"sweeps must be at least 1, got "
                              f"{self.sweeps}")
        if self.consensus_rounds < 0:
            raise ConfigError(f"consensus_rounds must be nonnegative, got "
                              f"{self.consensus_rounds}")
        if self.prior_success <= 0.0 or self.prior_failure <= 0.0:
            raise ConfigError("indicator priors must be positive")
        if self.outlier_scale is not None and not self.outlier_scale > 1.0:
            raise ConfigError(f"outlier scale must exceed 1, got "
                              f"{self.outlier_scale}")

    @classmethod
    def from_config(cls, cfg):
        return cls(sweeps=cfg.sweeps, consensus_rounds=cfg.consensus_rounds,
                   prior_success=cfg.prior_success,
                   prior_failure=cfg.prior_failure,
                   outlier_scale=cfg.alpha)


@dataclass(frozen=True, eq=False)
class CentralFilterState:
    """Single posterior carried by a centralized filter."""

    mean: np.ndarray  # (n,)
    cov: np.ndarray   # (n, n)


@dataclass(frozen=True, eq=False)
class NodeFilterState:
    """Per-node posteriors carried by a decentralized filter."""

    means: np.ndarray  # (N, n)
    covs: np.ndarray   # (N, n, n)


@dataclass(frozen=True, eq=False)
class StepTrace:
    """Indicator history of one step.

    ``indicators`` holds rows z^0 .. z^K (z^0 is all ones);
    ``fused`` is the row the posterior was actually weighted with,
    z^(K-1). None for clairvoyant filters.
    """

    indicators: np.ndarray
    fused: np.ndarray


class SensorBank:
    """Per-run cache of measurement models and inverse noise covariances."""

    def __init__(self, specs):
        self.specs = tuple(specs)
        self.models = [s.model() for s in self.specs]
        self.covs = [np.atleast_2d(np.asarray(s.noise_cov, dtype=np.float64))
                     for s in self.specs]
        self.rinvs = [_inv_batch(c[None], "measurement covariance")[0]
                      for c in self.covs]
        self.ids = np.array([s.node_id for s in self.specs], dtype=np.intp)
        self.dims = np.array([m.dim for m in self.models], dtype=np.float64)

    @property
    def count(self):
        return len(self.specs)

    @classmethod
    def ensure(cls, sensors):
        return sensors if isinstance(sensors, cls) else cls(sensors)


@dataclass(frozen=True, eq=False)
class ConsensusPlan:
    """Everything consensus needs per scenario: weights, depth L and the
    per-node overweighting correction (which depends on both)."""

    graph: object
    weights: object
    rounds: int
    delta: np.ndarray


def plan_consensus(graph, rounds):
    """Build Metropolis weights and the matching delta for a graph."""
    weights = metropolis_weights(graph)
    return ConsensusPlan(graph=graph, weights=weights, rounds=rounds,
                         delta=compute_delta(graph, weights, rounds))


def _dynamics(dt):
    return lambda pts: kernels.active.ct_propagate(pts, dt)


def _contributions(pts, pred_means, info_mats, bank, raw_meas, owners):
    """Unscaled information contributions of every sensor.

    ``pts[j]`` are the cubature points of the prediction sensor j
    linearizes against and ``owners[j]`` indexes that prediction in
    ``pred_means`` / ``info_mats``. Returns (U (S, n, n), u (S, n)) with
    ``U = H^T R^-1 H`` and ``u = H^T R^-1 ytilde``.
    """
    n = pred_means.shape[1]
    big = np.empty((bank.count, n, n))
    small = np.empty((bank.count, n))
    for j, model in enumerate(bank.models):
        o = owners[j]
        pseudo, _, ytilde = _linearize_from_points(
            pts[j], pred_means[o], info_mats[o], model, raw_meas[j])
        hr = pseudo.T @ bank.rinvs[j]
        big[j] = _symmetrize(hr @ pseudo)
        small[j] = hr @ ytilde
    return big, small


def _posterior(info_mats, info_vecs):
    covs = _inv_batch(_symmetrize(info_mats), "fused information")
    means = np.einsum("bij,bj->bi", covs, info_vecs)
    return means, covs


def _refresh(bank, means, covs, raw_meas, e, f):
    stats = residual_stats(means, covs, bank.models, raw_meas, bank.rinvs)
    return indicator_mean(e, f, stats)


def _oracle_weights(outlier_row, alpha):
    if alpha is None or not alpha > 0.0:
        raise ConfigError("clairvoyant filters need the true positive "
                          "alpha")
    return np.where(np.asarray(outlier_row, dtype=bool), 1.0 / alpha, 1.0)


# ---------------------------------------------------------------------------
# centralized steps


def _central_predict(state, bank, raw_meas, process_cov, dt):
    pred_mean, pred_cov, info_mat, info_vec = _predict_batch(
        state.mean[None], state.cov[None], _dynamics(dt), process_cov)
    lower = _chol_batch(pred_cov, "predicted covariance")
    pts = kernels.active.cubature_points(pred_mean, lower)
    owners = np.zeros(bank.count, dtype=np.intp)
    big, small = _contributions(pts[np.zeros(bank.count, dtype=np.intp)],
                                pred_mean, info_mat, bank, raw_meas, owners)
    return info_mat[0], info_vec[0], big, small


def crcif_step(state, sensors, raw_meas, params, process_cov, dt):
    """One time step of the centralized robust filter.

    Returns (new state, :class:`StepTrace`).
    """
    bank = SensorBank.ensure(sensors)
    prior_mat, prior_vec, big, small = _central_predict(
        state, bank, raw_meas, process_cov, dt)
    e0, f0 = params.prior_success, params.prior_failure
    z = np.ones(bank.count)
    e = np.full(bank.count, e0)
    f = np.full(bank.count, f0)
    trace = np.empty((params.sweeps + 1, bank.count))
    trace[0] = 1.0
    mean = cov = None
    for k in range(1, params.sweeps + 1):
        fused_mat = prior_mat + np.tensordot(z, big, axes=1)
        fused_vec = prior_vec + z @ small
        means, covs = _posterior(fused_mat[None], fused_vec[None])
        mean, cov = means[0], covs[0]
        z = _refresh(bank,
                     np.ascontiguousarray(
                         np.broadcast_to(mean, (bank.count, mean.size))),
                     np.ascontiguousarray(
                         np.broadcast_to(cov, (bank.count,) + cov.shape)),
                     raw_meas, e, f)
        trace[k] = z
        e = e0 + z
        f = f0 + 1.0 - z
    return (CentralFilterState(mean=mean, cov=cov),
            StepTrace(indicators=trace, fused=trace[params.sweeps - 1].copy()))


def ccif_t_step(state, sensors, raw_meas, outlier_row, alpha, process_cov,
                dt):
    """One step of the clairvoyant centralized baseline.

    Outlying measurements are fused with their true inflated covariance,
    equivalently with oracle weight ``1 / alpha``; no sweeps.
    """
    bank = SensorBank.ensure(sensors)
    prior_mat, prior_vec, big, small = _central_predict(
        state, bank, raw_meas, process_cov, dt)
    w = _oracle_weights(outlier_row, alpha)
    fused_mat = prior_mat + np.tensordot(w, big, axes=1)
    fused_vec = prior_vec + w @ small
    means, covs = _posterior(fused_mat[None], fused_vec[None])
    return CentralFilterState(mean=means[0], cov=covs[0]), None


# ---------------------------------------------------------------------------
# decentralized steps


def _node_predict(state, bank, raw_meas, process_cov, dt):
    """Per-node prediction plus per-sensor linearization.

    Every sensor linearizes against its own pre-consensus prediction, so
    contributions are fixed before any averaging happens.
    """
    pred_means, pred_covs, info_mats, info_vecs = _predict_batch(
        state.means, state.covs, _dynamics(dt), process_cov)
    lowers = _chol_batch(pred_covs[bank.ids], "predicted covariance")
    pts = kernels.active.cubature_points(pred_means[bank.ids], lowers)
    big, small = _contributions(pts, pred_means, info_mats, bank, raw_meas,
                                bank.ids)
    return info_mats, info_vecs, big, small


def _scatter(bank, node_count, big, small, scale):
    n = small.shape[1]
    mats = np.zeros((node_count, n, n))
    vecs = np.zeros((node_count, n))
    mats[bank.ids] = scale[:, None, None] * big
    vecs[bank.ids] = scale[:, None] * small
    return mats, vecs


def _delta_fuse(prior_mats, prior_vecs, like_mats, like_vecs, delta):
    fused_mat = prior_mats + delta[:, None, None] * like_mats
    fused_vec = prior_vecs + delta[:, None] * like_vecs
    return _posterior(fused_mat, fused_vec)


def drcif1_step(state, sensors, plan, raw_meas, params, process_cov, dt,
                counter=None):
    """One step of the consensus filter with per-sweep averaging.

    Priors are averaged once; every sweep averages the current
    indicator-weighted likelihood slots over L rounds before all nodes
    delta-fuse. Sensors refresh indicators from their own fused
    posterior.
    """
    bank = SensorBank.ensure(sensors)
    node_count = plan.graph.node_count
    info_mats, info_vecs, big, small = _node_predict(
        state, bank, raw_meas, process_cov, dt)
    prior_mats, prior_vecs = consensus_rounds(
        info_mats, info_vecs, plan.weights, plan.rounds, counter, "prior")
    e0, f0 = params.prior_success, params.prior_failure
    z = np.ones(bank.count)
    e = np.full(bank.count, e0)
    f = np.full(bank.count, f0)
    trace = np.empty((params.sweeps + 1, bank.count))
    trace[0] = 1.0
    means = covs = None
    for k in range(1, params.sweeps + 1):
        mats, vecs = _scatter(bank, node_count, big, small, z)
        mats, vecs = consensus_rounds(mats, vecs, plan.weights, plan.rounds,
                                      counter, "likelihood")
        means, covs = _delta_fuse(prior_mats, prior_vecs, mats, vecs,
                                  plan.delta)
        z = _refresh(bank, means[bank.ids], covs[bank.ids], raw_meas, e, f)
        trace[k] = z
        e = e0 + z
        f = f0 + 1.0 - z
    return (NodeFilterState(means=means, covs=covs),
            StepTrace(indicators=trace, fused=trace[params.sweeps - 1].copy()))


def drcif2_step(state, sensors, plan, raw_meas, params, process_cov, dt,
                counter=None):
    """One step of the consensus filter with a single final averaging.

    The K sweeps run locally at each sensor (consensus prior plus the
    sensor's own current contribution, uncorrected); only the last
    contribution is averaged over the network and delta-fused everywhere,
    cutting likelihood traffic to 1/K of the per-sweep variant.
    """
    bank = SensorBank.ensure(sensors)
    node_count = plan.graph.node_count
    info_mats, info_vecs, big, small = _node_predict(
        state, bank, raw_meas, process_cov, dt)
    prior_mats, prior_vecs = consensus_rounds(
        info_mats, info_vecs, plan.weights, plan.rounds, counter, "prior")
    e0, f0 = params.prior_success, params.prior_failure
    z = np.ones(bank.count)
    e = np.full(bank.count, e0)
    f = np.full(bank.count, f0)
    trace = np.empty((params.sweeps + 1, bank.count))
    trace[0] = 1.0
    scaled_big = scaled_small = None
    for k in range(1, params.sweeps + 1):
        scaled_big = z[:, None, None] * big
        scaled_small = z[:, None] * small
        local_means, local_covs = _posterior(
            prior_mats[bank.ids] + scaled_big,
            prior_vecs[bank.ids] + scaled_small)
        z = _refresh(bank, local_means, local_covs, raw_meas, e, f)
        trace[k] = z
        e = e0 + z
        f = f0 + 1.0 - z
    mats = np.zeros((node_count,) + big.shape[1:])
    vecs = np.zeros((node_count,) + small.shape[1:])
    mats[bank.ids] = scaled_big
    vecs[bank.ids] = scaled_small
    mats, vecs = consensus_rounds(mats, vecs, plan.weights, plan.rounds,
                                  counter, "likelihood")
    means, covs = _delta_fuse(prior_mats, prior_vecs, mats, vecs, plan.delta)
    return (NodeFilterState(means=means, covs=covs),
            StepTrace(indicators=trace, fused=trace[params.sweeps - 1].copy()))


def dcif_t_step(state, sensors, plan, raw_meas, outlier_row, alpha,
                process_cov, dt, counter=None):
    """One step of the clairvoyant decentralized baseline: oracle-weighted
    slots, one likelihood averaging, delta fusion, no sweeps."""
    bank = SensorBank.ensure(sensors)
    node_count = plan.graph.node_count
    info_mats, info_vecs, big, small = _node_predict(
        state, bank, raw_meas, process_cov, dt)
    prior_mats, prior_vecs = consensus_rounds(
        info_mats, info_vecs, plan.weights, plan.rounds, counter, "prior")
    w = _oracle_weights(outlier_row, alpha)
    mats, vecs = _scatter(bank, node_count, big, small, w)
    mats, vecs = consensus_rounds(mats, vecs, plan.weights, plan.rounds,
                                  counter, "likelihood")
    means, covs = _delta_fuse(prior_mats, prior_vecs, mats, vecs, plan.delta)
    return NodeFilterState(means=means, covs=covs), None


# ---------------------------------------------------------------------------
# run-level driver


ALGORITHMS = ("cRCIF", "dRCIF-1", "dRCIF-2", "cCIF-t", "dCIF-t")

_CANON = {re.sub(r"[^a-z0-9]", "", a.lower()): a for a in ALGORITHMS}


def canonical_algorithm(name):
    """Normalize an algorithm name ('drcif1', 'dRCIF-1', ...)."""
    key = re.sub(r"[^a-z0-9]", "", str(name).lower())
    try:
        return _CANON[key]
    except KeyError:
        raise ConfigError(
            f"unknown algorithm {name!r}; choose from "
            f"{', '.join(ALGORITHMS)}") from None


@dataclass(frozen=True, eq=False)
class FilterRun:
    """One algorithm's trajectory over one episode.

    ``means`` is (T, n) for centralized algorithms and (T, N, n) for
    decentralized ones. ``indicators`` stacks the per-step traces
    (T, K + 1, S); ``fused`` the actually fused rows (T, S); both None
    for clairvoyant baselines. ``counter`` is present when communication
    was counted.
    """

    algorithm: str
    means: np.ndarray
    indicators: np.ndarray
    fused: np.ndarray
    counter: CommCounter


def run_filter(name, episode, network, params, process_cov, *, alpha=None,
               plan=None, count_comm=False):
    """Run one algorithm over one episode and collect its estimates.

    ``plan`` may be passed in to amortize the consensus setup across runs
    that share a topology; it must match ``params.consensus_rounds``.
    ``alpha`` is only needed by the clairvoyant baselines.
    """
    algorithm = canonical_algorithm(name)
    bank = SensorBank.ensure(network.sensors)
    centralized = algorithm.startswith("c")
    if not centralized and plan is None:
        plan = plan_consensus(network.graph, params.consensus_rounds)
    if plan is not None and plan.rounds != params.consensus_rounds:
        raise ConfigError(
            f"consensus plan was built for L={plan.rounds}, params ask for "
            f"L={params.consensus_rounds}")
    counter = CommCounter() if count_comm else None

    steps = episode.steps
    n = episode.init_mean.size
    if centralized:
        state = CentralFilterState(mean=episode.init_mean.copy(),
                                   cov=episode.init_cov.copy())
        means = np.empty((steps, n))
    else:
        node_count = network.node_count
        state = NodeFilterState(
            means=np.tile(episode.init_mean, (node_count, 1)),
            covs=np.tile(episode.init_cov, (node_count, 1, 1)))
        means = np.empty((steps, node_count, n))

    robust = algorithm in ("cRCIF", "dRCIF-1", "dRCIF-2")
    indicators = (np.empty((steps, params.sweeps + 1, bank.count))
                  if robust else None)
    fused = np.empty((steps, bank.count)) if robust else None

    for t in range(steps):
        raw = episode.measurements[t]
        if algorithm == "cRCIF":
            state, tr = crcif_step(state, bank, raw, params, process_cov,
                                   episode.dt)
        elif algorithm == "dRCIF-1":
            state, tr = drcif1_step(state, bank, plan, raw, params,
                                    process_cov, episode.dt, counter)
        elif algorithm == "dRCIF-2":
            state, tr = drcif2_step(state, bank, plan, raw, params,
                                    process_cov, episode.dt, counter)
        elif algorithm == "cCIF-t":
            state, tr = ccif_t_step(state, bank, raw,
                                    episode.outlier_flags[t], alpha,
                                    process_cov, episode.dt)
        else:
            state, tr = dcif_t_step(state, bank, plan, raw,
                                    episode.outlier_flags[t], alpha,
                                    process_cov, episode.dt, counter)
        if centralized:
            means[t] = state.mean
        else:
            means[t] = state.means
        if robust:
            indicators[t] = tr.indicators
            fused[t] = tr.fused

    return FilterRun(algorithm=algorithm, means=means, indicators=indicators,
                     fused=fused, counter=counter)
