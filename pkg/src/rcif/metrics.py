"""Monte Carlo evaluation: error metrics, run drivers and aggregation.

Position accuracy is reported as RMSE over runs per time step,

    RMSE_t = sqrt(mean over runs of the squared position error at t),

where decentralized algorithms first average the squared error over the
evaluated nodes (all of them by default, the sensor subset on request).
TRMSE is the time average of that curve. Paired comparisons additionally
use per-run TRMSE values, which keep the common-random-number coupling
between algorithms and between sweep settings.

The Monte Carlo driver derives everything from one master seed: the
topology stream is drawn once and shared by all runs, then each run gets
its own child seed. Runs are independent, so they can be farmed out to a
process pool; results are reduced in run order, making aggregate numbers
identical for any job count. A failing algorithm in one run is recorded
and skipped, never aborting the experiment.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import RcifError
from .filters import (ALGORITHMS, FilterParams, canonical_algorithm,
                      plan_consensus, run_filter)
from .scenario import build_network, generate_episode, process_noise_cov

_POS = [0, 2]  # position components of the state


def truth_positions(episode):
    """True target positions at measurement times, shape (T, 2)."""
    return episode.states[1:][:, _POS]


def run_squared_errors(run, episode, node_ids=None):
    """Per-step mean squared position error of one filter run, shape (T,).

    Centralized runs contribute one squared error per step; decentralized
    runs average the squared error over ``node_ids`` (all nodes when
    None).
    """
    truth = truth_positions(episode)
    if run.means.ndim == 2:
        err = run.means[:, _POS] - truth
        return (err ** 2).sum(axis=1)
    est = run.means if node_ids is None else run.means[:, list(node_ids), :]
    err = est[:, :, _POS] - truth[:, None, :]
    return (err ** 2).sum(axis=2).mean(axis=1)


def rmse_over_runs(sq_stack):
    """RMSE curve (T,) from stacked per-run squared errors (M, T)."""
    return np.sqrt(np.asarray(sq_stack, dtype=np.float64).mean(axis=0))


def trmse(rmse_curve):
    """Time-averaged RMSE."""
    return float(np.mean(rmse_curve))


def paired_stats(diffs):
    """Mean and standard error of paired per-run differences."""
    d = np.asarray(diffs, dtype=np.float64)
    if d.size < 2:
        return float(d.mean()) if d.size else 0.0, 0.0
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))


@dataclass(frozen=True, eq=False)
class RunResult:
    """Everything kept from one episode.

    ``sq_errors`` maps algorithm to its (T,) per-step mean squared
    position error; ``indicator_sums`` to the tuple (sum of final
    indicators on outliers, outlier count, sum on nominals, nominal
    count); ``comm`` to the transmitted-reals and round counters;
    ``errors`` to a failure message for algorithms that raised.
    """

    run_index: int
    sq_errors: dict
    indicator_sums: dict
    comm: dict
    errors: dict
    episode: object = None


def evaluate(cfg, network, plan, episode, algorithms, *, node_ids=None,
             keep_episode=False, run_index=0):
    """Run the requested algorithms over one episode and summarize."""
    params = FilterParams.from_config(cfg)
    process_cov = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    sq, ind, comm, errors = {}, {}, {}, {}
    for name in algorithms:
        algo = canonical_algorithm(name)
        decentralized = algo.startswith("d")
        try:
            fr = run_filter(algo, episode, network, params, process_cov,
                            alpha=cfg.alpha, plan=plan,
                            count_comm=decentralized)
        except (RcifError, np.linalg.LinAlgError, FloatingPointError) as e:
            errors[algo] = f"{type(e).__name__}: {e}"
            continue
        sq[algo] = run_squared_errors(fr, episode, node_ids)
        if fr.indicators is not None:
            final = fr.indicators[:, -1, :]
            flags = episode.outlier_flags
            ind[algo] = (float(final[flags].sum()), int(flags.sum()),
                         float(final[~flags].sum()), int((~flags).sum()))
        if fr.counter is not None:
            comm[algo] = {"reals": dict(fr.counter.reals),
                          "rounds": dict(fr.counter.rounds)}
    return RunResult(run_index=run_index, sq_errors=sq, indicator_sums=ind,
                     comm=comm, errors=errors,
                     episode=episode if keep_episode else None)


def _mc_worker(payload):
    cfg, network, plan, algorithms, node_ids, keep, index, seed = payload
    episode = generate_episode(cfg, network, seed)
    return evaluate(cfg, network, plan, episode, algorithms,
                    node_ids=node_ids, keep_episode=keep, run_index=index)


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """Aggregated outcome of one Monte Carlo experiment."""

    config: object
    algorithms: tuple
    network: object
    node_ids: tuple
    results: tuple

    def successful(self, algorithm):
        algo = canonical_algorithm(algorithm)
        return [r for r in self.results if algo in r.sq_errors]

    def failures(self, algorithm=None):
        out = []
        for r in self.results:
            for algo, msg in r.errors.items():
                if algorithm is None or algo == canonical_algorithm(
                        algorithm):
                    out.append((r.run_index, algo, msg))
        return out

    def sq_error_stack(self, algorithm):
        algo = canonical_algorithm(algorithm)
        runs = self.successful(algo)
        if not runs:
            raise RcifError(f"no successful runs for {algo}")
        return np.stack([r.sq_errors[algo] for r in runs])

    def rmse(self, algorithm):
        return rmse_over_runs(self.sq_error_stack(algorithm))

    def trmse(self, algorithm):
        return trmse(self.rmse(algorithm))

    def per_run_trmse(self, algorithm):
        """Per-run time-averaged RMSE values, in run order."""
        stack = self.sq_error_stack(algorithm)
        return np.sqrt(stack).mean(axis=1)

    def paired_trmse_diff(self, a, b):
        """Per-run TRMSE difference a - b over runs where both ran."""
        a, b = canonical_algorithm(a), canonical_algorithm(b)
        diffs = []
        for r in self.results:
            if a in r.sq_errors and b in r.sq_errors:
                diffs.append(np.sqrt(r.sq_errors[a]).mean()
                             - np.sqrt(r.sq_errors[b]).mean())
        return np.asarray(diffs)

    def indicator_means(self, algorithm):
        """(mean final indicator on outliers, on nominals), aggregated."""
        algo = canonical_algorithm(algorithm)
        sums = np.zeros(2)
        counts = np.zeros(2)
        for r in self.results:
            if algo in r.indicator_sums:
                s_out, n_out, s_nom, n_nom = r.indicator_sums[algo]
                sums += (s_out, s_nom)
                counts += (n_out, n_nom)
        with np.errstate(invalid="ignore"):
            out = sums / counts
        return float(out[0]), float(out[1])

    def comm_reals(self, algorithm, category=None):
        """Transmitted reals summed over runs, optionally per category."""
        algo = canonical_algorithm(algorithm)
        totals = {}
        for r in self.results:
            for cat, v in r.comm.get(algo, {}).get("reals", {}).items():
                totals[cat] = totals.get(cat, 0) + v
        if category is not None:
            return totals.get(category, 0)
        return totals


def run_monte_carlo(cfg, algorithms=ALGORITHMS, *, jobs=1,
                    sensors_only=False, keep_episodes=False):
    """Run ``cfg.runs`` independent episodes of every algorithm.

    One topology is drawn from the master seed and shared by all runs;
    each run then gets its own seed for the truth process, measurement
    noise and initial belief. ``jobs`` > 1 distributes runs over a
    process pool without changing any number in the output.
    """
    algorithms = tuple(canonical_algorithm(a) for a in algorithms)
    master = np.random.SeedSequence(cfg.seed)
    topo_ss, runs_ss = master.spawn(2)
    network = build_network(cfg, np.random.default_rng(topo_ss))
    plan = plan_consensus(network.graph, cfg.consensus_rounds)
    node_ids = tuple(network.graph.sensor_ids) if sensors_only else None
    payloads = [(cfg, network, plan, algorithms, node_ids, keep_episodes,
                 i, seed) for i, seed in enumerate(runs_ss.spawn(cfg.runs))]
    if jobs > 1:
        chunk = max(1, cfg.runs // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_mc_worker, payloads, chunksize=chunk))
    else:
        results = [_mc_worker(p) for p in payloads]
    return MonteCarloResult(config=cfg, algorithms=algorithms,
                            network=network, node_ids=node_ids,
                            results=tuple(results))


def run_sweep(cfg, param, values, algorithms=ALGORITHMS, *, jobs=1,
              sensors_only=False):
    """Monte Carlo over a list of settings of one scalar config field.

    The master seed is unchanged across settings, so topology and (through
    fixed draw schedules) the underlying noise realizations stay coupled;
    sweeping the contamination weight only promotes existing draws to
    outliers. Returns [(value, MonteCarloResult), ...] in given order.
    """
    out = []
    for value in values:
        sub = replace(cfg, **{param: value})
        out.append((value, run_monte_carlo(sub, algorithms, jobs=jobs,
                                           sensors_only=sensors_only)))
    return out


def consensus_depth_table(cfg, depths=(1, 2, 3, 4, 5),
                          algorithms=("dRCIF-1", "dRCIF-2", "dCIF-t"), *,
                          jobs=1, sensors_only=False):
    """TRMSE of the decentralized algorithms across consensus depths.

    Returns [(L, MonteCarloResult), ...]; the tabulated number for each
    algorithm is ``result.trmse(algorithm)``.
    """
    return run_sweep(cfg, "consensus_rounds", tuple(depths), algorithms,
                     jobs=jobs, sensors_only=sensors_only)
