"""Centralized and consensus filter behavior on small networks."""

import numpy as np
import pytest

from rcif.config import ScenarioConfig
from rcif.errors import ConfigError
from rcif.filters import (ALGORITHMS, CentralFilterState, FilterParams,
                          FilterRun, NodeFilterState, SensorBank,
                          canonical_algorithm, ccif_t_step, crcif_step,
                          plan_consensus, run_filter)
from rcif.gaussinfo import (GaussianBelief, correct, info_contribution,
                            linearize_measurement, predict, to_information)
from rcif.scenario import (build_network, ct_transition, generate_episode,
                           process_noise_cov)

from .helpers import make_network, single_active_network, tiny_cfg


def episode_for(net, **overrides):
    kwargs = dict(
        active_count=len([s for s in net.sensors if s.kind == "active"]),
        passive_count=len([s for s in net.sensors if s.kind == "passive"]),
        comm_count=net.graph.node_count - len(net.sensors))
    kwargs.update(overrides)
    cfg = tiny_cfg(**kwargs)
    return cfg, generate_episode(cfg, net, overrides.get("seed", 11))


def test_filter_params_validation():
    FilterParams()
    with pytest.raises(ConfigError):
        FilterParams(sweeps=0)
    with pytest.raises(ConfigError):
        FilterParams(consensus_rounds=-1)
    with pytest.raises(ConfigError):
        FilterParams(prior_success=0.0)
    with pytest.raises(ConfigError):
        FilterParams(prior_failure=-0.5)


def test_canonical_algorithm_names():
    assert canonical_algorithm("drcif1") == "dRCIF-1"
    assert canonical_algorithm("dRCIF-2") == "dRCIF-2"
    assert canonical_algorithm("CRCIF") == "cRCIF"
    assert canonical_algorithm("ccif_t") == "cCIF-t"
    assert canonical_algorithm("dcif-t") == "dCIF-t"
    with pytest.raises(ConfigError, match="cRCIF"):
        canonical_algorithm("ekf")


def test_single_node_network_collapses_all_variants():
    """With one node there is nothing to average, so the consensus
    variants must reproduce the centralized filter trajectory."""
    net = single_active_network()
    cfg, ep = episode_for(net, steps=50, lam=0.3)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    central = run_filter("cRCIF", ep, net, params, q)
    d1 = run_filter("dRCIF-1", ep, net, params, q)
    d2 = run_filter("dRCIF-2", ep, net, params, q)
    assert central.means.shape == (50, 5)
    assert d1.means.shape == (50, 1, 5)
    assert np.allclose(d1.means[:, 0, :], central.means, atol=1e-10)
    assert np.allclose(d2.means[:, 0, :], central.means, atol=1e-10)
    assert np.allclose(d1.fused, central.fused, atol=1e-10)
    assert np.allclose(d2.fused, central.fused, atol=1e-10)


def test_clairvoyant_matches_single_sweep_on_clean_data():
    """With no outliers the oracle weights are all one, so the
    clairvoyant filter equals the robust filter run with one sweep."""
    net = make_network([(0.0, 0.0), (10.0, 0.0)], [(5.0, 5.0)], [])
    cfg, ep = episode_for(net, lam=0.0, sweeps=1, steps=20)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    robust = run_filter("cRCIF", ep, net, params, q)
    oracle = run_filter("cCIF-t", ep, net, params, q, alpha=cfg.alpha)
    assert np.allclose(oracle.means, robust.means, atol=1e-9)
    # the robust filter should also report full trust
    assert robust.fused.min() > 0.99


def test_crcif_step_against_public_operations():
    """One filter step recomputed from the small public building blocks."""
    net = make_network([(0.0, 500.0), (300.0, 0.0)], [], [])
    cfg, ep = episode_for(net, sweeps=1, steps=3, lam=0.0,
                          active_count=2, passive_count=0)
    bank = SensorBank(net.sensors)
    params = FilterParams(sweeps=1, consensus_rounds=0)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    state = CentralFilterState(ep.init_mean, ep.init_cov)
    new_state, trace = crcif_step(state, bank, ep.measurements[0], params,
                                  q, cfg.dt)

    from rcif.scenario import ct_transition
    prior = GaussianBelief(ep.init_mean, ep.init_cov)
    pred, pred_info = predict(prior, lambda pts: ct_transition(pts, cfg.dt),
                              q)
    contribs = []
    for spec, raw in zip(net.sensors, ep.measurements[0]):
        lm = linearize_measurement(pred, pred_info, spec.model(), raw)
        contribs.append(info_contribution(lm, spec.noise_cov, 1.0))
    _, post = correct(pred_info, contribs)
    assert np.allclose(new_state.mean, post.mean, rtol=1e-9, atol=1e-9)
    assert np.allclose(new_state.cov, post.cov, rtol=1e-8, atol=1e-9)
    # one sweep records z0 (all ones) and z1
    assert trace.indicators.shape == (2, 2)
    assert np.array_equal(trace.indicators[0], [1.0, 1.0])
    assert np.array_equal(trace.fused, trace.indicators[0])


def test_information_never_decreases_at_update():
    """Fusing nonnegative contributions cannot lose information."""
    net = make_network([(0.0, 0.0)], [(100.0, 100.0)], [])
    cfg, ep = episode_for(net, steps=8)
    bank = SensorBank(net.sensors)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    state = CentralFilterState(ep.init_mean, ep.init_cov)
    for t in range(cfg.steps):
        pred = predict(GaussianBelief(state.mean, state.cov),
                       lambda pts: ct_transition(pts, cfg.dt), q)[1]
        state, _ = crcif_step(state, bank, ep.measurements[t], params, q,
                              cfg.dt)
        gain = np.linalg.inv(state.cov) - pred.info_matrix
        eig = np.linalg.eigvalsh(0.5 * (gain + gain.T))
        assert eig.min() >= -1e-8


def test_complete_graph_reaches_agreement_in_one_round():
    """On a complete graph a single Metropolis round hits the uniform
    average, so every node fuses the same information."""
    net = make_network([(0.0, 0.0), (500.0, 0.0)], [(0.0, 500.0)],
                       [(250.0, 250.0)])
    cfg, ep = episode_for(net, consensus_rounds=1, steps=10)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    for name in ("dRCIF-1", "dRCIF-2", "dCIF-t"):
        kwargs = {"alpha": cfg.alpha} if name == "dCIF-t" else {}
        run = run_filter(name, ep, net, params, q, **kwargs)
        spread = np.abs(run.means - run.means.mean(axis=1, keepdims=True))
        assert spread.max() < 1e-8, name


def test_more_rounds_tighten_agreement():
    rng = np.random.default_rng(50)
    pos = rng.uniform(0, 1000, size=(9, 2)).tolist()
    net = make_network(pos[:2], pos[2:4], pos[4:],
                       edges=[(i, i + 1) for i in range(8)])
    spreads = {}
    for rounds in (1, 8):
        cfg, ep = episode_for(net, consensus_rounds=rounds, steps=10, seed=13)
        params = FilterParams.from_config(cfg)
        q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
        run = run_filter("dRCIF-1", ep, net, params, q)
        dev = run.means - run.means.mean(axis=1, keepdims=True)
        spreads[rounds] = float(np.sqrt((dev ** 2).sum(axis=2)).mean())
    assert spreads[8] < spreads[1]


def test_likelihood_traffic_ratio_is_exactly_sweeps():
    """The iterated variant re-runs likelihood consensus every sweep;
    the broadcast variant runs it once. Their metered traffic must be in
    the exact integer ratio K."""
    net = make_network([(0.0, 0.0), (800.0, 0.0)], [(400.0, 600.0)],
                       [(200.0, 300.0), (600.0, 300.0)],
                       edges=[(0, 3), (3, 2), (2, 4), (4, 1), (3, 4)])
    cfg, ep = episode_for(net, sweeps=3, consensus_rounds=2, steps=6)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    d1 = run_filter("dRCIF-1", ep, net, params, q, count_comm=True)
    d2 = run_filter("dRCIF-2", ep, net, params, q, count_comm=True)
    dt_ = run_filter("dCIF-t", ep, net, params, q, alpha=cfg.alpha,
                     count_comm=True)
    n, L, K, T = net.graph.node_count, cfg.consensus_rounds, cfg.sweeps, 6
    assert d1.counter.reals["likelihood"] == K * d2.counter.reals["likelihood"]
    assert d2.counter.reals["likelihood"] == T * L * n * 20
    assert d1.counter.reals["prior"] == d2.counter.reals["prior"] == \
        T * L * n * 20
    assert dt_.counter.reals["likelihood"] == d2.counter.reals["likelihood"]
    assert d1.means.shape == (T, n, 5)


def test_run_filter_interface_guards():
    net = single_active_network()
    cfg, ep = episode_for(net, steps=3)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    with pytest.raises(ConfigError, match="alpha"):
        run_filter("cCIF-t", ep, net, params, q)
    plan = plan_consensus(net.graph, params.consensus_rounds + 1)
    with pytest.raises(ConfigError, match="consensus plan"):
        run_filter("dRCIF-1", ep, net, params, q, plan=plan)
    out = run_filter("drcif2", ep, net, params, q)
    assert isinstance(out, FilterRun)
    assert out.algorithm == "dRCIF-2"


def test_indicators_contain_planted_outlier():
    """A 900 m range corruption at one step must be rejected.

    Because trust is re-earned each step from that step's evidence, the
    poisoned first sweep suppresses every indicator at the bad step; the
    filter coasts through it instead of swallowing the corruption, and
    clean steps keep indicators near one.
    """
    from dataclasses import replace

    net = make_network([(0.0, 0.0), (1000.0, 0.0), (0.0, 1000.0),
                        (2000.0, 2000.0)], [], [])
    cfg, ep = episode_for(net, lam=0.0, steps=5, sweeps=3)
    tampered = [list(row) for row in ep.measurements]
    tampered[2][0] = tampered[2][0] + np.array([900.0, 0.0])
    ep = replace(ep, measurements=tuple(tuple(row) for row in tampered))
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    run = run_filter("cRCIF", ep, net, params, q)
    assert run.indicators[2, 0, 0] == 1.0  # sweeps start from full trust
    assert run.fused[2, 0] < 0.01
    assert run.fused[2, 0] <= run.fused[2].min() + 1e-12
    clean_steps = [0, 1, 3, 4]
    assert run.fused[clean_steps].min() > 0.99
    blind = run_filter("cCIF-t", ep, net, params, q, alpha=1.0)
    truth = ep.states[1:, [0, 2]]
    err_robust = np.sqrt(((run.means[:, [0, 2]] - truth) ** 2).sum(1))
    err_blind = np.sqrt(((blind.means[:, [0, 2]] - truth) ** 2).sum(1))
    assert err_robust[2] < err_blind[2] / 5


def test_oracle_filters_downweight_flagged_measurements():
    net = make_network([(0.0, 0.0)], [(500.0, 500.0)], [])
    cfg, ep = episode_for(net, lam=0.5, alpha=400.0, steps=12)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    oracle = run_filter("cCIF-t", ep, net, params, q, alpha=cfg.alpha)
    blind = run_filter("cCIF-t", ep, net, params, q, alpha=1.0)
    truth = ep.states[1:, [0, 2]]
    err_oracle = np.sqrt(((oracle.means[:, [0, 2]] - truth) ** 2).sum(1)).mean()
    err_blind = np.sqrt(((blind.means[:, [0, 2]] - truth) ** 2).sum(1)).mean()
    assert err_oracle < err_blind


def test_all_algorithms_run_on_default_style_network():
    cfg = tiny_cfg(steps=5)
    net = build_network(cfg, np.random.default_rng(51))
    ep = generate_episode(cfg, net, 2)
    params = FilterParams.from_config(cfg)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    plan = plan_consensus(net.graph, params.consensus_rounds)
    for name in ALGORITHMS:
        kwargs = {}
        if name.endswith("-t"):
            kwargs["alpha"] = cfg.alpha
        if name.startswith("d"):
            kwargs["plan"] = plan
        run = run_filter(name, ep, net, params, q, **kwargs)
        assert np.isfinite(run.means).all()
        if name.startswith("c"):
            assert run.means.shape == (5, 5)
        else:
            assert run.means.shape == (5, net.graph.node_count, 5)
        if name.endswith("-t"):
            assert run.indicators is None and run.fused is None
        else:
            assert run.indicators.shape == (5, cfg.sweeps + 1,
                                            cfg.sensor_count)
            assert run.fused.shape == (5, cfg.sensor_count)
            assert (run.fused >= 0.0).all() and (run.fused <= 1.0).all()
