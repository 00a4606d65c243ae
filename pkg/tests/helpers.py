"""Shared builders for the test suite: tiny fixed networks, a plain
Kalman filter used as an independent oracle, and linear measurement
models."""

import numpy as np

from rcif.config import ScenarioConfig
from rcif.consensus import NetworkGraph
from rcif.gaussinfo import MeasurementModel
from rcif.scenario import SensorNetwork, SensorSpec

ACTIVE_COV = np.diag([100.0, 1.22e-5])
PASSIVE_COV = np.array([[1.22e-5]])


def make_network(active_pos=(), passive_pos=(), comm_pos=(), edges=None):
    """Explicit network: actives first, then passives, then relays.

    ``edges=None`` builds a complete graph; otherwise pass index pairs.
    """
    positions = [np.asarray(p, dtype=np.float64)
                 for p in list(active_pos) + list(passive_pos)
                 + list(comm_pos)]
    n = len(positions)
    if edges is None:
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    n_active = len(active_pos)
    n_sens = n_active + len(passive_pos)
    sensors = []
    for i in range(n_sens):
        kind = "active" if i < n_active else "passive"
        cov = ACTIVE_COV if kind == "active" else PASSIVE_COV
        sensors.append(SensorSpec(node_id=i, kind=kind,
                                  position=positions[i], noise_cov=cov))
    graph = NetworkGraph(node_count=n, sensor_ids=tuple(range(n_sens)),
                         comm_ids=tuple(range(n_sens, n)),
                         edges=tuple(edges))
    return SensorNetwork(positions=np.array(positions), graph=graph,
                         sensors=tuple(sensors))


def single_active_network(position=(0.0, 0.0)):
    return make_network(active_pos=[position], edges=())


def tiny_cfg(**overrides):
    """Small fast scenario: 2 active + 2 passive + 4 relays, 10 steps."""
    base = dict(active_count=2, passive_count=2, comm_count=4, steps=10,
                runs=3, sweeps=2, consensus_rounds=2, seed=11)
    base.update(overrides)
    return ScenarioConfig(**base)


def linear_model(h):
    """Measurement model for the affine map y = H x."""
    h = np.asarray(h, dtype=np.float64)
    return MeasurementModel(fn=lambda pts: pts @ h.T, dim=h.shape[0])


def kf_step(x, p, f, q, h, r, y):
    """Textbook covariance-form Kalman predict plus update."""
    x_pred = f @ x
    p_pred = f @ p @ f.T + q
    s = h @ p_pred @ h.T + r
    gain = p_pred @ h.T @ np.linalg.inv(s)
    x_post = x_pred + gain @ (y - h @ x_pred)
    p_post = (np.eye(x.size) - gain @ h) @ p_pred
    return x_pred, p_pred, x_post, 0.5 * (p_post + p_post.T)


def random_spd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def assert_psd(mat, tol=1e-10):
    sym = 0.5 * (mat + mat.T)
    assert np.allclose(mat, sym, atol=1e-8), "matrix not symmetric"
    eig = np.linalg.eigvalsh(sym)
    assert eig.min() > -tol, f"matrix not PSD, min eig {eig.min()}"
