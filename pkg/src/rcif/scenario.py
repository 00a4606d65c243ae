"""Coordinated-turn tracking scenario over a random sensor network.

A single target flies a noisy constant-turn-rate orbit; a mixed network of
range-bearing sensors, bearing-only sensors and pure relays observes it.
Measurement noise is a two-component mixture: nominal ``N(0, R)`` with
probability ``1 - lambda`` and inflated ``N(0, alpha * R)`` otherwise.

The outlier draw reuses the nominal noise sample and rescales it by
``sqrt(alpha)``, which is distributionally identical to drawing from the
inflated component but keeps runs coupled under common random numbers:
raising ``lambda`` only promotes existing draws to outliers and changing
``alpha`` only rescales them, so paired comparisons across contamination
settings see the same underlying randomness.

Episodes (truth, measurements, outlier flags, shared initial belief) are
generated from a seed tree and can be written to and reloaded from a
line-oriented text format; floats round-trip through ``repr`` so a replay
is bit-identical to the original run.
"""

import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .consensus import (NetworkGraph, edges_within_radius,
                        grow_radius_until_connected)
from .errors import ConfigError, DimensionError
from .gaussinfo import MeasurementModel


@dataclass(frozen=True)
class CtState:
    """Planar coordinated-turn state: positions, velocities, turn rate."""

    a: float
    a_dot: float
    b: float
    b_dot: float
    omega: float

    def as_array(self):
        return np.array([self.a, self.a_dot, self.b, self.b_dot,
                         self.omega])

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (5,):
            raise DimensionError(f"expected a length-5 state, got {x.shape}")
        return cls(*x.tolist())


@dataclass(frozen=True, eq=False)
class SensorSpec:
    """One measuring node: its position, modality and noise covariance.

    ``kind`` is "active" (range and bearing) or "passive" (bearing only).
    """

    node_id: int
    kind: str
    position: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        if self.kind not in ("active", "passive"):
            raise ConfigError(f"unknown sensor kind {self.kind!r}")
        pos = np.asarray(self.position, dtype=np.float64)
        cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=np.float64))
        if pos.shape != (2,):
            raise DimensionError("sensor position must have shape (2,)")
        if cov.shape != (self.dim, self.dim):
            raise DimensionError(
                f"noise covariance {cov.shape} does not match a "
                f"{self.kind} sensor")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "noise_cov", cov)

    @property
    def dim(self):
        return 2 if self.kind == "active" else 1

    @property
    def angular(self):
        # bearing is the last component either way
        return np.array([False, True]) if self.kind == "active" \
            else np.array([True])

    def model(self):
        px, py = float(self.position[0]), float(self.position[1])
        if self.kind == "active":
            fn = lambda pts: kernels.active.range_bearing(pts, px, py)
        else:
            fn = lambda pts: kernels.active.range_bearing(pts, px, py)[:, 1:]
        return MeasurementModel(fn=fn, dim=self.dim, angular=self.angular)


@dataclass(frozen=True)
class ContaminationSpec:
    """Mixture weight and variance inflation of the outlier component."""

    lam: float
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda out of [0, 1]: {self.lam}")
        if not self.alpha >= 1.0:
            raise ConfigError(
                f"alpha must be at least 1 (variance inflation): "
                f"{self.alpha}")


@dataclass(frozen=True, eq=False)
class SensorNetwork:
    """Node positions, the communication graph and the sensor roster.

    Sensors occupy the first ``len(sensors)`` node ids in id order; the
    remaining nodes are pure relays.
    """

    positions: np.ndarray
    graph: NetworkGraph
    sensors: tuple

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if pos.shape != (self.graph.node_count, 2):
            raise DimensionError("positions must be (node_count, 2)")
        ids = tuple(s.node_id for s in self.sensors)
        if ids != self.graph.sensor_ids:
            raise ConfigError("sensor roster does not match the graph's "
                              "sensor ids")

    @property
    def node_count(self):
        return self.graph.node_count


@dataclass(frozen=True, eq=False)
class Episode:
    """One realized run: truth, measurements and the shared initial belief.

    ``states`` has ``steps + 1`` rows with the initial truth in row 0;
    ``measurements[t][j]`` is sensor j's raw measurement at step ``t + 1``
    and ``outlier_flags[t, j]`` records whether it came from the inflated
    mixture component. ``init_mean`` is the single initial-estimate draw
    that every algorithm and node starts from.
    """

    dt: float
    states: np.ndarray
    measurements: tuple
    outlier_flags: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray

    @property
    def steps(self):
        return self.states.shape[0] - 1


def ct_transition(x, dt):
    """Noise-free coordinated-turn transition; accepts (5,) or (B, 5)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return kernels.active.ct_propagate(x[None], dt)[0]
    return kernels.active.ct_propagate(x, dt)


def process_noise_cov(dt, q1, q2):
    """Process noise for the coordinated-turn model.

    Block diagonal: one integrated white-acceleration block per position
    axis (intensity ``q1``) and ``q2 * dt`` on the turn rate.
    """
    block = np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0],
                      [dt ** 2 / 2.0, dt]])
    q = np.zeros((5, 5))
    q[0:2, 0:2] = q1 * block
    q[2:4, 2:4] = q1 * block
    q[4, 4] = q2 * dt
    return q


def measure(spec, state):
    """Noise-free measurement of one state by one sensor."""
    x = np.asarray(state, dtype=np.float64)
    full = kernels.active.range_bearing(
        x[None], float(spec.position[0]), float(spec.position[1]))[0]
    return full if spec.kind == "active" else full[1:]


def contaminated_noise(rng, noise_chol, mix):
    """One mixture noise draw; returns (noise, is_outlier).

    Always consumes one uniform and one standard normal vector, then
    rescales the nominal draw by ``sqrt(alpha)`` when the uniform falls
    below ``lambda``. Distributionally this equals drawing from the
    inflated component, but the fixed draw schedule couples settings:
    the same seed produces nested outlier sets as ``lambda`` grows and
    identical outlier sets for any ``alpha``.
    """
    u = rng.random()
    noise = noise_chol @ rng.standard_normal(noise_chol.shape[0])
    if u < mix.lam:
        return np.sqrt(mix.alpha) * noise, True
    return noise, False


RADIUS_SLACK = 1.6


def build_network(cfg, rng):
    """Draw node positions in the region and connect them geometrically.

    Node ids 0..active-1 are range-bearing sensors, the next block is
    bearing-only, the rest relay. The connection radius grows until the
    graph is connected and is then widened by ``RADIUS_SLACK``, so the
    result is deterministic given the positions. The slack matters: a
    barely connected graph mixes so slowly that consensus leaves single
    nodes with almost no likelihood mass, and trust feedback on such a
    starved posterior can latch onto outliers.
    """
    n = cfg.node_count
    xmin, xmax, ymin, ymax = cfg.region
    xs = rng.uniform(xmin, xmax, size=n)
    ys = rng.uniform(ymin, ymax, size=n)
    positions = np.column_stack([xs, ys])
    edges, radius = grow_radius_until_connected(positions)
    edges = edges_within_radius(positions, RADIUS_SLACK * radius)
    sensor_ids = tuple(range(cfg.active_count + cfg.passive_count))
    comm_ids = tuple(range(len(sensor_ids), n))
    graph = NetworkGraph(node_count=n, sensor_ids=sensor_ids,
                         comm_ids=comm_ids, edges=tuple(edges))
    active_cov = np.diag([cfg.active_range_var, cfg.active_bearing_var])
    passive_cov = np.array([[cfg.passive_bearing_var]])
    sensors = []
    for i in sensor_ids:
        kind = "active" if i < cfg.active_count else "passive"
        cov = active_cov if kind == "active" else passive_cov
        sensors.append(SensorSpec(node_id=i, kind=kind,
                                  position=positions[i], noise_cov=cov))
    return SensorNetwork(positions=positions, graph=graph,
                         sensors=tuple(sensors))


def generate_episode(cfg, network, seed):
    """Simulate one run from a seed tree.

    The seed spawns two independent streams, one for the truth process and
    measurement noise and one for the initial estimate, so experiments can
    vary the initial belief without disturbing the realized trajectory.
    Per step the draw order is fixed (process noise first, then one
    uniform and one nominal noise vector per sensor in id order) and does
    not depend on outcomes, which keeps streams aligned across
    contamination settings.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    truth_ss, init_ss = ss.spawn(2)
    rng = np.random.default_rng(truth_ss)
    rng_init = np.random.default_rng(init_ss)

    mix = ContaminationSpec(lam=cfg.lam, alpha=cfg.alpha)
    q = process_noise_cov(cfg.dt, cfg.q1, cfg.q2)
    lq = np.linalg.cholesky(q)
    init_cov = np.diag(np.asarray(cfg.init_cov_diag, dtype=np.float64))
    lp = np.linalg.cholesky(init_cov)

    sensors = network.sensors
    chols = [np.linalg.cholesky(s.noise_cov) for s in sensors]
    x = np.asarray(cfg.init_state, dtype=np.float64)
    states = np.empty((cfg.steps + 1, 5))
    states[0] = x
    measurements = []
    flags = np.zeros((cfg.steps, len(sensors)), dtype=bool)
    for t in range(cfg.steps):
        x = ct_transition(x, cfg.dt) + lq @ rng.standard_normal(5)
        states[t + 1] = x
        row = []
        for j, spec in enumerate(sensors):
            noise, outlier = contaminated_noise(rng, chols[j], mix)
            y = measure(spec, x) + noise
            y[spec.angular] = kernels.active.wrap_angle(y[spec.angular])
            row.append(y)
            flags[t, j] = outlier
        measurements.append(tuple(row))

    init_mean = states[0] + lp @ rng_init.standard_normal(5)
    return Episode(dt=cfg.dt, states=states, measurements=tuple(measurements),
                   outlier_flags=flags, init_mean=init_mean,
                   init_cov=init_cov)


# ---------------------------------------------------------------------------
# episode text format

_FORMAT_TAG = "rcif-episode 1"


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def save_episode(path_or_file, episode, network, meta=None):
    """Write an episode and its network to a line-oriented text file.

    ``meta`` is an optional string-to-string mapping (config snapshot, run
    index and the like) stored verbatim. All floats are written with
    ``repr`` so that a reload reproduces them bit for bit.
    """
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file,
                                                            "__fspath__")
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        w = fh.write
        w(_FORMAT_TAG + "\n")
        w("[meta]\n")
        w(f"dt = {episode.dt!r}\n")
        w(f"steps = {episode.steps}\n")
        for key in sorted(meta or {}):
            w(f"{key} = {(meta or {})[key]}\n")
        w("[nodes]\n")
        by_id = {s.node_id: s for s in network.sensors}
        for i in range(network.node_count):
            spec = by_id.get(i)
            kind = spec.kind if spec is not None else "comm"
            line = f"{i} {kind} {_fmt(network.positions[i])}"
            if spec is not None:
                line += " " + _fmt(spec.noise_cov.ravel())
            w(line + "\n")
        w("[edges]\n")
        for a, b in network.graph.edges:
            w(f"{a} {b}\n")
        w("[init]\n")
        w("mean " + _fmt(episode.init_mean) + "\n")
        for row in episode.init_cov:
            w("cov " + _fmt(row) + "\n")
        w("[truth]\n")
        for t, row in enumerate(episode.states):
            w(f"{t} " + _fmt(row) + "\n")
        w("[measurements]\n")
        for t, row in enumerate(episode.measurements):
            for j, y in enumerate(row):
                flag = int(episode.outlier_flags[t, j])
                w(f"{t + 1} {j} {flag} " + _fmt(y) + "\n")
    finally:
        if own:
            fh.close()


def load_episode(path_or_file):
    """Read an episode file back; returns (episode, network, meta)."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file,
                                                            "__fspath__")
    fh = open(path_or_file) if own else path_or_file
    try:
        lines = [ln.rstrip("\n") for ln in fh]
    finally:
        if own:
            fh.close()
    if not lines or lines[0] != _FORMAT_TAG:
        raise ConfigError("not an episode file (missing format tag)")

    sections = {}
    current = None
    for ln in lines[1:]:
        if not ln.strip():
            continue
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            sections[current] = []
        elif current is None:
            raise ConfigError(f"content before first section: {ln!r}")
        else:
            sections[current].append(ln)
    for need in ("meta", "nodes", "edges", "init", "truth", "measurements"):
        if need not in sections:
            raise ConfigError(f"episode file is missing its [{need}] section")

    meta = {}
    for ln in sections["meta"]:
        key, _, value = ln.partition(" = ")
        meta[key.strip()] = value.strip()
    dt = float(meta.pop("dt"))
    steps = int(meta.pop("steps"))

    positions = {}
    sensors = []
    for ln in sections["nodes"]:
        parts = ln.split()
        i, kind = int(parts[0]), parts[1]
        positions[i] = (float(parts[2]), float(parts[3]))
        if kind != "comm":
            dim = 2 if kind == "active" else 1
            cov = np.array([float(v) for v in parts[4:]]).reshape(dim, dim)
            sensors.append(SensorSpec(node_id=i, kind=kind,
                                      position=positions[i], noise_cov=cov))
    n = len(positions)
    pos = np.array([positions[i] for i in range(n)])
    edges = tuple(tuple(int(v) for v in ln.split()) for ln in
                  sections["edges"])
    sensor_ids = tuple(s.node_id for s in sensors)
    comm_ids = tuple(i for i in range(n) if i not in set(sensor_ids))
    graph = NetworkGraph(node_count=n, sensor_ids=sensor_ids,
                         comm_ids=comm_ids, edges=edges)
    network = SensorNetwork(positions=pos, graph=graph,
                            sensors=tuple(sensors))

    init_mean = None
    cov_rows = []
    for ln in sections["init"]:
        parts = ln.split()
        if parts[0] == "mean":
            init_mean = np.array([float(v) for v in parts[1:]])
        else:
            cov_rows.append([float(v) for v in parts[1:]])
    init_cov = np.array(cov_rows)

    states = np.empty((steps + 1, 5))
    for ln in sections["truth"]:
        parts = ln.split()
        states[int(parts[0])] = [float(v) for v in parts[1:]]

    n_sens = len(sensors)
    rows = [[None] * n_sens for _ in range(steps)]
    flags = np.zeros((steps, n_sens), dtype=bool)
    for ln in sections["measurements"]:
        parts = ln.split()
        t, j, flag = int(parts[0]) - 1, int(parts[1]), int(parts[2])
        rows[t][j] = np.array([float(v) for v in parts[3:]])
        flags[t, j] = bool(flag)
    if any(y is None for row in rows for y in row):
        raise ConfigError("episode file is missing measurements")
    measurements = tuple(tuple(row) for row in rows)

    episode = Episode(dt=dt, states=states, measurements=measurements,
                      outlier_flags=flags, init_mean=init_mean,
                      init_cov=init_cov)
    return episode, network, meta


def dumps_episode(episode, network, meta=None):
    """Episode file contents as a string."""
    buf = io.StringIO()
    save_episode(buf, episode, network, meta=meta)
    return buf.getvalue()


def loads_episode(text):
    """Parse episode file contents from a string."""
    return load_episode(io.StringIO(text))
