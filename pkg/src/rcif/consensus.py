"""Network topology, Metropolis averaging and the overweighting correction.

Nodes are either sensors or pure communication relays; the graph must be
connected. Neighborhoods include the node itself, so a node of degree d
has ``|N| = d + 1``. Metropolis weights assign each edge
``1 / max(|N_i|, |N_j|)`` and put the leftover mass on the diagonal,
which makes the weight matrix symmetric and doubly stochastic; iterated
averaging with it preserves the network-wide mean exactly and converges
to the uniform average on any connected graph.

Because consensus averages rather than sums likelihood contributions, the
fused posterior would underweight novel information by roughly the
network size. The per-node correction ``delta`` inverts the averaged
indicator mass that L rounds spread from the sensors, and depends only on
topology and L, so it is computed once per scenario.
"""

from dataclasses import dataclass

import numpy as np

from .errors import TopologyError


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Undirected connected graph over sensor and communication nodes.

    Edges are unordered index pairs without self-loops; ``sensor_ids`` and
    ``comm_ids`` partition ``range(node_count)``.
    """

    node_count: int
    sensor_ids: tuple
    comm_ids: tuple
    edges: tuple

    def __post_init__(self):
        n = self.node_count
        sensors = tuple(sorted(int(i) for i in self.sensor_ids))
        comms = tuple(sorted(int(i) for i in self.comm_ids))
        edges = tuple(sorted(tuple(sorted((int(a), int(b))))
                             for a, b in self.edges))
        object.__setattr__(self, "sensor_ids", sensors)
        object.__setattr__(self, "comm_ids", comms)
        object.__setattr__(self, "edges", edges)
        ids = sensors + comms
        if any(i < 0 or i >= n for i in ids):
            raise TopologyError("node role ids out of range")
        if len(set(ids)) != len(ids) or len(ids) != n:
            raise TopologyError(
                "sensor and comm ids must partition the node set")
        for a, b in edges:
            if a == b:
                raise TopologyError(f"self-loop at node {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise TopologyError(f"edge ({a}, {b}) out of range")
        if len(set(edges)) != len(edges):
            raise TopologyError("duplicate edges")
        if not _connected(n, edges):
            raise TopologyError("graph not connected")

    def adjacency(self):
        """Neighbor lists excluding self."""
        neigh = [[] for _ in range(self.node_count)]
        for a, b in self.edges:
            neigh[a].append(b)
            neigh[b].append(a)
        return neigh

    def neighborhood_sizes(self):
        """|N_s| per node, with the node itself included."""
        return np.array([len(a) + 1 for a in self.adjacency()])


@dataclass(frozen=True, eq=False)
class ConsensusWeights:
    """Row-stochastic averaging weights over a graph."""

    kappa: np.ndarray  # (N, N)

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=np.float64)
        object.__setattr__(self, "kappa", k)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise TopologyError("weight matrix must be square")
        if (k < 0.0).any() or not np.allclose(k.sum(axis=1), 1.0,
                                              atol=1e-12):
            raise TopologyError("weights must be nonnegative with unit row "
                                "sums")


def _connected(n, edges):
    if n <= 0:
        return False
    neigh = [[] for _ in range(n)]
    for a, b in edges:
        neigh[a].append(b)
        neigh[b].append(a)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        cur = stack.pop()
        for nxt in neigh[cur]:
            if not seen[nxt]:
                seen[nxt] = True
                stack.append(nxt)
    return bool(seen.all())


def metropolis_weights(graph):
    """Metropolis consensus weights for a connected graph.

    Off-diagonal neighbor entries are ``1 / max(|N_i|, |N_j|)`` with
    neighborhoods including self; each diagonal absorbs the remainder of
    its row. The result is symmetric and doubly stochastic.
    """
    n = graph.node_count
    sizes = graph.neighborhood_sizes()
    kappa = np.zeros((n, n))
    for a, b in graph.edges:
        w = 1.0 / max(sizes[a], sizes[b])
        kappa[a, b] = w
        kappa[b, a] = w
    np.fill_diagonal(kappa, 1.0 - kappa.sum(axis=1))
    return ConsensusWeights(kappa=kappa)


class CommCounter:
    """Accumulates consensus traffic in transmitted real numbers.

    One synchronized round costs every node one broadcast of its slot
    payload; a symmetric (n, n) matrix plus an (n,) vector costs
    ``(n^2 + 3n) / 2`` reals.
    """

    def __init__(self):
        self.reals = {}
        self.rounds = {}

    @staticmethod
    def pair_payload(dim):
        return (dim * dim + 3 * dim) // 2

    def record(self, category, rounds, transmitters, payload):
        self.reals[category] = (self.reals.get(category, 0)
                                + rounds * transmitters * payload)
        self.rounds[category] = self.rounds.get(category, 0) + rounds

    def merge(self, other):
        for cat, v in other.reals.items():
            self.reals[cat] = self.reals.get(cat, 0) + v
        for cat, v in other.rounds.items():
            self.rounds[cat] = self.rounds.get(cat, 0) + v
        return self


def consensus_rounds(mats, vecs, weights, rounds, counter=None,
                     category=None):
    """L synchronized rounds of weighted neighborhood averaging.

    ``mats`` is a (N, d, d) stack, ``vecs`` a (N, d) stack; either may be
    None. L = 0 is the identity. When a counter is given, every round is
    billed as one payload broadcast per node.
    """
    kappa = weights.kappa
    if counter is not None and rounds > 0:
        payload = 0
        if mats is not None:
            d = mats.shape[1]
            payload += d * (d + 1) // 2
        if vecs is not None:
            payload += vecs.shape[1]
        counter.record(category, rounds, kappa.shape[0], payload)
    for _ in range(rounds):
        if mats is not None:
            mats = np.tensordot(kappa, mats, axes=1)
        if vecs is not None:
            vecs = kappa @ vecs
    return mats, vecs


def compute_delta(graph, weights, rounds):
    """Per-node overweighting correction after L averaging rounds.

    A unit mass starts on every sensor; L rounds of averaging leave mass
    ``theta_L`` per node, and ``delta = 1 / theta_L`` rescales averaged
    likelihood contributions back to summed ones. Nodes that no sensor
    mass reaches keep ``delta = 1``. Depends only on topology and L, so
    call it once per scenario; it costs no network traffic.
    """
    theta = np.zeros(graph.node_count)
    theta[list(graph.sensor_ids)] = 1.0
    for _ in range(rounds):
        theta = weights.kappa @ theta
    delta = np.ones_like(theta)
    reached = theta != 0.0
    delta[reached] = 1.0 / theta[reached]
    return delta


def edges_within_radius(positions, radius):
    """All index pairs at Euclidean distance <= radius."""
    pos = np.asarray(positions, dtype=np.float64)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    a, b = np.nonzero(np.triu(dist <= radius, k=1))
    return [(int(i), int(j)) for i, j in zip(a, b)]


def grow_radius_until_connected(positions, growth=1.1):
    """Smallest connecting radius from a geometric sweep.

    Starts near the expected nearest-neighbor spacing and multiplies by
    ``growth`` until the radius graph connects; deterministic for fixed
    positions. Returns (edges, radius).
    """
    pos = np.asarray(positions, dtype=np.float64)
    n = pos.shape[0]
    if n == 1:
        return [], 0.0
    span = max(np.ptp(pos[:, 0]), np.ptp(pos[:, 1]), 1e-12)
    radius = span / max(np.sqrt(n), 1.0)
    while True:
        edges = edges_within_radius(pos, radius)
        if _connected(n, edges):
            return edges, radius
        radius *= growth
