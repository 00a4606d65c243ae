"""Shared numerical policy constants for both kernel backends."""

# Jitter escalation for Cholesky of marginally conditioned matrices:
# retry with eps*I added, eps doubling from JITTER_START, giving up once
# eps would exceed JITTER_MAX.
JITTER_START = 1e-12
JITTER_MAX = 1e-6

# Below this |omega * dt| the coordinated-turn map uses its
# constant-velocity limit.
CT_OMEGA_FLOOR = 1e-8
