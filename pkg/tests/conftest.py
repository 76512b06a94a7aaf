import math

import numpy as np
import pytest

from springfit.types import (
    ControlSchedule,
    GlobalPhysicalParams,
    MassSystem,
    MassSystemState,
    SpringParams,
    SpringTopology,
)


def random_system(rng, n_points=10, n_edges=18, box=0.5, total_mass=0.5,
                  control_indices=()):
    """Random connected-ish test system with deduplicated edges."""
    pos = rng.uniform(-box, box, size=(n_points, 3))
    pairs = set()
    # chain backbone keeps things connected, then random extras
    for i in range(n_points - 1):
        pairs.add((i, i + 1))
    while len(pairs) < n_edges:
        i, j = rng.integers(0, n_points, size=2)
        if i == j:
            continue
        pairs.add((min(int(i), int(j)), max(int(i), int(j))))
    edges = np.array(sorted(pairs), dtype=np.int64)
    system = MassSystem.uniform(pos, total_mass=total_mass, control_indices=control_indices)
    topo = SpringTopology.from_positions(edges, pos)
    params = SpringParams(rng.uniform(5.0, 40.0, size=len(edges)),
                          rng.uniform(0.0, 0.5, size=len(edges)))
    return system, topo, params


def naive_forces(x, v, edges, rest, k, gamma, masses, gravity):
    """Independent per-edge force summation in plain Python."""
    n = len(x)
    F = [[masses[i] * gravity[c] for c in range(3)] for i in range(n)]
    for e, (i, j) in enumerate(edges):
        d = [x[j][c] - x[i][c] for c in range(3)]
        length = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        if length < 1e-9:
            continue
        for c in range(3):
            fs = k[e] * (length - rest[e]) * d[c] / length
            fd = -gamma[e] * (v[i][c] - v[j][c])
            F[i][c] += fs + fd
            F[j][c] -= fs + fd
    return np.array(F)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
