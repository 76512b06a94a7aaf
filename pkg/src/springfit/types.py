"""Core data types for spring-mass systems.

Vectors are plain float64 NumPy arrays: a point set is an (n, 3) array and a
single vector is a length-3 array. All containers validate their invariants
at construction and are treated as immutable afterwards (states are the one
exception: a rollout allocates a fresh state per frame and never shares one
across concurrent rollouts).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration or constructor argument."""


def as_points(a, name: str = "points") -> np.ndarray:
    """Coerce to a contiguous (n, 3) float64 array, checking finiteness."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


def as_vec3(a, name: str = "vector") -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.shape != (3,):
        raise ConfigError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class MassSystem:
    """Canonical geometry of the object: rest positions, masses, grasp points.

    canonical_positions : (n, 3) rest-frame coordinates in meters
    masses              : (n,) point masses in kg, all positive
    control_indices     : indices of kinematically driven points
    """

    canonical_positions: np.ndarray
    masses: np.ndarray
    control_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        pos = as_points(self.canonical_positions, "canonical_positions")
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        ctrl = np.ascontiguousarray(self.control_indices, dtype=np.int64)
        if masses.ndim != 1 or masses.shape[0] != pos.shape[0]:
            raise ConfigError("masses must be one scalar per point")
        if not np.all(masses > 0):
            raise ConfigError("all masses must be positive")
        if ctrl.ndim != 1:
            raise ConfigError("control_indices must be a flat index list")
        if ctrl.size:
            if ctrl.min() < 0 or ctrl.max() >= pos.shape[0]:
                raise ConfigError("control index out of range")
            if np.unique(ctrl).size != ctrl.size:
                raise ConfigError("control indices must be distinct")
        object.__setattr__(self, "canonical_positions", pos)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "control_indices", ctrl)

    @property
    def n_points(self) -> int:
        return self.canonical_positions.shape[0]

    @classmethod
    def uniform(cls, canonical_positions, total_mass: float = 1.0, control_indices=()) -> "MassSystem":
        """Uniform mass assignment: each point carries total_mass / n."""
        pos = as_points(canonical_positions)
        if total_mass <= 0:
            raise ConfigError("total_mass must be positive")
        n = pos.shape[0]
        return cls(pos, np.full(n, total_mass / n), np.asarray(control_indices, dtype=np.int64))


@dataclass
class MassSystemState:
    """Positions and velocities of every mass point at one frame."""

    positions: np.ndarray
    velocities: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        self.positions = as_points(self.positions, "positions")
        self.velocities = as_points(self.velocities, "velocities")
        if self.positions.shape != self.velocities.shape:
            raise ConfigError("positions and velocities must have matching shape")

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "MassSystemState":
        return MassSystemState(self.positions.copy(), self.velocities.copy(), self.frame_index)


@dataclass(frozen=True)
class SpringTopology:
    """Edge set with rest lengths. Edges are stored as (i, j) with i < j."""

    edges: np.ndarray        # (m, 2) int64
    rest_lengths: np.ndarray  # (m,) float64, > 0

    def __post_init__(self):
        edges = np.ascontiguousarray(self.edges, dtype=np.int64).reshape(-1, 2)
        rest = np.ascontiguousarray(self.rest_lengths, dtype=np.float64)
        if rest.shape != (edges.shape[0],):
            raise ConfigError("one rest length per edge required")
        if edges.shape[0]:
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ConfigError("edges must satisfy i < j (no self-loops)")
            keys = edges[:, 0] * (edges.max() + 1) + edges[:, 1]
            if np.unique(keys).size != edges.shape[0]:
                raise ConfigError("duplicate edges")
            if not np.all(rest > 0):
                raise ConfigError("rest lengths must be positive")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "rest_lengths", rest)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @classmethod
    def from_positions(cls, edges, canonical_positions) -> "SpringTopology":
        """Build with rest lengths fixed to canonical inter-point distances."""
        pos = as_points(canonical_positions)
        edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
        d = pos[edges[:, 1]] - pos[edges[:, 0]]
        rest = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2)
        return cls(edges, rest)


@dataclass(frozen=True)
class SpringParams:
    """Per-edge stiffness (N/m) and dashpot damping (N·s/m)."""

    stiffness: np.ndarray
    dashpot: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.stiffness, dtype=np.float64)
        g = np.ascontiguousarray(self.dashpot, dtype=np.float64)
        if k.shape != g.shape or k.ndim != 1:
            raise ConfigError("stiffness and dashpot must be flat arrays of equal length")
        if not np.all(k > 0):
            raise ConfigError("stiffness must be positive")
        if not np.all(g >= 0):
            raise ConfigError("dashpot must be non-negative")
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "dashpot", g)

    @classmethod
    def homogeneous(cls, n_edges: int, stiffness: float, dashpot: float) -> "SpringParams":
        return cls(np.full(n_edges, float(stiffness)), np.full(n_edges, float(dashpot)))


@dataclass(frozen=True)
class GlobalPhysicalParams:
    """Scene-wide physical and integration parameters.

    drag is the per-substep multiplicative velocity decay in (0, 1];
    dt is the substep duration, so dt * substeps_per_frame must equal the
    observation frame interval.
    """

    drag: float = 1.0
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, -9.8, 0.0]))
    ground_height: float = 0.0
    restitution: float = 0.0
    friction: float = 0.0
    dt: float = 1.0 / 960.0
    substeps_per_frame: int = 32

    def __post_init__(self):
        object.__setattr__(self, "gravity", as_vec3(self.gravity, "gravity"))
        if not (0.0 < self.drag <= 1.0):
            raise ConfigError("drag must lie in (0, 1]")
        if not (0.0 <= self.restitution <= 1.0):
            raise ConfigError("restitution must lie in [0, 1]")
        if self.friction < 0:
            raise ConfigError("friction must be non-negative")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.substeps_per_frame < 1:
            raise ConfigError("substeps_per_frame must be at least 1")

    @property
    def frame_dt(self) -> float:
        return self.dt * self.substeps_per_frame

    @classmethod
    def for_frame_interval(cls, dt_frame: float, substeps_per_frame: int = 32, **kw) -> "GlobalPhysicalParams":
        return cls(dt=dt_frame / substeps_per_frame, substeps_per_frame=substeps_per_frame, **kw)

    def replace(self, **kw) -> "GlobalPhysicalParams":
        cur = dict(
            drag=self.drag, gravity=self.gravity, ground_height=self.ground_height,
            restitution=self.restitution, friction=self.friction, dt=self.dt,
            substeps_per_frame=self.substeps_per_frame,
        )
        cur.update(kw)
        return GlobalPhysicalParams(**cur)


class ControlSchedule:
    """Prescribed positions for control points, one entry per frame.

    Stored as a dense (n_frames, n_ctrl, 3) array aligned with a fixed
    control-index order.
    """

    def __init__(self, control_indices, positions):
        self.control_indices = np.ascontiguousarray(control_indices, dtype=np.int64)
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        if self.positions.ndim != 3 or self.positions.shape[1] != self.control_indices.size \
                or self.positions.shape[2] != 3:
            raise ConfigError("positions must have shape (n_frames, n_controls, 3)")
        if not np.all(np.isfinite(self.positions)):
            raise ConfigError("control positions must be finite")

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_frames(cls, frames: list[dict], control_indices) -> "ControlSchedule":
        """Build from per-frame {point_index: (3,) position} maps."""
        idx = np.ascontiguousarray(control_indices, dtype=np.int64)
        pos = np.zeros((len(frames), idx.size, 3))
        for f, mapping in enumerate(frames):
            for c, point in enumerate(idx):
                if int(point) not in mapping:
                    raise ConfigError(f"frame {f} misses control point {point}")
                pos[f, c] = as_vec3(np.asarray(mapping[int(point)], dtype=np.float64))
            for key in mapping:
                if int(key) not in idx:
                    raise ConfigError(f"frame {f} prescribes non-control point {key}")
        return cls(idx, pos)

    @classmethod
    def empty(cls, n_frames: int) -> "ControlSchedule":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((n_frames, 0, 3)))


@dataclass
class Trajectory:
    """Sequence of per-frame states; frame 0 is the initial state."""

    states: list[MassSystemState]

    def __post_init__(self):
        if not self.states:
            raise ConfigError("trajectory must contain at least one state")
        n = self.states[0].n_points
        base = self.states[0].frame_index
        for off, s in enumerate(self.states):
            if s.n_points != n:
                raise ConfigError("point count changes across frames")
            if s.frame_index != base + off:
                raise ConfigError("frame indices must be consecutive")

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> MassSystemState:
        return self.states[i]

    def positions_array(self) -> np.ndarray:
        """Stack positions into an (n_frames, n, 3) array."""
        return np.stack([s.positions for s in self.states])
