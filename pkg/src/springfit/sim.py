"""Spring-mass dynamics: forces, collisions, integration, rollout, skinning.

Forces follow the usual linear spring + dashpot model; integration is the
semi-implicit update v' = drag * (v + dt*F/m), x' = x + dt*v'. Ground
contact is impulse-based and resolved on velocities before the position
update. A rollout advances substeps_per_frame substeps per observation
frame with control-point targets interpolated linearly inside the frame.
"""

from __future__ import annotations

import numpy as np

from . import jsonio
from .backend import kernels
from ._kernels_py import DEGENERATE_LENGTH, TANGENT_EPS, _collide
from .types import (
    ConfigError,
    ControlSchedule,
    GlobalPhysicalParams,
    MassSystem,
    MassSystemState,
    SpringParams,
    SpringTopology,
    Trajectory,
    as_points,
    as_vec3,
)

# A rollout diverges when any point leaves this radius or turns non-finite.
DIVERGENCE_RADIUS = 1e6

_degenerate_springs = 0


class SimulationDiverged(RuntimeError):
    """Raised when a state turns non-finite or leaves the sane radius."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index


def degenerate_spring_count() -> int:
    """Diagnostic: springs evaluated at near-zero length so far."""
    return _degenerate_springs


def reset_degenerate_spring_count() -> None:
    global _degenerate_springs
    _degenerate_springs = 0


def _count_degenerate(n: int) -> None:
    global _degenerate_springs
    _degenerate_springs += n


def spring_force(xi, xj, k: float, rest_length: float) -> np.ndarray:
    """Force on point i from the spring to j: k*(|xj-xi| - l) * unit(xj-xi).

    Coincident endpoints yield a zero force and bump the degenerate-spring
    counter instead of dividing by zero.
    """
    if k <= 0 or rest_length <= 0:
        raise ConfigError("stiffness and rest length must be positive")
    xi = as_vec3(xi, "xi")
    xj = as_vec3(xj, "xj")
    d = xj - xi
    length = float(np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2))
    if length < DEGENERATE_LENGTH:
        _count_degenerate(1)
        return np.zeros(3)
    return k * (length - rest_length) / length * d


def dashpot_force(vi, vj, gamma: float) -> np.ndarray:
    """Damping force on point i: -gamma * (vi - vj)."""
    if gamma < 0:
        raise ConfigError("gamma must be non-negative")
    return -gamma * (as_vec3(vi, "vi") - as_vec3(vj, "vj"))


def _edge_arrays(topology: SpringTopology):
    return (
        np.ascontiguousarray(topology.edges[:, 0]),
        np.ascontiguousarray(topology.edges[:, 1]),
        topology.rest_lengths,
    )


def accumulate_forces(state: MassSystemState, system: MassSystem,
                      topology: SpringTopology, springs: SpringParams,
                      globals_: GlobalPhysicalParams) -> np.ndarray:
    """Per-point net force: incident spring + dashpot forces plus gravity."""
    if springs.stiffness.shape[0] != topology.n_edges:
        raise ConfigError("spring parameter count does not match edge count")
    ei, ej, rest = _edge_arrays(topology)
    out = np.empty((system.n_points, 3))
    ndeg = kernels.accumulate_forces(
        state.positions, state.velocities, ei, ej, rest,
        springs.stiffness, springs.dashpot, system.masses, globals_.gravity, out,
    )
    _count_degenerate(ndeg)
    if not np.all(np.isfinite(out)):
        bad_point = int(np.argwhere(~np.isfinite(out).all(axis=1))[0, 0])
        bad_edges = topology.edges[(topology.edges == bad_point).any(axis=1)]
        raise SimulationDiverged(
            f"non-finite force at frame {state.frame_index}, point {bad_point}, "
            f"incident edges {bad_edges.tolist()}",
            frame_index=state.frame_index,
        )
    return out


def collision_impulse(state: MassSystemState, globals_: GlobalPhysicalParams) -> np.ndarray:
    """Velocity corrections from ground contact; zero rows for free points."""
    v_new, _ = _collide(state.positions, state.velocities, globals_.ground_height,
                        globals_.restitution, globals_.friction)
    return v_new - state.velocities


def euler_step(state: MassSystemState, forces: np.ndarray, system: MassSystem,
               globals_: GlobalPhysicalParams, prescribed: dict[int, np.ndarray] | None = None,
               ) -> MassSystemState:
    """One substep of the semi-implicit update, with collision corrections
    applied to the velocity before the position update. `prescribed` pins
    control points to target positions, with velocity (target - x)/dt."""
    forces = as_points(forces, "forces")
    if forces.shape[0] != state.n_points:
        raise ConfigError("forces length must match point count")
    dt = globals_.dt
    vh = globals_.drag * (state.velocities + (dt * forces) / system.masses[:, None])
    v_new, contact = _collide(state.positions, vh, globals_.ground_height,
                              globals_.restitution, globals_.friction)
    x_new = state.positions + dt * v_new
    clamp = contact & (x_new[:, 1] < globals_.ground_height)
    x_new[clamp, 1] = globals_.ground_height
    if prescribed:
        ctrl = set(int(i) for i in system.control_indices)
        for idx, target in prescribed.items():
            if int(idx) not in ctrl:
                raise ConfigError(f"point {idx} is not a control point")
            target = as_vec3(target, "prescribed position")
            v_new[idx] = (target - state.positions[idx]) / dt
            x_new[idx] = target
    return MassSystemState(x_new, v_new, state.frame_index + 1)


def _check_frame(x: np.ndarray, v: np.ndarray, frame: int) -> None:
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise SimulationDiverged(f"non-finite state at frame {frame}", frame_index=frame)
    norms2 = x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2
    if np.any(norms2 > DIVERGENCE_RADIUS**2):
        raise SimulationDiverged(f"position norm exceeded {DIVERGENCE_RADIUS:g} m "
                                 f"at frame {frame}", frame_index=frame)


def _prep_controls(system: MassSystem, controls: ControlSchedule | None, n_frames: int):
    if controls is None or controls.control_indices.size == 0:
        idx = np.zeros(0, dtype=np.int64)
        pos = np.zeros((n_frames, 0, 3))
        return idx, pos
    if controls.n_frames < n_frames:
        raise ConfigError(f"control schedule covers {controls.n_frames} frames, "
                          f"need {n_frames}")
    if sorted(controls.control_indices.tolist()) != sorted(system.control_indices.tolist()):
        raise ConfigError("control schedule indices do not match the system's control points")
    return controls.control_indices, controls.positions


def rollout_positions(initial: MassSystemState, system: MassSystem,
                      topology: SpringTopology, springs: SpringParams,
                      globals_: GlobalPhysicalParams, controls: ControlSchedule | None,
                      n_frames: int) -> np.ndarray:
    """Fast rollout returning only per-frame positions, shape (n_frames, n, 3)."""
    traj_x, _ = _rollout_arrays(initial, system, topology, springs, globals_, controls, n_frames)
    return traj_x


def _rollout_arrays(initial, system, topology, springs, globals_, controls, n_frames):
    if n_frames < 1:
        raise ConfigError("n_frames must be at least 1")
    if initial.n_points != system.n_points:
        raise ConfigError("initial state size does not match system")
    ei, ej, rest = _edge_arrays(topology)
    ctrl_idx, ctrl_pos = _prep_controls(system, controls, n_frames)
    n = system.n_points
    S = globals_.substeps_per_frame
    hx = np.empty((S + 1, n, 3))
    hv = np.empty((S + 1, n, 3))
    traj_x = np.empty((n_frames, n, 3))
    traj_v = np.empty((n_frames, n, 3))
    traj_x[0] = initial.positions
    traj_v[0] = initial.velocities
    _check_frame(traj_x[0], traj_v[0], initial.frame_index)
    for f in range(n_frames - 1):
        hx[0] = traj_x[f]
        hv[0] = traj_v[f]
        ndeg = kernels.frame_forward(
            hx, hv, ei, ej, rest, springs.stiffness, springs.dashpot,
            system.masses, globals_.gravity, globals_.drag, globals_.dt,
            globals_.ground_height, globals_.restitution, globals_.friction,
            ctrl_idx, np.ascontiguousarray(ctrl_pos[f]), np.ascontiguousarray(ctrl_pos[f + 1]),
            S,
        )
        _count_degenerate(ndeg)
        traj_x[f + 1] = hx[S]
        traj_v[f + 1] = hv[S]
        _check_frame(traj_x[f + 1], traj_v[f + 1], initial.frame_index + f + 1)
    return traj_x, traj_v


def rollout(initial: MassSystemState, system: MassSystem, topology: SpringTopology,
            springs: SpringParams, globals_: GlobalPhysicalParams,
            controls: ControlSchedule | None, n_frames: int) -> Trajectory:
    """Simulate n_frames states (frame 0 is the initial state).

    Deterministic: identical inputs give bit-identical trajectories.
    Raises SimulationDiverged with the offending frame index on blow-up.
    """
    traj_x, traj_v = _rollout_arrays(initial, system, topology, springs, globals_,
                                     controls, n_frames)
    base = initial.frame_index
    states = [MassSystemState(traj_x[f].copy(), traj_v[f].copy(), base + f)
              for f in range(n_frames)]
    return Trajectory(states)


def skin_points(query_canonical, system: MassSystem, trajectory: Trajectory,
                k_neighbors: int) -> np.ndarray:
    """Carry query points along with the mass points.

    Each query follows the inverse-distance-weighted mean displacement of its
    k nearest mass points in the canonical frame. Returns an array of shape
    (n_frames, n_query, 3).
    """
    query = as_points(query_canonical, "query_canonical")
    if not 1 <= k_neighbors <= system.n_points:
        raise ConfigError("k_neighbors must lie in [1, point count]")
    if len(trajectory) == 0:
        raise ConfigError("trajectory is empty")
    diff = query[:, None, :] - system.canonical_positions[None, :, :]
    dist = np.sqrt(diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2 + diff[:, :, 2] ** 2)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k_neighbors]
    w = 1.0 / (np.take_along_axis(dist, order, axis=1) + 1e-8)
    w = w / w.sum(axis=1, keepdims=True)
    frames = trajectory.positions_array()
    disp = frames - system.canonical_positions[None, :, :]
    out = np.empty((frames.shape[0], query.shape[0], 3))
    for f in range(frames.shape[0]):
        out[f] = query + np.einsum("qk,qkc->qc", w, disp[f][order])
    return out


def save_trajectory(path, trajectory: Trajectory, dt_frame: float) -> None:
    """Write {"frames": [{"t": int, "positions": [[x,y,z],...]}], "dt_frame": s}."""
    doc = {
        "frames": [
            {"t": int(s.frame_index), "positions": s.positions.tolist()}
            for s in trajectory.states
        ],
        "dt_frame": float(dt_frame),
    }
    jsonio.dump(doc, path)


def load_trajectory(path) -> tuple[Trajectory, float]:
    doc = jsonio.load(path)
    states = [
        MassSystemState(np.asarray(fr["positions"], dtype=np.float64),
                        np.zeros((len(fr["positions"]), 3)), int(fr["t"]))
        for fr in doc["frames"]
    ]
    return Trajectory(states), float(doc["dt_frame"])
