"""Fitting objective terms and evaluation metrics.

The per-frame objective is a single-direction Chamfer term (observed cloud
against the simulated points, suited to partial views) plus a tracking term
over points with known correspondences. Both are mean Euclidean distances in
meters; the sequence objective sums them over a frame range, evaluation
averages them per range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .types import ConfigError, ControlSchedule, MassSystem, Trajectory, as_points

log = logging.getLogger(__name__)


@dataclass
class FrameObservation:
    """One frame: a partial point cloud, tracked points, and control targets."""

    observed: np.ndarray                       # (k, 3), possibly empty
    tracks: dict[str, np.ndarray | None] = field(default_factory=dict)
    controls: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=np.float64).reshape(-1, 3)
        if obs.size and not np.all(np.isfinite(obs)):
            raise ConfigError("observed cloud contains non-finite values")
        self.observed = obs
        self.tracks = {
            str(tid): (None if p is None else np.asarray(p, dtype=np.float64))
            for tid, p in self.tracks.items()
        }
        self.controls = {int(i): np.asarray(p, dtype=np.float64)
                         for i, p in self.controls.items()}


@dataclass
class ObservationSequence:
    """Per-frame observations with the train/future split point."""

    frames: list[FrameObservation]
    dt_frame: float
    split_frame: int

    def __post_init__(self):
        if self.dt_frame <= 0:
            raise ConfigError("dt_frame must be positive")
        if not 0 <= self.split_frame <= len(self.frames):
            raise ConfigError("split_frame out of range")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def control_indices(self) -> np.ndarray:
        idx: set[int] = set()
        for fr in self.frames:
            idx.update(fr.controls)
        return np.array(sorted(idx), dtype=np.int64)

    def control_schedule(self) -> ControlSchedule:
        return ControlSchedule.from_frames([fr.controls for fr in self.frames],
                                           self.control_indices())

    def save(self, path) -> None:
        doc = {
            "dt_frame": float(self.dt_frame),
            "split_frame": int(self.split_frame),
            "frames": [
                {
                    "observed": fr.observed.tolist(),
                    "tracks": {tid: (None if p is None else p.tolist())
                               for tid, p in fr.tracks.items()},
                    "controls": {str(i): p.tolist() for i, p in fr.controls.items()},
                }
                for fr in self.frames
            ],
        }
        jsonio.dump(doc, path)

    @classmethod
    def load(cls, path) -> "ObservationSequence":
        doc = jsonio.load(path)
        frames = [
            FrameObservation(
                observed=np.asarray(fr["observed"], dtype=np.float64).reshape(-1, 3),
                tracks=fr.get("tracks", {}),
                controls=fr.get("controls", {}),
            )
            for fr in doc["frames"]
        ]
        return cls(frames, float(doc["dt_frame"]), int(doc["split_frame"]))


@dataclass(frozen=True)
class LossReport:
    geometry: float
    motion: float
    total: float


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return np.sqrt(d[:, :, 0] ** 2 + d[:, :, 1] ** 2 + d[:, :, 2] ** 2)


def nearest_predicted(observed: np.ndarray, predicted: np.ndarray):
    """Per observed point: distance to and index of the nearest predicted point."""
    dist = _pairwise_distances(observed, predicted)
    idx = np.argmin(dist, axis=1)
    return dist[np.arange(observed.shape[0]), idx], idx


def chamfer_single(observed, predicted, squared: bool = False) -> float:
    """Mean distance from each observed point to its nearest predicted point.

    An empty observed cloud contributes 0 (with a warning); an empty
    predicted set is an error.
    """
    predicted = as_points(np.asarray(predicted, dtype=np.float64).reshape(-1, 3), "predicted")
    observed = np.asarray(observed, dtype=np.float64).reshape(-1, 3)
    if predicted.shape[0] == 0:
        raise ConfigError("predicted point set is empty")
    if observed.shape[0] == 0:
        log.warning("empty observed cloud: chamfer term skipped")
        return 0.0
    dists, _ = nearest_predicted(observed, predicted)
    if squared:
        dists = dists**2
    return float(np.mean(dists))


def track_error(predicted: dict[str, np.ndarray], observed: dict[str, np.ndarray | None],
                squared: bool = False) -> float:
    """Mean distance over tracks present in the observation."""
    errs = []
    for tid, obs in observed.items():
        if obs is None:
            continue
        if tid not in predicted:
            raise ConfigError(f"no prediction for observed track {tid!r}")
        d = np.asarray(predicted[tid], dtype=np.float64) - np.asarray(obs, dtype=np.float64)
        e = float(np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2))
        errs.append(e**2 if squared else e)
    if not errs:
        log.warning("no tracks present in observation: motion term is 0")
        return 0.0
    return float(np.mean(errs))


def bind_tracks(observations: ObservationSequence, system: MassSystem) -> dict[str, int]:
    """Bind each track to its nearest mass point at frame 0 (ties: lowest index)."""
    if observations.n_frames == 0:
        raise ConfigError("observation sequence is empty")
    binding: dict[str, int] = {}
    frame0 = observations.frames[0]
    for tid, pos in frame0.tracks.items():
        if pos is None:
            continue
        d = system.canonical_positions - pos[None, :]
        dist2 = d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2
        binding[tid] = int(np.argmin(dist2))
    all_ids = {tid for fr in observations.frames for tid in fr.tracks}
    for tid in sorted(all_ids - set(binding)):
        log.warning("track %s absent at frame 0: excluded from binding", tid)
    return binding


def track_arrays(observations: ObservationSequence, binding: dict[str, int]):
    """Per frame: (bound point indices, observed positions) for present tracks.

    Iteration follows sorted track ids so results are order-independent."""
    table = []
    for fr in observations.frames:
        idx, pos = [], []
        for tid in sorted(fr.tracks):
            p = fr.tracks[tid]
            if p is None or tid not in binding:
                continue
            idx.append(binding[tid])
            pos.append(p)
        table.append((np.asarray(idx, dtype=np.int64),
                      np.asarray(pos, dtype=np.float64).reshape(-1, 3)))
    return table


def frame_losses(pred_positions: np.ndarray, frame: FrameObservation,
                 tr_idx: np.ndarray, tr_pos: np.ndarray, squared: bool = False):
    """(geometry, motion) losses of one frame against one predicted state."""
    if frame.observed.shape[0]:
        dists, _ = nearest_predicted(frame.observed, pred_positions)
        geo = float(np.mean(dists**2 if squared else dists))
    else:
        geo = 0.0
    if tr_idx.shape[0]:
        d = pred_positions[tr_idx] - tr_pos
        e = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2)
        mot = float(np.mean(e**2 if squared else e))
    else:
        mot = 0.0
    return geo, mot


def objective_from_positions(positions: np.ndarray, observations: ObservationSequence,
                             binding: dict[str, int], frame_range: range,
                             weights: tuple[float, float] = (1.0, 1.0),
                             squared: bool = False) -> LossReport:
    """Sum per-frame losses over frame_range; positions[f] is frame f."""
    if frame_range.step != 1:
        raise ConfigError("frame_range must have step 1")
    if len(frame_range) and (frame_range.start < 0
                             or frame_range.stop > min(positions.shape[0],
                                                       observations.n_frames)):
        raise ConfigError("frame_range not covered by trajectory/observations")
    table = track_arrays(observations, binding)
    geo_sum = 0.0
    mot_sum = 0.0
    for f in frame_range:
        geo, mot = frame_losses(positions[f], observations.frames[f],
                                table[f][0], table[f][1], squared)
        geo_sum += geo
        mot_sum += mot
    total = weights[0] * geo_sum + weights[1] * mot_sum
    return LossReport(geo_sum, mot_sum, total)


def sequence_objective(trajectory: Trajectory, observations: ObservationSequence,
                       track_binding: dict[str, int], frame_range: range,
                       weights: tuple[float, float] = (1.0, 1.0),
                       squared: bool = False) -> LossReport:
    """Stage-one objective: summed chamfer + track error over frame_range.

    Simulation divergence surfaces earlier (in rollout); zeroth-order search
    maps it to a penalty value, gradient training treats it as a hard error.
    """
    base = trajectory[0].frame_index
    if len(frame_range) and (frame_range.start < base
                             or frame_range.stop > base + len(trajectory)):
        raise ConfigError("trajectory does not cover frame_range")
    positions = trajectory.positions_array()
    shifted = range(frame_range.start - base, frame_range.stop - base)
    report = objective_from_positions(positions, observations, track_binding,
                                      shifted, weights, squared)
    return report


def eval_metrics(trajectory: Trajectory, observations: ObservationSequence,
                 binding: dict[str, int], split: int,
                 squared: bool = False) -> dict:
    """Reconstruction metrics over [0, split) and future metrics over [split, end).

    Returns {"CD_recon", "TE_recon", "CD_future", "TE_future"} (None when a
    range is empty) plus per-frame series.
    """
    n = min(len(trajectory), observations.n_frames)
    table = track_arrays(observations, binding)
    positions = trajectory.positions_array()
    cd = []
    te = []
    for f in range(n):
        geo, mot = frame_losses(positions[f], observations.frames[f],
                                table[f][0], table[f][1], squared)
        cd.append(geo)
        te.append(mot)

    def avg(lo, hi, series):
        if hi <= lo:
            return None
        return float(np.mean(series[lo:hi]))

    return {
        "CD_recon": avg(0, min(split, n), cd),
        "TE_recon": avg(0, min(split, n), te),
        "CD_future": avg(min(split, n), n, cd),
        "TE_future": avg(min(split, n), n, te),
        "per_frame": {"chamfer": cd, "track_error": te},
    }
