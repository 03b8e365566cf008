"""Kalman tracking of the five markers across a recording.

Tracks live in RGB pixel space with an independent constant-velocity model
per axis; depth is sampled at the offset-shifted detection afterwards and the
filtered pixel position is lifted to 3D with :func:`reconstruct_3d`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detect import DetectParams, Detection2D, detect_markers, sample_depth
from .errors import FilterDivergenceError, NoDepthError, TrackLostError
from .register import CameraModel, Offset2D, Point3D, reconstruct_3d

ROLES = ("MT1", "MT2", "MT3", "MA1", "MS1")


@dataclass(frozen=True, eq=False)
class KalmanModel:
    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A, H, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.A, self.H, self.Q, self.R))
        n = A.shape[0]
        m = H.shape[0]
        if A.shape != (n, n) or H.shape != (m, n) or Q.shape != (n, n) or R.shape != (m, m):
            raise ValueError(f"inconsistent shapes A{A.shape} H{H.shape} Q{Q.shape} R{R.shape}")
        if not (np.allclose(Q, Q.T) and np.allclose(R, R.T)):
            raise ValueError("Q and R must be symmetric")
        for name, val in (("A", A), ("H", H), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, val)


@dataclass(frozen=True, eq=False)
class TrackState:
    x_hat: np.ndarray
    P: np.ndarray
    frames_missed: int = 0
    track_id: str = ""


class Sample(NamedTuple):
    t: float
    p: Point3D
    filtered: bool


@dataclass
class Trajectory3D:
    role: str
    samples: list[Sample] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def points(self) -> np.ndarray:
        return np.array([tuple(s.p) for s in self.samples], dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class TrackParams:
    sigma_process: float = 200.0
    sigma_meas: float = 1.0
    gate_px: float = 20.0
    max_missed: int = 15


def default_model(fps: float, sigma_process: float, sigma_meas: float, ndim: int = 2) -> KalmanModel:
    """Constant-velocity model, state ``(pos, vel)`` per axis, axes independent.

    Process noise is white acceleration with density ``sigma_process`` (px/s^2).
    """
    if not fps > 0:
        raise ValueError("fps must be positive")
    dt = 1.0 / fps
    a = np.array([[1.0, dt], [0.0, 1.0]])
    h = np.array([[1.0, 0.0]])
    g = np.array([[dt * dt / 2], [dt]])
    q = sigma_process ** 2 * (g @ g.T)
    eye = np.eye(ndim)
    return KalmanModel(
        A=np.kron(eye, a),
        H=np.kron(eye, h),
        Q=np.kron(eye, q),
        R=sigma_meas ** 2 * eye,
    )


def kf_predict(model: KalmanModel, s: TrackState) -> TrackState:
    x = model.A @ s.x_hat
    P = model.A @ s.P @ model.A.T + model.Q
    return replace(s, x_hat=x, P=(P + P.T) / 2)


def kf_update(model: KalmanModel, s: TrackState, z) -> TrackState:
    H = model.H
    S = H @ s.P @ H.T + model.R
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e12:
        raise FilterDivergenceError(f"innovation covariance is singular (cond={np.linalg.cond(S):.3g})")
    # K = P H' S^-1, via a solve against the symmetric S
    K = np.linalg.solve(S, H @ s.P).T
    innovation = np.asarray(z, dtype=float).reshape(-1) - H @ s.x_hat
    x = s.x_hat + K @ innovation
    P = (np.eye(len(x)) - K @ H) @ s.P
    return replace(s, x_hat=x, P=(P + P.T) / 2, frames_missed=0)


class Assignment(NamedTuple):
    matches: dict          # track_id -> detection index
    unmatched_tracks: list
    unmatched_detections: list


def associate(predictions, detections) -> Assignment:
    """Gated one-to-one assignment of detections to predicted track positions.

    ``predictions`` is a list of ``(track_id, (x, y), gate_px)``. Pairs farther
    apart than the gate are forbidden; among the allowed matchings the one with
    the most pairs is chosen, ties broken by least total Euclidean distance.
    """
    ids = [p[0] for p in predictions]
    if not predictions or not detections:
        return Assignment({}, ids, list(range(len(detections))))
    pred = np.array([p[1] for p in predictions], dtype=float)
    gates = np.array([p[2] for p in predictions], dtype=float)
    if np.any(gates <= 0):
        raise ValueError("gate must be positive")
    det = np.array([d.centroid if hasattr(d, "centroid") else d for d in detections], dtype=float)
    dist = np.linalg.norm(pred[:, None, :] - det[None, :, :], axis=2)
    allowed = dist <= gates[:, None]
    # a forbidden pair costs more than any complete set of allowed pairs
    big = 1.0 + dist[allowed].sum() if allowed.any() else 1.0
    cost = np.where(allowed, dist, big)
    rows, cols = linear_sum_assignment(cost)
    matches = {ids[r]: int(c) for r, c in zip(rows, cols) if allowed[r, c]}
    used = set(matches.values())
    return Assignment(
        matches,
        [t for t in ids if t not in matches],
        [j for j in range(len(detections)) if j not in used],
    )


class Tracker:
    """Frame-by-frame tracker; :func:`track_markers` drives it over a bundle."""

    def __init__(
        self,
        initial_px: dict,
        initial_depth: dict,
        offset: Offset2D,
        cam: CameraModel,
        fps: float,
        detect_params: DetectParams = DetectParams(),
        params: TrackParams = TrackParams(),
        initial_velocity_sigma: float = 100.0,
    ):
        self.model = default_model(fps, params.sigma_process, params.sigma_meas)
        self.params = params
        self.detect_params = detect_params
        self.offset = offset
        self.cam = cam
        self.fps = fps
        p0 = np.diag([params.sigma_meas ** 2, initial_velocity_sigma ** 2] * 2)
        self.states = {
            role: TrackState(np.array([xy[0], 0.0, xy[1], 0.0]), p0.copy(), 0, role)
            for role, xy in initial_px.items()
        }
        self.depth = {role: float(initial_depth[role]) for role in initial_px}
        self.trajectories = {role: Trajectory3D(role) for role in initial_px}
        self.seeded = False

    def _seed(self, detections) -> None:
        # static-trial positions may be further off than one frame's motion
        preds = [(role, (s.x_hat[0], s.x_hat[2]), 2 * self.params.gate_px) for role, s in self.states.items()]
        for role, j in associate(preds, detections).matches.items():
            s = self.states[role]
            cx, cy = detections[j].centroid
            self.states[role] = replace(s, x_hat=np.array([cx, 0.0, cy, 0.0]))
        self.seeded = True

    def step(self, index: int, rgb, depth) -> None:
        t = index / self.fps
        detections = detect_markers(rgb, self.detect_params, index)
        if not self.seeded:
            self._seed(detections)
        predicted = {role: kf_predict(self.model, s) for role, s in self.states.items()}
        gate = self.params.gate_px
        preds = [(role, (s.x_hat[0], s.x_hat[2]), gate) for role, s in predicted.items()]
        result = associate(preds, detections)
        for role, s in predicted.items():
            j = result.matches.get(role)
            if j is None:
                s = replace(s, frames_missed=s.frames_missed + 1)
                if s.frames_missed > self.params.max_missed:
                    raise TrackLostError(role, index)
            else:
                cx, cy = detections[j].centroid
                s = kf_update(self.model, s, (cx, cy))
                at = (cx + self.offset.dx, cy + self.offset.dy)
                try:
                    self.depth[role] = sample_depth(depth, at, self.detect_params.depth_window)
                except NoDepthError:
                    pass
            self.states[role] = s
            p = reconstruct_3d(self.cam, (s.x_hat[0], s.x_hat[2]), self.depth[role])
            self.trajectories[role].samples.append(Sample(t, p, j is not None))


def track_markers(
    bundle,
    initial_px: dict,
    initial_depth: dict,
    offset: Offset2D = Offset2D(),
    cam: CameraModel | None = None,
    detect_params: DetectParams = DetectParams(),
    params: TrackParams = TrackParams(),
) -> list[Trajectory3D]:
    """Track every role of ``initial_px`` through ``bundle``.

    ``initial_px`` holds static-trial RGB pixel positions per role and
    ``initial_depth`` the matching depths (mm), used until the first valid
    depth sample. Unmatched tracks coast on the prediction and their samples
    are flagged ``filtered=False``; more than ``max_missed`` consecutive
    misses raises :class:`TrackLostError`.
    """
    m = bundle.manifest
    cam = cam or CameraModel(m.width, m.height)
    tracker = Tracker(initial_px, initial_depth, offset, cam, m.fps, detect_params, params)
    for i in range(m.frame_count):
        tracker.step(i, bundle.rgb[i], bundle.depth[i])
    return [tracker.trajectories[r] for r in initial_px]
