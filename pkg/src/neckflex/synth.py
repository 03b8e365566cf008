"""Synthetic recordings with known ground truth.

The head is a rigid body rotating about a pivot in the sagittal plane with
``phi(t) = A sin(2 pi t / T)``; the three headband markers sit on a circle of
radius ``head_radius`` around the pivot, while the earlobe (MA1) and chair
(MS1) markers stay put. Frames are rendered by projecting every marker through
:func:`project_to_pixel`: a bright disk in RGB and a disk at the offset-shifted
position in depth, in front of a flat wall.

Random draws are keyed on ``(seed, frame, role, stream)`` so any frame can be
rendered alone, in any order, with identical output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frameio import DepthFrame, LazyFrames, Manifest, RgbFrame, SessionBundle
from .kinematics import AngleSeries, KinematicReport, ReferenceFrame
from .register import CameraModel, Offset2D, Point3D, project_to_pixel
from .track import ROLES, Sample, Trajectory3D
from .detect import DetectParams

WALL_MM = 1900
BACKGROUND_RGB = 80
MARKER_RGB = 245
DISK_RADIUS_PX = 4.0

# Detection settings matched to the rendered scene: the markers are the only
# thing in front of a flat wall, so two depth bands (markers | wall) suffice.
SYNTH_DETECT_PARAMS = DetectParams(n_levels=2, kept_layers=(1,))


@dataclass(frozen=True)
class NoiseModel:
    pixel_sigma: float = 0.0
    depth_sigma: float = 0.0
    dropout_prob: float = 0.0
    edge_zero_prob: float = 0.0  # chance each depth-disk border pixel reads 0

    def __post_init__(self):
        if self.pixel_sigma < 0 or self.depth_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0 <= self.dropout_prob < 1 or not 0 <= self.edge_zero_prob <= 1:
            raise ValueError("probabilities out of range")


@dataclass(frozen=True)
class MotionProfile:
    amplitude: float = 46.0
    period: float = 8.0
    n_cycles: float = 3.0
    head_radius: float = 20.0
    pivot: tuple[float, float, float] = (0.0, 5.0, 170.0)
    # MT1..MT3 angles (deg) on the headband, counter-clockwise from forward
    marker_layout: tuple[float, float, float] = (135.0, 90.0, 45.0)
    # MA1 / MS1 offsets from the pivot as (forward, up, depth) cm
    ma1_offset: tuple[float, float, float] = (2.0, 6.0, 1.0)
    ms1_offset: tuple[float, float, float] = (-5.0, -35.0, 3.0)
    pose: float = 0.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    fps: float = 30.0
    trial_kind: str = "motion"
    static_duration: float = 2.0
    subject_id: str = "S1"
    session_id: str = "1"

    def __post_init__(self):
        if self.trial_kind == "motion" and not 0 < self.amplitude < 90:
            raise ValueError("amplitude must lie in (0, 90) degrees")
        if not self.period > 0 or not self.n_cycles > 0 or not self.fps > 0:
            raise ValueError("period, n_cycles and fps must be positive")
        if self.trial_kind not in ("static", "motion"):
            raise ValueError(f"unknown trial_kind {self.trial_kind!r}")
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseModel(**self.noise))
        for name in ("pivot", "marker_layout", "ma1_offset", "ms1_offset"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def duration(self) -> float:
        return self.static_duration if self.trial_kind == "static" else self.period * self.n_cycles

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.fps))

    @property
    def angular_frequency(self) -> float:
        return 2 * math.pi / self.period


@dataclass
class GroundTruth:
    profile: MotionProfile
    trajectories: list[Trajectory3D]
    phi_exact: AngleSeries
    report_exact: KinematicReport
    phi0: float  # static head-line angle (deg) in the (forward, up) plane

    def to_dict(self) -> dict:
        r = self.report_exact
        return {
            "phi0_deg": self.phi0,
            "max_angle_deg": r.max_angle,
            "rom_deg": r.rom,
            "mean_omega_deg_s": r.mean_omega,
            "harmony": None if math.isnan(r.harmony) else r.harmony,
            "trajectories_cm": {
                t.role: [[s.t, *s.p] for s in t.samples] for t in self.trajectories
            },
        }


def _reference() -> ReferenceFrame:
    return ReferenceFrame(Point3D(0.0, 0.0, 0.0))


def _to_camera(pivot, forward: float, up: float, depth: float, ref: ReferenceFrame) -> Point3D:
    p = np.asarray(pivot) + forward * np.asarray(ref.u_forward) + up * np.asarray(ref.u_up)
    return Point3D(float(p[0]), float(p[1]), float(p[2] + depth))


def _head_points(profile: MotionProfile, phi_deg: float, ref: ReferenceFrame) -> list[Point3D]:
    pts = []
    for theta in profile.marker_layout:
        ang = math.radians(theta + profile.pose + phi_deg)
        f, u = profile.head_radius * math.cos(ang), profile.head_radius * math.sin(ang)
        pts.append(_to_camera(profile.pivot, f, u, 0.0, ref))
    return pts


def generate_motion(profile: MotionProfile) -> GroundTruth:
    """Analytic marker trajectories and kinematics for ``profile``."""
    ref = _reference()
    n = profile.frame_count
    t = np.arange(n) / profile.fps
    A = 0.0 if profile.trial_kind == "static" else profile.amplitude
    w = profile.angular_frequency
    phi = A * np.sin(w * t)
    omega = A * w * np.cos(w * t)
    omega_dot = -A * w * w * np.sin(w * t)

    ma1 = _to_camera(profile.pivot, *profile.ma1_offset, ref)
    ms1 = _to_camera(profile.pivot, *profile.ms1_offset, ref)
    trajs = {role: Trajectory3D(role) for role in ROLES}
    for k in range(n):
        mt = _head_points(profile, float(phi[k]), ref)
        for role, p in zip(ROLES, [*mt, ma1, ms1]):
            trajs[role].samples.append(Sample(float(t[k]), p, True))

    rest = _head_points(profile, 0.0, ref)
    chord = np.asarray(rest[2]) - np.asarray(rest[0])
    phi0 = math.degrees(math.atan2(*ref.plane_coords(chord)[::-1]))

    heads = np.mean([trajs[r].points for r in ("MT1", "MT2", "MT3")], axis=0) - np.asarray(ma1)
    duration = n / profile.fps
    if A == 0:
        max_angle = rom = mean_omega = 0.0
        harm = float("nan")
    else:
        max_angle, rom = A, 2 * A
        # mean of omega over [0, duration): net angle change / time
        mean_omega = A * math.sin(w * duration) / duration
        harm = -w * w
    report = KinematicReport(
        max_angle=max_angle, rom=rom, mean_omega=mean_omega, harmony=harm,
        series=AngleSeries(t, phi, omega, omega_dot), chair_ok=True,
        head_x=heads[:, 0], head_y=heads[:, 1],
        subject_id=profile.subject_id, session_id=profile.session_id,
    )
    return GroundTruth(profile, [trajs[r] for r in ROLES], report.series, report, phi0)


def disk_pixels(cx: float, cy: float, radius: float, width: int, height: int):
    """Integer (xs, ys) of pixel centres within ``radius`` of (cx, cy), clipped."""
    r = int(math.ceil(radius)) + 1
    x0, x1 = max(int(math.floor(cx)) - r, 0), min(int(math.floor(cx)) + r + 1, width)
    y0, y1 = max(int(math.floor(cy)) - r, 0), min(int(math.floor(cy)) + r + 1, height)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
    return xx[inside], yy[inside]


class _Renderer:
    def __init__(self, truth: GroundTruth, cam: CameraModel, offset: Offset2D, noise: NoiseModel, seed: int):
        self.cam = cam
        self.offset = offset
        self.noise = noise
        self.seed = seed
        n = truth.profile.frame_count
        self.pixels = np.empty((n, len(ROLES), 2))
        self.depth_mm = np.empty((n, len(ROLES)))
        for j, traj in enumerate(truth.trajectories):
            for i, s in enumerate(traj.samples):
                (a, b), d = project_to_pixel(cam, s.p)
                self.pixels[i, j] = a, b
                self.depth_mm[i, j] = d

    def _rng(self, frame: int, role: int, stream: int):
        return np.random.default_rng([self.seed, frame, role, stream])

    def _visible(self, frame: int, role: int) -> bool:
        p = self.noise.dropout_prob
        return p == 0 or self._rng(frame, role, 0).random() >= p

    def _jitter(self, frame: int, role: int, stream: int) -> np.ndarray:
        s = self.noise.pixel_sigma
        if s == 0:
            return np.zeros(2)
        return self._rng(frame, role, stream).normal(0.0, s, 2)

    def rgb(self, frame: int) -> RgbFrame:
        cam = self.cam
        img = np.full((cam.height, cam.width, 3), BACKGROUND_RGB, dtype=np.uint8)
        for j in range(len(ROLES)):
            if not self._visible(frame, j):
                continue
            cx, cy = self.pixels[frame, j] + self._jitter(frame, j, 1)
            xs, ys = disk_pixels(cx, cy, DISK_RADIUS_PX, cam.width, cam.height)
            img[ys, xs] = MARKER_RGB
        return RgbFrame(img)

    def depth(self, frame: int) -> DepthFrame:
        cam = self.cam
        img = np.full((cam.height, cam.width), WALL_MM, dtype=np.uint16)
        for j in range(len(ROLES)):
            if not self._visible(frame, j):
                continue
            rng = self._rng(frame, j, 3)
            # same jitter as the RGB disk: both sensors see one physical marker
            cx, cy = self.pixels[frame, j] + self._jitter(frame, j, 1)
            cx, cy = cx + self.offset.dx, cy + self.offset.dy
            xs, ys = disk_pixels(cx, cy, DISK_RADIUS_PX, cam.width, cam.height)
            vals = np.full(len(xs), self.depth_mm[frame, j])
            if self.noise.depth_sigma > 0:
                vals = vals + rng.normal(0.0, self.noise.depth_sigma, len(xs))
            vals = np.clip(np.rint(vals), 1, 65535).astype(np.uint16)
            if self.noise.edge_zero_prob > 0:
                edge = (xs - cx) ** 2 + (ys - cy) ** 2 > (DISK_RADIUS_PX - 1) ** 2
                vals[edge & (rng.random(len(xs)) < self.noise.edge_zero_prob)] = 0
            img[ys, xs] = vals
        return DepthFrame(img)


def render_session(
    truth: GroundTruth,
    cam: CameraModel = CameraModel(),
    offset: Offset2D = Offset2D(),
    noise: NoiseModel | None = None,
    seed: int | None = None,
) -> SessionBundle:
    """Render ``truth`` into a lazily evaluated :class:`SessionBundle`.

    Frames are produced on access, so a long session costs no memory until
    it is written or iterated. Raises :class:`OutOfFrustumError` up front if
    any marker leaves the field of view.
    """
    profile = truth.profile
    noise = profile.noise if noise is None else noise
    seed = profile.seed if seed is None else seed
    renderer = _Renderer(truth, cam, offset, noise, seed)
    manifest = Manifest(
        width=cam.width, height=cam.height, fps=profile.fps, frame_count=profile.frame_count,
        subject_id=profile.subject_id, session_id=profile.session_id, trial_kind=profile.trial_kind,
    )
    n = profile.frame_count
    return SessionBundle(manifest, LazyFrames(n, renderer.rgb), LazyFrames(n, renderer.depth))
