"""Flexo-extension angle and the summary variables derived from it.

The head line is the MT1 -> MT3 chord. Its orientation is measured in the
sagittal plane spanned by ``u_forward`` (camera -x) and ``u_up`` (camera +y),
relative to the orientation recorded in the static trial. Extension (head
tilted back) is positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAngleError, MissingRoleError, StatisticsError, UnstableStaticError
from .register import Point3D
from .track import ROLES, Trajectory3D

MIN_STATIC_FRAMES = 30
MAX_STATIC_STD_CM = 1.0


@dataclass(frozen=True)
class ReferenceFrame:
    origin: Point3D
    u_forward: tuple[float, float, float] = (-1.0, 0.0, 0.0)
    u_up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    phi0: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.u_forward, dtype=float)
        u = np.asarray(self.u_up, dtype=float)
        if abs(np.linalg.norm(f) - 1) > 1e-9 or abs(np.linalg.norm(u) - 1) > 1e-9:
            raise ValueError("reference axes must be unit vectors")
        if abs(f @ u) > 1e-9:
            raise ValueError("reference axes must be orthogonal")

    def plane_coords(self, v) -> tuple[float, float]:
        """(forward, up) components of a 3D vector."""
        v = np.asarray(v, dtype=float)
        return float(v @ np.asarray(self.u_forward)), float(v @ np.asarray(self.u_up))


@dataclass
class AngleSeries:
    t: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray

    CSV_HEADER = "t_s,phi_deg,omega_deg_s,omega_dot_deg_s2"

    def to_csv(self) -> str:
        rows = [self.CSV_HEADER]
        for row in zip(self.t, self.phi, self.omega, self.omega_dot):
            rows.append(",".join(repr(float(v)) for v in row))
        return "\n".join(rows) + "\n"


@dataclass
class KinematicReport:
    max_angle: float
    rom: float
    mean_omega: float
    harmony: float
    series: AngleSeries
    chair_ok: bool
    # MA1-referenced camera-frame x/y (cm) of the head (mean of MT1..MT3)
    head_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    head_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    subject_id: str = ""
    session_id: str = ""

    def to_dict(self) -> dict:
        s = self.series
        return {
            "subject_id": self.subject_id,
            "session_id": self.session_id,
            "max_angle_deg": float(self.max_angle),
            "rom_deg": float(self.rom),
            "mean_omega_deg_s": float(self.mean_omega),
            "harmony": None if math.isnan(self.harmony) else float(self.harmony),
            "chair_ok": bool(self.chair_ok),
            "series": {
                "t_s": [float(v) for v in s.t],
                "phi_deg": [float(v) for v in s.phi],
                "omega_deg_s": [float(v) for v in s.omega],
                "omega_dot_deg_s2": [float(v) for v in s.omega_dot],
            },
            "head_position_cm": {
                "x": [float(v) for v in self.head_x],
                "y": [float(v) for v in self.head_y],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> KinematicReport:
        s = d["series"]
        series = AngleSeries(
            np.asarray(s["t_s"], dtype=float),
            np.asarray(s["phi_deg"], dtype=float),
            np.asarray(s["omega_deg_s"], dtype=float),
            np.asarray(s["omega_dot_deg_s2"], dtype=float),
        )
        pos = d.get("head_position_cm", {"x": [], "y": []})
        return cls(
            max_angle=d["max_angle_deg"], rom=d["rom_deg"], mean_omega=d["mean_omega_deg_s"],
            harmony=math.nan if d["harmony"] is None else d["harmony"], series=series, chair_ok=d["chair_ok"],
            head_x=np.asarray(pos["x"], dtype=float), head_y=np.asarray(pos["y"], dtype=float),
            subject_id=d.get("subject_id", ""), session_id=d.get("session_id", ""),
        )


@dataclass(frozen=True)
class KinematicsParams:
    smooth_window: int = 21
    smooth_order: int = 2
    chair_threshold_cm: float = 0.5
    # the chair should be still, so its track gets a longer, first-order smoother
    chair_smooth_window: int = 31

    def __post_init__(self):
        for w in (self.smooth_window, self.chair_smooth_window):
            if w < 3 or w % 2 == 0:
                raise ValueError(f"smoothing windows must be odd and >= 3, got {w}")
        if not 0 <= self.smooth_order < self.smooth_window:
            raise ValueError("smooth_order must lie in [0, smooth_window)")
        if not self.chair_threshold_cm > 0:
            raise ValueError("chair_threshold_cm must be positive")


def _by_role(trajectories) -> dict[str, Trajectory3D]:
    return {t.role: t for t in trajectories}


def _chord_angle(mt1, mt3, ref: ReferenceFrame) -> float:
    f, u = ref.plane_coords(np.asarray(mt3, dtype=float) - np.asarray(mt1, dtype=float))
    if math.hypot(f, u) < 1e-6:
        raise DegenerateAngleError("MT1 and MT3 coincide in the sagittal plane")
    return math.degrees(math.atan2(u, f))


def _wrap(deg: float) -> float:
    """Map to (-180, 180]."""
    w = math.fmod(deg, 360.0)
    if w <= -180.0:
        w += 360.0
    elif w > 180.0:
        w -= 360.0
    return w


def build_reference(static_trajectories) -> ReferenceFrame:
    """Reference frame from a static trial: MA1 origin and head-line angle."""
    by_role = _by_role(static_trajectories)
    missing = [r for r in ROLES if r not in by_role or not by_role[r].samples]
    if missing:
        raise MissingRoleError(missing)
    n = min(len(by_role[r].samples) for r in ROLES)
    if n < MIN_STATIC_FRAMES:
        raise UnstableStaticError(f"static trial has {n} frames, need >= {MIN_STATIC_FRAMES}")
    for role in ROLES:
        std = by_role[role].points.std(axis=0)
        if np.any(std > MAX_STATIC_STD_CM):
            raise UnstableStaticError(
                f"{role} moved during the static trial (std {np.round(std, 3).tolist()} cm)"
            )
    origin = Point3D(*by_role["MA1"].points.mean(axis=0))
    probe = ReferenceFrame(origin)
    mt1 = by_role["MT1"].points.mean(axis=0)
    mt3 = by_role["MT3"].points.mean(axis=0)
    return ReferenceFrame(origin, probe.u_forward, probe.u_up, _chord_angle(mt1, mt3, probe))


def flexion_angle(mt1, mt3, ref: ReferenceFrame) -> float:
    """Signed sagittal angle (deg) of the MT1->MT3 chord relative to the static pose."""
    return _wrap(_chord_angle(mt1, mt3, ref) - ref.phi0)


def smooth(series, window: int = 21, order: int = 2) -> np.ndarray:
    """Savitzky-Golay smoothing.

    Each output sample is the value at that sample of the least-squares
    polynomial of degree ``order`` fitted over ``window`` neighbouring samples.
    Near the ends the window is shifted inward (one-sided) rather than padded.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd")
    if order >= window:
        raise ValueError("order must be less than window")
    if n < window:
        raise StatisticsError(f"series of length {n} is shorter than window {window}")
    half = window // 2
    offsets = np.arange(window) - half
    out = np.empty(n)
    # centred weights: row 0 of the pseudo-inverse of the Vandermonde matrix
    V = np.vander(offsets, order + 1, increasing=True)
    pinv = np.linalg.pinv(V)
    centre = pinv[0]
    if n > 2 * half:
        out[half:n - half] = np.correlate(y, centre, mode="valid")
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - half, 0), n - window)
        pos = i - start - half
        # evaluate the fitted polynomial at the sample's offset within the window
        out[i] = (pos ** np.arange(order + 1)) @ (pinv @ y[start:start + window])
    return out


def differentiate(series, dt: float) -> np.ndarray:
    """Second-order finite differences: central inside, one-sided at the ends."""
    y = np.asarray(series, dtype=float)
    if len(y) < 3:
        raise StatisticsError("need at least 3 samples to differentiate")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return np.gradient(y, dt, edge_order=2)


def harmony(phi, omega_dot) -> float:
    """Least-squares slope of angular acceleration against angle, (deg/s^2)/deg."""
    x = np.asarray(phi, dtype=float)
    y = np.asarray(omega_dot, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise StatisticsError("harmony needs two equal-length series of length >= 2")
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx <= 0:
        raise StatisticsError("angle series has zero variance")
    return float(xc @ (y - y.mean()) / sxx)


def check_chair(ms1: Trajectory3D, threshold: float = 0.5) -> bool:
    pts = ms1.points
    if len(pts) == 0:
        raise ValueError("empty chair trajectory")
    return bool(np.max(np.linalg.norm(pts - pts[0], axis=1)) <= threshold)


def _smoothed(traj: Trajectory3D, window: int, order: int) -> Trajectory3D:
    pts = traj.points
    if len(pts) < window:
        return traj
    cols = [smooth(pts[:, k], window, order) for k in range(3)]
    return Trajectory3D(traj.role, [
        s._replace(p=Point3D(float(x), float(y), float(z)))
        for s, x, y, z in zip(traj.samples, *cols)
    ])


def analyze_session(
    trajectories,
    ref: ReferenceFrame,
    params: KinematicsParams = KinematicsParams(),
    subject_id: str = "",
    session_id: str = "",
) -> KinematicReport:
    by_role = _by_role(trajectories)
    missing = [r for r in ("MT1", "MT3", "MS1") if r not in by_role]
    if missing:
        raise MissingRoleError(missing)
    t = by_role["MT1"].times
    for role in ("MT3", "MS1"):
        if not np.array_equal(by_role[role].times, t):
            raise ValueError(f"{role} samples are not time-aligned with MT1")
    if len(t) < 2:
        raise StatisticsError("session too short")
    dt = float(np.mean(np.diff(t)))
    mt1 = by_role["MT1"].points
    mt3 = by_role["MT3"].points
    raw = np.array([flexion_angle(a, b, ref) for a, b in zip(mt1, mt3)])
    phi = smooth(raw, params.smooth_window, params.smooth_order)
    omega = differentiate(phi, dt)
    omega_dot = differentiate(omega, dt)

    # a motionless head has no angle variance to regress on
    harm = harmony(phi, omega_dot) if np.ptp(phi) > 0 else math.nan

    heads = [by_role[r].points for r in ("MT1", "MT2", "MT3") if r in by_role]
    head = np.mean(heads, axis=0) - np.asarray(ref.origin)
    return KinematicReport(
        max_angle=float(phi.max()),
        rom=float(phi.max() - phi.min()),
        mean_omega=float(omega.mean()),
        harmony=harm,
        series=AngleSeries(t, phi, omega, omega_dot),
        chair_ok=check_chair(
            _smoothed(by_role["MS1"], params.chair_smooth_window, 1), params.chair_threshold_cm
        ),
        head_x=head[:, 0],
        head_y=head[:, 1],
        subject_id=subject_id,
        session_id=session_id,
    )
