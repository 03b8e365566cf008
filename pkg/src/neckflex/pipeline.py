"""Static-trial calibration and motion-session analysis built from the stage modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import DetectParams, detect_markers, sample_depth
from .errors import MissingRoleError, NoDepthError, PairingError
from .frameio import SessionBundle
from .kinematics import KinematicReport, KinematicsParams, ReferenceFrame, analyze_session, build_reference
from .register import CameraModel, Offset2D, Point3D, estimate_offset, reconstruct_3d
from .track import ROLES, Sample, TrackParams, Trajectory3D, associate, track_markers


@dataclass
class Calibration:
    offset: Offset2D
    reference: ReferenceFrame
    initial_px: dict
    initial_depth: dict
    subject_id: str = ""

    def to_dict(self) -> dict:
        ref = self.reference
        return {
            "subject_id": self.subject_id,
            "offset": {"dx_px": self.offset.dx, "dy_px": self.offset.dy},
            "reference": {
                "origin_cm": list(ref.origin),
                "u_forward": list(ref.u_forward),
                "u_up": list(ref.u_up),
                "phi0_deg": ref.phi0,
            },
            "initial_markers": {
                role: {"px": list(self.initial_px[role]), "depth_mm": self.initial_depth[role]}
                for role in self.initial_px
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> Calibration:
        r = d["reference"]
        ref = ReferenceFrame(
            Point3D(*r["origin_cm"]), tuple(r["u_forward"]), tuple(r["u_up"]), r["phi0_deg"]
        )
        markers = d["initial_markers"]
        return cls(
            offset=Offset2D(d["offset"]["dx_px"], d["offset"]["dy_px"]),
            reference=ref,
            initial_px={k: tuple(v["px"]) for k, v in markers.items()},
            initial_depth={k: float(v["depth_mm"]) for k, v in markers.items()},
            subject_id=d.get("subject_id", ""),
        )


def assign_roles(detections) -> dict:
    """Label one static frame's detections by layout.

    The three highest markers are the headband (MT1 rearmost, i.e. largest
    image x, to MT3 foremost), the next is the earlobe MA1 and the lowest is
    the chair MS1. Raises :class:`MissingRoleError` naming the roles left over
    when fewer than five markers are visible.
    """
    pts = sorted((tuple(d.centroid) for d in detections), key=lambda p: p[1])
    if len(pts) < len(ROLES):
        head = sorted(pts[:3], key=lambda p: -p[0])
        named = ["MT1", "MT2", "MT3"][:len(head)] + ["MA1", "MS1"][:max(len(pts) - 3, 0)]
        missing = [r for r in ROLES if r not in named]
        raise MissingRoleError(
            missing,
            f"expected {len(ROLES)} markers, found {len(pts)}; "
            f"unassigned role(s): {', '.join(missing)}",
        )
    head = sorted(pts[:3], key=lambda p: -p[0])
    return dict(zip(ROLES, [*head, pts[3], pts[4]]))


def calibrate(
    bundle: SessionBundle,
    cam: CameraModel | None = None,
    detect_params: DetectParams = DetectParams(),
    gate_px: float = 20.0,
) -> Calibration:
    m = bundle.manifest
    if m.trial_kind != "static":
        raise ValueError(f"calibration needs a static trial, got trial_kind={m.trial_kind!r}")
    cam = cam or CameraModel(m.width, m.height)

    rgb_dets, depth_dets = [], []
    for i in range(m.frame_count):
        rgb_dets.append(detect_markers(bundle.rgb[i], detect_params, i))
        depth_dets.append(detect_markers(bundle.depth[i], detect_params, i))

    complete = [i for i, d in enumerate(rgb_dets) if len(d) == len(ROLES)]
    if not complete:
        best = max(range(m.frame_count), key=lambda i: len(rgb_dets[i]))
        assign_roles(rgb_dets[best])  # raises, naming the missing roles
        raise MissingRoleError(ROLES)
    seeds = assign_roles(rgb_dets[complete[0]])

    offsets = []
    for i in complete:
        if len(depth_dets[i]) == len(ROLES):
            try:
                offsets.append(estimate_offset(rgb_dets[i], depth_dets[i]))
            except PairingError:
                continue
    if not offsets:
        raise PairingError("no static frame had matching rgb and depth marker sets")
    offset = Offset2D(float(np.mean([o.dx for o in offsets])), float(np.mean([o.dy for o in offsets])))

    px = {role: [] for role in ROLES}
    trajs = {role: Trajectory3D(role) for role in ROLES}
    for i, dets in enumerate(rgb_dets):
        result = associate([(r, seeds[r], gate_px) for r in ROLES], dets)
        for role, j in result.matches.items():
            c = dets[j].centroid
            px[role].append(c)
            try:
                depth = sample_depth(bundle.depth[i], (c[0] + offset.dx, c[1] + offset.dy),
                                     detect_params.depth_window)
            except NoDepthError:
                continue
            trajs[role].samples.append(Sample(m.timestamp(i), reconstruct_3d(cam, c, depth), True))

    reference = build_reference(list(trajs.values()))
    return Calibration(
        offset=offset,
        reference=reference,
        initial_px={r: tuple(float(v) for v in np.mean(px[r], axis=0)) for r in ROLES},
        initial_depth={r: float(np.median(trajs[r].points[:, 2]) * 10.0) for r in ROLES},
        subject_id=m.subject_id,
    )


def analyze(
    bundle: SessionBundle,
    calibration: Calibration,
    cam: CameraModel | None = None,
    detect_params: DetectParams = DetectParams(),
    track_params: TrackParams = TrackParams(),
    kin_params: KinematicsParams = KinematicsParams(),
) -> tuple[KinematicReport, list[Trajectory3D]]:
    m = bundle.manifest
    cam = cam or CameraModel(m.width, m.height)
    trajectories = track_markers(
        bundle, calibration.initial_px, calibration.initial_depth, calibration.offset,
        cam, detect_params, track_params,
    )
    report = analyze_session(trajectories, calibration.reference, kin_params, m.subject_id, m.session_id)
    return report, trajectories
