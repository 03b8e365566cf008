"""JSON run configuration. Every section is optional; unknown keys are errors."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .detect import DetectParams
from .errors import ConfigError
from .kinematics import KinematicsParams
from .register import CameraModel, Offset2D
from .synth import MotionProfile, NoiseModel
from .track import TrackParams

_SECTIONS = ("camera", "detect", "track", "kinematics", "reliability", "offset", "synth")


@dataclass(frozen=True)
class Config:
    camera: CameraModel = field(default_factory=CameraModel)
    detect: DetectParams = field(default_factory=DetectParams)
    track: TrackParams = field(default_factory=TrackParams)
    kinematics: KinematicsParams = field(default_factory=KinematicsParams)
    n_norm: int = 101
    # RGB -> depth displacement baked into synthesized bundles
    offset: Offset2D = field(default_factory=Offset2D)
    synth: MotionProfile = field(default_factory=MotionProfile)

    def to_dict(self) -> dict:
        cam = self.camera
        synth = asdict(self.synth)
        return {
            "camera": {"width": cam.width, "height": cam.height, "hfov_deg": cam.hfov,
                       "vfov_deg": cam.vfov, "center_px": list(cam.center)},
            "detect": {**asdict(self.detect), "kept_layers": list(self.detect.kept_layers)},
            "track": asdict(self.track),
            "kinematics": asdict(self.kinematics),
            "reliability": {"n_norm": self.n_norm},
            "offset": {"dx_px": self.offset.dx, "dy_px": self.offset.dy},
            "synth": {k: list(v) if isinstance(v, tuple) else v for k, v in synth.items()},
        }


def _check_keys(section: str, data, allowed) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {unknown}")
    return data


def _build(section: str, cls, data: dict):
    names = [f.name for f in fields(cls)]
    _check_keys(section, data, names)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def config_from_dict(data: dict) -> Config:
    _check_keys("config", data, _SECTIONS)
    kwargs = {}
    if "camera" in data:
        cam = _check_keys("camera", data["camera"], ("width", "height", "hfov_deg", "vfov_deg", "center_px"))
        try:
            center = cam.get("center_px")
            kwargs["camera"] = CameraModel(
                width=cam.get("width", 640), height=cam.get("height", 480),
                hfov=cam.get("hfov_deg", 57.0), vfov=cam.get("vfov_deg", 43.0),
                center=tuple(center) if center is not None else None,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"camera: {exc}") from None
    if "detect" in data:
        kwargs["detect"] = _build("detect", DetectParams, data["detect"])
    if "track" in data:
        kwargs["track"] = _build("track", TrackParams, data["track"])
    if "kinematics" in data:
        kwargs["kinematics"] = _build("kinematics", KinematicsParams, data["kinematics"])
    if "reliability" in data:
        rel = _check_keys("reliability", data["reliability"], ("n_norm",))
        kwargs["n_norm"] = int(rel.get("n_norm", 101))
        if kwargs["n_norm"] < 2:
            raise ConfigError("reliability: n_norm must be >= 2")
    if "offset" in data:
        off = _check_keys("offset", data["offset"], ("dx_px", "dy_px"))
        kwargs["offset"] = Offset2D(float(off.get("dx_px", 0.0)), float(off.get("dy_px", 0.0)))
    if "synth" in data:
        syn = dict(_check_keys("synth", data["synth"], [f.name for f in fields(MotionProfile)]))
        if "noise" in syn:
            syn["noise"] = _build("synth.noise", NoiseModel, syn["noise"])
        kwargs["synth"] = _build("synth", MotionProfile, syn)
    return Config(**kwargs)


def load_config(path) -> Config:
    if path is None:
        return Config()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(data)
