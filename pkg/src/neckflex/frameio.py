"""On-disk session bundles: a JSON manifest plus one binary PPM (RGB) and one
16-bit PGM (depth) file per frame.

Layout::

    manifest.json
    rgb/000000.ppm   ...  rgb/NNNNNN.ppm     (P6, maxval 255)
    depth/000000.pgm ...  depth/NNNNNN.pgm   (P5, maxval 65535, big-endian)
"""
from __future__ import annotations

import json
import os
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import BundleError

TRIAL_KINDS = ("static", "motion")
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Manifest:
    width: int = 640
    height: int = 480
    fps: float = 30.0
    frame_count: int = 1
    depth_unit: int = 1
    subject_id: str = "S1"
    session_id: str = "1"
    trial_kind: str = "motion"

    def __post_init__(self):
        for name in ("width", "height"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0 or value % 2:
                raise ValueError(f"{name} must be a positive even integer, got {value!r}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps!r}")
        if not isinstance(self.frame_count, int) or self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count!r}")
        if self.depth_unit != 1:
            raise ValueError("depth_unit is fixed at 1 mm per unit")
        if self.trial_kind not in TRIAL_KINDS:
            raise ValueError(f"trial_kind must be one of {TRIAL_KINDS}, got {self.trial_kind!r}")

    def timestamp(self, index: int) -> float:
        return index / self.fps

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> Manifest:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        missing = known - set(data)
        if missing:
            raise ValueError(f"missing manifest keys: {sorted(missing)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class RgbFrame:
    """8-bit RGB image, row-major, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f"RGB pixels must be uint8 (H, W, 3), got {px.dtype} {px.shape}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, RgbFrame) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """16-bit depth image in millimetres; 0 marks an invalid reading."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.dtype != np.uint16:
            raise ValueError(f"depth values must be uint16 (H, W), got {v.dtype} {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        return isinstance(other, DepthFrame) and np.array_equal(self.values, other.values)


class LazyFrames(Sequence):
    """Read-only sequence that produces frame ``i`` on demand via ``loader(i)``.

    Keeps memory flat for long recordings; nothing is cached.
    """

    def __init__(self, length: int, loader: Callable[[int], object]):
        self._length = length
        self._loader = loader

    def __len__(self):
        return self._length

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(self._length))]
        if index < 0:
            index += self._length
        if not 0 <= index < self._length:
            raise IndexError(index)
        return self._loader(index)


@dataclass(frozen=True, eq=False)
class SessionBundle:
    manifest: Manifest
    rgb: Sequence[RgbFrame]
    depth: Sequence[DepthFrame]

    def __post_init__(self):
        n = self.manifest.frame_count
        if len(self.rgb) != n or len(self.depth) != n:
            raise ValueError(
                f"frame_count={n} but got {len(self.rgb)} rgb and {len(self.depth)} depth frames"
            )

    @property
    def frame_count(self) -> int:
        return self.manifest.frame_count

    def timestamp(self, index: int) -> float:
        return self.manifest.timestamp(index)

    def __eq__(self, other):
        if not isinstance(other, SessionBundle) or self.manifest != other.manifest:
            return False
        return all(a == b for a, b in zip(self.rgb, other.rgb)) and all(
            a == b for a, b in zip(self.depth, other.depth)
        )


# -- Netpbm codec ---------------------------------------------------------------

def encode_ppm(frame: RgbFrame) -> bytes:
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(frame.pixels).tobytes()


def encode_pgm16(frame: DepthFrame) -> bytes:
    header = f"P5\n{frame.width} {frame.height}\n65535\n".encode("ascii")
    return header + frame.values.astype(">u2").tobytes()


def _parse_header(data: bytes, path) -> tuple[str, int, int, int, int]:
    """Return (magic, width, height, maxval, offset of raster)."""
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise BundleError(path, "header", "truncated Netpbm header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or not data[pos:pos + 1].isspace():
        raise BundleError(path, "header", "missing whitespace after maxval")
    pos += 1
    magic = tokens[0].decode("ascii", "replace")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise BundleError(path, "header", f"non-integer header fields {tokens[1:]!r}") from None
    if width <= 0 or height <= 0:
        raise BundleError(path, "header", f"bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise BundleError(path, "maxval", f"maxval {maxval} out of range")
    return magic, width, height, maxval, pos


def decode_netpbm(data: bytes, path="<bytes>") -> np.ndarray:
    """Decode a binary P5/P6 image into uint8 or uint16 (host order) pixels."""
    magic, width, height, maxval, offset = _parse_header(data, path)
    if magic == "P6":
        channels = 3
    elif magic == "P5":
        channels = 1
    else:
        raise BundleError(path, "magic", f"unsupported Netpbm magic {magic!r}")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    expected = width * height * channels * dtype.itemsize
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise BundleError(path, "raster", f"expected {expected} bytes, got {len(raster)}")
    arr = np.frombuffer(raster, dtype=dtype).astype(dtype.newbyteorder("="))
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape)


# -- bundle IO ------------------------------------------------------------------

def rgb_path(root: Path, index: int) -> Path:
    return root / "rgb" / f"{index:06d}.ppm"


def depth_path(root: Path, index: int) -> Path:
    return root / "depth" / f"{index:06d}.pgm"


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise BundleError(path, "file", "missing file") from None


def _load_rgb(path: Path, manifest: Manifest) -> RgbFrame:
    px = decode_netpbm(_read_bytes(path), path)
    if px.ndim != 3:
        raise BundleError(path, "magic", "expected a P6 colour image")
    if px.dtype != np.uint8:
        raise BundleError(path, "maxval", "RGB frames must have maxval <= 255")
    _check_dims(path, px.shape[1], px.shape[0], manifest)
    return RgbFrame(px)


def _load_depth(path: Path, manifest: Manifest) -> DepthFrame:
    values = decode_netpbm(_read_bytes(path), path)
    if values.ndim != 2:
        raise BundleError(path, "magic", "expected a P5 greyscale image")
    _check_dims(path, values.shape[1], values.shape[0], manifest)
    return DepthFrame(values.astype(np.uint16))


def _check_dims(path, width, height, manifest: Manifest):
    if (width, height) != (manifest.width, manifest.height):
        raise BundleError(
            path, "dimensions",
            f"frame is {width}x{height}, manifest says {manifest.width}x{manifest.height}",
        )


def read_manifest(path) -> Manifest:
    mpath = Path(path) / MANIFEST_NAME
    try:
        data = json.loads(_read_bytes(mpath).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(mpath, "json", str(exc)) from None
    if not isinstance(data, dict):
        raise BundleError(mpath, "json", "manifest must be a JSON object")
    try:
        return Manifest.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise BundleError(mpath, "manifest", str(exc)) from None


def read_session(path, lazy: bool = False) -> SessionBundle:
    """Load a session bundle from ``path``.

    With ``lazy=True`` only the manifest is parsed and file presence checked
    up front; frames are decoded (and validated) on access.
    """
    root = Path(path)
    manifest = read_manifest(root)
    n = manifest.frame_count
    for i in range(n):
        for p in (rgb_path(root, i), depth_path(root, i)):
            if not p.is_file():
                raise BundleError(p, "file", "missing file")
    rgb = LazyFrames(n, lambda i: _load_rgb(rgb_path(root, i), manifest))
    depth = LazyFrames(n, lambda i: _load_depth(depth_path(root, i), manifest))
    if not lazy:
        rgb = [rgb[i] for i in range(n)]
        depth = [depth[i] for i in range(n)]
    return SessionBundle(manifest, rgb, depth)


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_session(bundle: SessionBundle, path) -> None:
    manifest = bundle.manifest
    root = Path(path)
    try:
        (root / "rgb").mkdir(parents=True, exist_ok=True)
        (root / "depth").mkdir(parents=True, exist_ok=True)
        for i in range(manifest.frame_count):
            rgb, depth = bundle.rgb[i], bundle.depth[i]
            for frame in (rgb, depth):
                if (frame.width, frame.height) != (manifest.width, manifest.height):
                    raise BundleError(root, "dimensions", f"frame {i} does not match manifest")
            atomic_write_bytes(rgb_path(root, i), encode_ppm(rgb))
            atomic_write_bytes(depth_path(root, i), encode_pgm16(depth))
        text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
        atomic_write_bytes(root / MANIFEST_NAME, text.encode("utf-8"))
    except OSError as exc:
        raise BundleError(root, "write", str(exc)) from exc
