"""Per-frame marker detection on RGB and depth images.

RGB frames are binarised with a bright/low-chroma rule. Depth frames are cut
into bands by multi-level Otsu thresholds over the valid (non-zero) depth
values, and only the configured bands are searched for markers. Both paths
then run opening, closing and 8-connected labelling to get blob centroids.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import DegenerateHistogramError, NoDepthError
from .frameio import DepthFrame, RgbFrame

MERGE_RADIUS_PX = 3.0
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class DetectParams:
    n_levels: int = 11
    kept_layers: tuple[int, ...] = (6, 7, 8, 9)
    morph_radius: int = 1
    min_area: int = 9
    max_area: int = 400
    min_brightness: int = 200
    max_chroma_gap: int = 40
    depth_window: int = 5

    def __post_init__(self):
        object.__setattr__(self, "kept_layers", tuple(int(k) for k in self.kept_layers))
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        if any(not 1 <= k <= self.n_levels for k in self.kept_layers):
            raise ValueError(f"kept_layers {self.kept_layers} outside 1..{self.n_levels}")
        if self.morph_radius < 1 or self.min_area < 1 or self.max_area < self.min_area:
            raise ValueError("need morph_radius >= 1 and 1 <= min_area <= max_area")
        if self.depth_window < 1 or self.depth_window % 2 == 0:
            raise ValueError("depth_window must be odd and >= 1")


class Blob(NamedTuple):
    centroid: tuple[float, float]
    area: int
    bbox: tuple[int, int, int, int]  # min_x, min_y, max_x, max_y


class Detection2D(NamedTuple):
    frame_index: int
    centroid: tuple[float, float]
    source: str  # "rgb" | "depth"
    layer: int | None = None


# -- thresholds -------------------------------------------------------------------

def multiotsu_cuts(values: np.ndarray, counts: np.ndarray, n_levels: int) -> list[int]:
    """Optimal class boundaries for a histogram over sorted distinct ``values``.

    Returns the ``n_levels - 1`` indices into ``values`` at which each upper
    class starts. Maximising between-class variance is the same as minimising
    the summed within-class squared error, which decomposes over contiguous
    classes and is solved exactly by dynamic programming.
    """
    L = len(values)
    if n_levels > L:
        raise DegenerateHistogramError(
            f"{L} distinct value(s) cannot be split into {n_levels} levels"
        )
    v = values.astype(float) - np.average(values, weights=counts)
    w = counts.astype(float)
    W = np.concatenate([[0.0], np.cumsum(w)])
    S1 = np.concatenate([[0.0], np.cumsum(w * v)])
    S2 = np.concatenate([[0.0], np.cumsum(w * v * v)])
    # cost[i, j]: squared error of a class holding values[i:j]
    i = np.arange(L + 1)[:, None]
    j = np.arange(L + 1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dw = W[j] - W[i]
        ds = S1[j] - S1[i]
        cost = (S2[j] - S2[i]) - np.where(dw > 0, ds * ds / dw, 0.0)
    cost = np.where(j > i, np.maximum(cost, 0.0), np.inf)

    best = cost[0].copy()  # best[j]: one class covering values[:j]
    back = []
    for _ in range(1, n_levels):
        total = best[:, None] + cost
        arg = np.argmin(total, axis=0)
        best = total[arg, np.arange(L + 1)]
        back.append(arg)
    cuts = []
    end = L
    for arg in reversed(back):
        end = int(arg[end])
        cuts.append(end)
    return cuts[::-1]


def multilevel_thresholds(frame: DepthFrame, n_levels: int) -> list[int]:
    """Multi-level Otsu cut points (mm) over the non-zero depth values.

    Layer ``k`` (1-based, shallowest first) holds values in
    ``[cuts[k-2], cuts[k-1])`` with the open ends running to the data range.
    Each returned cut is the smallest value of the band above it.
    """
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    data = frame.values[frame.values != 0]
    values, counts = np.unique(data, return_counts=True)
    if len(values) < n_levels:
        raise DegenerateHistogramError(
            f"{len(values)} distinct non-zero depth value(s), need >= {n_levels}"
        )
    return [int(values[c]) for c in multiotsu_cuts(values, counts, n_levels)]


def layer_bounds(thresholds: list[int], layer: int) -> tuple[int, int]:
    """[lo, hi) depth band of 1-based ``layer`` for the given cut points."""
    edges = [1, *thresholds, 65536]
    if not 1 <= layer < len(edges):
        raise ValueError(f"layer {layer} outside 1..{len(edges) - 1}")
    return edges[layer - 1], edges[layer]


# -- binarisation -----------------------------------------------------------------

def binarize_layer(frame: DepthFrame, lo: float, hi: float) -> np.ndarray:
    if not lo < hi:
        raise ValueError("need lo < hi")
    v = frame.values
    return (v >= lo) & (v < hi) & (v != 0)


def binarize_rgb(frame: RgbFrame, min_brightness: int, min_saturation_gap: int) -> np.ndarray:
    """Bright, near-grey pixels: min(r,g,b) >= min_brightness and
    max(r,g,b) - min(r,g,b) <= min_saturation_gap."""
    px = frame.pixels
    lo = px.min(axis=2)
    hi = px.max(axis=2)
    return (lo >= min_brightness) & ((hi - lo) <= min_saturation_gap)


# -- morphology -------------------------------------------------------------------

def disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def _erode(mask, se):
    # pixels outside the image never veto erosion, so closing fixes a full mask
    return ndimage.binary_erosion(mask, structure=se, border_value=1)


def _dilate(mask, se):
    return ndimage.binary_dilation(mask, structure=se, border_value=0)


def morph_open(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    se = disk(radius)
    return _dilate(_erode(mask, se), se)


def morph_close(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    se = disk(radius)
    return _erode(_dilate(mask, se), se)


def clean_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Open then close, computed on the bounding box of the set pixels.

    The box is padded by ``2 * radius + 1`` so the result is identical to
    running on the full frame, just much cheaper for sparse masks.
    """
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return np.zeros_like(mask, dtype=bool)
    pad = 2 * radius + 1
    y0, y1 = max(ys.min() - pad, 0), min(ys.max() + pad + 1, mask.shape[0])
    x0, x1 = max(xs.min() - pad, 0), min(xs.max() + pad + 1, mask.shape[1])
    out = np.zeros_like(mask, dtype=bool)
    sub = mask[y0:y1, x0:x1]
    out[y0:y1, x0:x1] = morph_close(morph_open(sub, radius), radius)
    return out


# -- components -------------------------------------------------------------------

def connected_components(mask: np.ndarray, min_area: int = 1, max_area: int | None = None) -> list[Blob]:
    """8-connected blobs with area in [min_area, max_area], ordered by (min_y, min_x)."""
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    labels, n = ndimage.label(mask, structure=_EIGHT)
    blobs = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        ys, xs = np.nonzero(labels[sl] == k)
        area = len(ys)
        if area < min_area or (max_area is not None and area > max_area):
            continue
        ys = ys + sl[0].start
        xs = xs + sl[1].start
        blobs.append(Blob(
            centroid=(float(xs.mean()), float(ys.mean())),
            area=int(area),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
        ))
    blobs.sort(key=lambda b: (b.bbox[1], b.bbox[0]))
    return blobs


# -- detection --------------------------------------------------------------------

def _blobs(mask, params: DetectParams) -> list[Blob]:
    cleaned = clean_mask(mask, params.morph_radius)
    return connected_components(cleaned, params.min_area, params.max_area)


def _touching(p, q) -> bool:
    # boxes overlap or are 8-adjacent
    return p[0] <= q[2] + 1 and q[0] <= p[2] + 1 and p[1] <= q[3] + 1 and q[1] <= p[3] + 1


def _merge_close(items: list[tuple[Blob, int]], radius: float) -> list[tuple[Blob, int]]:
    """Union blobs whose centroids lie within ``radius`` or whose bounding
    boxes touch (pieces of one marker cut by a layer boundary); the merged
    centroid is area-weighted."""
    n = len(items)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    pts = np.array([b.centroid for b, _ in items], dtype=float).reshape(-1, 2)
    for a in range(n):
        for b in range(a + 1, n):
            if np.hypot(*(pts[a] - pts[b])) < radius or _touching(items[a][0].bbox, items[b][0].bbox):
                parent[find(b)] = find(a)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    merged = []
    for members in groups.values():
        blobs = [items[m][0] for m in members]
        area = sum(b.area for b in blobs)
        cx = sum(b.centroid[0] * b.area for b in blobs) / area
        cy = sum(b.centroid[1] * b.area for b in blobs) / area
        bbox = (
            min(b.bbox[0] for b in blobs), min(b.bbox[1] for b in blobs),
            max(b.bbox[2] for b in blobs), max(b.bbox[3] for b in blobs),
        )
        layer = min(items[m][1] for m in members)
        merged.append((Blob((cx, cy), area, bbox), layer))
    merged.sort(key=lambda item: (item[0].bbox[1], item[0].bbox[0]))
    return merged


def detect_markers(frame, params: DetectParams = DetectParams(), frame_index: int = 0) -> list[Detection2D]:
    """Marker centroids in an :class:`RgbFrame` or :class:`DepthFrame`.

    For depth frames the blobs of every kept layer are pooled and merged
    when their centroids are closer than 3 px or their boxes touch, so a
    marker straddling a layer boundary is reported once. A depth frame with
    no valid pixels yields no detections.
    """
    if isinstance(frame, RgbFrame):
        mask = binarize_rgb(frame, params.min_brightness, params.max_chroma_gap)
        return [Detection2D(frame_index, b.centroid, "rgb") for b in _blobs(mask, params)]
    if not isinstance(frame, DepthFrame):
        raise TypeError(f"expected RgbFrame or DepthFrame, got {type(frame).__name__}")
    if not frame.values.any():
        return []
    cuts = multilevel_thresholds(frame, params.n_levels)
    found = []
    for layer in params.kept_layers:
        lo, hi = layer_bounds(cuts, layer)
        found.extend((b, layer) for b in _blobs(binarize_layer(frame, lo, hi), params))
    return [
        Detection2D(frame_index, b.centroid, "depth", layer)
        for b, layer in _merge_close(found, MERGE_RADIUS_PX)
    ]


def sample_depth(frame: DepthFrame, at, window: int = 5) -> float:
    """Median of the valid depths in a ``window`` x ``window`` patch around ``at``."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    x, y = int(round(at[0])), int(round(at[1]))
    h = window // 2
    patch = frame.values[max(y - h, 0):y + h + 1, max(x - h, 0):x + h + 1]
    valid = patch[patch != 0]
    if valid.size == 0:
        raise NoDepthError(f"no valid depth within {window}x{window} of ({x}, {y})")
    return float(np.median(valid))
