"""Background activation suppression.

Turns a feature map into a class-agnostic foreground box and returns the
raw image cropped to that box and zoomed back to its original size. Nothing
here is learned and nothing here is differentiated through: feature maps are
detached and converted to numpy on entry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# 8-connectivity: diagonal neighbours join a component.
_EIGHT = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class BBox:
    """Inclusive (row_min, col_min, row_max, col_max) box.

    Used both on the feature grid and, after ``to_image_box``, in pixels.
    """

    row_min: int
    col_min: int
    row_max: int
    col_max: int

    def __post_init__(self):
        if self.row_min > self.row_max or self.col_min > self.col_max:
            raise ValueError(f"inverted box {self}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.row_min, self.col_min, self.row_max, self.col_max)

    def contains(self, row: float, col: float) -> bool:
        return self.row_min <= row <= self.row_max and self.col_min <= col <= self.col_max

    @property
    def height(self) -> int:
        return self.row_max - self.row_min + 1

    @property
    def width(self) -> int:
        return self.col_max - self.col_min + 1


ImageBBox = BBox


@dataclass
class ForegroundEstimate:
    activation: np.ndarray
    threshold: float
    mask: np.ndarray
    component_mask: np.ndarray
    feature_box: BBox
    image_box: BBox


def _to_numpy(F) -> np.ndarray:
    if hasattr(F, "detach"):
        F = F.detach().cpu().numpy()
    return np.asarray(F, dtype=np.float64)


def aggregate_channels(F) -> np.ndarray:
    """Sum a (c, h, w) feature map over channels."""
    return _to_numpy(F).sum(axis=0)


def adaptive_threshold(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=np.float64)
    # a rounded mean of a constant map can land below the constant and flip every cell on
    if A.size and A.min() == A.max():
        return float(A.flat[0])
    return float(A.mean())


def foreground_mask(A: np.ndarray, theta: float) -> np.ndarray:
    return (np.asarray(A) > theta).astype(np.uint8)


def largest_connected_component(M: np.ndarray) -> np.ndarray:
    """Keep only the largest 8-connected component of a binary mask.

    Equal sizes are resolved by the smallest (row_min, col_min) of each
    component's bounding box, then by first cell in raster order.
    """
    M = np.asarray(M)
    labels, n = ndimage.label(M > 0, structure=_EIGHT)
    if n == 0:
        return np.zeros_like(M, dtype=np.uint8)
    best_key, best = None, 0
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        cells = labels == idx
        first = int(np.flatnonzero(cells)[0])
        key = (-int(cells.sum()), sl[0].start, sl[1].start, first)
        if best_key is None or key < best_key:
            best_key, best = key, idx
    return (labels == best).astype(np.uint8)


def tight_bbox(M: np.ndarray) -> BBox:
    """Smallest inclusive box around the 1s; an empty mask yields the full grid."""
    M = np.asarray(M)
    rows, cols = np.nonzero(M)
    if rows.size == 0:
        return BBox(0, 0, M.shape[0] - 1, M.shape[1] - 1)
    return BBox(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))


def to_image_box(b: BBox, feature_hw: tuple[int, int], image_hw: tuple[int, int]) -> BBox:
    """Map a feature-grid box to pixels.

    Cell i spans pixels [i*H/h, (i+1)*H/h); the result is the union of the
    corner cells' spans, inclusive and clamped to the image.
    """
    h, w = feature_hw
    H, W = image_hw

    def lo(i, n, N):
        return (i * N) // n

    def hi(i, n, N):
        return -(-((i + 1) * N) // n) - 1

    return BBox(
        max(0, lo(b.row_min, h, H)),
        max(0, lo(b.col_min, w, W)),
        min(H - 1, hi(b.row_max, h, H)),
        min(W - 1, hi(b.col_max, w, W)),
    )


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centres, edge-clamped (same convention as align_corners=False)
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(x: np.ndarray, size) -> np.ndarray:
    """Bilinear resize of an H x W (x C) array to ``size`` = (H', W') or S."""
    out_h, out_w = (size, size) if np.isscalar(size) else size
    x = np.asarray(x, dtype=np.float64)
    r0, r1, fr = _axis_weights(x.shape[0], out_h)
    c0, c1, fc = _axis_weights(x.shape[1], out_w)
    extra = (None,) * (x.ndim - 2)
    fr = fr[(slice(None), None) + extra]
    fc = fc[(None, slice(None)) + extra]
    top = x[r0][:, c0] * (1 - fc) + x[r0][:, c1] * fc
    bottom = x[r1][:, c0] * (1 - fc) + x[r1][:, c1] * fc
    return top * (1 - fr) + bottom * fr


def crop_and_zoom(x: np.ndarray, b: BBox, target) -> np.ndarray:
    """Crop an H x W x 3 image to ``b`` (inclusive pixels) and resize to ``target``."""
    x = np.asarray(x)
    H, W = x.shape[:2]
    r0, c0 = max(0, b.row_min), max(0, b.col_min)
    r1, c1 = min(H - 1, b.row_max), min(W - 1, b.col_max)
    if r1 < r0 or c1 < c0:
        r0, c0, r1, c1 = 0, 0, H - 1, W - 1
    out = resize_bilinear(x[r0 : r1 + 1, c0 : c1 + 1], target)
    return np.clip(out, 0.0, 1.0).astype(x.dtype if x.dtype.kind == "f" else np.float64)


def estimate_foreground(F, image_hw: tuple[int, int]) -> ForegroundEstimate:
    A = aggregate_channels(F)
    theta = adaptive_threshold(A)
    mask = foreground_mask(A, theta)
    component = largest_connected_component(mask)
    fbox = tight_bbox(component)
    return ForegroundEstimate(
        activation=A,
        threshold=theta,
        mask=mask,
        component_mask=component,
        feature_box=fbox,
        image_box=to_image_box(fbox, A.shape, image_hw),
    )


def refine(x: np.ndarray, F) -> tuple[np.ndarray, ForegroundEstimate]:
    """Crop ``x`` to the foreground predicted from its feature map and zoom back.

    The refined image has the same spatial size as ``x``. A constant activation
    map gives an empty mask, so the full image is used.
    """
    x = np.asarray(x)
    est = estimate_foreground(F, x.shape[:2])
    return crop_and_zoom(x, est.image_box, x.shape[:2]), est
