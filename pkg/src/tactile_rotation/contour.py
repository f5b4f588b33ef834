"""Rotation of a small contact patch from the principal axis of its contour."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .contact import largest_component
from .data import IntensityFrame, PipelineConfig
from .errors import AxisUndefined, NoContact, TactileError, TrackingLost

__all__ = [
    "ContactContour",
    "value_channel",
    "contour_moments",
    "extract_contour",
    "axis_increment",
    "AxisTracker",
    "contour_rotation",
]

BOX_SIZE = 5
BOX_VARIANCE = (BOX_SIZE**2 - 1) / 12.0


@dataclass(frozen=True)
class ContactContour:
    """Largest contact component of a frame and its second-moment summary.

    ``axis_angle_deg`` is in [0, 180), measured from +x towards +y (clockwise
    on screen), and is ``None`` when the blob is too round to carry an axis.
    """

    mask: np.ndarray = field(repr=False, compare=False)
    area: int
    centroid: tuple[float, float]
    axis_angle_deg: float | None
    eccentricity: float

    @property
    def pixel_set(self) -> set[tuple[int, int]]:
        ys, xs = np.nonzero(self.mask)
        return set(zip(xs.tolist(), ys.tolist()))


def value_channel(frame: IntensityFrame) -> np.ndarray:
    """HSV value plane, i.e. the per-pixel max over R, G and B."""
    px = frame.pixels
    return np.maximum(np.maximum(px[..., 0], px[..., 1]), px[..., 2])


def contour_moments(
    mask: np.ndarray, weights: np.ndarray | None = None, blur_var: float = 0.0
) -> tuple[tuple[float, float], float, float]:
    """Centroid, principal-axis angle (deg, [0, 180)) and eccentricity of a mask.

    Eccentricity is the ratio of the principal standard deviations, so a disk
    gives 1 and an elongated blob gives its aspect ratio. With ``weights`` the
    moments are intensity-weighted over the mask; ``blur_var`` is the per-axis
    variance of a symmetric smoothing kernel already applied to the weights,
    removed from the second moments.
    """
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise NoContact("empty mask")
    w = np.ones(len(xs)) if weights is None else weights[ys, xs].astype(np.float64)
    w = w / w.sum()
    cx, cy = float(w @ xs), float(w @ ys)
    dx, dy = xs - cx, ys - cy
    mu20 = float(w @ (dx * dx)) - blur_var
    mu02 = float(w @ (dy * dy)) - blur_var
    mu11 = float(w @ (dx * dy))
    angle = 0.5 * math.degrees(math.atan2(2.0 * mu11, mu20 - mu02)) % 180.0
    half_sum = 0.5 * (mu20 + mu02)
    spread = math.hypot(0.5 * (mu20 - mu02), mu11)
    lam_max, lam_min = half_sum + spread, half_sum - spread
    ecc = math.inf if lam_min <= 0 else math.sqrt(lam_max / lam_min)
    return (float(cx), float(cy)), angle, ecc


def extract_contour(
    frame: IntensityFrame,
    reference: IntensityFrame,
    config: PipelineConfig,
    *,
    require_axis: bool = True,
) -> ContactContour:
    """Contact contour of ``frame`` against a no-contact ``reference`` frame.

    The value-channel difference is smoothed with a 5x5 box filter,
    thresholded at ``contact_intensity_threshold`` and reduced to its largest
    connected component. Moments are weighted by the smoothed difference.
    """
    if frame.pixels.shape != reference.pixels.shape:
        raise TactileError("frame size mismatch")
    diff = np.abs(value_channel(frame).astype(np.float64) - value_channel(reference))
    smooth = ndimage.uniform_filter(diff, size=BOX_SIZE, mode="nearest")
    blob = largest_component(smooth > config.contact_intensity_threshold)
    area = int(blob.sum())
    if area < config.min_contour_area_px:
        raise NoContact(f"largest component has {area} px, need {config.min_contour_area_px}")
    # weighting by the smoothed difference keeps the square kernel from
    # biasing the axis; the box only adds isotropic variance, removed here
    centroid, angle, ecc = contour_moments(blob, smooth, BOX_VARIANCE)
    if ecc < config.min_eccentricity:
        if require_axis:
            raise AxisUndefined(f"eccentricity {ecc:.3f} below {config.min_eccentricity}")
        angle = None
    return ContactContour(blob, area, centroid, angle, ecc)


def axis_increment(prev_deg: float, cur_deg: float) -> float:
    """Smallest signed change between two axis directions (period 180 deg)."""
    return (cur_deg - prev_deg + 90.0) % 180.0 - 90.0


class AxisTracker:
    """Accumulates unwrapped axis rotation relative to the first defined axis."""

    def __init__(self):
        self.reference: float | None = None
        self._last: float | None = None
        self._total = 0.0

    def update(self, axis_deg: float | None) -> float | None:
        if axis_deg is None:
            return None
        if self.reference is None:
            self.reference = self._last = axis_deg
            return 0.0
        self._total += axis_increment(self._last, axis_deg)
        self._last = axis_deg
        return self._total


def _axis_of(item) -> float | None:
    if item is None:
        return None
    if isinstance(item, ContactContour):
        return item.axis_angle_deg
    return float(item)


def contour_rotation(contours: Sequence[ContactContour | float | None] | Iterable) -> list[float | None]:
    """Signed (clockwise-positive) rotation per frame relative to the first frame.

    Entries may be :class:`ContactContour` objects, raw axis angles, or
    ``None`` for frames without a defined axis; such frames yield ``None``.
    """
    axes = [_axis_of(c) for c in contours]
    defined = sum(a is not None for a in axes)
    if defined < 2 or (len(axes) - defined) > 0.5 * len(axes):
        raise TrackingLost(f"axis defined on {defined} of {len(axes)} frames")
    tracker = AxisTracker()
    return [tracker.update(a) for a in axes]
