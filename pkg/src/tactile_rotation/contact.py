"""Stable-contact detection and contact-marker partitioning."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .data import IntensityFrame, MarkerFrame, PipelineConfig
from .errors import TactileError

__all__ = [
    "ContactKind",
    "ContactState",
    "StableContactDetector",
    "detect_stable_contact",
    "contact_region",
    "largest_component",
    "partition_markers",
    "motion_contact_markers",
    "establish_contact",
]

_SQUARE = np.ones((3, 3), dtype=bool)


class ContactKind(enum.Enum):
    NONE = "none"
    SOFT_STABLE = "soft"
    HARD_STABLE = "hard"


@dataclass(frozen=True)
class ContactState:
    """Stable-contact designation for one grasp.

    ``stable_frame_index`` is the position of the stable frame within the
    sequence (``-1`` while no stable contact exists).
    """

    kind: ContactKind = ContactKind.NONE
    stable_frame_index: int = -1
    contact_mask: np.ndarray | None = field(default=None, compare=False)
    contact_marker_ids: frozenset = frozenset()
    small_area: bool = False

    @property
    def stable(self) -> bool:
        return self.kind is not ContactKind.NONE


def _mean_step(prev: MarkerFrame, cur: MarkerFrame) -> float:
    both = prev.visible & cur.visible
    if not np.any(both):
        return 0.0
    return float(np.mean(np.linalg.norm(cur.xy[both] - prev.xy[both], axis=1)))


class StableContactDetector:
    """Incremental soft/hard stable-contact test.

    Feed frames in order with :meth:`update`. The soft criterion compares the
    mean frame-to-frame marker displacement of consecutive frame pairs; once a
    state other than NONE is returned it never changes.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._count = 0
        self._prev: MarkerFrame | None = None
        self._prev_step: float | None = None
        self.state = ContactState()

    def update(self, frame: MarkerFrame) -> ContactState:
        k = self._count
        self._count += 1
        if self.state.stable:
            return self.state
        cfg = self.config
        step = None
        if self._prev is not None:
            step = _mean_step(self._prev, frame)
        if k >= cfg.hard_stable_frame:
            self.state = ContactState(ContactKind.HARD_STABLE, cfg.hard_stable_frame)
        elif (
            k >= cfg.soft_stable_window
            and step is not None
            and self._prev_step is not None
            and abs(step - self._prev_step) < cfg.soft_stable_threshold_px
        ):
            self.state = ContactState(ContactKind.SOFT_STABLE, k)
        self._prev = frame
        self._prev_step = step
        return self.state


def detect_stable_contact(frames: Sequence[MarkerFrame], config: PipelineConfig) -> ContactState:
    """Soft/hard stable-contact state for a prefix of a marker sequence."""
    det = StableContactDetector(config)
    state = det.state
    for f in frames:
        state = det.update(f)
        if state.stable:
            break
    return state


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_SQUARE)
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def _clean(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1)
    padded = ndimage.binary_opening(padded, structure=_SQUARE)
    padded = ndimage.binary_closing(padded, structure=_SQUARE)
    return largest_component(padded[1:-1, 1:-1])


def contact_region(
    before: IntensityFrame, at_stable: IntensityFrame, config: PipelineConfig
) -> np.ndarray:
    """Boolean contact mask from the illumination change between two frames.

    The per-pixel change is the largest absolute difference over the R, G
    and B planes. It is thresholded, opened and closed with a 3x3 square,
    and reduced to its largest 8-connected component.
    """
    if before.pixels.shape != at_stable.pixels.shape:
        raise TactileError(
            f"frame size mismatch: {before.pixels.shape} vs {at_stable.pixels.shape}"
        )
    diff = np.abs(at_stable.pixels.astype(np.int16) - before.pixels.astype(np.int16)).max(axis=2)
    return _clean(diff > config.contact_intensity_threshold)


def _inside(mask: np.ndarray, xy: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    cols = np.rint(xy[:, 0]).astype(np.int64)
    rows = np.rint(xy[:, 1]).astype(np.int64)
    ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    out = np.zeros(len(xy), dtype=bool)
    out[ok] = mask[rows[ok], cols[ok]]
    return out


def partition_markers(
    frame: MarkerFrame, mask: np.ndarray | None, config: PipelineConfig
) -> tuple[frozenset, frozenset, bool]:
    """Split marker ids into (contact, non-contact) and raise the small-area flag.

    Returns ``(contact_ids, non_contact_ids, small_area)``.
    """
    all_ids = frozenset(int(i) for i in frame.ids)
    if mask is None or not mask.any():
        return frozenset(), all_ids, True
    hit = _inside(mask, frame.xy) & frame.visible
    contact = frozenset(int(i) for i in frame.ids[hit])
    small = len(contact) < config.min_contact_markers
    return contact, all_ids - contact, small


def motion_contact_markers(
    initial: MarkerFrame, at_stable: MarkerFrame, config: PipelineConfig
) -> frozenset:
    """Marker-only fallback: markers displaced more than the configured percentile."""
    vis = initial.visible & at_stable.visible
    if not vis.any():
        return frozenset()
    disp = np.linalg.norm(at_stable.xy - initial.xy, axis=1)
    cut = np.percentile(disp[vis], config.contact_percentile)
    chosen = vis & (disp > cut)
    return frozenset(int(i) for i in initial.ids[chosen])


def establish_contact(
    frames: Sequence[MarkerFrame],
    state: ContactState,
    config: PipelineConfig,
    before: IntensityFrame | None = None,
    at_stable: IntensityFrame | None = None,
) -> ContactState:
    """Fill in the contact mask and marker set for a stable contact state."""
    if not state.stable:
        return state
    stable_frame = frames[state.stable_frame_index]
    if before is not None and at_stable is not None:
        mask = contact_region(before, at_stable, config)
        contact, _, small = partition_markers(stable_frame, mask, config)
        if not mask.any():
            # no illumination evidence at all: track every visible marker
            contact = frozenset(int(i) for i in stable_frame.ids[stable_frame.visible])
            small = False
    else:
        mask = None
        contact = motion_contact_markers(frames[0], stable_frame, config)
        small = len(contact) < config.min_contact_markers
    return ContactState(state.kind, state.stable_frame_index, mask, contact, small)
