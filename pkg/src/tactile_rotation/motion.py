"""Rotation-onset detection and translation/rotation discrimination."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import MarkerFrame, PipelineConfig
from .errors import NoUsableMarkers

__all__ = [
    "MotionClass",
    "MotionVectorSet",
    "build_vectors",
    "detect_onset",
    "classify_translation",
    "classify_frame",
]


class MotionClass(enum.Enum):
    STABLE = "stable"
    TRANSLATION = "translation"
    ROTATION_ONSET = "rotation"
    SMALL_AREA_ROTATION = "contour"


@dataclass(frozen=True, eq=False)
class MotionVectorSet:
    """Positions of the visible contact markers at three instants.

    ``m0`` is the initial (pre-contact) frame, ``mc`` the stable-contact frame
    and ``mt`` the current frame; all are ``(n, 2)`` arrays in pixels.
    """

    ids: np.ndarray
    m0: np.ndarray
    mc: np.ndarray
    mt: np.ndarray

    def __post_init__(self):
        for name in ("m0", "mc", "mt"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(-1, 2)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        if not (len(ids) == len(self.m0) == len(self.mc) == len(self.mt)):
            raise ValueError("ids and positions must have equal length")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_pair(cls, start, end, ids=None) -> "MotionVectorSet":
        """Two-instant set where the stable frame coincides with the initial one."""
        start = np.asarray(start, dtype=np.float64).reshape(-1, 2)
        if ids is None:
            ids = np.arange(len(start))
        return cls(ids, start, start, end)

    def __len__(self):
        return len(self.ids)

    @property
    def d1(self) -> np.ndarray:
        return self.mc - self.m0

    @property
    def d2(self) -> np.ndarray:
        return self.mt - self.m0

    @property
    def d_rel(self) -> np.ndarray:
        return self.mt - self.mc

    def pair(self, reference: str = "initial") -> tuple[np.ndarray, np.ndarray]:
        """(start, end) positions of the motion used for rotation estimates."""
        if reference == "initial":
            return self.m0, self.mt
        if reference == "stable":
            return self.mc, self.mt
        raise ValueError(f"unknown motion reference {reference!r}")


def build_vectors(
    initial: MarkerFrame, stable: MarkerFrame, current: MarkerFrame, contact_ids
) -> MotionVectorSet:
    """Motion vectors of contact markers visible in all three frames."""
    keep = initial.visible & stable.visible & current.visible
    if contact_ids is not None:
        keep &= np.isin(initial.ids, np.fromiter(contact_ids, dtype=np.int64, count=len(contact_ids)))
    return MotionVectorSet(initial.ids[keep], initial.xy[keep], stable.xy[keep], current.xy[keep])


def _angles_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = np.einsum("ij,ij->i", a, b)
    return np.degrees(np.arctan2(np.abs(cross), dot))


def detect_onset(vectors: MotionVectorSet, config: PipelineConfig) -> bool:
    """True when the median direction change or median relative motion trips.

    Markers whose stable-frame displacement is under the noise floor carry no
    direction and are left out of the angle statistic only.
    """
    if len(vectors) == 0:
        raise NoUsableMarkers("no visible contact markers")
    d1, d2 = vectors.d1, vectors.d2
    rel = np.linalg.norm(vectors.d_rel, axis=1)
    if np.median(rel) > config.onset_motion_threshold_px:
        return True
    usable = (np.linalg.norm(d1, axis=1) >= config.noise_floor_px) & np.any(d2 != 0, axis=1)
    if not usable.any():
        return False
    return bool(np.median(_angles_deg(d1[usable], d2[usable])) > config.onset_angle_threshold_deg)


def classify_translation(vectors: MotionVectorSet, config: PipelineConfig) -> bool:
    """Rank test on the stacked relative motions: one dominant direction means translation."""
    rel = vectors.d_rel
    moving = rel[np.linalg.norm(rel, axis=1) > config.noise_floor_px]
    if len(moving) < 2:
        return False
    s = np.linalg.svd(moving, compute_uv=False)
    if s[1] == 0:
        return True
    return bool(s[0] / s[1] > config.svd_translation_ratio)


def classify_frame(
    vectors: MotionVectorSet,
    config: PipelineConfig,
    small_area_flag: bool = False,
    translation_vectors: MotionVectorSet | None = None,
) -> MotionClass:
    """One motion class per frame.

    ``translation_vectors`` replaces ``vectors`` for the rank test only; with
    a handful of contact markers a rotation can look rank-1 (two markers on
    opposite sides of the center move antiparallel), so callers pass the
    whole marker field instead.
    """
    # translation first: a translating field also trips the onset magnitude test
    if classify_translation(vectors if translation_vectors is None else translation_vectors, config):
        return MotionClass.TRANSLATION
    if len(vectors) and detect_onset(vectors, config):
        return MotionClass.ROTATION_ONSET
    if small_area_flag and len(vectors):
        if np.any(np.linalg.norm(vectors.d_rel, axis=1) > config.noise_floor_px):
            return MotionClass.SMALL_AREA_ROTATION
    return MotionClass.STABLE
