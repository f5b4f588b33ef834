"""Per-frame rotation measurement: contact, classification, estimation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .contact import ContactState, StableContactDetector, establish_contact
from .contour import AxisTracker, extract_contour
from .cor import (
    Orientation,
    RotationEstimate,
    StabilityVerdict,
    Verdict,
    assess_stability,
    estimate_rotation,
)
from .data import IntensityFrame, MarkerFrame, PipelineConfig
from .errors import NoContact, TactileError
from .motion import MotionClass, build_vectors, classify_frame

__all__ = ["FrameResult", "SequenceResult", "TactilePipeline", "process_sequence", "CSV_HEADER"]

CSV_HEADER = (
    "frame,t,angle_deg,signed_angle_deg,cor_x,cor_y,orientation,"
    "votes_cw,votes_ccw,residual,class"
)


@dataclass(frozen=True)
class FrameResult:
    frame_index: int
    time_s: float
    motion_class: MotionClass | None
    angle_deg: float = 0.0
    signed_angle_deg: float = 0.0
    orientation: Orientation = Orientation.AMBIGUOUS
    estimate: RotationEstimate | None = None

    @property
    def label(self) -> str:
        return "none" if self.motion_class is None else self.motion_class.value

    @property
    def rotating(self) -> bool:
        return self.motion_class in (MotionClass.ROTATION_ONSET, MotionClass.SMALL_AREA_ROTATION)

    def csv_row(self) -> str:
        est = self.estimate
        # frames without a marker-based estimate leave the COR fields empty
        if est is None:
            cor = ",,"
            tail = "0,0,"
        else:
            cor = f"{est.cor[0]:.6f},{est.cor[1]:.6f},"
            tail = f"{est.votes_cw},{est.votes_ccw},{est.residual:.6f}"
        return (
            f"{self.frame_index},{self.time_s:.6f},{self.angle_deg:.6f},{self.signed_angle_deg:.6f},"
            f"{cor}{self.orientation.value},{tail},{self.label}"
        )


@dataclass(frozen=True)
class SequenceResult:
    frames: tuple[FrameResult, ...]
    contact: ContactState
    verdict: StabilityVerdict
    orientation: Orientation
    mode: str = "markers"
    seconds_per_frame: float = field(default=0.0, compare=False)

    @property
    def onset_index(self) -> int | None:
        """Position of the first frame classified as rotating."""
        for k, r in enumerate(self.frames):
            if r.rotating:
                return k
        return None

    def signed_angles(self) -> np.ndarray:
        return np.array([r.signed_angle_deg for r in self.frames])


class TactilePipeline:
    """Online processor: feed one marker frame (and optionally its image) at a time."""

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self._detector = StableContactDetector(self.config)
        self._frames: list[MarkerFrame] = []
        self._first_image: IntensityFrame | None = None
        self.contact = ContactState()
        self.mode = "markers"
        self._tracker: AxisTracker | None = None
        self.peak: tuple[float, Orientation] = (0.0, Orientation.AMBIGUOUS)
        self.failed = False

    @property
    def verdict(self) -> StabilityVerdict:
        v = Verdict.ROTATIONAL_FAILURE if self.failed else Verdict.STABLE_GRASP
        return StabilityVerdict(v, self.peak[0])

    def update(self, frame: MarkerFrame, image: IntensityFrame | None = None) -> FrameResult:
        cfg = self.config
        if image is not None and self._first_image is None:
            self._first_image = image
        self._frames.append(frame)
        if not self.contact.stable:
            state = self._detector.update(frame)
            if not state.stable:
                return FrameResult(frame.frame_index, frame.time_s, None)
            self._on_stable(state, image)

        stable_frame = self._frames[self.contact.stable_frame_index]
        vectors = build_vectors(self._frames[0], stable_frame, frame, self.contact.contact_marker_ids)
        field_vectors = None
        if self.contact.small_area:
            field_vectors = build_vectors(self._frames[0], stable_frame, frame, None)
        cls = classify_frame(vectors, cfg, self.contact.small_area, field_vectors)

        if self.mode == "contour":
            return self._contour_step(frame, image, cls)

        if cls is not MotionClass.ROTATION_ONSET:
            return FrameResult(frame.frame_index, frame.time_s, cls)
        try:
            est = estimate_rotation(vectors, cfg)
        except TactileError:
            return FrameResult(frame.frame_index, frame.time_s, cls)
        self._record(assess_stability(est, cfg), est.orientation)
        return FrameResult(
            frame.frame_index, frame.time_s, cls, est.angle_deg, est.signed_angle_deg, est.orientation, est
        )

    def _on_stable(self, state: ContactState, image: IntensityFrame | None) -> None:
        # the stable frame is the one just appended
        before, at_stable = self._first_image, image
        if before is not None and at_stable is not None:
            self.contact = establish_contact(self._frames, state, self.config, before, at_stable)
        else:
            self.contact = establish_contact(self._frames, state, self.config)
        if self.contact.small_area and before is not None and at_stable is not None:
            self.mode = "contour"
            self._tracker = AxisTracker()
            self._contour_axis(at_stable)

    def _contour_axis(self, image: IntensityFrame) -> float | None:
        try:
            contour = extract_contour(image, self._first_image, self.config, require_axis=False)
        except NoContact:
            return None
        return self._tracker.update(contour.axis_angle_deg)

    def _contour_step(self, frame: MarkerFrame, image, cls: MotionClass) -> FrameResult:
        cfg = self.config
        if image is None:
            return FrameResult(frame.frame_index, frame.time_s, MotionClass.STABLE)
        if frame is self._frames[self.contact.stable_frame_index]:
            angle = 0.0 if self._tracker.reference is not None else None
        else:
            angle = self._contour_axis(image)
        if cls is MotionClass.TRANSLATION:
            return FrameResult(frame.frame_index, frame.time_s, cls)
        if angle is None or abs(angle) < cfg.contour_onset_deg:
            return FrameResult(frame.frame_index, frame.time_s, MotionClass.STABLE)
        orientation = Orientation.CW if angle > 0 else Orientation.CCW
        mag = abs(angle)
        failed = Verdict.ROTATIONAL_FAILURE if mag > cfg.stability_angle_deg else Verdict.STABLE_GRASP
        self._record(StabilityVerdict(failed, mag), orientation)
        return FrameResult(
            frame.frame_index, frame.time_s, MotionClass.SMALL_AREA_ROTATION, mag, angle, orientation
        )

    def _record(self, verdict: StabilityVerdict, orientation: Orientation) -> None:
        if orientation is Orientation.AMBIGUOUS:
            return
        if verdict.failed:
            self.failed = True
        if verdict.measured_angle_deg > self.peak[0]:
            self.peak = (verdict.measured_angle_deg, orientation)

    def result(self, frames: Sequence[FrameResult], seconds_per_frame: float = 0.0) -> SequenceResult:
        return SequenceResult(
            tuple(frames), self.contact, self.verdict, self.peak[1], self.mode, seconds_per_frame
        )


def process_sequence(
    frames: Sequence[MarkerFrame],
    config: PipelineConfig | None = None,
    images: Sequence[IntensityFrame] | None = None,
    *,
    timed: bool = False,
) -> SequenceResult:
    """Run the online pipeline over a whole sequence."""
    if images is not None and len(images) != len(frames):
        raise TactileError(f"{len(images)} images for {len(frames)} marker frames")
    pipe = TactilePipeline(config)
    out = []
    elapsed = 0.0
    for k, frame in enumerate(frames):
        image = images[k] if images is not None else None
        if timed:
            t0 = time.perf_counter()
            out.append(pipe.update(frame, image))
            elapsed += time.perf_counter() - t0
        else:
            out.append(pipe.update(frame, image))
    return pipe.result(out, elapsed / max(len(frames), 1))
