"""Evaluation harness: per-sequence metrics, corpus reports and closed-loop runs.

Corpus layout on disk: ``<name>.seq`` marker sequences with ``<name>.gt``
ground-truth sidecars and, for contour-mode sequences, an image directory
``<name>.frames/`` holding ``frame_%06d.ppm`` files.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .control import init_controller, run_episode
from .cor import Verdict
from .data import (
    GroundTruthFrame,
    IntensityFrame,
    MarkerFrame,
    PipelineConfig,
    read_intensity_frames,
    read_sequence,
    write_intensity_frames,
    write_sequence,
)
from .errors import ControllerError, TactileError
from .pipeline import process_sequence
from .sim import Flat, SimObject, SimParams, SmallBlob, ground_truth_angles, oracle_plant, plant_adapter, simulate_grasp

__all__ = [
    "SequenceReport",
    "CorpusSummary",
    "EvalReport",
    "EpisodeRecord",
    "ClosedLoopReport",
    "CorpusItem",
    "angle_errors",
    "onset_delay",
    "detachment_frame",
    "evaluate_sequence",
    "summarize",
    "evaluate_corpus",
    "evaluate_items",
    "default_corpus",
    "blob_corpus",
    "write_corpus",
    "write_report",
    "run_closed_loop",
    "write_closed_loop",
]

log = logging.getLogger(__name__)

SEQUENCE_SUFFIX = ".seq"
FRAMES_SUFFIX = ".frames"
ONSET_TOLERANCE_FRAMES = 5
UNDER_LIMIT_DEG = 10.0
DETACH_FRACTION = 0.7

REPORT_HEADER = (
    "name,n_frames,true_class,predicted_class,mode,true_onset,detected_onset,"
    "onset_delay_frames,mean_abs_angle_error_deg,mean_abs_angle_error_under10_deg,"
    "peak_truth_deg,measured_peak_deg"
)
EPISODE_HEADER = "episode,cog_offset_m,regrasp_count,converged,final_offset_m,final_truth_deg,success"


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6f}"


def _mean(values: Iterable[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    # fsum keeps aggregates independent of input order
    return math.fsum(vals) / len(vals) if vals else math.nan


@dataclass(frozen=True)
class SequenceReport:
    name: str
    n_frames: int
    true_class: Verdict
    predicted_class: Verdict
    mode: str
    true_onset: int | None
    detected_onset: int | None
    onset_delay_frames: float
    mean_abs_angle_error_deg: float
    mean_abs_angle_error_under10_deg: float
    peak_truth_deg: float
    measured_peak_deg: float

    def csv_row(self) -> str:
        onset = lambda v: "" if v is None else str(v)  # noqa: E731
        return ",".join(
            [
                self.name,
                str(self.n_frames),
                self.true_class.value,
                self.predicted_class.value,
                self.mode,
                onset(self.true_onset),
                onset(self.detected_onset),
                _fmt(self.onset_delay_frames),
                _fmt(self.mean_abs_angle_error_deg),
                _fmt(self.mean_abs_angle_error_under10_deg),
                _fmt(self.peak_truth_deg),
                _fmt(self.measured_peak_deg),
            ]
        )


@dataclass(frozen=True)
class CorpusSummary:
    n_sequences: int
    n_rotational: int
    mean_abs_angle_error_deg: float
    mean_abs_angle_error_under10_deg: float
    mean_onset_delay_frames: float
    onset_within_tolerance: float
    true_positive: int
    false_negative: int
    false_positive: int
    true_negative: int
    ms_per_frame: float | None = None

    @property
    def accuracy(self) -> float:
        return (self.true_positive + self.true_negative) / self.n_sequences

    def items(self) -> list[tuple[str, str]]:
        out = [
            ("n_sequences", str(self.n_sequences)),
            ("n_rotational", str(self.n_rotational)),
            ("mean_abs_angle_error_deg", _fmt(self.mean_abs_angle_error_deg)),
            ("mean_abs_angle_error_under10_deg", _fmt(self.mean_abs_angle_error_under10_deg)),
            ("mean_onset_delay_frames", _fmt(self.mean_onset_delay_frames)),
            (f"onset_within_{ONSET_TOLERANCE_FRAMES}_frames", _fmt(self.onset_within_tolerance)),
            ("true_positive", str(self.true_positive)),
            ("false_negative", str(self.false_negative)),
            ("false_positive", str(self.false_positive)),
            ("true_negative", str(self.true_negative)),
            ("classification_accuracy", _fmt(self.accuracy)),
        ]
        if self.ms_per_frame is not None:
            out.append(("ms_per_frame", _fmt(self.ms_per_frame)))
        return out


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[SequenceReport, ...]
    summary: CorpusSummary


def angle_errors(
    measured_deg: np.ndarray, truth_deg: np.ndarray, start: int | None, stop: int | None = None
) -> tuple[float, float]:
    """Mean |measured - truth| over frames ``start:stop``, and the same restricted to |truth| < 10 deg.

    Returns NaN where the window (or its restriction) is empty.
    """
    if start is None:
        return math.nan, math.nan
    measured = np.asarray(measured_deg, dtype=np.float64)[start:stop]
    truth = np.asarray(truth_deg, dtype=np.float64)[start:stop]
    err = np.abs(measured - truth)
    under = np.abs(truth) < UNDER_LIMIT_DEG
    overall = float(err.mean()) if err.size else math.nan
    restricted = float(err[under].mean()) if under.any() else math.nan
    return overall, restricted


def detachment_frame(frames: Sequence[MarkerFrame], contact_ids) -> int | None:
    """First frame where more than 70% of the contact markers are no longer visible."""
    ids = np.asarray(sorted(contact_ids))
    if ids.size == 0:
        return None
    for k, frame in enumerate(frames):
        seen = np.isin(frame.ids[frame.visible], ids).sum()
        if seen < (1.0 - DETACH_FRACTION) * ids.size:
            return k
    return None


def onset_delay(detected: int | None, true: int | None) -> float:
    if detected is None or true is None:
        return math.nan
    return float(abs(detected - true))


def _first(flags: Iterable[bool]) -> int | None:
    for k, flag in enumerate(flags):
        if flag:
            return k
    return None


def evaluate_sequence(
    frames: Sequence[MarkerFrame],
    truth: Sequence[GroundTruthFrame] | None,
    config: PipelineConfig | None = None,
    images: Sequence[IntensityFrame] | None = None,
    *,
    name: str = "",
    timed: bool = False,
):
    """Run the pipeline on one sequence and score it against its ground truth.

    Returns ``(report, seconds_per_frame)``.
    """
    if truth is None:
        raise TactileError(f"sequence {name or '<memory>'} has no ground truth")
    if len(truth) != len(frames):
        raise TactileError(f"{len(truth)} ground-truth frames for {len(frames)} marker frames")
    config = config or PipelineConfig()
    result = process_sequence(frames, config, images, timed=timed)

    truth_deg = np.array([g.angle_deg for g in truth])
    true_onset = _first(g.rotating for g in truth)
    detected = result.onset_index
    # frames that are not classified as rotating report no rotation
    measured = np.array([r.signed_angle_deg if r.rotating else 0.0 for r in result.frames])
    # the lifting window closes when the object detaches from the gel
    stop = detachment_frame(frames, result.contact.contact_marker_ids)
    err, err_under = angle_errors(measured, truth_deg, true_onset, stop)
    peak = float(np.max(np.abs(truth_deg))) if len(truth_deg) else 0.0
    true_class = Verdict.ROTATIONAL_FAILURE if peak > config.stability_angle_deg else Verdict.STABLE_GRASP
    report = SequenceReport(
        name=name,
        n_frames=len(frames),
        true_class=true_class,
        predicted_class=result.verdict.verdict,
        mode=result.mode,
        true_onset=true_onset,
        detected_onset=detected,
        onset_delay_frames=onset_delay(detected, true_onset),
        mean_abs_angle_error_deg=err,
        mean_abs_angle_error_under10_deg=err_under,
        peak_truth_deg=peak,
        measured_peak_deg=result.verdict.measured_angle_deg,
    )
    return report, result.seconds_per_frame


def summarize(rows: Iterable[SequenceReport], ms_per_frame: float | None = None) -> CorpusSummary:
    """Corpus aggregates; the corpus mean is the mean of per-sequence means."""
    rows = sorted(rows, key=lambda r: r.name)
    if not rows:
        raise TactileError("no sequences to summarize")
    rot = Verdict.ROTATIONAL_FAILURE
    rotational = [r for r in rows if r.true_class is rot]
    within = [
        not math.isnan(r.onset_delay_frames) and r.onset_delay_frames <= ONSET_TOLERANCE_FRAMES
        for r in rotational
    ]
    return CorpusSummary(
        n_sequences=len(rows),
        n_rotational=len(rotational),
        mean_abs_angle_error_deg=_mean(r.mean_abs_angle_error_deg for r in rows),
        mean_abs_angle_error_under10_deg=_mean(r.mean_abs_angle_error_under10_deg for r in rows),
        mean_onset_delay_frames=_mean(r.onset_delay_frames for r in rotational),
        onset_within_tolerance=sum(within) / len(within) if within else math.nan,
        true_positive=sum(r.true_class is rot and r.predicted_class is rot for r in rows),
        false_negative=sum(r.true_class is rot and r.predicted_class is not rot for r in rows),
        false_positive=sum(r.true_class is not rot and r.predicted_class is rot for r in rows),
        true_negative=sum(r.true_class is not rot and r.predicted_class is not rot for r in rows),
        ms_per_frame=ms_per_frame,
    )


def write_report(report: EvalReport, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(report.rows, key=lambda r: r.name)
    report_path = out / "report.csv"
    report_path.write_text("\n".join([REPORT_HEADER, *(r.csv_row() for r in rows)]) + "\n", encoding="ascii")
    summary_path = out / "summary.csv"
    lines = ["metric,value", *(f"{k},{v}" for k, v in report.summary.items())]
    summary_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return report_path, summary_path


def evaluate_corpus(
    directory,
    config: PipelineConfig | None = None,
    out_dir=None,
    *,
    timing: bool = False,
) -> EvalReport:
    """Evaluate every ``*.seq`` file in ``directory`` in filename order.

    With ``out_dir`` the report is written as ``report.csv`` and ``summary.csv``.
    ``timing`` adds the measured per-frame latency to the summary; it is off by
    default because wall-clock time would break byte-identical reruns.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*" + SEQUENCE_SUFFIX))
    if not paths:
        raise TactileError(f"no {SEQUENCE_SUFFIX} sequences in {directory}")
    rows, seconds, n_frames = [], 0.0, 0
    for path in paths:
        frames, truth = read_sequence(path)
        image_dir = path.with_suffix(FRAMES_SUFFIX)
        images = read_intensity_frames(image_dir) if image_dir.is_dir() else None
        row, spf = evaluate_sequence(frames, truth, config, images, name=path.stem, timed=timing)
        rows.append(row)
        seconds += spf * len(frames)
        n_frames += len(frames)
    ms = 1000.0 * seconds / n_frames if timing else None
    report = EvalReport(tuple(rows), summarize(rows, ms))
    if out_dir is not None:
        write_report(report, out_dir)
    return report


# -- synthetic corpora ----------------------------------------------------


@dataclass(frozen=True)
class CorpusItem:
    name: str
    obj: SimObject
    params: SimParams
    offset: float
    n_frames: int = 100

    @property
    def render(self) -> bool:
        return isinstance(self.obj.contact_footprint, SmallBlob)

    def simulate(self):
        return simulate_grasp(self.obj, self.params, self.offset, self.n_frames, render=self.render)


def _random_object(rng: np.random.Generator, footprint=None) -> SimObject:
    length = rng.uniform(0.2, 0.4)
    return SimObject(
        length=length,
        mass=rng.uniform(0.1, 0.5),
        cog_offset=rng.uniform(-0.2, 0.2) * length,
        stability_radius=rng.uniform(length / 24.0, length / 10.0),
        contact_footprint=footprint if footprint is not None else Flat(),
    )


def _offset_at(rng: np.random.Generator, obj: SimObject, lo: float, hi: float) -> float:
    """Grasp offset whose distance to the CoG lies in ``[lo, hi]``, kept on the object."""
    limit = 0.45 * obj.length
    for _ in range(100):
        d = rng.uniform(lo, hi) * (1 if rng.random() < 0.5 else -1)
        offset = obj.cog_offset + d
        if abs(offset) <= limit:
            return float(offset)
    raise TactileError("could not place a grasp offset on the object")


def default_corpus(
    seed: int = 0,
    n_rotational: int = 98,
    n_stable: int = 44,
    n_frames: int = 100,
    base: SimParams | None = None,
) -> list[CorpusItem]:
    """Flat-contact corpus of rotational and stable grasps.

    Every third stable grasp also slides (in-plane translation after lift),
    which exercises translation rejection.
    """
    base = base or SimParams()
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 7])
    items = []
    for k in range(n_rotational):
        obj = _random_object(rng)
        offset = _offset_at(rng, obj, 1.3 * obj.stability_radius, 0.35 * obj.length)
        params = dataclasses.replace(base, seed=int(rng.integers(2**31)))
        items.append(CorpusItem(f"rot_{k:03d}", obj, params, offset, n_frames))
    for k in range(n_stable):
        obj = _random_object(rng)
        offset = _offset_at(rng, obj, 0.0, 0.6 * obj.stability_radius)
        shift = (0.0, 0.0)
        if k % 3 == 2:
            angle = rng.uniform(0, 2 * np.pi)
            speed = rng.uniform(0.3, 0.8)
            shift = (speed * math.cos(angle), speed * math.sin(angle))
        params = dataclasses.replace(base, seed=int(rng.integers(2**31)), translation_px=shift)
        items.append(CorpusItem(f"stable_{k:03d}", obj, params, offset, n_frames))
    return items


def blob_corpus(seed: int = 0, n: int = 20, n_frames: int = 100, base: SimParams | None = None) -> list[CorpusItem]:
    """Small elongated contacts grasped off-center, measured in contour mode."""
    base = base or SimParams()
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 11])
    items = []
    for k in range(n):
        blob = SmallBlob(
            n_px=float(rng.uniform(600, 1500)),
            eccentricity=float(rng.uniform(2.0, 4.0)),
            axis_deg=float(rng.uniform(0, 180)),
        )
        obj = _random_object(rng, blob)
        offset = _offset_at(rng, obj, 1.3 * obj.stability_radius, 0.35 * obj.length)
        params = dataclasses.replace(base, seed=int(rng.integers(2**31)))
        items.append(CorpusItem(f"blob_{k:03d}", obj, params, offset, n_frames))
    return items


def evaluate_items(
    items: Iterable[CorpusItem], config: PipelineConfig | None = None, *, timing: bool = False
) -> EvalReport:
    """Simulate and evaluate corpus items in memory (no files written)."""
    rows, seconds, n_frames = [], 0.0, 0
    for item in items:
        sim = item.simulate()
        row, spf = evaluate_sequence(sim.frames, sim.truth, config, sim.images, name=item.name, timed=timing)
        rows.append(row)
        seconds += spf * item.n_frames
        n_frames += item.n_frames
    ms = 1000.0 * seconds / n_frames if timing else None
    return EvalReport(tuple(rows), summarize(rows, ms))


def write_corpus(items: Iterable[CorpusItem], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for item in items:
        sim = item.simulate()
        path = write_sequence(directory / (item.name + SEQUENCE_SUFFIX), sim.frames, sim.truth)
        if sim.images is not None:
            write_intensity_frames(path.with_suffix(FRAMES_SUFFIX), sim.images)
        paths.append(path)
    return paths


# -- closed loop --------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    cog_offset_m: float
    regrasp_count: int
    converged: bool
    final_offset_m: float
    final_truth_deg: float
    success: bool

    def csv_row(self) -> str:
        return (
            f"{self.episode},{self.cog_offset_m:.6f},{self.regrasp_count},{int(self.converged)},"
            f"{_fmt(self.final_offset_m)},{_fmt(self.final_truth_deg)},{int(self.success)}"
        )


@dataclass(frozen=True)
class ClosedLoopReport:
    episodes: tuple[EpisodeRecord, ...]

    @property
    def mean_regrasps(self) -> float:
        return _mean(float(e.regrasp_count) for e in self.episodes)

    @property
    def max_regrasps(self) -> int:
        return max(e.regrasp_count for e in self.episodes)

    @property
    def success_rate(self) -> float:
        return sum(e.success for e in self.episodes) / len(self.episodes)

    @property
    def convergence_rate(self) -> float:
        return sum(e.converged for e in self.episodes) / len(self.episodes)

    def summary_items(self) -> list[tuple[str, str]]:
        return [
            ("n_episodes", str(len(self.episodes))),
            ("mean_regrasps", _fmt(self.mean_regrasps)),
            ("max_regrasps", str(self.max_regrasps)),
            ("convergence_rate", _fmt(self.convergence_rate)),
            ("success_rate", _fmt(self.success_rate)),
        ]


def run_closed_loop(
    obj: SimObject,
    params: SimParams | None = None,
    n_episodes: int = 100,
    seed: int = 0,
    *,
    plant: str = "pipeline",
    config: PipelineConfig | None = None,
    cog_range: float | None = 0.45,
    n_frames: int = 100,
    max_regrasps: int = 10,
) -> ClosedLoopReport:
    """Regrasp episodes with the center of gravity drawn uniformly from ``+-cog_range * L``.

    ``cog_range=None`` keeps ``obj.cog_offset`` for every episode. An episode
    succeeds when the controller stops at an offset whose true peak rotation is
    within the stability threshold. Controller give-ups (regrasp budget,
    persistent ambiguity) count as failures; any other error propagates with
    the episode index.
    """
    params = params or SimParams()
    config = config or PipelineConfig()
    if plant not in ("pipeline", "oracle"):
        raise TactileError(f"unknown plant {plant!r}")
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 13])
    records = []
    for i in range(n_episodes):
        cog = obj.cog_offset if cog_range is None else float(rng.uniform(-cog_range, cog_range) * obj.length)
        episode_obj = dataclasses.replace(obj, cog_offset=cog)
        episode_params = dataclasses.replace(params, seed=int(rng.integers(2**31)))
        if plant == "oracle":
            grasp = oracle_plant(episode_obj, episode_params, n_frames, config.stability_angle_deg)
        else:
            grasp = plant_adapter(episode_obj, episode_params, config, n_frames)
        controller = init_controller(obj.length, max_regrasps=max_regrasps)
        try:
            episode = run_episode(controller, grasp)
        except ControllerError as exc:
            log.info("episode %d gave up: %s", i, exc)
            records.append(EpisodeRecord(i, cog, max_regrasps, False, math.nan, math.nan, False))
            continue
        except TactileError as exc:
            raise TactileError(f"episode {i}: {exc}") from exc
        final = episode.final_offset
        truth = ground_truth_angles(episode_obj, episode_params, final, n_frames)
        peak = float(np.max(np.abs(truth)))
        records.append(
            EpisodeRecord(
                i, cog, episode.regrasp_count, True, final, peak, peak <= config.stability_angle_deg
            )
        )
    return ClosedLoopReport(tuple(records))


def write_closed_loop(report: ClosedLoopReport, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    episodes = out / "episodes.csv"
    episodes.write_text(
        "\n".join([EPISODE_HEADER, *(e.csv_row() for e in report.episodes)]) + "\n", encoding="ascii"
    )
    summary = out / "summary.csv"
    lines = ["metric,value", *(f"{k},{v}" for k, v in report.summary_items())]
    summary.write_text("\n".join(lines) + "\n", encoding="ascii")
    return episodes, summary
