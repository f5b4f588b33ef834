"""Shared data model and file formats.

Coordinates follow the image convention used everywhere in the package:
origin at the top-left, x to the right, y down. Signed angles are
clockwise-positive as seen on screen. Tactile quantities are in pixels,
scene geometry in meters, reported angles in degrees.

File formats
------------
Marker sequence (``*.seq``)
    One frame per line: ``frame t marker_count (id x y visible)*``,
    whitespace separated. Floats are written with ``repr`` so a write/read
    round trip is exact.
Ground-truth sidecar (``*.gt`` next to the sequence)
    One line per frame: ``frame angle_deg rotating``.
Intensity frames
    Binary PPM (P6), one file per frame, ``frame_%06d.ppm``.
Point cloud
    CSV ``x,y,z`` in meters, no header.
Config
    Flat ``key = value`` text; ``#`` starts a comment; unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import FormatError, TactileError

__all__ = [
    "MarkerFrame",
    "IntensityFrame",
    "PointCloud",
    "GroundTruthFrame",
    "PipelineConfig",
    "stack_positions",
    "read_sequence",
    "write_sequence",
    "read_ground_truth",
    "write_ground_truth",
    "ground_truth_path",
    "read_point_cloud",
    "write_point_cloud",
    "read_ppm",
    "write_ppm",
    "read_intensity_frames",
    "write_intensity_frames",
    "read_config",
    "write_config",
]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarkerFrame:
    """Tracked marker positions from one tactile image.

    ``ids`` is an ``(n,)`` int array, ``xy`` an ``(n, 2)`` float array of
    pixel positions and ``visible`` an ``(n,)`` bool array. Dropped markers
    keep their slot and have ``visible == False``.
    """

    frame_index: int
    time_s: float
    ids: np.ndarray
    xy: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        ids = _frozen_array(self.ids, np.int64).reshape(-1)
        xy = _frozen_array(self.xy, np.float64).reshape(-1, 2)
        visible = _frozen_array(self.visible, bool).reshape(-1)
        if not (len(ids) == len(xy) == len(visible)):
            raise TactileError("ids, xy and visible must have the same length")
        if len(np.unique(ids)) != len(ids):
            raise TactileError(f"duplicate marker ids in frame {self.frame_index}")
        if int(self.frame_index) < 0:
            raise TactileError("frame_index must be non-negative")
        if not math.isfinite(self.time_s):
            raise TactileError("time_s must be finite")
        if not np.all(np.isfinite(xy)):
            raise TactileError(f"non-finite marker position in frame {self.frame_index}")
        object.__setattr__(self, "frame_index", int(self.frame_index))
        object.__setattr__(self, "time_s", float(self.time_s))
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "visible", visible)

    @property
    def markers(self) -> list[tuple[int, float, float, bool]]:
        return [
            (int(i), float(x), float(y), bool(v))
            for i, (x, y), v in zip(self.ids, self.xy, self.visible)
        ]

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, MarkerFrame):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.time_s == other.time_s
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.xy, other.xy)
            and np.array_equal(self.visible, other.visible)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IntensityFrame:
    """An RGB tactile image stored as a ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise TactileError(f"expected (height, width, 3) pixels, got {px.shape}")
        if px.dtype != np.uint8:
            raise TactileError("intensity frames hold 8-bit samples")
        object.__setattr__(self, "pixels", _frozen_array(px, np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, IntensityFrame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = _frozen_array(self.points, np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise TactileError(f"expected (n, 3) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise TactileError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True)
class GroundTruthFrame:
    frame_index: int
    angle_deg: float
    rotating: bool


@dataclass(frozen=True)
class PipelineConfig:
    """Thresholds for the per-frame estimation pipeline.

    Defaults are calibrated for 30 fps sequences.
    """

    soft_stable_window: int = 10
    hard_stable_frame: int = 30
    soft_stable_threshold_px: float = 0.02
    onset_angle_threshold_deg: float = 10.0
    onset_motion_threshold_px: float = 3.0
    stability_angle_deg: float = 5.0
    vote_dominance_ratio: float = 2.0
    svd_translation_ratio: float = 4.0
    contact_intensity_threshold: float = 25.0
    min_contact_markers: int = 6
    noise_floor_px: float = 0.5
    contact_percentile: float = 60.0
    min_eccentricity: float = 1.2
    min_contour_area_px: int = 50
    contour_onset_deg: float = 1.0
    # "stable" measures rotation from the stable-contact frame, "initial" from frame 0
    motion_reference: str = "stable"
    weighted_cor: bool = True

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or isinstance(value, str):
                continue
            if not value > 0:
                raise TactileError(f"{f.name} must be strictly positive, got {value}")
        if self.hard_stable_frame < self.soft_stable_window:
            raise TactileError("hard_stable_frame must not precede soft_stable_window")
        if not self.vote_dominance_ratio > 1:
            raise TactileError("vote_dominance_ratio must exceed 1")
        if not self.svd_translation_ratio > 1:
            raise TactileError("svd_translation_ratio must exceed 1")
        if not 0 < self.contact_percentile < 100:
            raise TactileError("contact_percentile must lie in (0, 100)")
        if self.motion_reference not in ("stable", "initial"):
            raise TactileError("motion_reference must be 'stable' or 'initial'")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def stack_positions(frames: Sequence[MarkerFrame]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(T, n, 2)`` positions and ``(T, n)`` visibility for a sequence."""
    xy = np.stack([f.xy for f in frames])
    vis = np.stack([f.visible for f in frames])
    return xy, vis


# -- marker sequences -------------------------------------------------------


def _parse_float(token: str, path, lineno, what) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"{what}: expected a number, got {token!r}", path, lineno) from None
    if not math.isfinite(value):
        raise FormatError(f"{what}: non-finite value {token!r}", path, lineno)
    return value


def _parse_int(token: str, path, lineno, what) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"{what}: expected an integer, got {token!r}", path, lineno) from None


def _parse_flag(token: str, path, lineno, what) -> bool:
    if token not in ("0", "1"):
        raise FormatError(f"{what}: expected 0 or 1, got {token!r}", path, lineno)
    return token == "1"


def _data_lines(path: Path):
    with open(path, "r", encoding="ascii", errors="strict") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def ground_truth_path(path) -> Path:
    return Path(path).with_suffix(".gt")


def read_sequence(path) -> tuple[list[MarkerFrame], list[GroundTruthFrame] | None]:
    """Read a marker sequence and, when present, its ground-truth sidecar."""
    path = Path(path)
    frames: list[MarkerFrame] = []
    id_set = None
    try:
        lines = list(_data_lines(path))
    except UnicodeDecodeError as exc:
        raise FormatError(f"not a text file ({exc.reason})", path) from None
    for lineno, tok in lines:
        if len(tok) < 3:
            raise FormatError("expected 'frame t marker_count ...'", path, lineno)
        frame_index = _parse_int(tok[0], path, lineno, "frame")
        if frame_index < 0:
            raise FormatError("negative frame index", path, lineno)
        t = _parse_float(tok[1], path, lineno, "t")
        count = _parse_int(tok[2], path, lineno, "marker_count")
        if count < 0 or len(tok) != 3 + 4 * count:
            raise FormatError(
                f"marker_count {count} does not match {len(tok) - 3} marker fields", path, lineno
            )
        ids = np.empty(count, dtype=np.int64)
        xy = np.empty((count, 2))
        vis = np.empty(count, dtype=bool)
        for k in range(count):
            base = 3 + 4 * k
            ids[k] = _parse_int(tok[base], path, lineno, "marker id")
            xy[k, 0] = _parse_float(tok[base + 1], path, lineno, "x")
            xy[k, 1] = _parse_float(tok[base + 2], path, lineno, "y")
            vis[k] = _parse_flag(tok[base + 3], path, lineno, "visible")
        if len(np.unique(ids)) != count:
            raise FormatError("duplicate marker id", path, lineno)
        if frames:
            prev = frames[-1]
            if frame_index <= prev.frame_index:
                raise FormatError(
                    f"non-monotone frame index {frame_index} after {prev.frame_index}", path, lineno
                )
            if t < prev.time_s:
                raise FormatError("time decreases", path, lineno)
            if set(ids.tolist()) != id_set:
                raise FormatError("marker id set differs from the first frame", path, lineno)
            if not np.array_equal(ids, prev.ids):
                # keep positional correspondence
                order = np.argsort(ids)
                ref = np.argsort(np.argsort(prev.ids))
                ids, xy, vis = ids[order][ref], xy[order][ref], vis[order][ref]
        else:
            id_set = set(ids.tolist())
        frames.append(MarkerFrame(frame_index, t, ids, xy, vis))
    if not frames:
        raise FormatError("sequence file holds no frames", path)

    gt_path = ground_truth_path(path)
    truth = None
    if gt_path.exists():
        truth = read_ground_truth(gt_path)
        got = [g.frame_index for g in truth]
        want = [f.frame_index for f in frames]
        if got != want:
            raise FormatError("ground truth frames do not pair with the sequence", gt_path)
    return frames, truth


def _fmt(value: float) -> str:
    return repr(float(value))


def write_sequence(path, frames: Iterable[MarkerFrame], ground_truth=None) -> Path:
    path = Path(path)
    lines = []
    for f in frames:
        parts = [str(f.frame_index), _fmt(f.time_s), str(len(f))]
        for i, (x, y), v in zip(f.ids, f.xy, f.visible):
            parts.extend((str(int(i)), _fmt(x), _fmt(y), "1" if v else "0"))
        lines.append(" ".join(parts))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    if ground_truth is not None:
        write_ground_truth(ground_truth_path(path), ground_truth)
    return path


def read_ground_truth(path) -> list[GroundTruthFrame]:
    path = Path(path)
    out: list[GroundTruthFrame] = []
    for lineno, tok in _data_lines(path):
        if len(tok) != 3:
            raise FormatError("expected 'frame angle_deg rotating'", path, lineno)
        frame_index = _parse_int(tok[0], path, lineno, "frame")
        if out and frame_index <= out[-1].frame_index:
            raise FormatError("non-monotone frame index", path, lineno)
        out.append(
            GroundTruthFrame(
                frame_index,
                _parse_float(tok[1], path, lineno, "angle_deg"),
                _parse_flag(tok[2], path, lineno, "rotating"),
            )
        )
    return out


def write_ground_truth(path, truth: Iterable[GroundTruthFrame]) -> Path:
    path = Path(path)
    lines = [f"{g.frame_index} {_fmt(g.angle_deg)} {1 if g.rotating else 0}" for g in truth]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


# -- point clouds -----------------------------------------------------------


def read_point_cloud(path) -> PointCloud:
    path = Path(path)
    rows = []
    with open(path, "r", encoding="ascii", errors="strict") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 3:
                raise FormatError("expected 'x,y,z'", path, lineno)
            rows.append([_parse_float(v.strip(), path, lineno, "coordinate") for v in fields])
    if len(rows) < 3:
        raise FormatError(f"need at least 3 points, found {len(rows)}", path)
    return PointCloud(np.array(rows))


def write_point_cloud(path, cloud: PointCloud) -> Path:
    path = Path(path)
    text = "".join(f"{_fmt(x)},{_fmt(y)},{_fmt(z)}\n" for x, y, z in cloud.points)
    path.write_text(text, encoding="ascii")
    return path


# -- intensity frames -------------------------------------------------------


def read_ppm(path) -> IntensityFrame:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(2) != b"P6":
            raise FormatError("not a binary PPM (P6) file", path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "RGB":
                raise FormatError(f"unexpected PPM mode {img.mode}", path)
            return IntensityFrame(np.asarray(img, dtype=np.uint8))
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"unreadable PPM: {exc}", path) from None


def write_ppm(path, frame: IntensityFrame) -> Path:
    path = Path(path)
    Image.fromarray(np.ascontiguousarray(frame.pixels), mode="RGB").save(path, format="PPM")
    return path


def read_intensity_frames(directory) -> list[IntensityFrame]:
    directory = Path(directory)
    files = sorted(directory.glob("frame_*.ppm"))
    if not files:
        raise FormatError("no frame_*.ppm files", directory)
    frames = [read_ppm(p) for p in files]
    shape = frames[0].pixels.shape
    if any(f.pixels.shape != shape for f in frames):
        raise FormatError("intensity frames differ in size", directory)
    return frames


def write_intensity_frames(directory, frames: Iterable[IntensityFrame]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(frames):
        write_ppm(directory / f"frame_{k:06d}.ppm", frame)
    return directory


# -- config -----------------------------------------------------------------


def _coerce(name: str, kind, text: str, path, lineno):
    if kind is bool or kind == "bool":
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise FormatError(f"{name}: expected a boolean, got {text!r}", path, lineno)
    if kind is int or kind == "int":
        return _parse_int(text, path, lineno, name)
    if kind is float or kind == "float":
        return _parse_float(text, path, lineno, name)
    return text


def read_config(path, cls=PipelineConfig):
    """Parse a flat ``key = value`` file into ``cls`` (a dataclass)."""
    path = Path(path)
    kinds = {f.name: f.type for f in dataclasses.fields(cls)}
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected 'key = value'", path, lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise FormatError(f"unknown config key {key!r}", path, lineno)
            if key in values:
                raise FormatError(f"duplicate config key {key!r}", path, lineno)
            values[key] = _coerce(key, kinds[key], value, path, lineno)
    try:
        return cls(**values)
    except TactileError as exc:
        raise FormatError(str(exc), path) from None


def write_config(path, config) -> Path:
    path = Path(path)
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {repr(value) if isinstance(value, float) else value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

