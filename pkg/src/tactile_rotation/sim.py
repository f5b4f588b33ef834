"""Quasi-static grasp simulator: marker fields, tactile images and ground truth.

The model is kinematic. Gravity acting at the center of gravity produces a
torque proxy ``mass * g * |grasp_offset - cog_offset|`` about the grasp.
During the lift the gel first twists elastically (bounded), and once the
torque exceeds the friction limit set by the object's stability radius the
object slips and keeps rotating. Contact markers follow the rigid rotation of
the object about the center of the contact patch; markers outside the patch
follow at a fraction of that motion.

Sign convention: a center of gravity on the +axis side of the grasp turns the
object clockwise in the sensor image (positive angle).
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence as _SequenceABC
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .cor import Orientation, StabilityVerdict, Verdict
from .control import GraspCommand
from .data import GroundTruthFrame, IntensityFrame, MarkerFrame, PipelineConfig, PointCloud
from .errors import TactileError
from .pipeline import process_sequence

__all__ = [
    "GRAVITY",
    "OBJECTS",
    "Flat",
    "SmallBlob",
    "SimObject",
    "SimParams",
    "SimResult",
    "torque_proxy",
    "ground_truth_angles",
    "marker_angles",
    "closure_profile",
    "marker_grid",
    "footprint_radius",
    "simulate_grasp",
    "RenderedFrames",
    "oracle_plant",
    "plant_adapter",
    "table_scene",
]

GRAVITY = 9.81
NONCONTACT_ATTENUATION = 0.2
# indentation outside the patch fades over roughly this many pixels
PRESS_DECAY_PX = 24.0


@dataclass(frozen=True)
class Flat:
    """Rectangular flat contact patch centred on the sensor (pixels)."""

    width_px: float = 220.0
    height_px: float = 160.0


@dataclass(frozen=True)
class SmallBlob:
    """Small elongated contact: an ellipse of ``n_px`` pixels and axis ratio ``eccentricity``."""

    n_px: float = 900.0
    eccentricity: float = 3.0
    axis_deg: float = 30.0

    @property
    def semi_axes(self) -> tuple[float, float]:
        b = math.sqrt(self.n_px / (math.pi * self.eccentricity))
        return self.eccentricity * b, b


Footprint = Union[Flat, SmallBlob]


@dataclass(frozen=True)
class SimObject:
    length: float = 0.30
    mass: float = 0.20
    cog_offset: float = 0.0
    stability_radius: float = 0.03
    contact_footprint: Footprint = field(default_factory=Flat)

    def __post_init__(self):
        if not self.length > 0 or not self.mass > 0:
            raise TactileError("object length and mass must be positive")
        if abs(self.cog_offset) > 0.5 * self.length:
            raise TactileError("center of gravity lies outside the object")
        if not self.stability_radius > 0:
            raise TactileError("stability_radius must be positive")


# Representative objects. Stability radii are set so the controller needs a
# plausible number of regrasps; none of them models a specific physical item.
OBJECTS = {
    "rod": SimObject(),
    "pills_box": SimObject(length=0.18, mass=0.15, stability_radius=0.18 / 16),
    "hammer": SimObject(length=0.32, mass=0.55, cog_offset=0.096, stability_radius=0.016),
    "pen": SimObject(length=0.14, mass=0.02, stability_radius=0.01, contact_footprint=SmallBlob()),
}


@dataclass(frozen=True)
class SimParams:
    """Simulation knobs. Angles in degrees, rates per frame, torques in N*m."""

    fps: float = 30.0
    closure_frames: int = 15
    lift_start_frame: int = 40
    lift_ramp_frames: int = 4
    gel_shear_compliance: float = 40.0
    elastic_limit_deg: float = 3.5
    slip_rate: float = 2.0
    slip_base_deg: float = 0.4
    max_angle_deg: float = 30.0
    marker_noise_px: float = 0.05
    adhesion_lag_deg: float = 2.0
    press_px: float = 12.0
    squeeze_px: float = 6.0
    creep_px: float = 0.2
    translation_px: tuple[float, float] = (0.0, 0.0)
    rotation_floor_deg: float = 0.5
    image_width: int = 320
    image_height: int = 240
    marker_spacing_px: float = 20.0
    image_noise: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.fps > 0:
            raise TactileError("fps must be positive")
        rates = (
            self.gel_shear_compliance,
            self.elastic_limit_deg,
            self.slip_rate,
            self.slip_base_deg,
            self.max_angle_deg,
            self.marker_noise_px,
            self.adhesion_lag_deg,
            self.press_px,
            self.squeeze_px,
            self.creep_px,
            self.image_noise,
        )
        if any(r < 0 for r in rates):
            raise TactileError("simulation rates must be non-negative")
        if self.closure_frames < 1 or self.lift_ramp_frames < 1:
            raise TactileError("closure_frames and lift_ramp_frames must be at least 1")
        object.__setattr__(self, "translation_px", tuple(float(v) for v in self.translation_px))


@dataclass(frozen=True, eq=False)
class SimResult:
    frames: list[MarkerFrame]
    truth: list[GroundTruthFrame]
    images: "RenderedFrames | None"
    closure_frame: int
    contact_ids: frozenset
    cor: tuple[float, float]
    marker_angles_deg: np.ndarray

    def __iter__(self):
        return iter((self.frames, self.truth, self.images))


def torque_proxy(obj: SimObject, grasp_offset: float) -> float:
    return obj.mass * GRAVITY * abs(grasp_offset - obj.cog_offset)


def _rotation_sign(obj: SimObject, grasp_offset: float) -> float:
    return float(np.sign(obj.cog_offset - grasp_offset))


def ground_truth_angles(obj: SimObject, params: SimParams, grasp_offset: float, n_frames: int) -> np.ndarray:
    """Signed object rotation (degrees, clockwise-positive) for each frame."""
    tau = torque_proxy(obj, grasp_offset)
    tau_crit = obj.mass * GRAVITY * obj.stability_radius
    angles = np.zeros(n_frames)
    slip = 0.0
    for f in range(n_frames):
        ramp = min(max((f - params.lift_start_frame) / params.lift_ramp_frames, 0.0), 1.0)
        tau_f = tau * ramp
        elastic = min(params.gel_shear_compliance * tau_f, params.elastic_limit_deg)
        if tau_f > tau_crit:
            slip += params.slip_base_deg + params.slip_rate * (tau_f - tau_crit)
        angles[f] = min(elastic + slip, params.max_angle_deg)
    return _rotation_sign(obj, grasp_offset) * angles


def marker_angles(truth_deg: np.ndarray, params: SimParams) -> np.ndarray:
    """Rotation seen by the gel: the truth minus an adhesion lag that grows past 10 deg."""
    mag = np.abs(truth_deg)
    lag = params.adhesion_lag_deg * np.clip((mag - 10.0) / 10.0, 0.0, 1.0)
    return np.sign(truth_deg) * (mag - lag)


def closure_profile(n_frames: int, closure_frames: int) -> np.ndarray:
    """Fraction of full press per frame; the indentation accelerates until closure."""
    u = np.minimum(np.arange(n_frames) / closure_frames, 1.0)
    return u**3


def marker_grid(params: SimParams) -> np.ndarray:
    s = params.marker_spacing_px
    xs = np.arange(s / 2, params.image_width, s)
    ys = np.arange(s / 2, params.image_height, s)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _center(params: SimParams) -> np.ndarray:
    return np.array([params.image_width / 2.0, params.image_height / 2.0])


def footprint_radius(footprint: Footprint, rel: np.ndarray, rotation_deg: float = 0.0) -> np.ndarray:
    """Normalized footprint radius of points ``rel`` (relative to the patch center).

    Values <= 1 are inside the patch. ``rotation_deg`` turns the patch clockwise.
    """
    if isinstance(footprint, Flat):
        theta = math.radians(rotation_deg)
        hw, hh = footprint.width_px / 2.0, footprint.height_px / 2.0
    else:
        theta = math.radians(rotation_deg + footprint.axis_deg)
        hw, hh = footprint.semi_axes
    c, s = math.cos(theta), math.sin(theta)
    x = c * rel[..., 0] + s * rel[..., 1]
    y = -s * rel[..., 0] + c * rel[..., 1]
    if isinstance(footprint, Flat):
        return np.maximum(np.abs(x) / hw, np.abs(y) / hh)
    return np.hypot(x / hw, y / hh)


def _mean_semi_axis(footprint: Footprint) -> float:
    if isinstance(footprint, Flat):
        return 0.25 * (footprint.width_px + footprint.height_px)
    return 0.5 * sum(footprint.semi_axes)


def _rotate(rel: np.ndarray, angle_deg: np.ndarray) -> np.ndarray:
    """Rotate ``(n, 2)`` vectors by each angle in ``(T,)`` -> ``(T, n, 2)`` (clockwise on screen)."""
    th = np.radians(angle_deg)[:, None]
    c, s = np.cos(th), np.sin(th)
    x, y = rel[None, :, 0], rel[None, :, 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def _rng(params: SimParams, *stream: int) -> np.random.Generator:
    return np.random.default_rng([params.seed & 0xFFFFFFFF, *stream])


def simulate_grasp(
    obj: SimObject,
    params: SimParams,
    grasp_offset: float,
    n_frames: int = 100,
    *,
    render: bool = False,
) -> SimResult:
    """Generate one grasp-and-lift trial.

    Returns marker frames, per-frame ground truth, and (with ``render``) a
    lazily rendered image sequence. Deterministic for a fixed ``params.seed``.
    """
    if abs(grasp_offset) > 0.5 * obj.length:
        raise TactileError(f"grasp offset {grasp_offset} m lies outside the object")
    if n_frames < 1:
        raise TactileError("n_frames must be positive")

    truth = ground_truth_angles(obj, params, grasp_offset, n_frames)
    seen = marker_angles(truth, params)
    grid = marker_grid(params)
    center = _center(params)
    rel0 = grid - center
    dist = np.linalg.norm(rel0, axis=1)
    radial = np.divide(rel0, dist[:, None], out=np.zeros_like(rel0), where=dist[:, None] > 0)
    rho = footprint_radius(obj.contact_footprint, rel0)
    inside = rho <= 1.0

    press = np.where(
        inside,
        params.press_px * (0.5 + 0.5 * rho),
        params.press_px * 0.25 * np.exp(-(rho - 1.0) * _mean_semi_axis(obj.contact_footprint) / PRESS_DECAY_PX),
    )
    # the squeezed gel also bulges outwards, more so far from the patch
    press = press + params.squeeze_px * dist / np.linalg.norm(center)
    pressed = grid + press[:, None] * radial
    profile = closure_profile(n_frames, params.closure_frames)
    follow = np.where(inside, 1.0, NONCONTACT_ATTENUATION)

    xy = grid[None] + profile[:, None, None] * (press[:, None] * radial)[None]
    rel = pressed - center
    xy += follow[None, :, None] * (_rotate(rel, seen) - rel[None])

    frames_idx = np.arange(n_frames)
    lifted = np.maximum(frames_idx - params.lift_start_frame, 0).astype(float)
    trans = np.outer(lifted, params.translation_px)
    xy += follow[None, :, None] * trans[:, None, :]

    rng = _rng(params, 1)
    creep_amp = rng.standard_normal(len(grid)) * params.creep_px * inside
    settle = params.closure_frames
    creep_t = np.clip((frames_idx - settle) / max(n_frames - settle, 1), 0.0, 1.0)
    xy += creep_t[:, None, None] * (creep_amp[:, None] * radial)[None]
    xy += rng.standard_normal(xy.shape) * params.marker_noise_px

    ids = np.arange(len(grid))
    visible = np.ones(len(grid), dtype=bool)
    frames = [MarkerFrame(f, f / params.fps, ids, xy[f], visible) for f in range(n_frames)]
    gt = [
        GroundTruthFrame(f, float(truth[f]), bool(abs(truth[f]) >= params.rotation_floor_deg))
        for f in range(n_frames)
    ]
    images = RenderedFrames(obj.contact_footprint, params, profile, seen) if render else None
    return SimResult(
        frames,
        gt,
        images,
        params.closure_frames,
        frozenset(int(i) for i in ids[inside]),
        (float(center[0]), float(center[1])),
        seen,
    )


class RenderedFrames(_SequenceABC):
    """Tactile images rendered on demand; indexing frame ``k`` is deterministic."""

    def __init__(self, footprint: Footprint, params: SimParams, profile: np.ndarray, angles_deg: np.ndarray):
        self.footprint = footprint
        self.params = params
        self.profile = profile
        self.angles_deg = angles_deg
        h, w = params.image_height, params.image_width
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        self._background = np.stack(
            [110.0 + 20.0 * xs / w, 100.0 + 15.0 * ys / h, np.full_like(xs, 95.0)], axis=-1
        ).astype(np.float32)
        self.brightness = 45.0 if isinstance(footprint, Flat) else 70.0
        # coverage is zero outside a disk bounding the patch at any rotation
        if isinstance(footprint, Flat):
            reach = 0.5 * math.hypot(footprint.width_px, footprint.height_px)
        else:
            reach = max(footprint.semi_axes)
        reach += 2.0
        y0, y1 = max(int(h / 2.0 - reach), 0), min(int(math.ceil(h / 2.0 + reach)) + 1, h)
        x0, x1 = max(int(w / 2.0 - reach), 0), min(int(math.ceil(w / 2.0 + reach)) + 1, w)
        self._window = (slice(y0, y1), slice(x0, x1))
        self._rel = np.stack([xs[self._window] - w / 2.0, ys[self._window] - h / 2.0], axis=-1)

    def __len__(self):
        return len(self.profile)

    def coverage(self, k: int) -> np.ndarray:
        """Anti-aliased contact coverage in [0, 1] for frame ``k``."""
        rho = footprint_radius(self.footprint, self._rel, float(self.angles_deg[k]))
        if isinstance(self.footprint, Flat):
            scale = 0.5 * min(self.footprint.width_px, self.footprint.height_px)
        else:
            r = np.linalg.norm(self._rel, axis=-1)
            scale = np.divide(r, rho, out=np.full_like(r, self.footprint.semi_axes[1]), where=rho > 0)
        full = np.zeros(self._background.shape[:2])
        full[self._window] = np.clip((1.0 - rho) * scale + 0.5, 0.0, 1.0)
        return full

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        img = self._background.copy()
        win = self._window
        img[win] += (self.brightness * self.profile[k] * self.coverage(k)[win])[..., None]
        if self.params.image_noise > 0:
            noise = _rng(self.params, 2, k).standard_normal(img.shape, dtype=np.float32)
            img += self.params.image_noise * noise
        return IntensityFrame(np.clip(np.rint(img), 0, 255).astype(np.uint8))


# -- plants for the regrasp controller --------------------------------------


def oracle_plant(obj: SimObject, params: SimParams | None = None, n_frames: int = 100, stability_deg: float = 5.0):
    """Plant that reports the simulator's ground truth directly."""
    params = params or SimParams()

    def plant(command: GraspCommand):
        truth = ground_truth_angles(obj, params, command.offset, n_frames)
        peak = float(np.max(np.abs(truth)))
        if peak > stability_deg:
            verdict = Verdict.ROTATIONAL_FAILURE
        else:
            verdict = Verdict.STABLE_GRASP
        sign = _rotation_sign(obj, command.offset)
        orientation = Orientation.CW if sign > 0 else Orientation.CCW if sign < 0 else Orientation.AMBIGUOUS
        return StabilityVerdict(verdict, peak), orientation, peak

    return plant


def plant_adapter(
    obj: SimObject,
    params: SimParams | None = None,
    config: PipelineConfig | None = None,
    n_frames: int = 100,
):
    """Plant that simulates each grasp and runs the full measurement pipeline on it.

    The i-th grasp of the episode uses seed stream ``(params.seed, i)``.
    """
    params = params or SimParams()
    config = config or PipelineConfig()
    render = isinstance(obj.contact_footprint, SmallBlob)
    calls = [0]

    def plant(command: GraspCommand):
        seed = (params.seed * 1_000_003 + calls[0]) & 0xFFFFFFFF
        calls[0] += 1
        p = dataclasses.replace(params, seed=seed)
        sim = simulate_grasp(obj, p, command.offset, n_frames, render=render)
        result = process_sequence(sim.frames, config, sim.images)
        return result.verdict, result.orientation, result.verdict.measured_angle_deg

    return plant



def table_scene(
    length: float,
    *,
    width: float = 0.03,
    height: float = 0.03,
    axis_deg: float = 0.0,
    center: tuple[float, float] = (0.0, 0.0),
    n_table: int = 6000,
    n_object: int = 2000,
    table_size: float = 0.8,
    noise_m: float = 0.0,
    seed: int = 0,
) -> PointCloud:
    """Table-top cloud: a square table in z = 0 and a box-shaped object on it.

    Object points are the visible top face, uniform over ``length`` x ``width``
    at z = ``height``, with the long side at ``axis_deg`` from +x. Gaussian
    noise of ``noise_m`` is added to every coordinate.
    """
    if not length > 0:
        raise TactileError(f"object length must be positive, got {length}")
    rng = np.random.default_rng(seed)
    table = np.column_stack([rng.uniform(-0.5, 0.5, (n_table, 2)) * table_size, np.zeros(n_table)])
    local = rng.uniform(-0.5, 0.5, (n_object, 2)) * (length, width)
    c, s = math.cos(math.radians(axis_deg)), math.sin(math.radians(axis_deg))
    xy = local @ np.array([[c, s], [-s, c]]) + np.asarray(center, dtype=np.float64)
    top = np.column_stack([xy, np.full(n_object, height)])
    pts = np.vstack([table, top])
    if noise_m > 0:
        pts = pts + rng.normal(0.0, noise_m, pts.shape)
    return PointCloud(pts)
