"""Center-of-rotation least squares, rotation angle and orientation vote.

Every marker that rotates rigidly about a center C moves along a chord of a
circle around C, so C lies on the perpendicular bisector of the marker's
motion vector. With motion ``d = start - end`` and midpoint ``m`` each marker
contributes the linear constraint ``d . C = d . m``; the center is the
least-squares solution of the stacked constraints.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .data import PipelineConfig
from .errors import DegenerateMotion, NoUsableMarkers, TooFewMarkers
from .motion import MotionVectorSet

__all__ = [
    "Orientation",
    "Verdict",
    "RotationEstimate",
    "StabilityVerdict",
    "cor_system",
    "cor_objective",
    "estimate_cor",
    "rotation_angle",
    "orientation_vote",
    "estimate_rotation",
    "assess_stability",
]

log = logging.getLogger(__name__)

MAX_CONDITION = 1e6
MIN_RADIUS_PX = 2.0


class Orientation(enum.Enum):
    CW = "cw"
    CCW = "ccw"
    AMBIGUOUS = "ambiguous"

    def flipped(self) -> "Orientation":
        if self is Orientation.CW:
            return Orientation.CCW
        if self is Orientation.CCW:
            return Orientation.CW
        return self


class Verdict(enum.Enum):
    STABLE_GRASP = "stable"
    ROTATIONAL_FAILURE = "rotational"


@dataclass(frozen=True)
class RotationEstimate:
    cor: tuple[float, float]
    angle_deg: float
    orientation: Orientation
    signed_angle_deg: float
    votes_cw: int
    votes_ccw: int
    residual: float
    n_markers: int


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: Verdict
    measured_angle_deg: float

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.ROTATIONAL_FAILURE


def cor_system(start, end, *, weighted=True, noise_floor=0.5):
    """Rows, right-hand side and midpoints of the perpendicular-bisector system.

    Markers that moved no more than ``noise_floor`` are dropped. With
    ``weighted`` the row for a marker is its raw motion, which weights the
    marker's distance-to-bisector by its motion magnitude; otherwise rows are
    unit normals and every marker counts equally.
    """
    start = np.asarray(start, dtype=np.float64).reshape(-1, 2)
    end = np.asarray(end, dtype=np.float64).reshape(-1, 2)
    delta = start - end
    norm = np.linalg.norm(delta, axis=1)
    keep = norm > noise_floor
    delta, norm = delta[keep], norm[keep]
    mid = 0.5 * (start[keep] + end[keep])
    rows = delta if weighted else delta / norm[:, None]
    rhs = np.einsum("ij,ij->i", rows, mid)
    return rows, rhs, mid


def cor_objective(candidates, start, end, *, weighted=True, noise_floor=0.5) -> np.ndarray:
    """Sum of squared bisector residuals at each candidate center, shape ``(k,)``."""
    rows, rhs, _ = cor_system(start, end, weighted=weighted, noise_floor=noise_floor)
    cand = np.asarray(candidates, dtype=np.float64).reshape(-1, 2)
    r = cand @ rows.T - rhs[None, :]
    return np.sum(r * r, axis=1)


def estimate_cor(
    vectors: MotionVectorSet,
    *,
    reference: str = "initial",
    weighted: bool = True,
    noise_floor: float = 0.5,
) -> tuple[tuple[float, float], float]:
    """Least-squares center of rotation and its RMS perpendicularity residual.

    The residual is the RMS distance (pixels) from the center to each marker's
    perpendicular bisector.
    """
    start, end = vectors.pair(reference)
    rows, rhs, mid = cor_system(start, end, weighted=weighted, noise_floor=noise_floor)
    if len(rows) < 2:
        raise TooFewMarkers(f"{len(rows)} markers moved beyond {noise_floor} px, need 2")
    # solve about the midpoint centroid to keep the system well scaled
    origin = mid.mean(axis=0)
    shifted = rhs - rows @ origin
    if np.linalg.cond(rows.T @ rows) > MAX_CONDITION:
        raise DegenerateMotion("motion directions are (nearly) parallel")
    sol, *_ = np.linalg.lstsq(rows, shifted, rcond=None)
    center = sol + origin
    dist = (rows @ center - rhs) / np.linalg.norm(rows, axis=1)
    residual = float(np.sqrt(np.mean(dist * dist)))
    return (float(center[0]), float(center[1])), residual


def rotation_angle(
    vectors: MotionVectorSet,
    cor,
    *,
    reference: str = "initial",
    min_radius: float = MIN_RADIUS_PX,
) -> float:
    """Median over markers of the unsigned angle swept about ``cor`` (degrees)."""
    start, end = vectors.pair(reference)
    c = np.asarray(cor, dtype=np.float64)
    a = start - c
    b = end - c
    ok = np.linalg.norm(a, axis=1) >= min_radius
    if not ok.any():
        raise NoUsableMarkers(f"every marker lies within {min_radius} px of the center")
    a, b = a[ok], b[ok]
    # atan2(|a x b|, a . b) equals arccos of the normalized dot product, better conditioned near 0
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = np.einsum("ij,ij->i", a, b)
    return float(np.degrees(np.median(np.arctan2(np.abs(cross), dot))))


def orientation_vote(
    vectors: MotionVectorSet,
    cor,
    config: PipelineConfig,
    *,
    reference: str = "initial",
) -> tuple[Orientation, int, int]:
    """Majority vote on the sign of each marker's motion moment about ``cor``.

    In the y-down image frame a positive z-moment is a clockwise turn on
    screen. The majority wins only if it outnumbers the minority by
    ``vote_dominance_ratio``; balanced votes are the signature of a static
    grasp with radial gel motion and come back AMBIGUOUS.
    """
    start, end = vectors.pair(reference)
    r = start - np.asarray(cor, dtype=np.float64)
    v = end - start
    moment = r[:, 0] * v[:, 1] - r[:, 1] * v[:, 0]
    cw = int(np.count_nonzero(moment > 0))
    ccw = int(np.count_nonzero(moment < 0))
    hi, lo = max(cw, ccw), min(cw, ccw)
    if hi == 0 or cw == ccw:
        return Orientation.AMBIGUOUS, cw, ccw
    if lo > 0 and hi / lo < config.vote_dominance_ratio:
        return Orientation.AMBIGUOUS, cw, ccw
    return (Orientation.CW if cw > ccw else Orientation.CCW), cw, ccw


def estimate_rotation(vectors: MotionVectorSet, config: PipelineConfig) -> RotationEstimate:
    """COR, angle and orientation for one frame using the configured reference."""
    ref = config.motion_reference
    cor, residual = estimate_cor(
        vectors, reference=ref, weighted=config.weighted_cor, noise_floor=config.noise_floor_px
    )
    angle = rotation_angle(vectors, cor, reference=ref)
    orientation, cw, ccw = orientation_vote(vectors, cor, config, reference=ref)
    if orientation is Orientation.CW:
        signed = angle
    elif orientation is Orientation.CCW:
        signed = -angle
    else:
        signed = 0.0
    return RotationEstimate(cor, angle, orientation, signed, cw, ccw, residual, len(vectors))


def assess_stability(estimate: RotationEstimate, config: PipelineConfig) -> StabilityVerdict:
    angle = estimate.angle_deg
    if estimate.orientation is Orientation.AMBIGUOUS:
        if angle > config.stability_angle_deg:
            log.warning("%.1f deg rotation vetoed by an ambiguous orientation vote", angle)
        return StabilityVerdict(Verdict.STABLE_GRASP, angle)
    if angle > config.stability_angle_deg:
        return StabilityVerdict(Verdict.ROTATIONAL_FAILURE, angle)
    return StabilityVerdict(Verdict.STABLE_GRASP, angle)
