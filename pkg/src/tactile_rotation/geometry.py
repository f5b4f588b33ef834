"""Table-plane segmentation and object length from a point cloud."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PointCloud
from .errors import DegenerateCloud, TactileError

__all__ = [
    "Plane",
    "ObjectGeometry",
    "segment_plane",
    "plane_basis",
    "project_to_plane",
    "object_points",
    "principal_axis",
    "object_length",
    "measure_object",
]

MIN_INLIER_RATIO = 0.3


@dataclass(frozen=True, eq=False)
class Plane:
    """Plane ``normal . p + offset = 0`` with a unit normal (meters)."""

    normal: np.ndarray
    offset: float

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal + self.offset

    def flipped(self) -> "Plane":
        return Plane(-self.normal, -self.offset)


@dataclass(frozen=True, eq=False)
class ObjectGeometry:
    plane: Plane
    object_points: PointCloud
    axis_2d: np.ndarray
    center_2d: np.ndarray
    length_L: float
    inliers: np.ndarray = field(repr=False)


def _fit_plane(points: np.ndarray) -> tuple[np.ndarray, float]:
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = vt[-1]
    return normal, -float(normal @ centroid)


def _canonical(normal: np.ndarray, offset: float) -> tuple[np.ndarray, float]:
    k = int(np.argmax(np.abs(normal)))
    if normal[k] < 0:
        return -normal, -offset
    return normal, offset


def segment_plane(
    cloud: PointCloud,
    iterations: int = 500,
    inlier_threshold: float = 0.005,
    seed: int = 0,
) -> tuple[Plane, np.ndarray]:
    """RANSAC plane fit from random 3-point samples, refit to its inliers.

    Returns the plane and a boolean inlier mask. The normal is oriented so the
    off-plane points lie mostly on its positive side (the object sits "above"
    the table). Deterministic for a fixed ``seed``.
    """
    pts = np.asarray(cloud.points, dtype=np.float64)
    n = len(pts)
    if n < 3:
        raise DegenerateCloud(f"need at least 3 points, got {n}")
    if inlier_threshold <= 0:
        raise TactileError("inlier_threshold must be positive")
    rng = np.random.default_rng(seed)
    samples = np.stack([rng.choice(n, size=3, replace=False) for _ in range(iterations)])
    p0, p1, p2 = pts[samples[:, 0]], pts[samples[:, 1]], pts[samples[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    valid = norms > 1e-12
    normals[valid] /= norms[valid, None]
    offsets = -np.einsum("ij,ij->i", normals, p0)

    best_count, best = -1, None
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, iterations, chunk):
        sl = slice(start, start + chunk)
        dist = np.abs(normals[sl] @ pts.T + offsets[sl, None])
        counts = np.where(valid[sl], np.count_nonzero(dist <= inlier_threshold, axis=1), -1)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count, best = int(counts[k]), start + k
    if best is None or best_count < 3:
        raise DegenerateCloud("no non-degenerate plane sample")

    inliers = np.abs(pts @ normals[best] + offsets[best]) <= inlier_threshold
    normal, offset = _fit_plane(pts[inliers])
    refit = np.abs(pts @ normal + offset) <= inlier_threshold
    if refit.sum() >= inliers.sum():
        inliers = refit
    else:
        normal, offset = normals[best], float(offsets[best])
    if inliers.mean() < MIN_INLIER_RATIO:
        raise DegenerateCloud(f"best plane explains only {inliers.mean():.1%} of the points")

    normal, offset = _canonical(normal, offset)
    outside = ~inliers
    if outside.any() and np.median(pts[outside] @ normal + offset) < 0:
        normal, offset = -normal, -offset
    return Plane(normal, float(offset)), inliers


def plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane axes ``(u, v)`` with ``u x v = normal``."""
    normal = np.asarray(normal, dtype=np.float64)
    seed_axis = np.array([1.0, 0.0, 0.0])
    u = seed_axis - (seed_axis @ normal) * normal
    if np.linalg.norm(u) < 1e-6:
        seed_axis = np.array([0.0, 1.0, 0.0])
        u = seed_axis - (seed_axis @ normal) * normal
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def project_to_plane(points, plane: Plane) -> np.ndarray:
    """In-plane ``(n, 2)`` coordinates of the orthogonal projections of ``points``."""
    pts = np.asarray(points, dtype=np.float64)
    u, v = plane_basis(plane.normal)
    return np.column_stack([pts @ u, pts @ v])


def object_points(cloud: PointCloud, plane: Plane, inliers: np.ndarray, threshold: float) -> PointCloud:
    """Points off the table plane and above it by more than ``threshold``."""
    pts = np.asarray(cloud.points)
    above = (~inliers) & (plane.signed_distance(pts) > threshold)
    return PointCloud(pts[above])


def principal_axis(points, plane: Plane) -> tuple[np.ndarray, np.ndarray]:
    """Long axis and center of the object's footprint on the table plane."""
    coords = project_to_plane(getattr(points, "points", points), plane)
    if len(coords) == 0:
        raise DegenerateCloud("no object points")
    center = coords.mean(axis=0)
    u, s, _ = np.linalg.svd((coords - center).T, full_matrices=False)
    if s[0] <= 1e-12:
        raise DegenerateCloud("object points project to a single location")
    axis = u[:, 0]
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return axis, center


def object_length(points, axis_2d, center_2d, plane: Plane | None = None, *, mode: str = "axis") -> float:
    """Twice the 95th percentile of center distances.

    ``mode="axis"`` measures distances along the principal axis; ``"euclidean"``
    uses full in-plane distance to the center. ``points`` are either in-plane
    ``(n, 2)`` coordinates or 3D points together with ``plane``.
    """
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64)
    if pts.shape[1] == 3:
        if plane is None:
            raise TactileError("3D points need the table plane")
        pts = project_to_plane(pts, plane)
    rel = pts - np.asarray(center_2d)
    if mode == "axis":
        dist = np.abs(rel @ np.asarray(axis_2d))
    elif mode == "euclidean":
        dist = np.linalg.norm(rel, axis=1)
    else:
        raise TactileError(f"unknown length mode {mode!r}")
    return 2.0 * float(np.percentile(dist, 95))


def measure_object(
    cloud: PointCloud,
    iterations: int = 500,
    inlier_threshold: float = 0.005,
    seed: int = 0,
    mode: str = "axis",
) -> ObjectGeometry:
    plane, inliers = segment_plane(cloud, iterations, inlier_threshold, seed)
    obj = object_points(cloud, plane, inliers, inlier_threshold)
    if len(obj) < 3:
        raise DegenerateCloud(f"only {len(obj)} points above the table plane")
    axis, center = principal_axis(obj, plane)
    length = object_length(obj, axis, center, plane, mode=mode)
    return ObjectGeometry(plane, obj, axis, center, length, inliers)
