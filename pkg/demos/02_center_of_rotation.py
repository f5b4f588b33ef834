"""
Where is the object turning about?
==================================

Every marker that rotates rigidly about a point moves along a chord of a
circle centered there. The perpendicular bisector of each chord passes
through the center, so a least-squares intersection of all bisectors gives
the center of rotation. Noise on the markers blurs the bisectors, and the
estimate degrades gracefully.
"""

import numpy as np

from tactile_rotation import MotionVectorSet, estimate_cor, rotation_angle

rng = np.random.default_rng(3)
gx, gy = np.meshgrid(np.arange(5) * 20.0 + 200, np.arange(5) * 20.0 + 150)
start = np.column_stack([gx.ravel(), gy.ravel()])
true_cor = np.array([236.0, 197.0])


def rotate(points, center, deg):
    th = np.radians(deg)
    c, s = np.cos(th), np.sin(th)
    rel = points - center
    return center + rel @ np.array([[c, s], [-s, c]])


for sigma in (0.0, 0.1, 0.2, 0.5):
    end = rotate(start, true_cor, 7.0) + rng.normal(0, sigma, start.shape)
    vectors = MotionVectorSet.from_pair(start, end)
    cor, residual = estimate_cor(vectors)
    angle = rotation_angle(vectors, cor)
    miss = np.linalg.norm(np.subtract(cor, true_cor))
    print(f"noise {sigma:.1f} px: COR off by {miss:6.3f} px, angle {angle:6.3f} deg, residual {residual:.3f}")

# markers near the center barely move and say little about the angle;
# a pure translation has parallel bisectors and no center at all
shifted = start + (3.0, 0.0)
try:
    estimate_cor(MotionVectorSet.from_pair(start, shifted))
except Exception as exc:
    print(f"\npure translation: {type(exc).__name__}: {exc}")
