import numpy as np
import pytest

from tactile_rotation.data import MarkerFrame


def rotate_about(points, center, angle_deg):
    """Clockwise-on-screen rotation (y down) of ``points`` about ``center``."""
    th = np.radians(angle_deg)
    c, s = np.cos(th), np.sin(th)
    rel = np.asarray(points, dtype=float) - center
    out = np.column_stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]])
    return out + center


def frames_from_positions(positions, fps=30.0, visible=None):
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[1]
    ids = np.arange(n)
    vis = np.ones(n, dtype=bool) if visible is None else visible
    return [MarkerFrame(k, k / fps, ids, p, vis) for k, p in enumerate(positions)]


def grid_points(nx=5, ny=5, spacing=20.0, origin=(100.0, 100.0)):
    xs = origin[0] + spacing * np.arange(nx)
    ys = origin[1] + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the lines are repeated in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
