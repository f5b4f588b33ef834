"""Coarse-to-fine regrasp controller.

The controller is a pure state machine: :func:`next_grasp` maps a state plus
the outcome of the last grasp to a new state and, unless the grasp was
stable, the next grasp command. Offsets are meters along the object's
principal axis with 0 at its geometric center.

Step schedule: the first regrasp moves ``0.4 L``, later ones ``L / 6``.
When the rotation orientation flips between two grasps the center of
gravity lies between them; the controller records that bracket, reverses
and halves the step. Inside a bracket no move goes further than half way to
the bracket end it is heading for.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .cor import Orientation, StabilityVerdict, Verdict
from .errors import ControllerError, FormatError

__all__ = [
    "Phase",
    "ControllerState",
    "GraspCommand",
    "EpisodeStep",
    "Episode",
    "init_controller",
    "next_grasp",
    "run_episode",
    "replay_plant",
    "write_episode",
    "read_episode",
]

FIRST_STEP_FRACTION = 0.4
LATER_STEP_FRACTION = 1.0 / 6.0
FLIP_FACTOR = 0.5
END_MARGIN = 0.05


class Phase(enum.Enum):
    INITIAL = "initial"
    COARSE = "coarse"
    FINE = "fine"
    DONE = "done"


@dataclass(frozen=True)
class GraspCommand:
    offset: float
    lift_height: float = 0.05
    hold_time_s: float = 3.0


@dataclass(frozen=True)
class ControllerState:
    object_length_L: float
    grasp_offset: float = 0.0
    step_size: float = 0.0
    direction: int = 0
    last_orientation: Orientation | None = None
    bracket: tuple[float, float] | None = None
    regrasp_count: int = 0
    phase: Phase = Phase.INITIAL
    previous_offset: float | None = None
    ambiguous_retries: int = 0
    max_regrasps: int = 10
    flip_direction: bool = False

    @property
    def limit(self) -> float:
        return 0.5 * self.object_length_L * (1.0 - END_MARGIN)

    def command(self) -> GraspCommand:
        return GraspCommand(self.grasp_offset)


def init_controller(length_L: float, *, max_regrasps: int = 10, flip_direction: bool = False) -> ControllerState:
    if not length_L > 0:
        raise ControllerError(f"object length must be positive, got {length_L}")
    return ControllerState(
        object_length_L=float(length_L),
        step_size=FIRST_STEP_FRACTION * length_L,
        max_regrasps=max_regrasps,
        flip_direction=flip_direction,
    )


def _direction_for(orientation: Orientation, flip: bool) -> int:
    # clockwise image rotation means the center of gravity is on the +axis side
    d = 1 if orientation is Orientation.CW else -1
    return -d if flip else d


def _target(state: ControllerState, direction: int, move: float, bracket) -> float:
    # inside a bracket, cover at most half the room left towards its edge so
    # a bracket end is never revisited and each flip at least halves the width
    if bracket is not None:
        edge = bracket[1] if direction > 0 else bracket[0]
        move = min(move, 0.5 * abs(edge - state.grasp_offset))
    lim = state.limit
    return min(max(state.grasp_offset + direction * move, -lim), lim)


def next_grasp(
    state: ControllerState,
    verdict: StabilityVerdict | Verdict,
    orientation: Orientation | None = None,
) -> tuple[ControllerState, GraspCommand | None]:
    if state.phase is Phase.DONE:
        raise ControllerError("controller already finished")
    if isinstance(verdict, StabilityVerdict):
        verdict = verdict.verdict
    if verdict is Verdict.STABLE_GRASP:
        return dataclasses.replace(state, phase=Phase.DONE), None

    if orientation is None or orientation is Orientation.AMBIGUOUS:
        if state.ambiguous_retries >= 1:
            raise ControllerError(
                f"rotation orientation still ambiguous at offset {state.grasp_offset:.4f} m"
            )
        new = dataclasses.replace(
            state,
            ambiguous_retries=state.ambiguous_retries + 1,
            regrasp_count=state.regrasp_count + 1,
        )
        _check_budget(new)
        return new, new.command()

    L = state.object_length_L
    bracket = state.bracket
    phase = state.phase
    if state.last_orientation is None:
        direction = _direction_for(orientation, state.flip_direction)
        move = state.step_size
        next_step = LATER_STEP_FRACTION * L
        phase = Phase.COARSE
    elif orientation is state.last_orientation:
        direction = state.direction
        move = next_step = state.step_size
    else:
        prev = state.previous_offset if state.previous_offset is not None else 0.0
        low, high = sorted((prev, state.grasp_offset))
        bracket = (low, high)
        direction = -state.direction
        move = next_step = state.step_size * FLIP_FACTOR
        phase = Phase.FINE

    target = _target(state, direction, move, bracket)
    # a clamped move can revisit the same offset; keep the last distinct one
    previous = state.grasp_offset if target != state.grasp_offset else state.previous_offset
    new = dataclasses.replace(
        state,
        grasp_offset=target,
        previous_offset=previous,
        step_size=next_step,
        direction=direction,
        last_orientation=orientation,
        bracket=bracket,
        regrasp_count=state.regrasp_count + 1,
        phase=phase,
        ambiguous_retries=0,
    )
    _check_budget(new)
    return new, new.command()


def _check_budget(state: ControllerState) -> None:
    if state.regrasp_count > state.max_regrasps:
        raise ControllerError(f"exceeded {state.max_regrasps} regrasps")


@dataclass(frozen=True)
class EpisodeStep:
    step: int
    offset_m: float
    verdict: Verdict
    orientation: Orientation
    angle_deg: float


@dataclass(frozen=True)
class Episode:
    steps: tuple[EpisodeStep, ...]
    final_state: ControllerState

    @property
    def regrasp_count(self) -> int:
        return self.final_state.regrasp_count

    @property
    def converged(self) -> bool:
        return self.final_state.phase is Phase.DONE

    @property
    def final_offset(self) -> float:
        return self.final_state.grasp_offset


# plant: command -> (verdict, orientation, measured angle in degrees)
Plant = Callable[[GraspCommand], tuple[StabilityVerdict, Orientation, float]]


def run_episode(controller: ControllerState, plant: Plant, max_regrasps: int | None = None) -> Episode:
    """Grasp, evaluate and regrasp until the plant reports a stable grasp."""
    state = controller
    if max_regrasps is not None:
        state = dataclasses.replace(state, max_regrasps=max_regrasps)
    steps = []
    command = state.command()
    while True:
        verdict, orientation, angle = plant(command)
        steps.append(EpisodeStep(len(steps), command.offset, verdict.verdict, orientation, float(angle)))
        state, command = next_grasp(state, verdict, orientation)
        if command is None:
            return Episode(tuple(steps), state)


def replay_plant(records: Iterable[EpisodeStep]) -> Plant:
    """Plant that replays recorded outcomes in order, ignoring the commanded offset."""
    queue = list(records)

    def plant(command: GraspCommand):
        if not queue:
            raise ControllerError("recorded log exhausted")
        rec = queue.pop(0)
        return StabilityVerdict(rec.verdict, rec.angle_deg), rec.orientation, rec.angle_deg

    return plant


def write_episode(path, episode: Episode | Iterable[EpisodeStep]) -> Path:
    """Line records ``step offset_m verdict orientation angle_deg``."""
    path = Path(path)
    steps = episode.steps if isinstance(episode, Episode) else episode
    lines = [
        f"{s.step} {s.offset_m!r} {s.verdict.value} {s.orientation.value} {s.angle_deg!r}"
        for s in steps
    ]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_episode(path) -> list[EpisodeStep]:
    path = Path(path)
    out = []
    for lineno, raw in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        tok = raw.split()
        if not tok:
            continue
        if len(tok) != 5:
            raise FormatError("expected 'step offset_m verdict orientation angle_deg'", path, lineno)
        try:
            out.append(
                EpisodeStep(int(tok[0]), float(tok[1]), Verdict(tok[2]), Orientation(tok[3]), float(tok[4]))
            )
        except ValueError as exc:
            raise FormatError(str(exc), path, lineno) from None
    return out
