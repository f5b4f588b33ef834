"""Tactile rotation measurement and closed-loop regrasp control."""

from .contact import ContactKind, ContactState, contact_region, detect_stable_contact, partition_markers
from .contour import ContactContour, contour_rotation, extract_contour
from .control import (
    ControllerState,
    Episode,
    GraspCommand,
    Phase,
    init_controller,
    next_grasp,
    run_episode,
)
from .cor import (
    Orientation,
    RotationEstimate,
    StabilityVerdict,
    Verdict,
    assess_stability,
    estimate_cor,
    estimate_rotation,
    orientation_vote,
    rotation_angle,
)
from .data import (
    GroundTruthFrame,
    IntensityFrame,
    MarkerFrame,
    PipelineConfig,
    PointCloud,
    read_point_cloud,
    read_sequence,
    write_point_cloud,
    write_sequence,
)
from .geometry import ObjectGeometry, measure_object, object_length, principal_axis, segment_plane
from .motion import MotionClass, MotionVectorSet, classify_frame, classify_translation, detect_onset
from .pipeline import TactilePipeline, process_sequence
from .sim import Flat, SimObject, SimParams, SmallBlob, oracle_plant, plant_adapter, simulate_grasp

__version__ = "0.1.0"
