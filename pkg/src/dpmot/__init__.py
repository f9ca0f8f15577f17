"""Depth-ordered multi-object tracking on a ground plane."""
from ._accel import USE_NUMBA, backend_name
from .assign import Assignment, linear_assignment, solve
from .metrics import MotReport, clear_mot, idf1, lcs_accuracy
from .model import BBox, CameraModel, Detection, SequenceInfo, TrackRecord
from .sode import order_detections
from .tracker import Tracker, TrackerConfig, TrackStatus, run_sequence

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BBox",
    "CameraModel",
    "Detection",
    "MotReport",
    "SequenceInfo",
    "TrackRecord",
    "TrackStatus",
    "Tracker",
    "TrackerConfig",
    "USE_NUMBA",
    "backend_name",
    "clear_mot",
    "idf1",
    "lcs_accuracy",
    "linear_assignment",
    "order_detections",
    "run_sequence",
    "solve",
]
