"""Panoramic multi-camera 3D multi-object tracking."""

from ._panoptrack import (
    ArgumentError,
    Box3D,
    InputError,
    NumericError,
    bev_distance,
    builtin_scenarios,
    evaluate,
    greedy_assign,
    huber,
    iou_3d,
    motion_loss,
    simulate,
    track,
    train_motion,
    wrap_angle,
)

__all__ = [
    "ArgumentError",
    "Box3D",
    "InputError",
    "NumericError",
    "bev_distance",
    "builtin_scenarios",
    "evaluate",
    "greedy_assign",
    "huber",
    "iou_3d",
    "motion_loss",
    "simulate",
    "track",
    "train_motion",
    "wrap_angle",
]
