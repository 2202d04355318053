"""Real-to-sim alignment: marker scale, surface sampling, ICP, link segmentation."""

from .icp import AlignmentResult, IcpError, IcpParams, icp_align
from .marker import (
    MarkerError,
    MarkerObservation,
    ScaleEstimate,
    estimate_scale,
    load_marker_file,
    parse_marker_file,
)
from .robot import align_robot, robot_surface_cloud, splat_alignment_cloud
from .sampling import sample_surface_points
from .segment import BACKGROUND_LABEL, segment_links_knn

__all__ = [
    "AlignmentResult",
    "BACKGROUND_LABEL",
    "IcpError",
    "IcpParams",
    "MarkerError",
    "MarkerObservation",
    "ScaleEstimate",
    "align_robot",
    "estimate_scale",
    "icp_align",
    "load_marker_file",
    "parse_marker_file",
    "robot_surface_cloud",
    "sample_surface_points",
    "segment_links_knn",
    "splat_alignment_cloud",
]
