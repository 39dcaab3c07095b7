"""Target-less LiDAR-camera extrinsic refinement from matched line features."""
from .errors import (BehindCamera, CalibrationError, DegenerateConfiguration,
                     DegenerateEndpoints, InsufficientLines, ProjectionDegenerate,
                     ZeroNormal)
from .geometry import (CameraIntrinsics, ExtrinsicPose, LineSegment2D,
                       PluckerLine3D, back_project_direction, line_projection_matrix,
                       plucker_from_endpoints, pose_error, pose_retract, project_line,
                       skew, transform_line)
from .lm import SolverConfig
from .method1 import CalibrationResult, Correspondence, DegeneracyReport
from .method1 import solve as solve_projection_error
from .method2 import solve_plk_calib

__version__ = "0.1.0"
