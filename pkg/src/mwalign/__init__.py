"""Manhattan-World pose normalization for indoor point clouds and meshes."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .geometry import FrameConfig  # noqa: E402
from .geometry_io import (  # noqa: E402
    GeometrySet,
    PointCloud,
    TriangleMesh,
    cloud_to_samples,
    estimate_normals,
    grid_subsample,
    load_geometry,
    mesh_to_samples,
    save_geometry,
    to_samples,
)
from .pipeline import AlignmentConfig, AlignmentResult, apply_rotation, normalize_pose, write_report  # noqa: E402
from .evaluation import EvalConfig, EvalReport, run_evaluation  # noqa: E402
