"""Track-driven motion compensation for dynamic 3D Gaussian scenes.

Given first-frame 3D Gaussians and dense per-view pixel tracks, compute
updated positions, rotations, and scales for subsequent frames via weighted
least-squares affine motion, multi-view triangulation, and neighbor-based
regularization.
"""

from .config import Config, load_config
from .core import (AffineMotion, CameraView, Gaussian2D, Gaussian3D, Sym3,
                   apply_affine, covariance3d, project_gaussian, project_point,
                   projection_jacobian)
from .motion2d import (MotionAccumulator, Status, TrackField, ViewMotion,
                       accumulate, solve_all_views, solve_motion)
from .multiview import (MotionUpdate, ViewObservation, decompose_covariance,
                        solve_covariance3d, triangulate_mean, update_gaussian)
from .pipeline import (Clip, FrameResult, compensate_frame, evaluate,
                       run_pipeline, segment_clips)
from .regularize import (NeighborIndex, StaticStats, build_knn, detect_static,
                         median_filter, propagate)
from .scene import SceneSequence, generate_scene, oracle_track
from .splat import PixelContribution, WeightMap, invert_2x2, rasterize_weights

__version__ = "0.1.0"
