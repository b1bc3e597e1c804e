"""Ground-plane mapping with a homography: range-error law, synthetic
camera, trapezoid perturbation and two correction methods."""

from .correct_gd import GdConfig, optimize
from .correct_regression import ErrorModel, apply_correction, fit_error_model
from .depth_model import ColumnDepthModel, approx_error, column_model, exact_error
from .evaluate import EvalConfig, EvaluationRecord, run_evaluation
from .geometry import GroundPoint, Homography, PixelPoint, Quad, compute_homography, map_point
from .perturb import PerturbationSpec, TrapezoidVariant, generate_variants
from .simulator import CameraModel, SceneSpec, generate_scene, project, unproject_to_ground

__version__ = "0.1.0"
