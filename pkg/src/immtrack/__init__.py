"""IMM-based 3D multi-object tracking for maneuvering vehicles with road-context priors."""

from .association import Metric, AssociationParams, cost_matrix, solve_assignment
from .core_types import (
    BoxMeasurement, Gaussian, InvalidArgumentError, NumericalStateError, NumericalWarning,
    OrderingError, Pose2D, TrackingError, ValidationError, iou_3d, wrap_angle,
)
from .evaluation import MotReport, evaluate
from .imm import DEFAULT_MU0, DEFAULT_TPM, ImmState, imm_predict, imm_step, imm_update
from .kalman import MeasurementModel, kl_divergence
from .motion_models import ModelKind, MotionModel, ProcessNoise, make_models
from .pipeline import compare, run_tracker
from .road_context import ContextMap, ContextVector, blend_tpm, context_tpm
from .simulator import Scenario, generate, intersection_scenario
from .track_manager import Tracker, TrackerConfig

__version__ = "0.1.0"
