# ============================================================
# soliton_lab: public API
# ============================================================

__version__ = "0.1.0"

from .geometry import GridAxis, SurfacePatch, SurfaceFlow, SpacetimePoint, extract_parabolic_neighborhood
from .solitons import solve_bowl_profile, tabulate_tip_ratio, CylinderModel
from .rotation import RotationField, check_epsilon_symmetric, alignment_experiment
from .helpers import infer_value, make_rng, DEFAULT_SEED
from .experiments import ExperimentReport, list_experiments, run, run_all
from .io_utils import export_workbook, read_config_file, validate_config_file

__all__ = [
    "GridAxis",
    "SurfacePatch",
    "SurfaceFlow",
    "SpacetimePoint",
    "extract_parabolic_neighborhood",
    "solve_bowl_profile",
    "tabulate_tip_ratio",
    "CylinderModel",
    "RotationField",
    "check_epsilon_symmetric",
    "alignment_experiment",
    "infer_value",
    "make_rng",
    "DEFAULT_SEED",
    "ExperimentReport",
    "list_experiments",
    "run",
    "run_all",
    "export_workbook",
    "read_config_file",
    "validate_config_file",
    "__version__",
]
