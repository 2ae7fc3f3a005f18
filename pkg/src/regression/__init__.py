"""惩罚线性回归：标准化、坐标下降、交叉验证与模型文件。"""

from .artifact import ModelArtifact, build_artifact, predict_file, read_artifact, write_artifact
from .cv import back_transform, cross_validate, fold_complement, test_mse_from_stats, train
from .domain import (
    CvReport,
    FittedModel,
    GridSource,
    PenaltyFamily,
    PenaltySpec,
    SolveControl,
    StdSolution,
    TrainOptions,
)
from .pipeline import PenalizedRegressionPipeline, run_training
from .solver import coordinate_descent, kkt_residual, lambda_grid, lambda_max, ridge_closed_form, solve_path
from .standardize import StandardizedProblem, loss_from_stats, standardize
from .state import FailureStage, TrainState
from . import utils

__all__ = [
    "CvReport",
    "FailureStage",
    "FittedModel",
    "GridSource",
    "ModelArtifact",
    "PenalizedRegressionPipeline",
    "PenaltyFamily",
    "PenaltySpec",
    "SolveControl",
    "StandardizedProblem",
    "StdSolution",
    "TrainOptions",
    "TrainState",
    "back_transform",
    "build_artifact",
    "coordinate_descent",
    "cross_validate",
    "fold_complement",
    "kkt_residual",
    "lambda_grid",
    "lambda_max",
    "loss_from_stats",
    "predict_file",
    "read_artifact",
    "ridge_closed_form",
    "run_training",
    "solve_path",
    "standardize",
    "test_mse_from_stats",
    "train",
    "utils",
    "write_artifact",
]
