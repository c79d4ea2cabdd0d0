"""Retinopathy grading from unrolled fundus images with manifold reductions and a small MLP."""
from ._accel import backend
from .dataset import AugmentationPlan, DesignMatrix, make_folds, standardize_apply, standardize_fit
from .embed import fit_reducer, transform
from .eval import ExperimentConfig, reference_grid, run_experiment
from .model import TrainConfig, predict, train
from .optim import LbfgsConfig, minimize

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan",
    "DesignMatrix",
    "ExperimentConfig",
    "LbfgsConfig",
    "TrainConfig",
    "backend",
    "fit_reducer",
    "make_folds",
    "minimize",
    "reference_grid",
    "predict",
    "run_experiment",
    "standardize_apply",
    "standardize_fit",
    "train",
    "transform",
]
