from .adam import DEFAULT_RATES, AdamOptimizer
from .backward import PARAM_GROUPS, ParamGrads, backward, loss_and_gradients
from .dataset import Dataset, load_dataset, save_dataset
from .densify import GradAccumulator, densify_step, prune_step
from .losses import (l1, photometric_loss, photometric_loss_grad, psnr,
                     regularization_loss, regularization_loss_grad,
                     scale_violations, ssim)
from .train import TrainConfig, TrainResult, train, write_metrics_csv

__all__ = [
    "AdamOptimizer", "DEFAULT_RATES", "ParamGrads", "PARAM_GROUPS",
    "backward", "loss_and_gradients", "Dataset", "load_dataset",
    "save_dataset", "GradAccumulator", "densify_step", "prune_step",
    "photometric_loss", "photometric_loss_grad", "regularization_loss",
    "regularization_loss_grad", "scale_violations", "ssim", "psnr", "l1",
    "TrainConfig", "TrainResult", "train", "write_metrics_csv",
]
