"""Desk-scale Tramba with an analytic backward pass."""

from .config import TrambaConfig, dump_config, load_config, parse_config_text
from .golden import read_golden, write_golden, golden_forward
from .model import StageOutputs, Tramba, forward
from .training import (
    GradcheckReport,
    TrainingDiverged,
    gradcheck,
    gradcheck_fn,
    loss,
    stage_losses,
    synthetic_batch,
    train_toy,
)

__all__ = [
    "TrambaConfig",
    "dump_config",
    "load_config",
    "parse_config_text",
    "StageOutputs",
    "Tramba",
    "forward",
    "GradcheckReport",
    "TrainingDiverged",
    "gradcheck",
    "gradcheck_fn",
    "loss",
    "stage_losses",
    "synthetic_batch",
    "train_toy",
    "read_golden",
    "write_golden",
    "golden_forward",
]
