"""Continuous-time channel prediction for mmWave massive MIMO.

Library layout:
    ctmath     - dense complex matrix algebra, split activations
    autodiff   - tape-based reverse-mode differentiation engine
    channelsim - geometric time-varying channel simulator and dataset store
    model      - factored complex GRU encoder + neural-ODE decoder + head
    training   - NMSE loss, Adam, batched training loop
    baselines  - discrete predictors (GRU, FC), interpolation, outdated CSI
    evalkit    - per-slot NMSE, ZF precoding, achievable rate, reports
    cli        - 'ctcp' command with generate/train/evaluate/gradcheck/flops
"""

from .autodiff import Tape, backward, finite_diff_check, record, replay
from .channelsim import (Dataset, PathSet, Sample, SystemConfig, desk_config,
                         generate_dataset, load_dataset, save_dataset)
from .evalkit import MethodSpec, SlotReport, evaluate_methods
from .model import (FlopReport, SolverSpec, adjoint_backward, count_flops,
                    default_solver, init_model_params, load_checkpoint,
                    predict, save_checkpoint, vanilla_predict)
from .training import TrainConfig, adam_step, nmse_loss, nmse_value, train

__version__ = "0.1.0"

__all__ = [
    "Tape", "backward", "finite_diff_check", "record", "replay",
    "Dataset", "PathSet", "Sample", "SystemConfig", "desk_config",
    "generate_dataset", "load_dataset", "save_dataset",
    "MethodSpec", "SlotReport", "evaluate_methods",
    "FlopReport", "SolverSpec", "adjoint_backward", "count_flops",
    "default_solver", "init_model_params", "load_checkpoint", "predict",
    "save_checkpoint", "vanilla_predict",
    "TrainConfig", "adam_step", "nmse_loss", "nmse_value", "train",
]
