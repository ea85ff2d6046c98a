from . import tensor as ops
from .checkpoint import CheckpointError, dump_params, load_params
from .optim import DivergenceError, OptimizerState, TrainControl, adam_step, control_step
from .tensor import NonFiniteError, Tape, Tensor, backward, grad_check

import numpy as np


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str | None = None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(shape, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


__all__ = [
    "ops", "Tensor", "Tape", "backward", "grad_check", "NonFiniteError",
    "DivergenceError", "OptimizerState", "TrainControl", "adam_step", "control_step",
    "CheckpointError", "dump_params", "load_params", "glorot", "zeros",
]
