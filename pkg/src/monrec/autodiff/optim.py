"""Adam with decoupled weight decay, plateau LR halving and early stopping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or parameter."""


@dataclass
class OptimizerState:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None],
              state: OptimizerState) -> Sequence[Tensor]:
    """In-place bias-corrected Adam update; ``None`` grads count as zero."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape or m.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay:
            update = update + state.weight_decay * p.data
        p.data -= state.lr * update
    return params


@dataclass
class TrainControl:
    """Plateau scheduler plus early stopping on a higher-is-better metric."""

    lr: float = 1e-3
    factor: float = 2.0
    patience: int = 5
    stop_patience: int = 10
    min_delta: float = 1e-6
    mode: str = "max"
    best: float | None = None
    bad_epochs: int = 0       # since last improvement or LR cut
    stale_epochs: int = 0     # since last improvement

    def improved(self, value: float) -> bool:
        if self.best is None:
            return True
        if self.mode == "max":
            return value > self.best + self.min_delta
        return value < self.best - self.min_delta


def control_step(control: TrainControl, val_metric: float) -> tuple[float, bool]:
    """Feed one epoch's validation metric; returns ``(lr, stop)``."""
    if not np.isfinite(val_metric):
        raise ValueError("validation metric must be finite")
    if control.improved(val_metric):
        control.best = float(val_metric)
        control.bad_epochs = 0
        control.stale_epochs = 0
    else:
        control.bad_epochs += 1
        control.stale_epochs += 1
        if control.bad_epochs >= control.patience:
            control.lr /= control.factor
            control.bad_epochs = 0
    return control.lr, control.stale_epochs >= control.stop_patience
