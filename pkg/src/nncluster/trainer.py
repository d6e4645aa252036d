"""Minibatch Adam training loop with magnitude pruning and the spectral penalty.

The loop is deliberately plain NumPy at desk scale. Three optional behaviors
attach to it:

* cubic-schedule magnitude pruning: sparsity ramps from an initial to a final
  value over the pruning phase, moving fast early and flattening out, with
  pruning events every ``frequency`` optimizer steps and a guaranteed event
  on the terminal step;
* the eigenvalue penalty: every ``recompute_every`` steps the hidden units
  are renormalized (function preserving) and the penalty gradient is
  recomputed, then held fixed in between; a near-degenerate eigenvalue is
  logged and skipped for that span instead of crashing the run;
* epoch shuffling can be disabled, which makes every epoch revisit batches
  in the same order.

All randomness (batch order, dropout) derives from the config seed through
dedicated streams, so a run is a pure function of (model, data, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import STREAM_BATCHES, STREAM_DROPOUT, child_rng
from .model import (
    LOSSES,
    AdamState,
    MlpModel,
    adam_step,
    apply_pruning,
    backward,
    forward,
)
from .regularizer import (
    DegenerateEigenvalueError,
    RegularizerConfig,
    eigenvalue_sum,
    normalize_hidden_units,
    regularizer_loss_and_grad,
)

__all__ = [
    "PruneSchedule",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "sparsity_at",
    "train",
]


class TrainingDivergedError(RuntimeError):
    """The loss left the reals; the run cannot continue."""


@dataclass(frozen=True)
class PruneSchedule:
    """Cubic sparsity ramp for gradual magnitude pruning.

    Sparsity follows final + (initial - final) * (1 - progress)^3 over the
    pruning phase, so most weights go early and the last stretch fine-tunes.
    ``frequency`` counts optimizer steps between pruning events.
    """

    initial_sparsity: float = 0.5
    final_sparsity: float = 0.9
    frequency: int = 10

    def __post_init__(self):
        if not 0.0 <= self.initial_sparsity <= self.final_sparsity < 1.0:
            raise ValueError(
                "need 0 <= initial_sparsity <= final_sparsity < 1, got "
                f"{self.initial_sparsity} and {self.final_sparsity}"
            )
        if self.frequency < 1:
            raise ValueError(f"frequency must be >= 1, got {self.frequency}")


def sparsity_at(schedule: PruneSchedule, step: int, begin_step: int,
                end_step: int) -> float:
    """Scheduled sparsity at an optimizer step, clamped outside the ramp."""
    if end_step <= begin_step:
        raise ValueError(
            f"end_step must exceed begin_step, got {begin_step}..{end_step}"
        )
    if step <= begin_step:
        return schedule.initial_sparsity
    if step >= end_step:
        return schedule.final_sparsity
    progress = (step - begin_step) / (end_step - begin_step)
    span = schedule.initial_sparsity - schedule.final_sparsity
    return schedule.final_sparsity + span * (1.0 - progress) ** 3


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "cross_entropy"
    epochs_pre_prune: int = 0
    epochs_prune: int = 0
    batch_size: int = 128
    learning_rate: float = 0.001
    dropout_rate: float = 0.0
    shuffle_each_epoch: bool = True
    seed: int = 0
    prune: PruneSchedule | None = None
    regularizer: RegularizerConfig | None = None

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.epochs_pre_prune < 0 or self.epochs_prune < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.prune is not None and self.epochs_prune < 1:
            raise ValueError("a prune schedule needs epochs_prune >= 1")

    @property
    def total_epochs(self) -> int:
        return self.epochs_pre_prune + self.epochs_prune


@dataclass
class TrainResult:
    model: MlpModel
    metrics: list[dict] = field(default_factory=list)


def _overall_sparsity(model: MlpModel) -> float:
    masked = sum(int((~m).sum()) for m in model.masks)
    total = sum(m.size for m in model.masks)
    return masked / total


def _train_accuracy(model: MlpModel, x: np.ndarray, y: np.ndarray):
    if model.head != "softmax":
        return None
    out = forward(model, x)[-1]
    return float((out.argmax(axis=1) == y).mean())


def _regularizer_refresh(model: MlpModel, config: RegularizerConfig):
    """Renormalize, then the penalty and its gradient; None grads when
    differentiation is refused at an eigenvalue crossing."""
    normalize_hidden_units(model)
    try:
        return regularizer_loss_and_grad(model, config)
    except DegenerateEigenvalueError:
        loss = config.weight * eigenvalue_sum(model, config.eigen_indices)
        return loss, None


def train(model: MlpModel, x: np.ndarray, y: np.ndarray,
          config: TrainConfig) -> TrainResult:
    """Train in place and return the model with per-epoch metrics.

    Metrics entries carry: epoch (1-based), data_loss (mean over batches),
    accuracy (training argmax accuracy, classification only, else None),
    reg_loss (mean penalty over steps, None when disabled), sparsity
    (masked weight fraction at epoch end), degenerate_steps (penalty
    refreshes skipped at eigenvalue crossings).

    Raises :class:`TrainingDivergedError` as soon as the loss is not finite.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.widths[0]:
        raise ValueError(
            f"inputs of shape {x.shape} do not match model input width "
            f"{model.widths[0]}"
        )
    if config.loss == "cross_entropy":
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (x.shape[0],):
            raise ValueError("class labels must be one integer per sample")
    else:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (x.shape[0], model.widths[-1]):
            raise ValueError(
                f"targets of shape {y.shape} do not match model output width "
                f"{model.widths[-1]}"
            )
    n = x.shape[0]
    steps_per_epoch = math.ceil(n / config.batch_size)
    begin_step = config.epochs_pre_prune * steps_per_epoch
    end_step = config.total_epochs * steps_per_epoch

    state = AdamState.for_model(model)
    batch_rng = child_rng(config.seed, STREAM_BATCHES)
    dropout_rng = child_rng(config.seed, STREAM_DROPOUT)

    reg = config.regularizer
    reg_loss_cached = 0.0
    reg_grads_cached = None
    metrics: list[dict] = []
    t = 0
    for epoch in range(1, config.total_epochs + 1):
        order = batch_rng.permutation(n) if config.shuffle_each_epoch else np.arange(n)
        data_loss_sum = 0.0
        reg_loss_sum = 0.0
        degenerate_steps = 0
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            xb, yb = x[idx], y[idx]

            if reg is not None and t % reg.recompute_every == 0:
                reg_loss_cached, reg_grads_cached = _regularizer_refresh(model, reg)
                if reg_grads_cached is None:
                    degenerate_steps += 1

            dropout_masks = None
            if config.dropout_rate > 0.0:
                dropout_masks = [
                    dropout_rng.random((len(idx), width)) >= config.dropout_rate
                    for width in model.widths[1:-1]
                ]
            value, grads_w, grads_b = backward(
                model, xb, yb, config.loss, dropout_masks, config.dropout_rate
            )
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"loss became {value} at step {t + 1} (epoch {epoch})"
                )
            if reg is not None and reg_grads_cached is not None:
                for g, rg in zip(grads_w, reg_grads_cached):
                    g += rg
            adam_step(model, (grads_w, grads_b), state, lr=config.learning_rate)
            t += 1

            if config.prune is not None and t >= begin_step and (
                (t - begin_step) % config.prune.frequency == 0 or t == end_step
            ):
                apply_pruning(
                    model, sparsity_at(config.prune, t, begin_step, end_step)
                )

            data_loss_sum += value
            reg_loss_sum += reg_loss_cached

        metrics.append({
            "epoch": epoch,
            "data_loss": data_loss_sum / steps_per_epoch,
            "accuracy": _train_accuracy(model, x, y),
            "reg_loss": (reg_loss_sum / steps_per_epoch) if reg is not None else None,
            "sparsity": _overall_sparsity(model),
            "degenerate_steps": degenerate_steps,
        })
    return TrainResult(model=model, metrics=metrics)
