"""Plain NumPy multilayer perceptron with masks, Adam, and pruning.

Weights are float64 lists shaped (fan_in, fan_out); hidden activations are
ReLU; the head is "linear" or "softmax". ``masks`` marks trainable entries;
masked weights are pinned to zero by backward (zero gradient) and adam_step
(re-zeroed after the update), so pruning is permanent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import STREAM_INIT, child_rng
from .archive import ArchiveBuilder, WeightArchive

LOSSES = ("cross_entropy", "mean_squared_error")
HEADS = ("linear", "softmax")


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "linear"
    masks: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {self.head!r}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if not self.masks:
            self.masks = [np.ones(w.shape, dtype=bool) for w in self.weights]
        if len(self.weights) != len(self.biases) or len(self.weights) != len(self.masks):
            raise ValueError("weights, biases and masks must have equal length")
        for s, (w, b, mask) in enumerate(zip(self.weights, self.biases, self.masks)):
            if b.shape != (w.shape[1],):
                raise ValueError(f"layer {s}: bias shape {b.shape} for weights {w.shape}")
            if mask.shape != w.shape:
                raise ValueError(f"layer {s}: mask shape {mask.shape} for weights {w.shape}")

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def layer_sparsities(self) -> list[float]:
        return [float((~mask).mean()) for mask in self.masks]

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            head=self.head,
            masks=[m.copy() for m in self.masks],
        )


def he_init(widths: list[int], seed: int, head: str = "softmax") -> MlpModel:
    """Gaussian init with variance 2 / fan_in per layer; zero biases."""
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ValueError(f"widths must list at least two positive sizes, got {widths}")
    rng = child_rng(seed, STREAM_INIT)
    weights = [
        rng.normal(0.0, np.sqrt(2.0 / widths[s]), size=(widths[s], widths[s + 1]))
        for s in range(len(widths) - 1)
    ]
    biases = [np.zeros(widths[s + 1]) for s in range(len(widths) - 1)]
    return MlpModel(weights=weights, biases=biases, head=head)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _hidden_pass(model: MlpModel, x: np.ndarray, dropout_masks, dropout_rate):
    """Activations and dropout multipliers for every hidden layer."""
    acts = [np.asarray(x, dtype=np.float64)]
    scales = []
    for s in range(model.n_layers - 1):
        z = acts[-1] @ model.weights[s] + model.biases[s]
        a = np.maximum(z, 0.0)
        if dropout_masks is not None:
            scale = dropout_masks[s] / (1.0 - dropout_rate)  # inverted dropout
            a = a * scale
            scales.append(scale)
        else:
            scales.append(None)
        acts.append(a)
    return acts, scales


def forward(model: MlpModel, x: np.ndarray, dropout_masks=None,
            dropout_rate: float = 0.0) -> list[np.ndarray]:
    """All layer activations: [input, hidden..., output].

    The output is softmax probabilities or raw linear values depending on the
    model head. ``dropout_masks`` (one boolean array per hidden layer) apply
    inverted dropout at rate ``dropout_rate``.
    """
    acts, _ = _hidden_pass(model, x, dropout_masks, dropout_rate)
    z = acts[-1] @ model.weights[-1] + model.biases[-1]
    out = _softmax(z) if model.head == "softmax" else z
    return acts + [out]


def _loss_and_delta(model: MlpModel, out: np.ndarray, y: np.ndarray, loss: str):
    """Loss value and gradient w.r.t. the final pre-activation."""
    n = out.shape[0]
    if loss == "cross_entropy":
        if model.head != "softmax":
            raise ValueError("cross_entropy requires a softmax head")
        y = np.asarray(y, dtype=np.intp)
        value = float(-np.log(np.clip(out[np.arange(n), y], 1e-300, None)).mean())
        delta = out.copy()
        delta[np.arange(n), y] -= 1.0
        return value, delta / n
    if loss == "mean_squared_error":
        if model.head != "linear":
            raise ValueError("mean_squared_error requires a linear head")
        y = np.asarray(y, dtype=np.float64)
        diff = out - y
        value = float((diff**2).mean())
        return value, 2.0 * diff / diff.size
    raise ValueError(f"loss must be one of {LOSSES}, got {loss!r}")


def backward(model: MlpModel, x: np.ndarray, y: np.ndarray, loss: str,
             dropout_masks=None, dropout_rate: float = 0.0):
    """Loss and gradients: (value, [dL/dW per layer], [dL/db per layer]).

    Gradients of masked weights are zeroed, keeping pruned entries frozen.
    """
    acts, scales = _hidden_pass(model, x, dropout_masks, dropout_rate)
    z = acts[-1] @ model.weights[-1] + model.biases[-1]
    out = _softmax(z) if model.head == "softmax" else z
    value, delta = _loss_and_delta(model, out, y, loss)

    grads_w = [np.empty(0)] * model.n_layers
    grads_b = [np.empty(0)] * model.n_layers
    for s in range(model.n_layers - 1, -1, -1):
        grads_w[s] = acts[s].T @ delta
        grads_b[s] = delta.sum(axis=0)
        grads_w[s][~model.masks[s]] = 0.0
        if s > 0:
            da = delta @ model.weights[s].T
            if scales[s - 1] is not None:
                da = da * scales[s - 1]
            delta = da * (acts[s] > 0)
    return value, grads_w, grads_b


@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_model(cls, model: MlpModel) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in model.weights],
            v_w=[np.zeros_like(w) for w in model.weights],
            m_b=[np.zeros_like(b) for b in model.biases],
            v_b=[np.zeros_like(b) for b in model.biases],
        )


def adam_step(model: MlpModel, grads, state: AdamState, lr: float = 0.001,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7) -> MlpModel:
    """One in-place Adam update; masked weights are re-zeroed afterwards."""
    grads_w, grads_b = grads
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for s in range(model.n_layers):
        for value, grad, m, v in (
            (model.weights[s], grads_w[s], state.m_w[s], state.v_w[s]),
            (model.biases[s], grads_b[s], state.m_b[s], state.v_b[s]),
        ):
            m *= beta1
            m += (1 - beta1) * grad
            v *= beta2
            v += (1 - beta2) * grad**2
            value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        model.weights[s][~model.masks[s]] = 0.0
    return model


def apply_pruning(model: MlpModel, target_sparsity: float) -> MlpModel:
    """Mask the smallest-magnitude unmasked weights of each layer.

    Brings every layer's masked fraction up to round(target * size) entries;
    ties broken by flat index order. Already-masked entries never return, so
    a target below the current sparsity is a no-op.
    """
    if not 0.0 <= target_sparsity < 1.0:
        raise ValueError(f"target sparsity must lie in [0, 1), got {target_sparsity}")
    for w, mask in zip(model.weights, model.masks):
        want_masked = int(round(target_sparsity * w.size))
        flat_mask = mask.ravel()
        need = want_masked - int((~flat_mask).sum())
        if need <= 0:
            continue
        candidates = np.flatnonzero(flat_mask)
        order = np.argsort(np.abs(w.ravel()[candidates]), kind="stable")
        chosen = candidates[order[:need]]
        flat_mask[chosen] = False
        w.ravel()[chosen] = 0.0
    return model


def model_to_archive(model: MlpModel) -> WeightArchive:
    """Save as float32; masked entries are stored as the zeros they are."""
    b = ArchiveBuilder()
    for s in range(model.n_layers):
        b.add_dense(
            f"dense_{s}",
            model.weights[s].astype(np.float32),
            bias=model.biases[s].astype(np.float32),
        )
    return b.build()


def model_from_archive(archive: WeightArchive, head: str = "softmax") -> MlpModel:
    """Load a dense archive as a trainable model; all entries unmasked."""
    if not archive.all_dense():
        raise ValueError("only dense archives load as MLP models")
    weights = [archive.layer_weights(i).astype(np.float64) for i in range(len(archive.layers))]
    biases = []
    for i in range(len(archive.layers)):
        bias = archive.layer_bias(i)
        biases.append(np.zeros(archive.layers[i].shape[1]) if bias is None
                      else bias.astype(np.float64))
    return MlpModel(weights=weights, biases=biases, head=head)
