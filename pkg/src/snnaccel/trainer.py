"""Minimal deterministic trainer for deployable first-spike classifiers.

One-vs-rest logistic regression (full-batch gradient descent, zero init, no
bias) learns one prototype row per class on binarized pixels — the same
representation the spike domain sees, where every active pixel contributes
its full weight by the end of the window. Each prototype is replicated into
`group_size` output neurons with small seeded jitter, and per-neuron firing
thresholds are calibrated as a fixed fraction of the neuron's mean
accumulated potential over its own class's training images.
"""

from __future__ import annotations

import numpy as np

from .builder import EncoderConfig, LayerSpec, NeuronConfig, NetworkSpec, build_sequential
from .errors import TrainingError

ALPHA_DEFAULT = 0.3
LADDER_DEFAULT = 1.0


def _ovr_logistic(
    x: np.ndarray, y: np.ndarray, num_classes: int, epochs: int, lr: float,
    momentum: float, weight_decay: float,
) -> np.ndarray:
    # positives are upweighted to balance the one-vs-rest split; without a
    # bias term this keeps within-class logits positive, which the
    # threshold calibration depends on
    n = len(x)
    targets = np.zeros((n, num_classes), dtype=np.float32)
    targets[np.arange(n), y] = 1.0
    pos_weight = np.float32(max(num_classes - 1, 1))
    w = np.zeros((num_classes, x.shape[1]), dtype=np.float32)
    vel = np.zeros_like(w)
    for _ in range(epochs):
        z = np.clip(x @ w.T, -30.0, 30.0)
        p = 1.0 / (1.0 + np.exp(-z))
        err = (p - targets) * (1.0 + (pos_weight - 1.0) * targets)
        grad = err.T @ x / np.float32(n) + np.float32(weight_decay) * w
        vel = np.float32(momentum) * vel - np.float32(lr) * grad
        w += vel
    return w


def train_linear_ttfs(
    images: np.ndarray,
    labels: np.ndarray,
    out_dim: int = 150,
    num_classes: int = 10,
    time_window: int = 64,
    alpha: float = ALPHA_DEFAULT,
    jitter: float = 0.05,
    threshold_ladder: float = LADDER_DEFAULT,
    seed: int = 42,
    epochs: int = 400,
    lr: float = 0.5,
    momentum: float = 0.9,
    weight_decay: float = 3e-4,
    equalize_drive: bool = True,
) -> NetworkSpec:
    """Train a deployable classifier on (images, labels).

    `alpha` sets firing thresholds at alpha times the mean positive-class
    accumulated potential; with `equalize_drive` the prototype rows are
    rescaled so that mean drive is identical across classes, which makes the
    first-spike race and the dense grouped readout rank classes alike.
    `threshold_ladder` spreads the per-neuron threshold factors of one group
    over alpha * [1 - L/2, 1 + L/2]: the low rungs keep the group firing
    when input spikes are thinned, while the number of rungs crossed at the
    earliest step turns the readout's count tiebreak into a quantized score
    margin. Deterministic for a fixed seed.
    """
    images = np.asarray(images)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0 or len(images) != len(labels):
        raise TrainingError("training set is empty or inconsistently sized")
    if out_dim % num_classes:
        raise TrainingError(f"{out_dim} outputs do not split into {num_classes} groups")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise TrainingError("label outside the declared class range")
    if not 0.0 <= threshold_ladder < 2.0 or alpha <= 0.0:
        raise TrainingError("threshold factors must stay positive")
    present = np.unique(labels)
    if len(present) != num_classes:
        raise TrainingError(
            f"training data covers {len(present)} of {num_classes} classes"
        )

    x = (images > 0).astype(np.float32).reshape(len(images), -1)
    proto = _ovr_logistic(x, labels, num_classes, epochs, lr, momentum, weight_decay)

    # mean binarized positive-class image, per class
    class_mean = np.stack(
        [x[labels == c].mean(axis=0) for c in range(num_classes)]
    )
    drive = np.einsum("cd,cd->c", proto, class_mean)
    if np.any(drive <= 0):
        raise TrainingError("a class prototype has non-positive mean drive")
    if equalize_drive:
        proto = proto * (drive.mean() / drive)[:, None]
        drive = np.full(num_classes, drive.mean(), dtype=drive.dtype)

    group_size = out_dim // num_classes
    rng = np.random.default_rng(seed)
    w = np.empty((out_dim, x.shape[1]), dtype=np.float64)
    for c in range(num_classes):
        row_std = float(proto[c].std()) or 1.0
        for k in range(group_size):
            w[c * group_size + k] = proto[c] + jitter * row_std * rng.standard_normal(
                x.shape[1]
            )

    per_neuron_drive = np.einsum(
        "nd,nd->n", w, np.repeat(class_mean, group_size, axis=0)
    )
    rungs = np.arange(group_size) / max(group_size - 1, 1) - 0.5
    factors = 1.0 + threshold_ladder * np.tile(rungs, num_classes)
    thresholds = alpha * factors * np.maximum(per_neuron_drive, 1e-6)

    return build_sequential(
        [
            LayerSpec("linear", x.shape[1], out_dim, w),
            LayerSpec("lif", out_dim, out_dim),
        ],
        NeuronConfig(threshold=thresholds),
        EncoderConfig(time_window=time_window),
    )
