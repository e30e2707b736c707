import numpy as np
import pytest

from snnaccel.builder import export
from snnaccel.errors import TrainingError
from snnaccel.harness import encode_image
from snnaccel.reference import run_ttfs_reference
from snnaccel.trainer import train_linear_ttfs


def _separable_toy(n_per_class=80, seed=0):
    """Two classes lighting disjoint pixel blocks: linearly separable."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in (0, 1):
        for _ in range(n_per_class):
            img = np.zeros(784, dtype=np.uint8)
            base = 100 if c == 0 else 500
            idx = base + rng.choice(80, size=30, replace=False)
            img[idx] = rng.integers(180, 256, size=30)
            images.append(img)
            labels.append(c)
    order = rng.permutation(len(images))
    return np.array(images)[order], np.array(labels)[order]


def test_separable_toy_reaches_full_accuracy():
    images, labels = _separable_toy()
    net = train_linear_ttfs(images, labels, out_dim=10, num_classes=2, time_window=16)
    art = export(net, num_classes=2)
    correct = 0
    for img, lab in zip(images, labels):
        r = run_ttfs_reference(art, encode_image(art, img))
        correct += r.label == lab
    assert correct == len(images)


def test_trainer_is_deterministic():
    images, labels = _separable_toy()
    a = train_linear_ttfs(images, labels, out_dim=10, num_classes=2, seed=5)
    b = train_linear_ttfs(images, labels, out_dim=10, num_classes=2, seed=5)
    assert np.array_equal(a.stages[0].weights, b.stages[0].weights)
    assert np.array_equal(a.neuron_config.threshold, b.neuron_config.threshold)
    c = train_linear_ttfs(images, labels, out_dim=10, num_classes=2, seed=6)
    assert not np.array_equal(a.stages[0].weights, c.stages[0].weights)


def test_trainer_rejects_degenerate_data():
    with pytest.raises(TrainingError):
        train_linear_ttfs(np.zeros((0, 784)), np.zeros(0, dtype=int))
    images = np.zeros((5, 784), dtype=np.uint8)
    with pytest.raises(TrainingError):  # single class present, ten declared
        train_linear_ttfs(images, np.zeros(5, dtype=int))
    with pytest.raises(TrainingError):  # outputs do not divide into classes
        train_linear_ttfs(images, np.arange(5) % 3, out_dim=10, num_classes=3)


def test_trainer_thresholds_positive_and_grouped():
    images, labels = _separable_toy()
    net = train_linear_ttfs(images, labels, out_dim=10, num_classes=2)
    assert net.neuron_config.threshold.shape == (10,)
    assert np.all(net.neuron_config.threshold > 0)
    assert net.out_dim == 10
