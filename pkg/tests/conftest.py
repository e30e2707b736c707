import os
from types import SimpleNamespace

import numpy as np
import pytest

from snnaccel.artifact import (
    ArtifactHeader,
    ConnectivityTable,
    DecodeMetadata,
    DeploymentArtifact,
    FLAG_ENCODABLE,
    FLAG_EXECUTABLE,
    LAYER_LIF,
    LAYER_LINEAR,
    LayerDescriptor,
    QuantizedWeights,
    ThresholdVector,
    save_artifact,
)
from snnaccel.builder import EncoderConfig, LayerSpec, NeuronConfig, build_sequential, export
from snnaccel.harness import derive_seed, load_mnist_idx, write_idx_images, write_idx_labels
from snnaccel.synthgen import make_dataset
from snnaccel.trainer import train_linear_ttfs

MNIST_ENV = "SNNACCEL_MNIST_DIR"


def make_artifact(
    dense,
    thresholds,
    time_window=8,
    num_classes=None,
    leak=(1, 1),
    clock_hz=80_000_000,
    flags=None,
    total_neurons=None,
):
    """Build a consistent artifact straight from a dense integer matrix.

    Independent of the builder's export path: packs connectivity by hand so
    artifact-level tests do not depend on model-builder correctness.
    """
    dense = np.asarray(dense, dtype=np.int8)
    n_in, n_out = dense.shape
    total = total_neurons if total_neurons is not None else n_in + n_out
    num_classes = num_classes or 1
    offsets = np.zeros(total, dtype=np.uint32)
    counts = np.zeros(total, dtype=np.uint16)
    targets, weights = [], []
    pos = 0
    for s in range(n_in):
        offsets[s] = pos
        nz = np.nonzero(dense[s])[0]
        targets.append((nz + n_in).astype(np.uint16))
        weights.append(dense[s, nz])
        pos += len(nz)
        counts[s] = len(nz)
    offsets[n_in:] = pos
    targets = np.concatenate(targets) if targets else np.empty(0, dtype=np.uint16)
    weights = np.concatenate(weights) if weights else np.empty(0, dtype=np.int8)
    if flags is None:
        flags = FLAG_ENCODABLE | (FLAG_EXECUTABLE if total <= 2048 else 0)
    return DeploymentArtifact(
        header=ArtifactHeader(
            input_count=n_in,
            output_count=n_out,
            total_neurons=total,
            time_window=time_window,
            clock_hz=clock_hz,
            flags=flags,
        ),
        layers=[
            LayerDescriptor(LAYER_LINEAR, n_in, n_out),
            LayerDescriptor(LAYER_LIF, n_out, n_out, leak[0], leak[1], True),
        ],
        weights=QuantizedWeights(dense, 1.0, n_in, n_out),
        thresholds=ThresholdVector(np.asarray(thresholds, dtype=np.int32)),
        connectivity=ConnectivityTable(offsets, counts, targets, weights),
        decode=DecodeMetadata(num_classes, n_out // num_classes, n_in),
    )


def toy_network(weights, thresholds, time_window=8, leak=(1, 1)):
    w = np.asarray(weights, dtype=np.float64)
    out_dim, in_dim = w.shape
    return build_sequential(
        [LayerSpec("linear", in_dim, out_dim, w), LayerSpec("lif", out_dim, out_dim)],
        NeuronConfig(
            threshold=np.asarray(thresholds, dtype=np.float64),
            leak_num=leak[0],
            leak_den=leak[1],
        ),
        EncoderConfig(time_window=time_window),
    )


@pytest.fixture
def single_synapse_artifact():
    """One input wired to one output with weight 127, threshold 100."""
    return make_artifact([[127]], [100], time_window=8)


@pytest.fixture(scope="session")
def corpus():
    """Train/test datasets: real IDX files when provided, synthetic otherwise."""
    mnist_dir = os.environ.get(MNIST_ENV)
    if mnist_dir:
        def find(*names):
            for n in names:
                p = os.path.join(mnist_dir, n)
                if os.path.exists(p):
                    return p
            raise FileNotFoundError(f"none of {names} under {mnist_dir}")

        train = load_mnist_idx(
            find("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
            find("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
        )
        test = load_mnist_idx(
            find("t10k-images-idx3-ubyte", "test-images-idx3-ubyte"),
            find("t10k-labels-idx1-ubyte", "test-labels-idx1-ubyte"),
        )
        source = "mnist-idx"
    else:
        train = make_dataset(12_000, derive_seed(42, 0xA11CE))
        test = make_dataset(10_000, derive_seed(42, 0xB0B))
        source = "synthetic"
    return SimpleNamespace(train=train, test=test, source=source)


@pytest.fixture(scope="session")
def deployed(corpus, tmp_path_factory):
    """Trained 784-to-150 classifier exported once per session."""
    root = tmp_path_factory.mktemp("deployed")
    net = train_linear_ttfs(corpus.train.images, corpus.train.labels)
    artifact = export(net)
    path = root / "classifier.snna"
    save_artifact(artifact, path)
    test_images = root / "test-images-idx3-ubyte"
    test_labels = root / "test-labels-idx1-ubyte"
    write_idx_images(test_images, corpus.test.images)
    write_idx_labels(test_labels, corpus.test.labels)
    return SimpleNamespace(
        net=net,
        artifact=artifact,
        path=path,
        test_images_path=test_images,
        test_labels_path=test_labels,
    )
