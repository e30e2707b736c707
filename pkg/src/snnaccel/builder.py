"""Network construction, first-spike input encoding, INT8 export.

The deployable topology is a single linear stage feeding a layer of
fire-once integrate-and-fire neurons read out by class group. Export
quantizes to symmetric INT8, packs non-zero synapses, infers the decode
grouping, and emits a deployment artifact. Export is a pure function:
identical network specifications produce byte-identical artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .artifact import (
    FLAG_ENCODABLE,
    FLAG_EXECUTABLE,
    LAYER_LIF,
    LAYER_LINEAR,
    MAX_EXECUTABLE_NEURONS,
    MAX_TIME_STEPS,
    ArtifactHeader,
    ConnectivityTable,
    DecodeMetadata,
    DeploymentArtifact,
    LayerDescriptor,
    QuantizedWeights,
    ThresholdVector,
    ValidationError,
    validate_artifact,
)
from .errors import ConstructionError, EncodingError, QuantizationError
from .events import SpikeEvent

INT8_MAX = 127


@dataclass
class LayerSpec:
    """One stage: "linear" carries a (out_dim, in_dim) weight matrix in
    training-domain units; "lif" is the spiking activation that follows it."""

    kind: str
    in_dim: int
    out_dim: int
    weights: np.ndarray | None = None


@dataclass
class NeuronConfig:
    threshold: np.ndarray  # positive, training domain, one per output neuron
    leak_num: int = 1
    leak_den: int = 1
    fire_once: bool = True

    def __post_init__(self):
        self.threshold = np.atleast_1d(np.asarray(self.threshold, dtype=np.float64))


@dataclass
class EncoderConfig:
    time_window: int = 64
    intensity_max: int = 255


@dataclass
class NetworkSpec:
    stages: list[LayerSpec]
    neuron_config: NeuronConfig
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    @property
    def in_dim(self) -> int:
        return self.stages[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.stages[-1].out_dim


def build_sequential(
    stages: list[LayerSpec], cfg: NeuronConfig, enc: EncoderConfig | None = None
) -> NetworkSpec:
    """Validate and assemble a network from an ordered stage list.

    The deployable form is exactly one linear stage followed by one lif
    stage; a non-spiking terminal cannot drive the first-spike readout.
    """
    enc = enc or EncoderConfig()
    if not stages:
        raise ConstructionError("network needs at least one stage")
    if stages[-1].kind != "lif":
        raise ConstructionError("first-spike output requires a spiking final stage")
    if len(stages) != 2 or stages[0].kind != "linear":
        raise ConstructionError(
            "supported topology is one linear stage followed by one lif stage"
        )
    lin, lif = stages
    if lin.weights is None:
        raise ConstructionError("linear stage carries no weights")
    w = np.asarray(lin.weights, dtype=np.float64)
    if w.shape != (lin.out_dim, lin.in_dim):
        raise ConstructionError(
            f"weight shape {w.shape} != ({lin.out_dim}, {lin.in_dim})"
        )
    if lif.in_dim != lin.out_dim or lif.out_dim != lin.out_dim:
        raise ConstructionError(
            f"lif stage dims ({lif.in_dim}, {lif.out_dim}) disagree with linear"
            f" output {lin.out_dim}"
        )
    thr = cfg.threshold
    if thr.shape == (1,):
        thr = np.full(lin.out_dim, thr[0])
        cfg = NeuronConfig(thr, cfg.leak_num, cfg.leak_den, cfg.fire_once)
    if cfg.threshold.shape != (lin.out_dim,):
        raise ConstructionError(
            f"threshold vector length {cfg.threshold.shape[0]} != {lin.out_dim} neurons"
        )
    if np.any(cfg.threshold <= 0):
        raise ConstructionError("thresholds must be positive")
    if cfg.leak_den <= 0 or cfg.leak_num > cfg.leak_den or cfg.leak_num < 0:
        raise ConstructionError("leak ratio must lie in [0, 1] with positive denominator")
    if not cfg.fire_once:
        raise ConstructionError("first-spike readout requires fire-once neurons")
    if enc.time_window < 2:
        raise ConstructionError("time window must span at least 2 steps")
    if enc.time_window > MAX_TIME_STEPS:
        raise ConstructionError(f"time window exceeds {MAX_TIME_STEPS} steps")
    return NetworkSpec(stages=[lin, lif], neuron_config=cfg, encoder=enc)


def encode_ttfs(image, enc: EncoderConfig) -> list[SpikeEvent]:
    """First-spike encoding of an intensity vector.

    Pixel p > 0 spikes once at step floor((255 - p) * T / 256); pixel 0 stays
    silent. Brighter pixels therefore spike no later than darker ones, and
    every event lands inside [0, T). Events are returned in canonical
    (time, neuron) order.
    """
    px = np.asarray(image)
    if px.ndim != 1:
        raise EncodingError(f"expected a flat intensity vector, got shape {px.shape}")
    if np.any(px != np.floor(px)):
        raise EncodingError("intensities must be integral")
    px = px.astype(np.int64)
    if px.size and (int(px.min()) < 0 or int(px.max()) > enc.intensity_max):
        raise EncodingError(f"intensity outside [0, {enc.intensity_max}]")
    T = enc.time_window
    active = np.nonzero(px > 0)[0]
    times = (255 - px[active]) * T // 256
    order = np.lexsort((active, times))
    return [SpikeEvent(int(active[i]), int(times[i])) for i in order]


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(net: NetworkSpec) -> tuple[QuantizedWeights, ThresholdVector]:
    """Symmetric per-layer INT8 quantization of weights and thresholds.

    scale = max|w| / 127 (1 for an all-zero layer); integer weight is
    round(w / scale) clamped to [-127, 127] and integer threshold is
    round(threshold / scale), floored at 1 so a positive real threshold
    never degrades to "fire on zero potential". Rounding is
    half-away-from-zero.
    """
    lin = net.stages[0]
    w = np.asarray(lin.weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise QuantizationError("non-finite weight")
    if not np.all(np.isfinite(net.neuron_config.threshold)):
        raise QuantizationError("non-finite threshold")
    maxabs = float(np.abs(w).max()) if w.size else 0.0
    if maxabs == 0.0:
        scale = 1.0
        q = np.zeros_like(w, dtype=np.int8)
    else:
        scale = maxabs / INT8_MAX
        q = np.clip(_round_half_away(w * INT8_MAX / maxabs), -INT8_MAX, INT8_MAX)
        q = q.astype(np.int8)
    thr_real = net.neuron_config.threshold
    thr = _round_half_away(thr_real * (INT8_MAX / maxabs if maxabs else 1.0))
    if np.any(thr > np.iinfo(np.int32).max):
        raise QuantizationError("threshold exceeds the 32-bit accumulator domain")
    thr = np.maximum(thr, 1).astype(np.int32)
    # source-major dense block: rows are inputs, columns are target neurons
    qw = QuantizedWeights(q.T.copy(), scale, lin.in_dim, lin.out_dim)
    return qw, ThresholdVector(thr)


def export(
    net: NetworkSpec, num_classes: int = 10, clock_hz: int = 80_000_000
) -> DeploymentArtifact:
    """Produce the deployment artifact for `net`.

    Output neurons are assigned to classes contiguously with group size
    out_dim / num_classes. Packed connectivity carries only non-zero
    synapses; the dense block and the packed table encode identical values.
    """
    if num_classes < 1 or net.out_dim % num_classes:
        raise ConstructionError(
            f"{net.out_dim} output neurons do not split into {num_classes} classes"
        )
    qw, thr = quantize(net)
    n_in, n_out = net.in_dim, net.out_dim
    total = n_in + n_out

    offsets = np.zeros(total, dtype=np.uint32)
    counts = np.zeros(total, dtype=np.uint16)
    tgt_parts, wgt_parts = [], []
    running = 0
    q = qw.values  # (n_in, n_out), int8
    for s in range(n_in):
        nz = np.nonzero(q[s])[0]
        offsets[s] = running
        counts[s] = len(nz)
        running += len(nz)
        if len(nz):
            tgt_parts.append((nz + n_in).astype(np.uint16))
            wgt_parts.append(q[s, nz])
    offsets[n_in:] = running
    targets = np.concatenate(tgt_parts) if tgt_parts else np.empty(0, dtype=np.uint16)
    weights = np.concatenate(wgt_parts) if wgt_parts else np.empty(0, dtype=np.int8)

    cfg = net.neuron_config
    flags = FLAG_ENCODABLE
    if total <= MAX_EXECUTABLE_NEURONS and net.encoder.time_window <= MAX_TIME_STEPS:
        flags |= FLAG_EXECUTABLE
    artifact = DeploymentArtifact(
        header=ArtifactHeader(
            input_count=n_in,
            output_count=n_out,
            total_neurons=total,
            time_window=net.encoder.time_window,
            clock_hz=clock_hz,
            flags=flags,
        ),
        layers=[
            LayerDescriptor(LAYER_LINEAR, n_in, n_out),
            LayerDescriptor(
                LAYER_LIF, n_out, n_out, cfg.leak_num, cfg.leak_den, cfg.fire_once
            ),
        ],
        weights=qw,
        thresholds=thr,
        connectivity=ConnectivityTable(offsets, counts, targets, weights),
        decode=DecodeMetadata(num_classes, net.out_dim // num_classes, n_in),
    )
    report = validate_artifact(artifact, "encodable")
    if not report.ok:
        raise ValidationError("; ".join(report.violations))
    return artifact
