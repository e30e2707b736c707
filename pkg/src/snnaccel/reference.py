"""Software reference paths for a deployment artifact.

Two independent executions of the same exported parameters live here:

* the first-spike reference — a discrete-time integer simulation over the
  dense weight block, defining the semantics the accelerator simulator must
  reproduce prediction-for-prediction;
* dense grouped-neuron baselines (fp32 / int8) that execute the parameters
  as ordinary matrix kernels with a grouped score readout.

Within a time step the shared arithmetic schedule is: accumulate incoming
integer weights, apply the leak ratio with integer floor division, then
compare against the threshold. A neuron fires at most once; its potential
freezes at the firing step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .artifact import DeploymentArtifact, LAYER_LIF, validate_artifact
from .errors import ContractError, ValidationError
from .events import SpikeEvent

if TYPE_CHECKING:  # pragma: no cover
    from .accel import CycleCounters

ACCUMULATOR_GUARD = 1 << 62  # detect long before the signed 64-bit edge


@dataclass
class NeuronState:
    """Membrane state of one fire-once neuron."""

    potential: int = 0
    fired: bool = False
    first_spike: Optional[int] = None


@dataclass
class InferenceResult:
    label: int
    class_first_spikes: list[Optional[int]]
    no_spike: bool
    counters: "Optional[CycleCounters]" = None

    def prediction(self) -> tuple[int, bool]:
        return self.label, self.no_spike


def _leak_params(artifact: DeploymentArtifact) -> tuple[int, int]:
    for ly in artifact.layers:
        if ly.kind == LAYER_LIF:
            return ly.leak_num, ly.leak_den
    return 1, 1


def _require_executable(artifact: DeploymentArtifact) -> None:
    if not artifact.executable:
        report = validate_artifact(artifact, "executable")
        raise ValidationError(
            "artifact is not executable: " + ("; ".join(report.violations) or "flag unset")
        )


def _check_events(events: list[SpikeEvent], artifact: DeploymentArtifact) -> None:
    T = artifact.header.time_window
    total = artifact.header.total_neurons
    prev = (-1, -1)
    for e in events:
        if not 0 <= e.time < T:
            raise ContractError(f"event time {e.time} outside window [0, {T})")
        if not 0 <= e.neuron < total:
            raise ContractError(f"event names unmapped neuron {e.neuron}")
        if (e.time, e.neuron) < prev:
            raise ContractError("events not in canonical (time, neuron) order")
        prev = (e.time, e.neuron)


def _simulate_dense(
    artifact: DeploymentArtifact, events: list[SpikeEvent]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shared integer dynamics over the dense block: returns the final
    (potential, fired, first_spike) arrays indexed by output neuron."""
    _require_executable(artifact)
    _check_events(events, artifact)
    h = artifact.header
    T, n_in, n_out = h.time_window, h.input_count, h.output_count
    leak_num, leak_den = _leak_params(artifact)
    w = artifact.weights.values.astype(np.int64)  # (n_in, n_out)
    thr = artifact.thresholds.values.astype(np.int64)

    by_step: dict[int, list[int]] = {}
    for e in events:
        if e.neuron < n_in:  # sources without a dense row contribute nothing
            by_step.setdefault(e.time, []).append(e.neuron)

    potential = np.zeros(n_out, dtype=np.int64)
    fired = np.zeros(n_out, dtype=bool)
    first_spike = np.full(n_out, -1, dtype=np.int64)
    leaky = leak_num != leak_den

    for t in range(T):
        live = ~fired
        srcs = by_step.get(t)
        if srcs:
            delta = w[srcs].sum(axis=0)
            potential[live] += delta[live]
            if int(np.abs(potential).max(initial=0)) >= ACCUMULATOR_GUARD:
                raise ArithmeticError("membrane accumulator exceeded 64-bit headroom")
        if leaky:
            potential[live] = potential[live] * leak_num // leak_den
        newly = live & (potential >= thr)
        if newly.any():
            first_spike[newly] = t
            fired |= newly
    return potential, fired, first_spike


def run_ttfs_reference(
    artifact: DeploymentArtifact, events: list[SpikeEvent]
) -> InferenceResult:
    """Integer time-stepped simulation over the dense weight block.

    Deterministic by construction: plain int64 arithmetic stepped over the
    full time window, with overflow detected rather than wrapped.
    """
    _, fired, first_spike = _simulate_dense(artifact, events)
    times, counts = group_first_spikes(first_spike, fired, artifact.decode)
    label, no_spike = decode_grouped_ttfs(times, artifact.decode, counts)
    return InferenceResult(label=label, class_first_spikes=times, no_spike=no_spike)


def neuron_states(
    artifact: DeploymentArtifact, events: list[SpikeEvent]
) -> list[NeuronState]:
    """Final membrane state of every output neuron after one inference."""
    potential, fired, first_spike = _simulate_dense(artifact, events)
    return [
        NeuronState(
            potential=int(potential[j]),
            fired=bool(fired[j]),
            first_spike=int(first_spike[j]) if fired[j] else None,
        )
        for j in range(len(potential))
    ]


def group_first_spikes(
    first_spike: np.ndarray, fired: np.ndarray, decode
) -> tuple[list[Optional[int]], list[int]]:
    """Per-class earliest first-spike time and the number of that class's
    neurons firing at that time. Arrays are indexed by output neuron."""
    times: list[Optional[int]] = []
    counts: list[int] = []
    for c in range(decode.num_classes):
        g = slice(c * decode.group_size, (c + 1) * decode.group_size)
        t_g = first_spike[g][fired[g]]
        if t_g.size:
            earliest = int(t_g.min())
            times.append(earliest)
            counts.append(int((t_g == earliest).sum()))
        else:
            times.append(None)
            counts.append(0)
    return times, counts


def decode_grouped_ttfs(
    class_first_spikes: list[Optional[int]],
    decode,
    spike_counts_at_min: Optional[list[int]] = None,
) -> tuple[int, bool]:
    """Grouped first-spike readout.

    The label is the class with the minimum earliest spike time; a time tie
    goes to the class with more neurons firing at that time, and a remaining
    tie to the lowest class index. With no output spikes anywhere the label
    is 0 and the no-spike flag is set.
    """
    counts = spike_counts_at_min or [0] * decode.num_classes
    ranked = [
        (t, -counts[c], c)
        for c, t in enumerate(class_first_spikes)
        if t is not None
    ]
    if not ranked:
        return 0, True
    return min(ranked)[2], False


def dense_scores(
    artifact: DeploymentArtifact, image, mode: str
) -> tuple[np.ndarray, np.ndarray]:
    """Per-neuron activations and per-class grouped scores for one image.

    fp32 runs dequantized weights on intensities/255 in single precision;
    int8 runs integer weights on raw integer intensities (the readout
    compares scores of one mode only, so the common scale factor is
    irrelevant). The class score is the maximum activation over the class's
    neuron group.
    """
    h = artifact.header
    x = np.asarray(image)
    if x.shape != (h.input_count,):
        raise ContractError(
            f"image shape {x.shape} does not match {h.input_count} inputs"
        )
    w = artifact.weights.values  # (n_in, n_out)
    if mode == "fp32":
        wd = (np.float32(artifact.weights.scale) * w.astype(np.float32)).astype(
            np.float32
        )
        y = (x.astype(np.float32) / np.float32(255.0)) @ wd
    elif mode == "int8":
        y = x.astype(np.int64) @ w.astype(np.int64)
    else:
        raise ContractError(f"unknown dense mode {mode!r}")
    d = artifact.decode
    grouped = y.reshape(d.num_classes, d.group_size)
    return y, grouped.max(axis=1)


def run_dense_baseline(
    artifact: DeploymentArtifact, image, mode: str
) -> InferenceResult:
    """Dense grouped-neuron execution of the exported parameters.

    Label is the argmax of the grouped scores, ties resolved toward the
    lowest class index. Dense results carry no spike timing.
    """
    _, scores = dense_scores(artifact, image, mode)
    label = int(np.argmax(scores))  # first max wins: lowest index on ties
    n_classes = artifact.decode.num_classes
    return InferenceResult(
        label=label, class_first_spikes=[None] * n_classes, no_spike=False
    )
