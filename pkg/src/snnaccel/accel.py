"""Deterministic event-driven simulator of the accelerator fabric.

The modeled datapath is an event router feeding a 16-group x 128-lane
spiking fabric, a packed connectivity table, a grouped first-spike decoder,
and cycle counters. It consumes the same deployment artifact as the
software reference and must reproduce its predictions exactly.

Wire format (32-bit packet word):

    bits[31:28] group        bits[27:21] lane
    bits[20:8]  time step    bits[7:1]   reserved, zero
    bit[0]      direction    0 = input spike, 1 = output spike

Processing is timestep-major: all packets of one step are routed before any
state advances, so the fabric shares one arithmetic schedule with the
reference (accumulate, leak, threshold). Cycle accounting has two modes:

* "deployed" reports the configured pipeline-fill / service-interval
  constants, reproducing the board-calibrated latency arithmetic;
* "measured" counts simulated cycles under a broadcast model of one cycle
  per occupied time step per active group, plus pipeline fill.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .artifact import DeploymentArtifact, validate_artifact
from .errors import ContractError, PackingError, RoutingError, ValidationError
from .events import SpikeEvent
from .reference import (
    InferenceResult,
    _leak_params,
    _require_executable,
    decode_grouped_ttfs,
)

GROUP_SHIFT = 28
LANE_SHIFT = 21
TIME_SHIFT = 8
LANE_BITS = 7
TIME_BITS = 13
RESERVED_MASK = 0xFE
DIRECTION_OUT = 1


@dataclass(frozen=True)
class AccelConfig:
    num_groups: int = 16
    group_size: int = 128
    pipeline_fill_cycles: int = 12
    service_interval_cycles: int = 11
    clock_hz: int = 80_000_000
    dynamic_power_w: float = 0.2298
    cycle_mode: str = "deployed"  # or "measured"

    def __post_init__(self):
        if self.num_groups * self.group_size != 2_048:
            raise ContractError("fabric must address 2,048 lanes")
        if min(
            self.num_groups,
            self.group_size,
            self.pipeline_fill_cycles,
            self.service_interval_cycles,
            self.clock_hz,
        ) <= 0:
            raise ContractError("all fabric counts must be positive")
        if self.cycle_mode not in ("deployed", "measured"):
            raise ContractError(f"unknown cycle mode {self.cycle_mode!r}")


@dataclass
class CycleCounters:
    first_spike_cycles: int
    service_cycles: int
    total_cycles: int
    events_routed: int


@dataclass
class CoreGroupState:
    """128-lane aggregate of one core group (views into the fabric arrays)."""

    potentials: np.ndarray  # int64
    fired: np.ndarray  # bool
    first_spike: np.ndarray  # int32, -1 while silent


class PacketFields(NamedTuple):
    group: int
    lane: int
    time: int
    direction: int


def pack_packet(group: int, lane: int, time: int, direction: int = 0) -> int:
    if not 0 <= group < 16:
        raise PackingError(f"group {group} outside 4-bit field")
    if not 0 <= lane < 128:
        raise PackingError(f"lane {lane} outside 7-bit field")
    if not 0 <= time < (1 << TIME_BITS):
        raise PackingError(f"time step {time} outside 13-bit field")
    if direction not in (0, 1):
        raise PackingError(f"direction flag must be 0 or 1, got {direction}")
    return (group << GROUP_SHIFT) | (lane << LANE_SHIFT) | (time << TIME_SHIFT) | direction


def unpack_packet(word: int) -> PacketFields:
    if not 0 <= word < (1 << 32):
        raise PackingError(f"packet word {word:#x} is not a 32-bit value")
    if word & RESERVED_MASK:
        raise PackingError(f"reserved bits set in packet {word:#010x}")
    return PacketFields(
        group=(word >> GROUP_SHIFT) & 0xF,
        lane=(word >> LANE_SHIFT) & 0x7F,
        time=(word >> TIME_SHIFT) & 0x1FFF,
        direction=word & 0x1,
    )


def pack_events(events: list[SpikeEvent]) -> list[int]:
    """Pack logical input spikes into wire words, order preserved."""
    out = []
    for e in events:
        if not 0 <= e.neuron < 2_048:
            raise PackingError(f"neuron id {e.neuron} outside the fabric address space")
        out.append(pack_packet(e.neuron >> LANE_BITS, e.neuron & 0x7F, e.time, 0))
    return out


def unpack_events(packets: list[int]) -> list[SpikeEvent]:
    """Inverse of pack_events over the valid field domain."""
    out = []
    for word in packets:
        f = unpack_packet(word)
        out.append(SpikeEvent((f.group << LANE_BITS) | f.lane, f.time))
    return out


def cycles_to_latency(cycles: int, clock_hz: int) -> float:
    """Seconds spent in `cycles` at `clock_hz`."""
    if clock_hz <= 0:
        raise ContractError("clock frequency must be positive")
    if cycles < 0:
        raise ContractError("cycle count must be non-negative")
    return cycles / clock_hz


def throughput(service_cycles: int, clock_hz: int) -> float:
    """Images per second at one image per service interval."""
    if service_cycles <= 0:
        raise ContractError("service interval must be positive")
    return clock_hz / service_cycles


def estimate_energy(latency_s: float, dynamic_power_w: float) -> float:
    """Joules per image: dynamic power times per-image latency."""
    if latency_s < 0 or dynamic_power_w < 0:
        raise ContractError("latency and power must be non-negative")
    return latency_s * dynamic_power_w


class _Fabric:
    """Mutable simulation state for one inference."""

    def __init__(self, artifact: DeploymentArtifact, cfg: AccelConfig):
        h = artifact.header
        lanes = cfg.num_groups * cfg.group_size
        self.cfg = cfg
        self.n_in = h.input_count
        self.total = h.total_neurons
        self.time_window = h.time_window
        self.potentials = np.zeros(lanes, dtype=np.int64)
        self.fired = np.zeros(lanes, dtype=bool)
        self.first_spike = np.full(lanes, -1, dtype=np.int32)
        # thresholded lanes are the mapped non-input neurons
        self.thr = np.full(lanes, np.iinfo(np.int64).max, dtype=np.int64)
        self.thr[self.n_in : self.total] = artifact.thresholds.values.astype(np.int64)
        self.leak_num, self.leak_den = _leak_params(artifact)
        self.leaky = self.leak_num != self.leak_den
        conn = artifact.connectivity
        self.offsets = conn.offsets.astype(np.int64)
        self.counts = conn.counts.astype(np.int64)
        self.targets = conn.targets.astype(np.int64)
        self.syn_weights = conn.weights.astype(np.int64)
        out_groups = np.unique(
            np.arange(self.n_in, self.total) >> LANE_BITS
        )
        self.active_groups = len(out_groups)

    def groups(self) -> list[CoreGroupState]:
        gs = self.cfg.group_size
        return [
            CoreGroupState(
                potentials=self.potentials[g * gs : (g + 1) * gs],
                fired=self.fired[g * gs : (g + 1) * gs],
                first_spike=self.first_spike[g * gs : (g + 1) * gs],
            )
            for g in range(self.cfg.num_groups)
        ]

    def deliver(self, source: int) -> bool:
        """Route one input spike through the connectivity table.

        Returns True when the source has fan-out (the event was routed).
        """
        off, cnt = self.offsets[source], self.counts[source]
        if cnt == 0:
            return False
        tgt = self.targets[off : off + cnt]
        w = self.syn_weights[off : off + cnt]
        live = ~self.fired[tgt]
        self.potentials[tgt[live]] += w[live]
        return True

    def advance(self, t: int) -> np.ndarray:
        """Leak then threshold-check the mapped output lanes at step t.

        Returns the lane ids that fired at this step, ascending (which is
        exactly (group, lane) order).
        """
        lo, hi = self.n_in, self.total
        live = ~self.fired[lo:hi]
        if self.leaky:
            p = self.potentials[lo:hi]
            p[live] = p[live] * self.leak_num // self.leak_den
        newly = live & (self.potentials[lo:hi] >= self.thr[lo:hi])
        ids = np.nonzero(newly)[0] + lo
        if len(ids):
            self.first_spike[ids] = t
            self.fired[ids] = True
        return ids


def _decode_output_stream(
    output_packets: list[int], decode
) -> tuple[list[Optional[int]], list[int]]:
    """Earliest spike time and count-at-earliest per class, consumed from the
    direction-flagged output stream in (time, group, lane) order."""
    times: list[Optional[int]] = [None] * decode.num_classes
    counts = [0] * decode.num_classes
    for word in output_packets:
        f = unpack_packet(word)
        neuron = (f.group << LANE_BITS) | f.lane
        c = decode.class_of(neuron)
        if c is None:
            continue
        if times[c] is None:
            times[c] = f.time
            counts[c] = 1
        elif f.time == times[c]:
            counts[c] += 1
    return times, counts


def run_accelerator(
    artifact: DeploymentArtifact,
    packets: list[int],
    cfg: AccelConfig = AccelConfig(),
) -> InferenceResult:
    """Execute one inference on the simulated fabric.

    Packets must be input-direction words sorted by time step. The returned
    result carries populated cycle counters.
    """
    _require_executable(artifact)
    report = None
    if artifact.header.total_neurons > cfg.num_groups * cfg.group_size:
        report = validate_artifact(artifact, "executable")
        raise ValidationError("; ".join(report.violations) or "artifact exceeds fabric")

    fabric = _Fabric(artifact, cfg)
    T = artifact.header.time_window

    # unpack + validate the stream
    sources, times = [], []
    prev_t = -1
    for word in packets:
        try:
            f = unpack_packet(word)
        except PackingError as exc:
            raise RoutingError(str(exc)) from exc
        if f.direction == DIRECTION_OUT:
            raise RoutingError("output-direction packet in the input stream")
        if f.time >= T:
            raise RoutingError(f"packet time {f.time} outside window [0, {T})")
        if f.time < prev_t:
            raise RoutingError("packets not sorted by time step")
        prev_t = f.time
        src = (f.group << LANE_BITS) | f.lane
        if src >= artifact.header.total_neurons:
            raise RoutingError(f"packet source {src} is not a mapped neuron")
        sources.append(src)
        times.append(f.time)

    by_step: dict[int, list[int]] = {}
    for src, t in zip(sources, times):
        by_step.setdefault(t, []).append(src)

    output_packets: list[int] = []
    events_routed = 0
    steps_processed = 0
    steps_to_first_spike = 0
    leak_catchup = fabric.leaky

    prev = -1
    occupied = sorted(by_step)
    for t_occ in occupied:
        if leak_catchup:
            for t_gap in range(prev + 1, t_occ):
                fired_ids = fabric.advance(t_gap)
                for n in fired_ids:  # unreachable for valid thresholds; kept exact
                    output_packets.append(
                        pack_packet(int(n) >> LANE_BITS, int(n) & 0x7F, t_gap, 1)
                    )
        for src in by_step[t_occ]:
            if fabric.deliver(src):
                events_routed += 1
        fired_ids = fabric.advance(t_occ)
        steps_processed += 1
        if len(output_packets) == 0 and len(fired_ids):
            steps_to_first_spike = steps_processed
        for n in fired_ids:
            output_packets.append(
                pack_packet(int(n) >> LANE_BITS, int(n) & 0x7F, int(t_occ), 1)
            )
        prev = t_occ
    if leak_catchup:
        for t_gap in range(prev + 1, T):
            fabric.advance(t_gap)

    times_c, counts_c = _decode_output_stream(output_packets, artifact.decode)
    label, no_spike = decode_grouped_ttfs(times_c, artifact.decode, counts_c)

    any_spike = bool(output_packets)
    if cfg.cycle_mode == "deployed":
        first_cycles = cfg.pipeline_fill_cycles if any_spike else 0
        service = cfg.service_interval_cycles
    else:
        service = steps_processed * fabric.active_groups
        first_cycles = (
            cfg.pipeline_fill_cycles + steps_to_first_spike * fabric.active_groups
            if any_spike
            else 0
        )
    counters = CycleCounters(
        first_spike_cycles=first_cycles,
        service_cycles=service,
        total_cycles=cfg.pipeline_fill_cycles + service,
        events_routed=events_routed,
    )
    return InferenceResult(
        label=label, class_first_spikes=times_c, no_spike=no_spike, counters=counters
    )


def stream_batch(
    artifact: DeploymentArtifact,
    packet_lists: list[list[int]],
    cfg: AccelConfig = AccelConfig(),
) -> tuple[list[InferenceResult], CycleCounters]:
    """Run a stream of images through one pipeline fill.

    Per-image results are identical to independent runs; the aggregate
    counter charges pipeline fill once and one service interval per image.
    """
    if not packet_lists:
        raise ContractError("stream needs at least one image")
    results = [run_accelerator(artifact, p, cfg) for p in packet_lists]
    service_total = sum(r.counters.service_cycles for r in results)
    aggregate = CycleCounters(
        first_spike_cycles=results[0].counters.first_spike_cycles,
        service_cycles=service_total,
        total_cycles=cfg.pipeline_fill_cycles + service_total,
        events_routed=sum(r.counters.events_routed for r in results),
    )
    return results, aggregate
