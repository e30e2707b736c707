import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnaccel.accel import (
    AccelConfig,
    CycleCounters,
    cycles_to_latency,
    estimate_energy,
    pack_events,
    pack_packet,
    run_accelerator,
    stream_batch,
    throughput,
    unpack_events,
    unpack_packet,
)
from snnaccel.errors import ContractError, PackingError, RoutingError
from snnaccel.events import SpikeEvent
from snnaccel.reference import run_ttfs_reference

from conftest import make_artifact


def test_pack_all_zero_fields():
    assert pack_packet(0, 0, 0, 0) == 0x00000000


def test_pack_bit_layout_example():
    # independent bit arithmetic: (3 << 28) | (5 << 21) | (7 << 8)
    expected = (3 * 2**28) + (5 * 2**21) + (7 * 2**8)
    assert expected == 0x30A00700
    assert pack_packet(3, 5, 7) == expected


def test_pack_time_field_boundary():
    assert unpack_packet(pack_packet(0, 0, 8191)).time == 8191
    with pytest.raises(PackingError):
        pack_packet(0, 0, 8192)
    with pytest.raises(PackingError):
        pack_events([SpikeEvent(0, 8192)])


def test_pack_rejects_out_of_fabric_neuron():
    with pytest.raises(PackingError):
        pack_events([SpikeEvent(2048, 0)])


def test_reserved_bits_rejected():
    with pytest.raises(PackingError):
        unpack_packet(0x00000002)


@settings(max_examples=120, deadline=None)
@given(
    group=st.integers(0, 15),
    lane=st.integers(0, 127),
    time=st.integers(0, 8191),
    direction=st.integers(0, 1),
)
def test_pack_unpack_bijection(group, lane, time, direction):
    f = unpack_packet(pack_packet(group, lane, time, direction))
    assert (f.group, f.lane, f.time, f.direction) == (group, lane, time, direction)


def test_pack_events_round_trip_preserves_order():
    events = [SpikeEvent(5, 0), SpikeEvent(900, 0), SpikeEvent(5, 3)]
    assert unpack_events(pack_events(events)) == events


def test_accel_matches_reference_single_synapse(single_synapse_artifact):
    events = [SpikeEvent(0, 0)]
    ref = run_ttfs_reference(single_synapse_artifact, events)
    acc = run_accelerator(single_synapse_artifact, pack_events(events))
    assert acc.label == ref.label
    assert acc.class_first_spikes == ref.class_first_spikes == [0]
    assert acc.counters.first_spike_cycles == AccelConfig().pipeline_fill_cycles


def test_accel_empty_stream():
    art = make_artifact([[127]], [100])
    r = run_accelerator(art, [])
    assert (r.label, r.no_spike) == (0, True)
    assert r.counters.events_routed == 0


def test_accel_counts_only_routed_events():
    # second input column is all zeros: no fan-out, not routed
    art = make_artifact([[50], [0]], [100], time_window=4)
    packets = pack_events([SpikeEvent(0, 0), SpikeEvent(1, 1)])
    r = run_accelerator(art, packets)
    assert r.counters.events_routed == 1


def test_accel_rejects_output_direction_packet():
    art = make_artifact([[127]], [100])
    with pytest.raises(RoutingError):
        run_accelerator(art, [pack_packet(0, 0, 0, direction=1)])


def test_accel_rejects_unsorted_stream():
    art = make_artifact([[127]], [100])
    packets = [pack_packet(0, 0, 3), pack_packet(0, 0, 0)]
    with pytest.raises(RoutingError):
        run_accelerator(art, packets)


def test_accel_rejects_unmapped_source():
    art = make_artifact([[127]], [100])  # two mapped neurons: ids 0 and 1
    with pytest.raises(RoutingError):
        run_accelerator(art, [pack_packet(0, 5, 0)])


def test_accel_rejects_time_beyond_window():
    art = make_artifact([[127]], [100], time_window=4)
    with pytest.raises(RoutingError):
        run_accelerator(art, [pack_packet(0, 0, 5)])


def test_deployed_counters_and_arithmetic():
    cfg = AccelConfig()
    assert cycles_to_latency(11, cfg.clock_hz) == pytest.approx(0.1375e-6, rel=1e-12)
    assert cycles_to_latency(12, cfg.clock_hz) == pytest.approx(0.15e-6, rel=1e-12)
    assert cycles_to_latency(0, cfg.clock_hz) == 0.0
    assert throughput(11, cfg.clock_hz) == pytest.approx(7.2727272e6, rel=1e-6)
    assert throughput(80_000_000, cfg.clock_hz) == 1.0
    assert throughput(22, cfg.clock_hz) == pytest.approx(3.636363e6, rel=1e-6)
    e = estimate_energy(cycles_to_latency(11, cfg.clock_hz), cfg.dynamic_power_w)
    assert e == pytest.approx(31.6e-9, abs=0.1e-9)
    assert estimate_energy(1.0, 0.0) == 0.0
    assert estimate_energy(2 * 0.5, 0.3) == pytest.approx(2 * estimate_energy(0.5, 0.3))


def test_latency_contract_errors():
    with pytest.raises(ContractError):
        cycles_to_latency(5, 0)
    with pytest.raises(ContractError):
        throughput(0, 80_000_000)
    with pytest.raises(ContractError):
        estimate_energy(-1.0, 0.2)


def test_measured_mode_counters():
    art = make_artifact([[60], [60]], [100], time_window=8)
    events = [SpikeEvent(0, 0), SpikeEvent(1, 2)]  # crosses at t=2
    cfg = AccelConfig(cycle_mode="measured")
    r = run_accelerator(art, pack_events(events), cfg)
    assert r.class_first_spikes == [2]
    # one active group, two occupied steps
    assert r.counters.service_cycles == 2
    assert r.counters.first_spike_cycles == cfg.pipeline_fill_cycles + 2
    assert r.counters.total_cycles == cfg.pipeline_fill_cycles + 2
    assert r.counters.first_spike_cycles >= cfg.pipeline_fill_cycles


def test_stream_batch_single_image():
    art = make_artifact([[127]], [100])
    packets = pack_events([SpikeEvent(0, 0)])
    results, agg = stream_batch(art, [packets])
    assert len(results) == 1
    cfg = AccelConfig()
    assert agg.total_cycles == cfg.pipeline_fill_cycles + cfg.service_interval_cycles


def test_stream_batch_second_image_adds_one_service_interval():
    art = make_artifact([[127]], [100])
    packets = pack_events([SpikeEvent(0, 0)])
    _, agg1 = stream_batch(art, [packets])
    results, agg2 = stream_batch(art, [packets, list(packets)])
    assert agg2.total_cycles - agg1.total_cycles == AccelConfig().service_interval_cycles
    assert results[0].label == results[1].label
    # per-image results identical to independent runs
    solo = run_accelerator(art, packets)
    assert results[0].class_first_spikes == solo.class_first_spikes


def test_stream_batch_labels_match_reference():
    rng = np.random.default_rng(21)
    art = make_artifact(
        rng.integers(-30, 70, size=(10, 6)).astype(np.int8),
        rng.integers(1, 200, size=6),
        num_classes=3,
        time_window=12,
    )
    packet_lists, refs = [], []
    for i in range(5):
        events = sorted(
            {SpikeEvent(int(rng.integers(0, 10)), int(rng.integers(0, 12))) for _ in range(8)},
            key=lambda e: (e.time, e.neuron),
        )
        packet_lists.append(pack_events(events))
        refs.append(run_ttfs_reference(art, events))
    results, _ = stream_batch(art, packet_lists)
    for got, want in zip(results, refs):
        assert (got.label, got.no_spike) == (want.label, want.no_spike)
        assert got.class_first_spikes == want.class_first_spikes


def test_config_invariants():
    with pytest.raises(ContractError):
        AccelConfig(num_groups=8)  # 8 * 128 != 2048
    with pytest.raises(ContractError):
        AccelConfig(cycle_mode="exotic")
    cfg = AccelConfig(num_groups=32, group_size=64)
    assert cfg.num_groups * cfg.group_size == 2048


def test_core_group_state_views():
    from snnaccel.accel import _Fabric

    art = make_artifact(np.full((890, 100), 1, dtype=np.int8), [50] * 100, num_classes=10,
                        time_window=4)
    fabric = _Fabric(art, AccelConfig())
    groups = fabric.groups()
    assert len(groups) == 16
    assert all(g.potentials.shape == (128,) for g in groups)
    # output ids 890..989 straddle the group 6 / group 7 boundary at 896
    assert fabric.active_groups == 2
