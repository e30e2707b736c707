"""Acceptance gate: one test per release criterion, run at its stated
tolerance. Each test prints a PASS line once its assertions hold, so
`pytest -s tests/test_acceptance.py` reads as a checklist."""

import io
import time

import numpy as np
import pytest

from snnaccel.accel import (
    AccelConfig,
    cycles_to_latency,
    estimate_energy,
    pack_events,
    run_accelerator,
    throughput,
)
from snnaccel.artifact import (
    MAX_ENCODABLE_NEURONS,
    MAX_ENCODABLE_SYNAPSES,
    read_artifact,
    serialize_artifact,
    validate_artifact,
)
from snnaccel.builder import EncoderConfig, LayerSpec, NeuronConfig, build_sequential, export
from snnaccel.cli import main as cli_main
from snnaccel.errors import ArtifactError
from snnaccel.events import SpikeEvent
from snnaccel.harness import (
    derive_seed,
    encode_image,
    evaluate,
    repeatability,
    robustness_sweep,
    run_dense_baseline,
    spike_drop,
    verify_equivalence,
)
from snnaccel.reference import run_ttfs_reference

from conftest import make_artifact
from oracle_sim import simulate_bruteforce

JOBS = 4


def _passed(name, detail=""):
    print(f"\nACCEPTANCE {name}: PASS {detail}")


def test_semantics_preservation(corpus, deployed):
    subset = corpus.test.subset(1_000)
    t0 = time.perf_counter()
    matches, mismatched = verify_equivalence(deployed.artifact, subset, jobs=JOBS)
    elapsed = time.perf_counter() - t0
    assert mismatched == [], f"prediction mismatches at indices {mismatched[:10]}"
    assert matches == len(subset)
    n_checked = len(subset)
    projected_full = elapsed * len(corpus.test) / len(subset)
    if projected_full < 120.0:
        matches, mismatched = verify_equivalence(
            deployed.artifact, corpus.test, jobs=JOBS
        )
        assert mismatched == []
        assert matches == len(corpus.test)
        n_checked = len(corpus.test)
    _passed(
        "semantics-preservation",
        f"({n_checked}/{n_checked} accelerator predictions match the reference)",
    )


def test_repeatability(corpus, deployed):
    subset = corpus.test.subset(1_000)
    mismatches = repeatability(deployed.artifact, subset, runs=5, jobs=JOBS)
    assert mismatches == 0
    _passed("repeatability", f"(0 mismatches across {5 * len(subset)} image-run pairs)")


def test_latency_throughput_energy_arithmetic():
    cfg = AccelConfig()
    lat = cycles_to_latency(cfg.service_interval_cycles, cfg.clock_hz)
    assert lat == pytest.approx(0.1375e-6, rel=1e-12)
    tput = throughput(cfg.service_interval_cycles, cfg.clock_hz)
    assert abs(tput - 7.27e6) <= 0.01e6
    energy = estimate_energy(lat, cfg.dynamic_power_w)
    assert abs(energy - 31.6e-9) <= 0.1e-9
    _passed(
        "latency-throughput-energy",
        f"(0.1375 us, {tput/1e6:.4f}M img/s, {energy*1e9:.2f} nJ)",
    )


def test_accuracy_and_dense_spread(corpus, deployed):
    report = evaluate(deployed.artifact, corpus.test, jobs=JOBS)
    assert report.matches == report.n
    assert report.accuracy >= 80.0, f"accelerator accuracy {report.accuracy:.2f}%"
    dense_fp32 = next(r for r in report.rows if r.platform == "dense_fp32")
    spread = abs(dense_fp32.accuracy_pct - report.accuracy)
    assert spread <= 1.5, (
        f"dense fp32 {dense_fp32.accuracy_pct:.2f}% vs first-spike int8"
        f" {report.accuracy:.2f}%: spread {spread:.2f} pp"
    )
    _passed(
        "accuracy",
        f"(ttfs-int8 {report.accuracy:.2f}%, dense-fp32 {dense_fp32.accuracy_pct:.2f}%,"
        f" spread {spread:.2f} pp on {report.n} images, {corpus.source})",
    )


def test_robustness_trend(corpus, deployed):
    subset = corpus.test.subset(1_000)
    ratios = (0.0, 0.25, 0.5, 0.75)
    t0 = time.perf_counter()
    curves = [
        robustness_sweep(deployed.artifact, subset, ratios, seed=s, jobs=JOBS).accuracies
        for s in (42, 43, 44)
    ]
    elapsed = time.perf_counter() - t0
    median = np.median(np.array(curves), axis=0)
    assert all(a >= b - 1e-9 for a, b in zip(median, median[1:])), (
        f"median accuracies not monotone: {median}"
    )
    deg25 = median[0] - median[1]
    deg75 = median[0] - median[3]
    assert deg25 <= 5.0, f"degradation at 25% drop is {deg25:.2f} pp"
    assert deg75 >= 10.0, f"degradation at 75% drop is only {deg75:.2f} pp"
    assert elapsed < 300.0, f"sweep took {elapsed:.0f}s"
    _passed(
        "robustness-trend",
        "(median curve "
        + " -> ".join(f"{a:.2f}" for a in median)
        + f", deg25 {deg25:.2f} pp, deg75 {deg75:.2f} pp, {elapsed:.0f}s)",
    )


def test_artifact_integrity_property_suite():
    rng = np.random.default_rng(20_240)
    checked_mutations = 0
    for case in range(100):
        n_in = int(rng.integers(1, 13))
        n_out = int(rng.integers(1, 9))
        classes = int(rng.choice([c for c in range(1, n_out + 1) if n_out % c == 0]))
        dense = rng.integers(-127, 128, size=(n_in, n_out)).astype(np.int8)
        dense[rng.random(size=dense.shape) < 0.3] = 0
        art = make_artifact(
            dense,
            rng.integers(1, 500, size=n_out),
            time_window=int(rng.integers(1, 65)),
            num_classes=classes,
        )
        blob = serialize_artifact(art)
        again = read_artifact(blob)
        assert again == art
        assert serialize_artifact(again) == blob
        if case < 20:  # sampled single-byte corruption positions
            for pos in rng.integers(0, len(blob), size=15):
                bad = bytearray(blob)
                bad[pos] ^= 1 << int(rng.integers(0, 8))
                with pytest.raises(ArtifactError):
                    read_artifact(bytes(bad))
                checked_mutations += 1

    # capacity gates, exact on both sides
    at_exec = make_artifact(np.ones((2040, 8), dtype=np.int8), [1] * 8, num_classes=2)
    over_exec = make_artifact(np.ones((2041, 8), dtype=np.int8), [1] * 8, num_classes=2)
    assert validate_artifact(at_exec, "executable").ok
    assert not validate_artifact(over_exec, "executable").ok
    assert validate_artifact(over_exec, "encodable").ok

    n_out = 10
    at_enc = make_artifact(
        np.ones((MAX_ENCODABLE_NEURONS - n_out, n_out), dtype=np.int8),
        [1] * n_out,
        num_classes=2,
    )
    over_enc = make_artifact(
        np.ones((MAX_ENCODABLE_NEURONS + 1 - n_out, n_out), dtype=np.int8),
        [1] * n_out,
        num_classes=2,
    )
    assert validate_artifact(at_enc, "encodable").ok
    assert not validate_artifact(over_enc, "encodable").ok

    n_in, n_out = 3328, 256
    dense = np.zeros((n_in, n_out), dtype=np.int8)
    dense.reshape(-1)[:MAX_ENCODABLE_SYNAPSES] = 1
    at_syn = make_artifact(dense, [1] * n_out, num_classes=2)
    dense2 = dense.copy()
    dense2.reshape(-1)[MAX_ENCODABLE_SYNAPSES] = 1
    over_syn = make_artifact(dense2, [1] * n_out, num_classes=2)
    assert at_syn.connectivity.synapse_count == MAX_ENCODABLE_SYNAPSES
    assert validate_artifact(at_syn, "encodable").ok
    assert not validate_artifact(over_syn, "encodable").ok
    assert not validate_artifact(over_syn, "executable").ok

    _passed(
        "artifact-integrity",
        f"(100 round trips, {checked_mutations} mutations detected, capacity gates"
        " exact at 2048/4890/843776)",
    )


def test_determinism_under_parallelism(deployed, tmp_path):
    outputs = {}
    for jobs in (1, JOBS):
        rob = tmp_path / f"rob{jobs}.csv"
        preds = tmp_path / f"preds{jobs}.csv"
        rc = cli_main(
            ["robustness", "--artifact", str(deployed.path),
             "--images", str(deployed.test_images_path),
             "--labels", str(deployed.test_labels_path),
             "--limit", "300", "--ratios", "0,0.25,0.5", "--jobs", str(jobs),
             "--out", str(rob)]
        )
        assert rc == 0
        rc = cli_main(
            ["run", "--artifact", str(deployed.path),
             "--images", str(deployed.test_images_path),
             "--limit", "300", "--backend", "accel", "--jobs", str(jobs),
             "--out", str(preds)]
        )
        assert rc == 0
        outputs[jobs] = (rob.read_bytes(), preds.read_bytes())
    assert outputs[1] == outputs[JOBS]
    _passed("determinism-under-parallelism", f"(jobs 1 vs {JOBS}: byte-identical reports)")


def test_oracle_equivalence_on_small_instances():
    rng = np.random.default_rng(777)
    cases = 0
    for _ in range(200):
        n_in = int(rng.integers(1, 17))
        n_out = int(rng.integers(1, 9))
        classes = int(rng.choice([c for c in range(1, n_out + 1) if n_out % c == 0]))
        T = int(rng.integers(2, 17))
        leak = (1, 1) if rng.random() < 0.5 else tuple(
            sorted(rng.integers(1, 5, size=2))
        )
        w = rng.normal(size=(n_out, n_in)) * (rng.random(size=(n_out, n_in)) > 0.25)
        thr = rng.uniform(0.05, 1.5, size=n_out) * max(np.abs(w).max(), 0.1)
        net = build_sequential(
            [LayerSpec("linear", n_in, n_out, w), LayerSpec("lif", n_out, n_out)],
            NeuronConfig(threshold=thr, leak_num=int(leak[0]), leak_den=int(leak[1])),
            EncoderConfig(time_window=T),
        )
        art = export(net, num_classes=classes)

        n_events = int(rng.integers(0, 2 * n_in + 1))
        pairs = {
            (int(rng.integers(0, n_in)), int(rng.integers(0, T)))
            for _ in range(n_events)
        }
        events = [SpikeEvent(n, t) for (n, t) in sorted(pairs, key=lambda p: (p[1], p[0]))]

        got = run_accelerator(art, pack_events(events))
        ref = run_ttfs_reference(art, events)
        want_label, want_ns, want_times = simulate_bruteforce(
            n_inputs=art.header.input_count,
            n_outputs=art.header.output_count,
            weights=art.weights.values.astype(int).tolist(),
            thresholds=art.thresholds.values.astype(int).tolist(),
            leak_num=int(leak[0]),
            leak_den=int(leak[1]),
            time_window=T,
            events=[(e.neuron, e.time) for e in events],
            num_classes=art.decode.num_classes,
            group_size=art.decode.group_size,
        )
        assert (got.label, got.no_spike, got.class_first_spikes) == (
            want_label,
            want_ns,
            want_times,
        ), f"accelerator diverges from brute force on case {cases}"
        assert (ref.label, ref.no_spike, ref.class_first_spikes) == (
            want_label,
            want_ns,
            want_times,
        ), f"reference diverges from brute force on case {cases}"
        cases += 1
    _passed("oracle-equivalence", f"({cases} random toy artifacts, 3-way agreement)")
