"""Measurement protocol: dataset ingestion, equivalence verification,
benchmark reports, robustness sweeps, repeatability, and scope profiling.

All reports are bitwise independent of the worker count (timing fields
excepted); every random choice flows from an explicit 64-bit seed through
the splitmix64 generator pinned below, so robustness results reproduce
across runs and languages.
"""

from __future__ import annotations

import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .accel import (
    AccelConfig,
    cycles_to_latency,
    estimate_energy,
    pack_events,
    run_accelerator,
    throughput,
)
from .artifact import DeploymentArtifact
from .builder import EncoderConfig, encode_ttfs
from .errors import ContractError, FormatError, TruncationError
from .events import SpikeEvent
from .reference import run_dense_baseline, run_ttfs_reference

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IMAGE_PIXELS = 784

WTS_MAGIC = b"WTS1"
WTS_DTYPE_F32 = 0

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    images: np.ndarray  # uint8, (N, 784)
    labels: np.ndarray  # int64, (N,)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim == 3:
            self.images = self.images.reshape(len(self.images), -1)
        if self.images.ndim != 2 or self.images.shape[1] != IMAGE_PIXELS:
            raise ContractError(f"images must be (N, {IMAGE_PIXELS})")
        if len(self.images) == 0:
            raise ContractError("dataset is empty")
        if len(self.labels) != len(self.images):
            raise ContractError("image/label counts disagree")
        if int(self.labels.min()) < 0 or int(self.labels.max()) > 9:
            raise ContractError("labels must be digits 0..9")

    def __len__(self):
        return len(self.images)

    def subset(self, n: int) -> "Dataset":
        n = min(n, len(self))
        return Dataset(self.images[:n].copy(), self.labels[:n].copy())


def _read_be32(f, what: str) -> int:
    data = f.read(4)
    if len(data) != 4:
        raise TruncationError(f"stream ended inside {what}")
    return struct.unpack(">I", data)[0]


def load_idx_images(images_path) -> np.ndarray:
    """Parse one IDX image file into a (N, 784) uint8 array."""
    with open(images_path, "rb") as f:
        magic = _read_be32(f, "image magic")
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"image file magic {magic:#010x} != {IDX_IMAGES_MAGIC:#010x}"
            )
        n = _read_be32(f, "image count")
        rows = _read_be32(f, "row count")
        cols = _read_be32(f, "column count")
        if rows * cols != IMAGE_PIXELS:
            raise FormatError(f"expected 28x28 images, file declares {rows}x{cols}")
        payload = f.read(n * rows * cols)
        if len(payload) != n * rows * cols:
            raise TruncationError(
                f"image payload holds {len(payload)} of {n * rows * cols} bytes"
            )
        return np.frombuffer(payload, dtype=np.uint8).reshape(n, rows * cols).copy()


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Load one image/label pair of IDX files (big-endian, standard layout)."""
    images = load_idx_images(images_path)
    n = len(images)

    with open(labels_path, "rb") as f:
        magic = _read_be32(f, "label magic")
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"label file magic {magic:#010x} != {IDX_LABELS_MAGIC:#010x}"
            )
        n_labels = _read_be32(f, "label count")
        payload = f.read(n_labels)
        if len(payload) != n_labels:
            raise TruncationError(
                f"label payload holds {len(payload)} of {n_labels} bytes"
            )
        labels = np.frombuffer(payload, dtype=np.uint8)

    if n_labels != n:
        raise FormatError(f"{n} images but {n_labels} labels")
    if n and int(labels.max()) > 9:
        raise FormatError("label value outside 0..9")
    return Dataset(images, labels.astype(np.int64))


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8).reshape(len(images), 28, 28)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(images), 28, 28))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


# ---------------------------------------------------------------------------
# portable tensor file (trainer -> builder boundary)
# ---------------------------------------------------------------------------


def write_wts(path, array: np.ndarray) -> None:
    """Write a 2-D float32 tensor: 16-byte header + little-endian values."""
    a = np.atleast_2d(np.asarray(array, dtype="<f4"))
    with open(path, "wb") as f:
        f.write(WTS_MAGIC)
        f.write(struct.pack("<III", a.shape[0], a.shape[1], WTS_DTYPE_F32))
        f.write(np.ascontiguousarray(a).tobytes())


def read_wts(path) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) != 16:
            raise TruncationError("tensor file shorter than its header")
        if head[:4] != WTS_MAGIC:
            raise FormatError(f"bad tensor magic {head[:4]!r}")
        rows, cols, dtype = struct.unpack("<III", head[4:])
        if dtype != WTS_DTYPE_F32:
            raise FormatError(f"unsupported tensor dtype tag {dtype}")
        payload = f.read(rows * cols * 4)
        if len(payload) != rows * cols * 4:
            raise TruncationError("tensor payload shorter than declared shape")
        return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


# ---------------------------------------------------------------------------
# seeded generator
# ---------------------------------------------------------------------------


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (next_state, 64-bit output)."""
    state = (state + _GOLDEN) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return state, z ^ (z >> 31)


def derive_seed(base: int, *parts: int) -> int:
    """Fold integer identifiers into a sub-stream seed: xor each part into
    the state, advance once, and continue from the output."""
    state = base & _M64
    for part in parts:
        state ^= part & _M64
        state, out = splitmix64(state)
        state = out
    return state


def spike_drop(events: list[SpikeEvent], p: float, seed: int) -> list[SpikeEvent]:
    """Independently retain each event with probability 1 - p.

    The generator is splitmix64 advanced once per event in the given order;
    an event survives iff (output >> 11) * 2**-53 >= p. Identical
    (events order, p, seed) always yields the identical subset.
    """
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"drop probability {p} outside [0, 1]")
    state = seed & _M64
    kept = []
    for e in events:
        state, z = splitmix64(state)
        if (z >> 11) * 2.0**-53 >= p:
            kept.append(e)
    return kept


# ---------------------------------------------------------------------------
# per-image drivers (top level so worker processes can import them)
# ---------------------------------------------------------------------------


def encode_image(artifact: DeploymentArtifact, image) -> list[SpikeEvent]:
    return encode_ttfs(image, EncoderConfig(artifact.header.time_window))


def _predict_chunk(args):
    artifact, cfg, images, mode, drop_p, seeds = args
    rows = []
    for i, img in enumerate(images):
        events = encode_image(artifact, img)
        if drop_p:
            events = spike_drop(events, drop_p, seeds[i])
        acc = ref = None
        if mode in ("accel", "both"):
            acc = run_accelerator(artifact, pack_events(events), cfg)
        if mode in ("reference", "both"):
            ref = run_ttfs_reference(artifact, events)
        if mode == "both":
            rows.append(
                (acc.label, acc.no_spike, ref.label, ref.no_spike,
                 acc.counters.service_cycles)
            )
        else:
            r = acc or ref
            rows.append((r.label, r.no_spike))
    return rows


def _map_images(artifact, cfg, images, mode, jobs, drop_p=0.0, seeds=None):
    """Run the per-image driver over `images`, optionally across processes.

    Results are ordered by image index regardless of scheduling, so every
    derived report is identical for any worker count.
    """
    n = len(images)
    if seeds is None:
        seeds = [0] * n
    if jobs <= 1 or n < 32:
        return _predict_chunk((artifact, cfg, images, mode, drop_p, seeds))
    bounds = np.linspace(0, n, jobs * 4 + 1, dtype=int)
    tasks = [
        (artifact, cfg, images[a:b], mode, drop_p, seeds[a:b])
        for a, b in zip(bounds[:-1], bounds[1:])
        if b > a
    ]
    rows = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for chunk in pool.map(_predict_chunk, tasks):
            rows.extend(chunk)
    return rows


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class PlatformRow:
    platform: str
    accuracy_pct: float
    latency_us: float | None = None
    throughput_img_s: float | None = None
    energy_nj: float | None = None


@dataclass
class EvalReport:
    accuracy: float  # accelerator-path accuracy, percent
    matches: int  # accelerator/reference prediction agreements
    n: int
    latency_us: float
    throughput_img_s: float
    energy_nj: float
    rows: list[PlatformRow] = field(default_factory=list)

    TABLE_HEADER = "platform,accuracy_pct,latency_us,throughput_img_s,energy_nj"

    def to_csv(self) -> str:
        def cell(v):
            return "NA" if v is None else f"{v:.6g}"

        lines = [self.TABLE_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.platform},{r.accuracy_pct:.4f},{cell(r.latency_us)},"
                f"{cell(r.throughput_img_s)},{cell(r.energy_nj)}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv())


@dataclass
class RobustnessReport:
    drop_ratios: list[float]
    accuracies: list[float]  # percent
    seed: int

    def __post_init__(self):
        if len(self.drop_ratios) != len(self.accuracies):
            raise ContractError("ratio/accuracy lists disagree in length")
        if any(not 0.0 <= r <= 1.0 for r in self.drop_ratios):
            raise ContractError("drop ratio outside [0, 1]")

    def to_csv(self) -> str:
        lines = ["ratio,accuracy_pct"]
        for r, a in zip(self.drop_ratios, self.accuracies):
            lines.append(f"{r:g},{a:.4f}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv())


@dataclass
class ScopeBreakdown:
    """Host-side wall-clock phases, ms per image. Absolute values are
    host-dependent; only the bookkeeping relation between the phase sum and
    the end-to-end figure is contractual."""

    reference_eval: float
    spike_packing: float
    accel_run_plus_orchestration: float
    readback: float
    end_to_end: float

    def phase_sum(self) -> float:
        return (
            self.reference_eval
            + self.spike_packing
            + self.accel_run_plus_orchestration
            + self.readback
        )

    def to_csv(self) -> str:
        lines = ["phase,ms_per_image"]
        for name, v in (
            ("reference_eval", self.reference_eval),
            ("spike_packing", self.spike_packing),
            ("accel_run_plus_orchestration", self.accel_run_plus_orchestration),
            ("readback", self.readback),
            ("end_to_end", self.end_to_end),
        ):
            lines.append(f"{name},{v:.6f}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv())


# ---------------------------------------------------------------------------
# protocol operations
# ---------------------------------------------------------------------------


def verify_equivalence(
    artifact: DeploymentArtifact,
    dataset: Dataset,
    cfg: AccelConfig = AccelConfig(),
    jobs: int = 1,
) -> tuple[int, list[int]]:
    """Compare accelerator and reference predictions image by image.

    Returns (match count, list of mismatched image indices)."""
    rows = _map_images(artifact, cfg, dataset.images, "both", jobs)
    mismatched = [i for i, r in enumerate(rows) if (r[0], r[1]) != (r[2], r[3])]
    return len(rows) - len(mismatched), mismatched


def predictions(
    artifact: DeploymentArtifact,
    dataset: Dataset,
    backend: str,
    cfg: AccelConfig = AccelConfig(),
    jobs: int = 1,
) -> list[tuple[int, bool]]:
    """Per-image (label, no_spike) under one execution backend."""
    if backend in ("accel", "reference"):
        return [
            (int(l), bool(ns))
            for l, ns in _map_images(artifact, cfg, dataset.images, backend, jobs)
        ]
    if backend in ("dense-fp32", "dense-int8"):
        mode = backend.split("-")[1]
        out = []
        for img in dataset.images:
            r = run_dense_baseline(artifact, img, mode)
            out.append((r.label, r.no_spike))
        return out
    raise ContractError(f"unknown backend {backend!r}")


def evaluate(
    artifact: DeploymentArtifact,
    dataset: Dataset,
    cfg: AccelConfig = AccelConfig(),
    jobs: int = 1,
) -> EvalReport:
    """Accuracy via the accelerator path plus dense baseline rows and the
    deployed-constants latency/throughput/energy arithmetic."""
    rows = _map_images(artifact, cfg, dataset.images, "both", jobs)
    acc_labels = np.array([r[0] for r in rows])
    matches = sum(1 for r in rows if (r[0], r[1]) == (r[2], r[3]))
    n = len(dataset)
    accuracy = float((acc_labels == dataset.labels).mean() * 100.0)

    # headline latency arithmetic always uses the deployed constants; the
    # accelerator platform row follows the configured cycle mode
    latency_s = cycles_to_latency(cfg.service_interval_cycles, cfg.clock_hz)
    latency_us = latency_s * 1e6
    tput = throughput(cfg.service_interval_cycles, cfg.clock_hz)
    energy_nj = estimate_energy(latency_s, cfg.dynamic_power_w) * 1e9

    if cfg.cycle_mode == "measured":
        mean_service = float(np.mean([r[4] for r in rows]))
        row_latency_s = cycles_to_latency(mean_service, cfg.clock_hz)
        row_lat_us = row_latency_s * 1e6
        row_tput = cfg.clock_hz / mean_service if mean_service else None
        row_energy = estimate_energy(row_latency_s, cfg.dynamic_power_w) * 1e9
    else:
        row_lat_us, row_tput, row_energy = latency_us, tput, energy_nj

    platform_rows = [
        PlatformRow("fpga_accel_sim", accuracy, row_lat_us, row_tput, row_energy)
    ]
    for mode in ("fp32", "int8"):
        t0 = time.perf_counter()
        labels = np.array(
            [run_dense_baseline(artifact, img, mode).label for img in dataset.images]
        )
        per_image_us = (time.perf_counter() - t0) / n * 1e6
        platform_rows.append(
            PlatformRow(
                f"dense_{mode}",
                float((labels == dataset.labels).mean() * 100.0),
                per_image_us,
                1e6 / per_image_us if per_image_us > 0 else None,
                None,
            )
        )
    return EvalReport(
        accuracy=accuracy,
        matches=matches,
        n=n,
        latency_us=latency_us,
        throughput_img_s=tput,
        energy_nj=energy_nj,
        rows=platform_rows,
    )


def robustness_sweep(
    artifact: DeploymentArtifact,
    dataset: Dataset,
    ratios: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75),
    seed: int = 42,
    cfg: AccelConfig = AccelConfig(),
    jobs: int = 1,
) -> RobustnessReport:
    """Accelerator-path accuracy under increasing input spike drop.

    Per-image drop streams are seeded as derive_seed(seed, image_index), so
    the retained event sets are coupled across ratios (a spike dropped at a
    lower ratio stays dropped at every higher one).
    """
    seeds = [derive_seed(seed, i) for i in range(len(dataset))]
    accuracies = []
    for r in ratios:
        rows = _map_images(
            artifact, cfg, dataset.images, "accel", jobs, drop_p=float(r), seeds=seeds
        )
        labels = np.array([row[0] for row in rows])
        accuracies.append(float((labels == dataset.labels).mean() * 100.0))
    return RobustnessReport(list(ratios), accuracies, seed)


def repeatability(
    artifact: DeploymentArtifact,
    dataset: Dataset,
    runs: int = 5,
    cfg: AccelConfig = AccelConfig(),
    jobs: int = 1,
) -> int:
    """Mismatch count between repeated accelerator runs and the reference,
    summed over all runs x images. Zero is the expected value."""
    ref = _map_images(artifact, cfg, dataset.images, "reference", jobs)
    mismatches = 0
    for _ in range(runs):
        acc = _map_images(artifact, cfg, dataset.images, "accel", jobs)
        mismatches += sum(1 for a, r in zip(acc, ref) if a != r)
    return mismatches


def scope_profile(
    artifact: DeploymentArtifact, dataset: Dataset, cfg: AccelConfig = AccelConfig()
) -> ScopeBreakdown:
    """Wall-clock phase breakdown of the desk workflow, ms per image."""
    t_pack = t_ref = t_accel = t_read = 0.0
    outcomes = []
    t_start = time.perf_counter()
    for img in dataset.images:
        t0 = time.perf_counter()
        events = encode_image(artifact, img)
        packets = pack_events(events)
        t1 = time.perf_counter()
        ref = run_ttfs_reference(artifact, events)
        t2 = time.perf_counter()
        acc = run_accelerator(artifact, packets, cfg)
        t3 = time.perf_counter()
        outcomes.append(
            (acc.label, acc.no_spike, acc.prediction() == ref.prediction())
        )
        t4 = time.perf_counter()
        t_pack += t1 - t0
        t_ref += t2 - t1
        t_accel += t3 - t2
        t_read += t4 - t3
    end_to_end = time.perf_counter() - t_start
    n = len(dataset)
    to_ms = 1e3 / n
    return ScopeBreakdown(
        reference_eval=t_ref * to_ms,
        spike_packing=t_pack * to_ms,
        accel_run_plus_orchestration=t_accel * to_ms,
        readback=t_read * to_ms,
        end_to_end=end_to_end * to_ms,
    )
