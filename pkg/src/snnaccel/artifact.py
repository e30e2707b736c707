"""Deployment artifact: in-memory model, binary container, validation, digest.

A deployment artifact is the single bundle every runtime consumes unchanged:
quantized weights, integer thresholds, packed connectivity, and the grouped
first-spike decode metadata. The on-disk container (`.snna`) is a sequence of
little-endian chunks in a fixed canonical order, so the same artifact always
serializes to the same bytes:

    HDRR  header (magic "SNNA", version, counts, time window, clock, flags)
    LAYR  layer descriptors (kind, dims, leak ratio, fire-once flag)
    WGHT  dense int8 weight block, row-major with sources as rows, + scale
    THRS  int32 thresholds, one per non-input mapped neuron
    CONN  per-source descriptors (offset,count) + packed 4-byte synapses
    DECD  class-group decode metadata
    DIGE  SHA-256 over every byte that precedes this chunk

Each chunk is `tag(4 ascii) + length(u32) + payload`. Synapse entries pack as
[target_id:16][weight:8][reserved:8] with target_id = group << 7 | lane.

Two capacity levels gate an artifact. "Encodable" is what the container can
describe: at most 4,890 neurons and 843,776 packed synapses. "Executable" is
what the 16x128 event-processing fabric can address: at most 2,048 neurons.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionError, FormatError, TruncationError, ValidationError

MAGIC = b"SNNA"
VERSION = 1

FLAG_EXECUTABLE = 0x1
FLAG_ENCODABLE = 0x2

MAX_EXECUTABLE_NEURONS = 2_048
MAX_ENCODABLE_NEURONS = 4_890
MAX_ENCODABLE_SYNAPSES = 843_776
MAX_TIME_STEPS = 8_192  # 13-bit time field in the packet wire format

LAYER_LINEAR = 0
LAYER_LIF = 1

CHUNK_ORDER = (b"HDRR", b"LAYR", b"WGHT", b"THRS", b"CONN", b"DECD", b"DIGE")

_HDRR = struct.Struct("<4sHIIIIII")
_LAYER = struct.Struct("<BIIIIB")
_DECD = struct.Struct("<III")


@dataclass(frozen=True)
class ArtifactHeader:
    input_count: int
    output_count: int
    total_neurons: int
    time_window: int
    clock_hz: int = 80_000_000
    flags: int = FLAG_ENCODABLE
    magic: bytes = MAGIC
    version: int = VERSION


@dataclass(frozen=True)
class LayerDescriptor:
    kind: int  # LAYER_LINEAR or LAYER_LIF
    in_dim: int
    out_dim: int
    leak_num: int = 0
    leak_den: int = 0
    fire_once: bool = False


@dataclass
class QuantizedWeights:
    """Dense signed-8-bit block, row-major with sources as rows."""

    values: np.ndarray  # int8, shape (rows, cols)
    scale: float  # training-domain units per integer step
    rows: int
    cols: int

    def __post_init__(self):
        # own the data: immutable after construction regardless of the caller
        self.values = np.array(self.values, dtype=np.int8).reshape(self.rows, self.cols)
        self.scale = float(np.float32(self.scale))  # stored as binary32
        self.values.setflags(write=False)

    def __eq__(self, other):
        return (
            isinstance(other, QuantizedWeights)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.scale == other.scale
            and np.array_equal(self.values, other.values)
        )


@dataclass
class ThresholdVector:
    values: np.ndarray  # int32, one per non-input mapped neuron

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.int32)
        self.values.setflags(write=False)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        return isinstance(other, ThresholdVector) and np.array_equal(
            self.values, other.values
        )


@dataclass
class ConnectivityTable:
    """Per-source descriptor table plus the packed synapse array.

    `offsets[s]:offsets[s]+counts[s]` is source s's slice of the synapse
    arrays. Descriptor slots cover every neuron id declared in the header;
    neurons without fan-out carry count 0.
    """

    offsets: np.ndarray  # uint32, one per neuron id
    counts: np.ndarray  # uint16, one per neuron id
    targets: np.ndarray  # uint16, target_id = group << 7 | lane
    weights: np.ndarray  # int8

    def __post_init__(self):
        self.offsets = np.array(self.offsets, dtype=np.uint32)
        self.counts = np.array(self.counts, dtype=np.uint16)
        self.targets = np.array(self.targets, dtype=np.uint16)
        self.weights = np.array(self.weights, dtype=np.int8)
        for a in (self.offsets, self.counts, self.targets, self.weights):
            a.setflags(write=False)

    @property
    def synapse_count(self) -> int:
        return len(self.targets)

    def source_slice(self, source: int) -> tuple[np.ndarray, np.ndarray]:
        """Targets and weights of one source's fan-out."""
        o = int(self.offsets[source])
        c = int(self.counts[source])
        return self.targets[o : o + c], self.weights[o : o + c]

    def __eq__(self, other):
        return (
            isinstance(other, ConnectivityTable)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True)
class DecodeMetadata:
    """Grouped first-spike readout: class c owns output neurons
    [output_base + c*group_size, output_base + (c+1)*group_size)."""

    num_classes: int
    group_size: int
    output_base: int

    def class_of(self, neuron_id: int) -> int | None:
        off = neuron_id - self.output_base
        if 0 <= off < self.num_classes * self.group_size:
            return off // self.group_size
        return None


@dataclass
class DeploymentArtifact:
    header: ArtifactHeader
    layers: list[LayerDescriptor]
    weights: QuantizedWeights
    thresholds: ThresholdVector
    connectivity: ConnectivityTable
    decode: DecodeMetadata
    digest: bytes = field(default=b"")

    def __post_init__(self):
        body = _serialize_body(self)
        computed = artifact_digest(body)
        if self.digest and self.digest != computed:
            raise CorruptionError(
                "declared digest does not match serialized content"
            )
        self.digest = computed

    def __eq__(self, other):
        if not isinstance(other, DeploymentArtifact):
            return NotImplemented
        return (
            self.header == other.header
            and self.layers == other.layers
            and self.weights == other.weights
            and self.thresholds == other.thresholds
            and self.connectivity == other.connectivity
            and self.decode == other.decode
            and self.digest == other.digest
        )

    @property
    def executable(self) -> bool:
        return bool(self.header.flags & FLAG_EXECUTABLE)


@dataclass
class ValidationReport:
    level: str
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def artifact_digest(data: bytes) -> bytes:
    """SHA-256 of `data`; the integrity digest stored in the DIGE chunk."""
    return hashlib.sha256(data).digest()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<I", len(payload)) + payload


def _serialize_body(a: DeploymentArtifact) -> bytes:
    """All chunks preceding DIGE, in canonical order."""
    h = a.header
    hdr = _HDRR.pack(
        h.magic,
        h.version,
        h.input_count,
        h.output_count,
        h.total_neurons,
        h.time_window,
        h.clock_hz,
        h.flags,
    )

    layr = struct.pack("<H", len(a.layers))
    for ly in a.layers:
        layr += _LAYER.pack(
            ly.kind, ly.in_dim, ly.out_dim, ly.leak_num, ly.leak_den, int(ly.fire_once)
        )

    w = a.weights
    wght = (
        struct.pack("<IIf", w.rows, w.cols, w.scale)
        + np.ascontiguousarray(w.values, dtype=np.int8).tobytes()
    )

    thrs = struct.pack("<I", len(a.thresholds)) + a.thresholds.values.astype(
        "<i4"
    ).tobytes()

    c = a.connectivity
    desc = np.empty(len(c.offsets), dtype=[("off", "<u4"), ("cnt", "<u2")])
    desc["off"] = c.offsets
    desc["cnt"] = c.counts
    syn = np.zeros(
        c.synapse_count, dtype=[("tgt", "<u2"), ("wgt", "i1"), ("rsv", "u1")]
    )
    syn["tgt"] = c.targets
    syn["wgt"] = c.weights
    conn = (
        struct.pack("<I", len(c.offsets))
        + desc.tobytes()
        + struct.pack("<I", c.synapse_count)
        + syn.tobytes()
    )

    decd = _DECD.pack(a.decode.num_classes, a.decode.group_size, a.decode.output_base)

    return b"".join(
        _chunk(tag, payload)
        for tag, payload in zip(
            CHUNK_ORDER[:-1], (hdr, layr, wght, thrs, conn, decd)
        )
    )


def serialize_artifact(artifact: DeploymentArtifact) -> bytes:
    """Complete canonical byte image, DIGE chunk included."""
    body = _serialize_body(artifact)
    return body + _chunk(b"DIGE", artifact_digest(body))


def write_artifact(artifact: DeploymentArtifact, destination) -> int:
    """Serialize `artifact` to the binary sink `destination`.

    The artifact must validate at the encodable level. Returns the number of
    bytes written; the digest chunk is written last, over all preceding bytes.
    """
    report = validate_artifact(artifact, "encodable")
    if not report.ok:
        raise ValidationError("; ".join(report.violations))
    data = serialize_artifact(artifact)
    destination.write(data)
    return len(data)


def save_artifact(artifact: DeploymentArtifact, path) -> int:
    with open(path, "wb") as f:
        return write_artifact(artifact, f)


def _read_exact(stream, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise TruncationError(f"stream ended inside {what} ({len(data)}/{n} bytes)")
    return data


def _read_chunk(stream, expect_tag: bytes) -> bytes:
    head = _read_exact(stream, 8, f"{expect_tag.decode()} chunk header")
    tag, length = head[:4], struct.unpack("<I", head[4:])[0]
    if tag != expect_tag:
        raise FormatError(f"expected {expect_tag.decode()} chunk, found {tag!r}")
    return _read_exact(stream, length, f"{expect_tag.decode()} payload")


def read_artifact(source) -> DeploymentArtifact:
    """Parse one artifact from the binary stream `source`.

    Raises FormatError on bad magic/version/structure, TruncationError on a
    short stream, and CorruptionError when the stored digest does not match
    the bytes actually read.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)

    hashed = hashlib.sha256()

    def read_hashed(tag):
        payload = _read_chunk(source, tag)
        hashed.update(tag + struct.pack("<I", len(payload)) + payload)
        return payload

    hdr_payload = read_hashed(b"HDRR")
    if len(hdr_payload) != _HDRR.size:
        raise FormatError(f"header payload must be {_HDRR.size} bytes")
    magic, version, inp, out, total, tw, clock, flags = _HDRR.unpack(hdr_payload)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    header = ArtifactHeader(
        input_count=inp,
        output_count=out,
        total_neurons=total,
        time_window=tw,
        clock_hz=clock,
        flags=flags,
        magic=magic,
        version=version,
    )

    layr = read_hashed(b"LAYR")
    if len(layr) < 2:
        raise FormatError("layer chunk too short")
    (n_layers,) = struct.unpack_from("<H", layr, 0)
    if len(layr) != 2 + n_layers * _LAYER.size:
        raise FormatError("layer chunk length disagrees with its count")
    layers = []
    for i in range(n_layers):
        kind, in_dim, out_dim, ln, ld, fo = _LAYER.unpack_from(
            layr, 2 + i * _LAYER.size
        )
        layers.append(LayerDescriptor(kind, in_dim, out_dim, ln, ld, bool(fo)))

    wght = read_hashed(b"WGHT")
    if len(wght) < 12:
        raise FormatError("weight chunk too short")
    rows, cols, scale = struct.unpack_from("<IIf", wght, 0)
    if len(wght) != 12 + rows * cols:
        raise FormatError("weight chunk length disagrees with its shape")
    values = np.frombuffer(wght, dtype=np.int8, count=rows * cols, offset=12)
    weights = QuantizedWeights(values.reshape(rows, cols), scale, rows, cols)

    thrs = read_hashed(b"THRS")
    if len(thrs) < 4:
        raise FormatError("threshold chunk too short")
    (n_thr,) = struct.unpack_from("<I", thrs, 0)
    if len(thrs) != 4 + 4 * n_thr:
        raise FormatError("threshold chunk length disagrees with its count")
    thresholds = ThresholdVector(np.frombuffer(thrs, dtype="<i4", count=n_thr, offset=4))

    conn = read_hashed(b"CONN")
    if len(conn) < 4:
        raise FormatError("connectivity chunk too short")
    (n_src,) = struct.unpack_from("<I", conn, 0)
    desc_end = 4 + 6 * n_src
    if len(conn) < desc_end + 4:
        raise FormatError("connectivity chunk shorter than its descriptor table")
    desc = np.frombuffer(
        conn, dtype=[("off", "<u4"), ("cnt", "<u2")], count=n_src, offset=4
    )
    (n_syn,) = struct.unpack_from("<I", conn, desc_end)
    if len(conn) != desc_end + 4 + 4 * n_syn:
        raise FormatError("connectivity chunk length disagrees with its synapse count")
    syn = np.frombuffer(
        conn,
        dtype=[("tgt", "<u2"), ("wgt", "i1"), ("rsv", "u1")],
        count=n_syn,
        offset=desc_end + 4,
    )
    if n_syn and syn["rsv"].any():
        raise FormatError("nonzero reserved byte in synapse entry")
    connectivity = ConnectivityTable(
        desc["off"].copy(), desc["cnt"].copy(), syn["tgt"].copy(), syn["wgt"].copy()
    )

    decd = read_hashed(b"DECD")
    if len(decd) != _DECD.size:
        raise FormatError(f"decode chunk must be {_DECD.size} bytes")
    decode = DecodeMetadata(*_DECD.unpack(decd))

    dige = _read_chunk(source, b"DIGE")
    if len(dige) != 32:
        raise FormatError("digest chunk must hold exactly 32 bytes")
    if dige != hashed.digest():
        raise CorruptionError("stored digest does not match file content")

    return DeploymentArtifact(
        header=header,
        layers=layers,
        weights=weights,
        thresholds=thresholds,
        connectivity=connectivity,
        decode=decode,
        digest=dige,
    )


def load_artifact(path) -> DeploymentArtifact:
    with open(path, "rb") as f:
        return read_artifact(f)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _structural_violations(a: DeploymentArtifact) -> list[str]:
    v = []
    h = a.header
    if h.magic != MAGIC:
        v.append(f"bad magic {h.magic!r}")
    if h.version != VERSION:
        v.append(f"unsupported version {h.version}")
    if h.time_window < 1:
        v.append("time window must be at least 1 step")
    if h.clock_hz <= 0:
        v.append("clock frequency must be positive")
    if h.total_neurons != h.input_count + h.output_count:
        v.append(
            f"total neurons {h.total_neurons} != inputs {h.input_count}"
            f" + outputs {h.output_count}"
        )

    if not a.layers:
        v.append("artifact declares no layers")
    prev_out = h.input_count
    for i, ly in enumerate(a.layers):
        if ly.in_dim != prev_out:
            v.append(f"layer {i} input dim {ly.in_dim} != previous output {prev_out}")
        prev_out = ly.out_dim
        if ly.kind == LAYER_LIF:
            if ly.leak_den <= 0:
                v.append(f"layer {i}: leak denominator must be positive")
            elif ly.leak_num > ly.leak_den:
                v.append(f"layer {i}: leak ratio must not exceed 1")
            if not ly.fire_once:
                v.append(f"layer {i}: first-spike readout requires fire-once neurons")
        elif ly.kind != LAYER_LINEAR:
            v.append(f"layer {i}: unknown kind {ly.kind}")
    if a.layers and a.layers[-1].kind != LAYER_LIF:
        v.append("final layer must be a spiking stage")
    if prev_out != h.output_count:
        v.append(f"layer chain ends at {prev_out} != declared outputs {h.output_count}")

    w = a.weights
    if w.values.shape != (w.rows, w.cols):
        v.append("weight block shape disagrees with its declared dims")
    if (w.rows, w.cols) != (h.input_count, h.output_count):
        v.append(
            f"weight block {w.rows}x{w.cols} does not cover"
            f" {h.input_count}x{h.output_count}"
        )
    if w.values.size and int(w.values.min()) < -127:
        v.append("weight value below -127")
    if w.values.size and not w.values.any():
        pass  # all-zero block: any non-negative scale acceptable
    elif w.scale <= 0:
        v.append("weight scale must be positive")

    if len(a.thresholds) != h.output_count:
        v.append(
            f"threshold count {len(a.thresholds)} != non-input neuron count"
            f" {h.output_count}"
        )
    if len(a.thresholds) and int(a.thresholds.values.min()) <= 0:
        v.append("thresholds must be positive")

    c = a.connectivity
    if len(c.offsets) != len(c.counts):
        v.append("descriptor offset/count arrays disagree in length")
    if len(c.offsets) != h.total_neurons:
        v.append(
            f"descriptor table covers {len(c.offsets)} ids, header declares"
            f" {h.total_neurons}"
        )
    if len(c.targets) != len(c.weights):
        v.append("synapse target/weight arrays disagree in length")
    n_syn = c.synapse_count
    off = c.offsets.astype(np.int64)
    cnt = c.counts.astype(np.int64)
    if np.any(off + cnt > n_syn):
        v.append("descriptor range exceeds synapse array")
    else:
        used = cnt > 0
        if used.any():
            order = np.argsort(off[used], kind="stable")
            so, sc = off[used][order], cnt[used][order]
            if np.any(so[1:] < (so[:-1] + sc[:-1])):
                v.append("descriptor ranges overlap")
    if n_syn and int(c.targets.max()) >= h.total_neurons:
        v.append("synapse target beyond declared neuron count")
    v.extend(_dense_packed_mismatch(a))

    d = a.decode
    if d.num_classes < 1 or d.group_size < 1:
        v.append("decode metadata must declare at least one class and neuron")
    if d.num_classes * d.group_size != h.output_count:
        v.append(
            f"decode covers {d.num_classes * d.group_size} neurons,"
            f" artifact has {h.output_count} outputs"
        )
    if d.output_base != h.input_count:
        v.append("decode groups must start at the first output neuron")

    if h.flags & FLAG_EXECUTABLE:
        v.extend(_executable_violations(a, flag_context=True))
    return v


def _dense_packed_mismatch(a: DeploymentArtifact) -> list[str]:
    """The packed table and the dense block must encode identical values."""
    h = a.header
    c = a.connectivity
    if len(c.offsets) != h.total_neurons or c.offsets.size == 0:
        return []  # shape already reported
    off = c.offsets.astype(np.int64)
    cnt = c.counts.astype(np.int64)
    if np.any(off + cnt > c.synapse_count):
        return []
    dense = np.zeros((h.input_count, h.output_count), dtype=np.int64)
    for s in range(min(len(off), h.input_count)):
        t, w = c.targets[off[s] : off[s] + cnt[s]], c.weights[off[s] : off[s] + cnt[s]]
        col = t.astype(np.int64) - h.input_count
        if np.any(col < 0) or np.any(col >= h.output_count):
            return ["synapse targets a non-output neuron"]
        np.add.at(dense[s], col, w.astype(np.int64))
    if np.any(cnt[h.input_count :] > 0):
        return ["synapse fan-out declared for a non-input source"]
    if a.weights.values.shape == dense.shape and not np.array_equal(
        dense, a.weights.values.astype(np.int64)
    ):
        return ["packed synapses disagree with the dense weight block"]
    return []


def _executable_violations(a: DeploymentArtifact, flag_context=False) -> list[str]:
    where = "executable flag set but " if flag_context else ""
    v = []
    if a.header.total_neurons > MAX_EXECUTABLE_NEURONS:
        v.append(
            f"{where}{a.header.total_neurons} mapped neurons exceed the"
            f" {MAX_EXECUTABLE_NEURONS}-neuron event-processing fabric"
        )
    if a.connectivity.synapse_count and int(
        a.connectivity.targets.max()
    ) >= MAX_EXECUTABLE_NEURONS:
        v.append(f"{where}synapse target outside the fabric address space")
    if a.header.time_window > MAX_TIME_STEPS:
        v.append(
            f"{where}time window {a.header.time_window} exceeds the"
            f" {MAX_TIME_STEPS}-step packet time field"
        )
    return v


def validate_artifact(artifact: DeploymentArtifact, level: str) -> ValidationReport:
    """Diagnose `artifact` against its invariants.

    `level` is "encodable" (container capacity) or "executable" (fabric
    capacity). The report lists every violation; an empty report means the
    artifact is valid at the requested level.
    """
    if level not in ("encodable", "executable"):
        raise ValueError(f"unknown validation level {level!r}")
    v = _structural_violations(artifact)
    if artifact.header.total_neurons > MAX_ENCODABLE_NEURONS:
        v.append(
            f"{artifact.header.total_neurons} neurons exceed the"
            f" {MAX_ENCODABLE_NEURONS}-neuron encodable capacity"
        )
    if artifact.connectivity.synapse_count > MAX_ENCODABLE_SYNAPSES:
        v.append(
            f"{artifact.connectivity.synapse_count} synapses exceed the"
            f" {MAX_ENCODABLE_SYNAPSES}-entry packed budget"
        )
    if level == "executable":
        v.extend(_executable_violations(artifact))
    # flag consistency already covered executable-context issues; dedupe
    seen, out = set(), []
    for item in v:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return ValidationReport(level=level, violations=out)
