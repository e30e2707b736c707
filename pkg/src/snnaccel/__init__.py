"""Single-artifact SNN deployment toolkit.

Define a first-spike classifier, export one deployment artifact, and run it
through two independent runtimes — a dense software reference and an
event-driven accelerator simulator — with prediction-level equivalence
checking, cycle-scoped latency accounting, and robustness harnesses.
"""

from .accel import (
    AccelConfig,
    CoreGroupState,
    CycleCounters,
    PacketFields,
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
from .artifact import (
    ArtifactHeader,
    ConnectivityTable,
    DecodeMetadata,
    DeploymentArtifact,
    LayerDescriptor,
    QuantizedWeights,
    ThresholdVector,
    ValidationReport,
    artifact_digest,
    load_artifact,
    read_artifact,
    save_artifact,
    serialize_artifact,
    validate_artifact,
    write_artifact,
)
from .builder import (
    EncoderConfig,
    LayerSpec,
    NetworkSpec,
    NeuronConfig,
    build_sequential,
    encode_ttfs,
    export,
    quantize,
)
from .events import SpikeEvent
from .harness import (
    Dataset,
    EvalReport,
    RobustnessReport,
    ScopeBreakdown,
    derive_seed,
    evaluate,
    load_mnist_idx,
    read_wts,
    repeatability,
    robustness_sweep,
    scope_profile,
    spike_drop,
    splitmix64,
    verify_equivalence,
    write_wts,
)
from .reference import (
    InferenceResult,
    NeuronState,
    decode_grouped_ttfs,
    neuron_states,
    run_dense_baseline,
    run_ttfs_reference,
)
from .trainer import train_linear_ttfs

__version__ = "0.1.0"
