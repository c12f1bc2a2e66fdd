"""Cluster-level attention-guided parallel decoding for masked diffusion LMs.

Training-free scheduler that commits contiguous high-confidence spans in
parallel while keeping mutually dependent spans apart: threshold
candidates form maximal contiguous clusters, attention from the same
forward pass yields a sparse conflict graph (always a matching), and an
exact maximum-weight independent-set step picks what to commit.  Ships
with a synthetic denoiser with planted ground truth, top-1 and
fixed-threshold baselines, a trace format with replay verification, and
a decode/replay/sweep harness exposed over both a CLI and HTTP.
"""

from .clusters import (
    Cluster,
    ClusterSet,
    StepObservation,
    build_clusters,
    candidate_positions,
)
from .conflict import (
    ConflictGraph,
    ScoreTable,
    build_conflict_graph,
    cluster_pair_score,
    score_table,
    symmetrize_attention,
)
from .decoding import (
    DecisionRecord,
    DecodeResult,
    clad_step,
    decode,
    schedule_clad,
    schedule_threshold,
    schedule_vanilla,
    threshold_step,
    vanilla_step,
)
from .errors import (
    CladError,
    ConfigError,
    ContractViolation,
    GenerationError,
    TraceParseError,
    ValidationError,
)
from .metrics import RunMetrics, metrics_from_result
from .oracle import (
    CoupledPair,
    InstanceSpec,
    OracleParams,
    PlantedInstance,
    SyntheticOracle,
    generate_instance,
    observe,
    preset_instance,
    preset_spec,
    random_spec,
)
from .selection import Selection, select_clusters, update_set
from .state import (
    MASK,
    DecoderConfig,
    SequenceState,
    commit,
    masked_positions,
    new_state,
)
from .trace import (
    StepRecord,
    StepRecordFile,
    TraceHeader,
    TraceOracle,
    read_trace,
    verify_step,
    write_trace,
)

__version__ = "0.1.0"
