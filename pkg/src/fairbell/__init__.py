"""Monte Carlo toolkit for fair-sampling tests in two-channel Bell experiments.

Library layout:

* :mod:`fairbell.models` — hidden-variable pair sources and detection models
* :mod:`fairbell.engine` — trial execution and coincidence counting
* :mod:`fairbell.stats` — correlation, rates, CHSH, harmonic analysis
* :mod:`fairbell.protocol` — theta sweeps, verdicts, singlet control
* :mod:`fairbell.config` / :mod:`fairbell.io` / :mod:`fairbell.cli` — config
  documents, tables, command line
"""

from ._version import __version__
from .angles import (
    axis_distance,
    canon_angle,
    canon_angle_array,
    degrees_from_radians,
    radians_from_degrees,
)
from .engine import (
    BLOCK_SIZE,
    CoincidenceCounts,
    EventRecords,
    ExperimentConfig,
    merge_counts,
    run_batch,
    run_events,
    run_trial,
    substream_seed,
)
from .errors import ConfigError, FairbellError, NoDataError, ProtocolError
from .models import (
    DetectionKind,
    DetectionModel,
    Outcome,
    PairCorrelation,
    PairHiddenState,
    SourceKind,
    SourceModel,
    apply_source_polarizers,
    emit_pair,
    measure_photon,
    sample_pair,
)
from .protocol import (
    Classification,
    ControlPoint,
    DEFAULT_THRESHOLDS,
    FairnessVerdict,
    SingletControlReport,
    SweepPlan,
    SweepPoint,
    SweepResult,
    VerdictThresholds,
    classify,
    default_control_grid,
    run_sweep,
    singlet_control,
    uniform_theta_grid,
)
from .stats import (
    CHSH_A,
    CHSH_A_PRIME,
    CHSH_B,
    CHSH_B_PRIME,
    ChshResult,
    CorrelationEstimate,
    HarmonicComponent,
    HarmonicSpectrum,
    binomial_stderr,
    chsh,
    conditional_detected_rate,
    correlation,
    detected_rate,
    harmonic_analysis,
)

__all__ = [
    "__version__",
    "axis_distance",
    "canon_angle",
    "canon_angle_array",
    "degrees_from_radians",
    "radians_from_degrees",
    "BLOCK_SIZE",
    "CoincidenceCounts",
    "EventRecords",
    "ExperimentConfig",
    "merge_counts",
    "run_batch",
    "run_events",
    "run_trial",
    "substream_seed",
    "ConfigError",
    "FairbellError",
    "NoDataError",
    "ProtocolError",
    "DetectionKind",
    "DetectionModel",
    "Outcome",
    "PairCorrelation",
    "PairHiddenState",
    "SourceKind",
    "SourceModel",
    "apply_source_polarizers",
    "emit_pair",
    "measure_photon",
    "sample_pair",
    "Classification",
    "ControlPoint",
    "DEFAULT_THRESHOLDS",
    "FairnessVerdict",
    "SingletControlReport",
    "SweepPlan",
    "SweepPoint",
    "SweepResult",
    "VerdictThresholds",
    "classify",
    "default_control_grid",
    "run_sweep",
    "singlet_control",
    "uniform_theta_grid",
    "CHSH_A",
    "CHSH_A_PRIME",
    "CHSH_B",
    "CHSH_B_PRIME",
    "ChshResult",
    "CorrelationEstimate",
    "HarmonicComponent",
    "HarmonicSpectrum",
    "binomial_stderr",
    "chsh",
    "conditional_detected_rate",
    "correlation",
    "detected_rate",
    "harmonic_analysis",
]
