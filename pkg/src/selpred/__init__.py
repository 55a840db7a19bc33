"""Selective-prediction evaluation toolkit.

Risk scores (sequence NLL, semantic entropy, SE probe, PC probe), score
combination, risk-targeted threshold calibration, and deployment-facing
metrics (AUROC, AUPRC, E-AURC, TCE) over model-agnostic per-example record
files.
"""

from .combiner import CombinedScorer, combined_risk, train_combiner
from .entropy import (
    ClusterAssignment,
    EntropyScore,
    binarize_se_targets,
    cluster_by_entailment,
    record_semantic_entropy,
    semantic_entropy,
    sequence_nll,
)
from .metrics import (
    MetricReport,
    RcCurve,
    auprc,
    auroc,
    bootstrap,
    rc_curve,
    spearman,
    tce,
)
from .policy import SelectivePolicy, apply_policy, calibrate_threshold
from .probes import (
    LayerSelection,
    LinearProbe,
    Standardizer,
    fit_standardizer,
    pc_risk,
    probe_predict,
    select_layer,
    train_probe,
)
from .records import (
    GenerationRecord,
    SplitAssignment,
    ValidationReport,
    load_records,
    split_records,
    validate_records,
    write_records,
)
from .synth import SynthConfig, generate

__all__ = [
    "CombinedScorer",
    "ClusterAssignment",
    "EntropyScore",
    "GenerationRecord",
    "LayerSelection",
    "LinearProbe",
    "MetricReport",
    "RcCurve",
    "SelectivePolicy",
    "SplitAssignment",
    "Standardizer",
    "SynthConfig",
    "ValidationReport",
    "apply_policy",
    "auprc",
    "auroc",
    "binarize_se_targets",
    "bootstrap",
    "calibrate_threshold",
    "cluster_by_entailment",
    "combined_risk",
    "fit_standardizer",
    "generate",
    "load_records",
    "pc_risk",
    "probe_predict",
    "rc_curve",
    "record_semantic_entropy",
    "select_layer",
    "semantic_entropy",
    "sequence_nll",
    "spearman",
    "split_records",
    "tce",
    "train_combiner",
    "train_probe",
    "validate_records",
    "write_records",
]

__version__ = "0.1.0"
