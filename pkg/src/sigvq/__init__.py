"""On-line signature verification and identification with per-user,
per-section vector-quantization codebooks, an elastic-matching baseline,
and an evaluation harness.

Typical flow: preprocess raw pen trajectories into feature matrices,
train one codebook per signature section per user, score test signatures
by nearest-neighbor quantization distortion, fuse the per-section
distortions, and sweep thresholds for error rates.
"""

from .corpus import (
    CorpusManifest,
    ExperimentProtocol,
    SyntheticSpec,
    Trial,
    UserEntry,
    build_protocol,
    generate_synthetic_corpus,
    import_svc,
    load_corpus_features,
    load_manifest,
    load_model,
    parse_signature_file,
    save_manifest,
    save_model,
    synthesize_signature,
    write_signature_file,
)
from .dtw import (
    DtwConfig,
    TEMPLATE_COMBINERS,
    dtw_distance,
    multi_template_score,
    resolve_epsilon,
)
from .errors import InvalidConfigError, InvalidInputError, ParseError, SigvqError
from .estimators import DtwRecognizer, MultiSectionVqRecognizer, SignatureFeaturizer
from .evaluation import (
    BenchmarkReport,
    DetCurve,
    ExperimentResult,
    ScoreSet,
    SignificanceQuery,
    benchmark_counts,
    build_protocol_for_users,
    eer,
    eer_individual,
    far_frr,
    identify,
    required_test_size,
    resolve_fusion,
    run_dtw_experiment,
    run_experiment,
    score_trials,
    write_det_curve,
    write_score_set,
)
from .fusion import (
    FIXED_STRATEGIES,
    STRATEGIES,
    WEIGHTED_STRATEGIES,
    FusionSpec,
    SectionStats,
    combine,
    compute_weights,
    section_score_table,
    train_section_stats,
)
from .instrument import DistanceCounter
from .signal import (
    FEATURE_SETS,
    FeatureMatrix,
    RawSignature,
    Sample,
    feature_dim,
    preprocess,
    znorm,
)
from .vq import (
    Codebook,
    ModelConfig,
    SectionedModel,
    model_score,
    nner_distortion,
    section_bounds,
    section_scores,
    split_sections,
    train_codebook,
    train_user_model,
)

__version__ = "1.0.0"

__all__ = [
    "BenchmarkReport",
    "Codebook",
    "CorpusManifest",
    "DetCurve",
    "DistanceCounter",
    "DtwConfig",
    "DtwRecognizer",
    "ExperimentProtocol",
    "ExperimentResult",
    "FEATURE_SETS",
    "FIXED_STRATEGIES",
    "FeatureMatrix",
    "FusionSpec",
    "InvalidConfigError",
    "InvalidInputError",
    "ModelConfig",
    "MultiSectionVqRecognizer",
    "ParseError",
    "RawSignature",
    "Sample",
    "ScoreSet",
    "SectionStats",
    "SectionedModel",
    "SignatureFeaturizer",
    "SignificanceQuery",
    "SigvqError",
    "STRATEGIES",
    "SyntheticSpec",
    "TEMPLATE_COMBINERS",
    "Trial",
    "UserEntry",
    "WEIGHTED_STRATEGIES",
    "benchmark_counts",
    "build_protocol",
    "build_protocol_for_users",
    "combine",
    "compute_weights",
    "dtw_distance",
    "eer",
    "eer_individual",
    "far_frr",
    "feature_dim",
    "generate_synthetic_corpus",
    "identify",
    "import_svc",
    "load_corpus_features",
    "load_manifest",
    "load_model",
    "model_score",
    "multi_template_score",
    "nner_distortion",
    "parse_signature_file",
    "preprocess",
    "required_test_size",
    "resolve_epsilon",
    "resolve_fusion",
    "run_dtw_experiment",
    "run_experiment",
    "save_manifest",
    "save_model",
    "score_trials",
    "section_bounds",
    "section_score_table",
    "section_scores",
    "split_sections",
    "synthesize_signature",
    "train_codebook",
    "train_section_stats",
    "train_user_model",
    "write_det_curve",
    "write_score_set",
    "write_signature_file",
    "znorm",
]
