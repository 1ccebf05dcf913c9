"""WiFi-CSI roadside vehicle detection and five-class classification.

The pipeline: trace ingestion -> amplitude low-pass filtering -> per-pair
PCA reduction -> phase sanitization -> scaled-MAD event detection ->
6 x 2500 image formation -> CNN (or kNN baseline) classification ->
evaluation against ground truth.  A seeded synthetic generator provides
labeled traces for testing without capture hardware.
"""

from .classes import CLASS_NAMES, GROUP_SCHEMES, VehicleClass, group_prediction
from .cnn import (
    BlockSpec,
    CnnArchitecture,
    CnnModel,
    CnnVehicleClassifier,
    TrainConfig,
    cnn_forward,
    cnn_train,
    load_model,
    save_model,
)
from .detection import (
    DetectionEvent,
    DetectorParams,
    VehicleDetector,
    detect_outliers,
    extract_events,
    load_events,
    save_events,
    scaled_mad,
)
from .errors import (
    CsiTrafficError,
    DataError,
    FormatError,
    PayloadLengthError,
    PipelineStageError,
    ScenarioError,
    TrainingDivergedError,
    UnsupportedShapeError,
)
from .evaluation import (
    EvalReport,
    Matching,
    PipelineConfig,
    evaluate,
    fuse_max_prob,
    load_report,
    match_events,
    run_pipeline,
    save_report,
)
from .features import (
    FeatureVector,
    KnnBaselineClassifier,
    extract_baseline_features,
    knn_classify,
)
from .images import WINDOW_SIZE, ClassifierImage, form_image
from .preprocessing import (
    FilterSpec,
    LowpassFilter,
    PcaDenoiser,
    PcaResult,
    PhaseSanitizer,
    PreprocessedTrace,
    lowpass_filter,
    pca_denoise,
    preprocess_trace,
    sanitize_phase,
    sanitize_phase_matrix,
)
from .synth import (
    Scenario,
    ScenarioEvent,
    SignatureTemplate,
    default_templates,
    generate_trace,
    load_scenario,
    random_scenario,
    save_scenario,
    vehicle_signature,
)
from .trace import (
    CsiTrace,
    GroundTruthLabel,
    extract_amplitude,
    extract_phase,
    load_labels,
    load_trace,
    save_labels,
    save_trace,
)

__version__ = "0.1.0"
