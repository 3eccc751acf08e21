"""classgauge: engagement analytics for virtual-classroom sessions.

The pipeline extracts screen-activity foreground via per-pixel Gaussian
mixtures, detects fixation events where attentive viewers must look at the
shared content, verifies each student's visual, contextual, and cognitive
presence for every event, and rolls the verdicts up into per-segment
engagement scores plus an instructor presentation score — offline over
recorded sessions or live with a server-push score feed.
"""

from .evaluation import (
    ConfusionCounts,
    baseline_continuous_gaze,
    confusion,
    evaluate,
    f_beta,
    load_labels,
    load_predictions,
    npv,
    specificity,
)
from .feed import FeedServer, SchemaViolationError, serve_feed, validate_feed_event
from .fixation import (
    FixationEvent,
    StreamingRunDetector,
    ThresholdSet,
    detect_fixation_events,
    match_student_event,
)
from .foreground import (
    ForegroundMask,
    GmmModel,
    GmmParams,
    foreground_count,
    gmm_init,
    gmm_update_classify,
    median_filter,
)
from .gaze import (
    DegenerateGeometryError,
    InsufficientDataError,
    Pose,
    ProjectionSample,
    TTestResult,
    cognitive_presence,
    gazing_energy,
    horizontal_series,
    project_point,
    refine_pose_lm,
    select_candidate_landmarks,
    solve_pose,
    solve_pose_dlt,
    t_test_equal_mean,
)
from .ingest import (
    DEFAULT_FACE_MODEL,
    CameraIntrinsics,
    FaceFrameRecord,
    Participant,
    ScreenFrameRecord,
    SessionConfig,
    grayscale_convert,
    load_session_config,
    open_streams,
    write_raw_stream,
)
from .presence import (
    HistogramDescriptor,
    build_scaled_histogram,
    calibrate_match_threshold,
    chi_square_distance,
    contextual_presence,
    min_pairwise_distance,
    visual_presence,
)
from .scoring import (
    EventVerdict,
    SegmentScorecard,
    StudentSegmentScore,
    aggregate_score,
    canonical_json,
    classify_event,
    count_fixation_denominator,
    current_score,
    presentation_score,
)
from .segmentation import (
    Segment,
    SlideSegmenter,
    crop_regions,
    detect_transitions,
    mse,
    time_slice_segments,
)
from .service import (
    CommandError,
    DebugExporter,
    EngagementEngine,
    LiveRunResult,
    run_benchmark,
    run_live,
    run_offline,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # ingest
    "load_session_config", "open_streams", "grayscale_convert",
    "write_raw_stream", "SessionConfig", "Participant", "CameraIntrinsics",
    "ScreenFrameRecord", "FaceFrameRecord", "DEFAULT_FACE_MODEL",
    # foreground
    "gmm_init", "gmm_update_classify", "median_filter", "foreground_count",
    "GmmParams", "GmmModel", "ForegroundMask",
    # fixation
    "detect_fixation_events", "match_student_event", "FixationEvent",
    "ThresholdSet", "StreamingRunDetector",
    # segmentation
    "crop_regions", "mse", "detect_transitions", "time_slice_segments",
    "Segment", "SlideSegmenter",
    # presence
    "visual_presence", "build_scaled_histogram", "chi_square_distance",
    "contextual_presence", "min_pairwise_distance", "calibrate_match_threshold",
    "HistogramDescriptor",
    # gaze
    "select_candidate_landmarks", "solve_pose_dlt", "refine_pose_lm",
    "solve_pose", "project_point", "horizontal_series", "gazing_energy",
    "t_test_equal_mean", "cognitive_presence", "Pose", "ProjectionSample",
    "TTestResult", "DegenerateGeometryError", "InsufficientDataError",
    # scoring
    "classify_event", "count_fixation_denominator", "current_score",
    "aggregate_score", "presentation_score", "EventVerdict",
    "StudentSegmentScore", "SegmentScorecard", "canonical_json",
    # evaluation
    "confusion", "specificity", "npv", "f_beta", "evaluate",
    "baseline_continuous_gaze", "ConfusionCounts", "load_predictions",
    "load_labels",
    # service + feed
    "run_offline", "run_live", "serve_feed", "EngagementEngine",
    "LiveRunResult", "CommandError", "DebugExporter", "run_benchmark",
    "FeedServer", "validate_feed_event", "SchemaViolationError",
]
