"""Monocular visual landing simulation suite.

Library for descriptor matching, homography-based pad detection,
linear Kalman tracking, PID image-based visual servoing, and a
deterministic closed-loop landing simulator.
"""

from .homography import (
    FeatureSet,
    Homography,
    MatchSet,
    TemplateSpec,
    estimate_homography_dlt,
    match_descriptors,
    project_template,
    ransac_homography,
)
from .observation import (
    CornerQuad,
    ObservationGate,
    ObservationVector,
    build_observation,
    compute_angle,
    compute_object_dims,
    observation_from_points,
    sort_corners,
)
from .tracker import (
    FilterConfig,
    FilterState,
    Innovation,
    correct,
    initialize_filter,
    make_transition,
    predict,
    track_step,
)
from .controller import (
    AltitudeState,
    ControlCommand,
    ControllerState,
    PidGains,
    PidState,
    Setpoint,
    altitude_step,
    compute_error,
    control_step,
    landing_check,
    pid_step,
)
from .simworld import (
    CameraModel,
    NOISE_PRESETS,
    NoiseModel,
    VehicleState,
    WindModel,
    camera_project,
    synthesize_frame,
    true_homography,
    vehicle_step,
)
from .harness import (
    ErrorSummary,
    TrialConfig,
    TrialLog,
    detector_noise_sweep,
    export_csv,
    load_config,
    run_experiment,
    run_trial,
    summarize_errors,
)

__version__ = "0.1.0"
