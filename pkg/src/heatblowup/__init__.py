"""Feedback-driven blowup of the 1D controlled heat equation.

The package steers y_t - y_xx = 1_omega u to a self-similar blowup at a
prescribed point and (approximately) prescribed time, and provides the
diagnostics needed to check every stage of the construction.
"""

__version__ = "0.1.0"

from heatblowup.config import ExperimentConfig, parse_config
from heatblowup.errors import (
    BlowupError,
    ConfigError,
    CoverageError,
    DimensionError,
    FrameError,
    GeometryError,
    RangeError,
    RecenterError,
    SolverError,
)
from heatblowup.numerics import (
    ControlRegion,
    Grid,
    build_grid,
    build_region,
    cutoff_chi0,
    laplacian_apply,
    laplacian_matrix,
    weighted_quadrature,
)
from heatblowup.profile import (
    ProfileParams,
    ShrinkingSetParams,
    SpectralDecomposition,
    cutoff_chi1,
    dual_k,
    gaussian_weight,
    hermite_h,
    linear_operator_L,
    phi,
    potential_V,
    profile_f,
    project_modes,
    shrinking_membership,
)
from heatblowup.similarity import (
    RecenterParams,
    SimilarityFrame,
    from_similarity,
    q_of_w,
    recenter,
    recenter_direct,
    to_similarity,
)
from heatblowup.riccati import (
    FeedbackLaw,
    RiccatiSolution,
    control_value,
    feedback_gain,
    load_cache,
    save_cache,
    solve_lyapunov,
    solve_lyapunov_Q,
)
from heatblowup.simulate import (
    PhasePlan,
    Plant,
    RunResult,
    SimConfig,
    detect_blowup,
    run_auxiliary,
    run_phase,
    run_three_phase,
    step_imex,
)
from heatblowup.initial_data import (
    InitialDataParams,
    ShootingResult,
    candidate_initial_data,
    check_geometry,
    exit_time,
    search_dt,
)
from heatblowup.diagnostics import (
    fit_quality,
    flatness_check,
    profile_error,
    profile_error_series,
    regular_region_bound,
)
