"""Functional-data mission profiles for fleet telemetry.

Telemetry series are smoothed onto penalized B-spline bases, ranked by
functional adjusted outlyingness, and the central devices are summarised as
residence-time histograms.
"""

from .basis import BasisSystem, eval_basis, eval_basis_deriv, gram_matrix, make_bspline_basis, penalty_matrix
from .depth import (
    DirectionSet,
    EvaluationGrid,
    FunctionalBoxplot,
    OutlyingnessReport,
    adjusted_outlyingness_1d,
    adjusted_outlyingness_point,
    central_region,
    depth_from_outlyingness,
    directional_outlyingness,
    flag_outliers,
    functional_adjusted_outlyingness,
    functional_boxplot,
    medcouple,
    modified_band_depth,
    outlyingness_report,
    pointwise_outlyingness,
)
from .errors import (
    BasisMismatchError,
    DegenerateCrossSectionError,
    DegenerateScaleError,
    DegenerateScaleWarning,
    DomainError,
    InvariantViolation,
    MissionProfileError,
    RankDeficiencyError,
)
from .fdcore import (
    CovarianceModel,
    FunctionalDatum,
    FunctionalSample,
    apply_covariance_operator,
    covariance_function,
    eval_covariance,
    evaluate,
    inner_product,
    mean_function,
    norm,
)
from .profile import (
    HistogramSpec,
    MissionProfileHistogram,
    classical_profile_export,
    endpoint_histogram,
    pointwise_quantile_selection,
    residence_histogram,
    selection_comparison,
)
from .simgen import DayConfig, FleetConfig, gen_mileage_fleet, gen_temperature_day
from .smoothing import RawSeries, SmoothingConfig, fit_coordinate, select_lambda_gcv, smooth_device

__version__ = "0.1.0"
