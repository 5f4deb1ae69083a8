"""parceltol: accuracy and technical tolerance of replicated parcel-area measurements.

The library turns replicated multi-operator, multi-image polygon area
measurements into buffer widths (signed area error per meter of reference
perimeter), screens them for outliers, tests normality, attributes variance
to campaign factors, and derives repeatability/reproducibility limits and
the critical difference to the reference value. A seeded simulator
generates campaigns with known error structure for calibration studies.
"""

__version__ = "0.1.0"

from .campaign import (
    BufferRecord,
    Campaign,
    FactorLabels,
    ImageSource,
    LandCover,
    Observation,
    Operator,
    ReferenceParcel,
    ShapeClass,
    Skill,
    Visibility,
    build_buffer_table,
    compute_buffer,
    partition_by_image,
)
from .errors import (
    DegenerateFitError,
    DegenerateSampleError,
    GenerationError,
    InsufficientDataError,
    ModelSpecError,
    ParcelTolError,
    PrecisionDomainError,
    ValidationError,
)
from .fileio import (
    Config,
    config_from_dict,
    load_campaign,
    load_config,
    parse_observations_csv,
    parse_parcels_geojson,
    plan_from_dict,
    plan_to_dict,
    write_observations_csv,
    write_parcels_geojson,
)
from .geometry import (
    Polygon,
    SizeClass,
    classify_size,
    polygon_area,
    polygon_perimeter,
    validate_polygon,
)
from .linear_model import (
    AnovaTable,
    DesignMatrix,
    FitResult,
    LsMean,
    ModelSpec,
    anova_table,
    encode_design,
    fit_least_squares,
    fit_model,
    ls_means,
)
from .pipeline import AnalysisReport, analyze_campaign, run_analyze, run_simulate
from .precision import (
    LimitMode,
    PrecisionSummary,
    VarianceComponents,
    critical_difference,
    precision_report,
    repeatability_limit,
    reproducibility_limit,
    variance_components,
)
from .robust_stats import (
    DistributionSummary,
    NormalityResult,
    OutlierGrouping,
    OutlierReport,
    apply_outlier_flags,
    describe,
    detect_outliers,
    jackknife_distances,
    jackknife_threshold,
    lilliefors_null_table,
    lilliefors_statistic,
    lilliefors_test,
)
from .simulator import (
    OperatorErrorModel,
    PlanImage,
    SimulationPlan,
    SimulationTruth,
    generate_campaign,
    generate_campaign_with_truth,
    generate_parcel,
    simulate_observation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
