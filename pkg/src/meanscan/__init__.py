"""Temporal homogeneity testing and change-point identification for
high-dimensional longitudinal panels."""

from .harness import (
    ExperimentGrid,
    IdentificationCurves,
    SizePowerTable,
    emit_report,
    run_identification,
    run_mixture_power,
    run_size_power,
)
from .homogeneity import (
    StatisticUndefinedError,
    TestReport,
    gumbel_pvalue,
    gumbel_quantile,
    homogeneity_test,
    max_threshold,
    power_lower_bound,
)
from .kernels import (
    CrossTimeGram,
    MeanProfile,
    MeanScanProfile,
    PairProfileSet,
    mean_scan,
    null_variance_pairwise,
    null_variance_ustat,
    pair_split_profiles,
    pooled_gram,
    population_scan,
)
from .localize import (
    LocalizationReport,
    fdr_select,
    localization_report,
    paired_mean_shift_test,
)
from .panel import (
    PanelFormatError,
    PanelTensor,
    TimeInterval,
    load_panel,
    save_panel,
    validate_panel,
)
from .segmentation import (
    EvalMetrics,
    SegmentationResult,
    argmax_split,
    binary_segmentation,
    score_identification,
)
from .simulate import (
    BandedCoefficients,
    SimulationScenario,
    ma_coefficients,
    sample_mean_profile,
    sample_mixture_profiles,
    simulate_panel,
)

__version__ = "0.1.0"
