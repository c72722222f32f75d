"""Evaluation metrics for uplift models on logged bandit feedback.

Curve estimators (classical, inverted-label, convex combinations,
propensity-rebalanced, importance-sampling corrected, and the six classical
literature variants), area metrics with tie-safe interpolation, synthetic
benchmark populations, and a Monte Carlo harness for bias and variance
studies.
"""

from .curves import (
    Curve,
    KernelSpec,
    curve_ips_global,
    curve_ips_local,
    curve_q1,
    curve_q2,
    curve_qnu,
    curve_rebalanced,
    curve_v1,
    curve_v2,
    curve_vnu,
    interpolate_iso_uplift,
    scaling_factor_checksums,
    table1_curve,
)
from .data import (
    FullFeedbackDataset,
    FullFeedbackRecord,
    LoggedBanditDataset,
    LoggedBanditRecord,
    ScoredDataset,
    TopKCounts,
    load_dataset,
    rank_by_score,
    save_dataset,
    top_k_counts,
)
from .experiments import (
    CounterexampleReport,
    ExperimentReport,
    NuSurfaceReport,
    UnbiasednessReport,
    VarianceStudyConfig,
    nu_surface_sweep,
    run_counterexample,
    unbiasedness_check,
    variance_study,
)
from .generators import (
    GeneratedPopulation,
    GroupSpec,
    PopulationSpec,
    generate,
    heterogeneous_spec,
    toy1_spec,
    toy2_spec,
    toy3_spec,
)
from .metrics import (
    MetricReport,
    TheoreticalMoments,
    area_under_curve,
    delta_auuc,
    expected_slope,
    metric_report,
    optimal_nu,
    pehe,
    q_increment,
    theoretical_moments,
)

__version__ = "0.1.0"
