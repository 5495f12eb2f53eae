"""Covariation estimation for asynchronously, endogenously sampled prices.

Pipeline: simulate a joint price/sampling system on a fine grid
(:mod:`endocov.simulate`), draw observation times by first passage through
barrier policies (:mod:`endocov.sampling`), estimate the integrated
covariation with the Hayashi-Yoshida overlap sum (:mod:`endocov.hy`),
bias-correct it and attach a standard error through the blockwise chain
(:mod:`endocov.bias`), and validate everything with replicated experiments
(:mod:`endocov.experiment`).
"""

from .bias import (
    EstimationError,
    EstimationReport,
    estimate,
    feasible_statistic,
    partition_blocks,
    symmetrized_estimates,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    RunFailure,
    run_experiment,
    setting_preset,
    summarize_quantiles,
)
from .hy import (
    OneCorrelatedSeries,
    hayashi_yoshida,
    hy_from_1c,
    hy_pair,
    neighbor_times,
    one_correlated,
    realized_covariation,
)
from .kernels import BACKEND
from .sampling import (
    ACDBarriers,
    BoundarySpec,
    ConstantBarriers,
    IrregularGrid,
    JumpSizeBarriers,
    LawOfL,
    ObservationSeries,
    TickBarriers,
    UncertaintyZones,
    count_scaling_report,
    generate_observations,
)
from .simulate import (
    ConstantVol,
    DiffusionSpec,
    Heston,
    JumpSpec,
    SamplePath,
    correlate_increments,
    correlation_factor,
    simulate_path,
    true_integrated_covariation,
)

__version__ = "0.1.0"

__all__ = [
    "ACDBarriers",
    "BACKEND",
    "BoundarySpec",
    "ConstantBarriers",
    "ConstantVol",
    "DiffusionSpec",
    "EstimationError",
    "EstimationReport",
    "ExperimentConfig",
    "ExperimentResult",
    "Heston",
    "IrregularGrid",
    "JumpSizeBarriers",
    "JumpSpec",
    "LawOfL",
    "ObservationSeries",
    "OneCorrelatedSeries",
    "RunFailure",
    "SamplePath",
    "TickBarriers",
    "UncertaintyZones",
    "correlate_increments",
    "correlation_factor",
    "count_scaling_report",
    "estimate",
    "feasible_statistic",
    "generate_observations",
    "hayashi_yoshida",
    "hy_from_1c",
    "hy_pair",
    "neighbor_times",
    "one_correlated",
    "partition_blocks",
    "realized_covariation",
    "run_experiment",
    "setting_preset",
    "simulate_path",
    "summarize_quantiles",
    "symmetrized_estimates",
    "true_integrated_covariation",
]
