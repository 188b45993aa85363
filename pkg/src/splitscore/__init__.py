"""Data-splitting prediction strategies under the log score.

Simulation engine comparing full-data and split-data model building (FD,
SD, SAFE, VALID) across four synthetic scenarios, with a four-component
decomposition of mean predictive score into best achievable score plus
selection, estimation, and data reuse costs.
"""
from .boxcox import inverse, log_jacobian, transform
from .decomp import (
    DecompConfig,
    DecompositionEstimate,
    estimate_decomposition,
    form_key,
)
from .glm import FittedLogit, logit_aic, logit_fit, predict_prob
from .harness import (
    DESK_SCALE,
    PAPER_SCALE,
    ResultRow,
    RunConfig,
    ScenarioCell,
    cell_seed,
    enumerate_cells,
    report_differences,
    run_cell,
    run_experiment,
)
from .linmod import (
    FittedLinearModel,
    PredictionKind,
    PredictiveDistribution,
    UnidentifiableFitError,
    boxcox_profile_loglik,
    linear_aic,
    ols_fit,
    predict_dist,
    studentized_residuals,
)
from .randgen import (
    Dataset,
    Purpose,
    ResponseKind,
    Scenario,
    ScenarioParams,
    StreamKey,
    correlated_uniform_design,
    generate,
    make_stream,
    uniform_corr_to_normal,
)
from .scoring import SCORE_CAP, log_score
from .selection import (
    BOXCOX_GRID,
    Family,
    SelectedModel,
    SelectionKind,
    boxcox_select,
    outlier_prune,
    stepwise_aic,
)
from .strategy import (
    ALL_STRATEGIES,
    PredictiveModel,
    SplitPlan,
    Strategy,
    StrategyOptions,
    StrategyResult,
    apply_strategy,
    evaluate,
    run_replication,
    select_model,
    split_data,
)

__version__ = "0.1.0"
