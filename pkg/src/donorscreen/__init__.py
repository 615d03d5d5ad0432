"""Dynamical pre-screening of synthetic-control donor pools.

The package cross-maps every candidate control against the treated unit on
delay-coordinate reconstructions of their pre-intervention outcomes, drops
candidates whose cross-map skill cannot beat a weak-coupling Monte-Carlo
null, and fits simplex-constrained synthetic-control weights on the
survivors. A linear autoregressive theory module provides exact score
formulas and limiting distributions that double as numerical oracles, and
an adversary module generates the artificial donor units used to stress
the estimator end to end.
"""

from .panel import (
    Panel,
    PanelData,
    TimeSeries,
    load_panel,
    normalize_base_log,
    normalize_zscore,
    series,
    smooth_window,
    split_pre_post,
    write_panel_long,
    write_panel_wide,
)
from .embedding import DelayEmbedding, EmbeddingConfig, delay_embed, embedding_distance
from .ccm import (
    CcmConfig,
    CcmCurve,
    CurveDiagnostic,
    NeighborSet,
    ccm_curve,
    ccm_score,
    convergence_diagnostic,
    cross_map_estimate,
    cross_map_weights,
    default_library_sizes,
    find_neighbors,
)
from .scm import (
    EffectPath,
    SimplexWeights,
    effect_path,
    fit_weights,
    fit_weights_detailed,
    predict_counterfactual,
    scm_report,
    simplex_project,
)
from .screening import (
    AllControlsScreenedOut,
    PipelineReport,
    ScreeningConfig,
    ScreeningDecision,
    ccm_scm_pipeline,
    empirical_quantile,
    null_distribution,
    screen_controls,
    thresholds,
)
from .ar1 import (
    Ar1Params,
    DirectionStudy,
    FoldedNormal,
    FoldedNormalParams,
    LimitValidation,
    NeighborScheme,
    NoisePath,
    SchemeRule,
    closed_form_score_x,
    closed_form_score_y,
    closed_form_state,
    direction_study,
    draw_noise,
    folded_normal_stats,
    geometric_sum,
    innovation_sums,
    limit_params_x,
    limit_params_y,
    series_from_noise,
    simulate_ar1,
    validate_limit_distribution,
)
from .adversary import (
    ArNoiseSpec,
    AttackSpec,
    TruthPanel,
    ar_noisy_copies,
    build_truth_panel,
    fit_ar1,
    inject,
    level_shift,
    make_adversaries,
    scale_template,
)
from .errors import DataError, DonorScreenError, InternalError, NumericalError, UsageError

__version__ = "0.1.0"
