"""Causal impact analysis of daily series with Bayesian structural time series.

Typical use::

    from impact_bsts import align, run_analysis, ModelSpec, McmcConfig

    panel = align([treated, *controls])
    result = run_analysis(panel, "2023-06-01", ModelSpec(trend="local_level"))
    print(result.report.to_json())
"""

from .errors import (
    ImpactError,
    InputError,
    NetworkError,
    NumericalError,
)
from .gibbs import (
    McmcConfig,
    ModelSpec,
    PosteriorSamples,
    fit,
    inclusion_probabilities,
    standardized_coefficients,
    variance_prior,
)
from .impact import (
    ImpactReport,
    compute_impact,
    counterfactual_mean,
    predict_counterfactual,
    run_analysis,
    significance,
)
from .prescreen import dtw_distance, pearson, rank_controls
from .series import (
    DateIndexedSeries,
    SeriesPanel,
    align,
    destandardize,
    interpolate_to_daily,
    standardize,
)
from .synth import ControlRecipe, Intervention, SynthSpec, generate, inject
from .validate import GridSpec, cross_validate, grid_search, mape

__version__ = "0.1.0"

__all__ = [
    "ControlRecipe", "DateIndexedSeries", "GridSpec", "ImpactError", "ImpactReport",
    "InputError", "Intervention", "McmcConfig", "ModelSpec", "NetworkError", "NumericalError",
    "PosteriorSamples", "SeriesPanel", "SynthSpec", "align", "compute_impact",
    "counterfactual_mean", "cross_validate", "destandardize", "dtw_distance", "fit",
    "generate", "grid_search", "inclusion_probabilities", "inject", "interpolate_to_daily",
    "mape", "pearson", "predict_counterfactual", "rank_controls", "run_analysis",
    "significance", "standardize", "standardized_coefficients", "variance_prior",
]
