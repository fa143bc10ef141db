"""Benchmark harness: workloads, timing, outlier filtering, fits and model algebra."""

from .fitting import FitModel, fit, fit_invlog, fit_linear, fit_poly2
from .measure import BenchSample, RetrievalPlan, fit_ready, measure_rctp, measure_rpr
from .model import (
    REFERENCE_MODELS,
    Crossover,
    ModelParams,
    crossover,
    default_lambda_grid,
    param_model,
    predict_rpr_novel,
    rpr_grid,
    trie_depth,
)
from .stats import iqr_bounds, iqr_filter, iqr_filter_grouped, iqr_mask
from .workload import generate_workload

__all__ = [
    "BenchSample",
    "Crossover",
    "FitModel",
    "ModelParams",
    "REFERENCE_MODELS",
    "RetrievalPlan",
    "crossover",
    "default_lambda_grid",
    "fit",
    "fit_invlog",
    "fit_linear",
    "fit_poly2",
    "fit_ready",
    "generate_workload",
    "iqr_bounds",
    "iqr_filter",
    "iqr_filter_grouped",
    "iqr_mask",
    "measure_rctp",
    "measure_rpr",
    "param_model",
    "predict_rpr_novel",
    "rpr_grid",
    "trie_depth",
]
