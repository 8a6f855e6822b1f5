"""Adaptive discrete smoothing for heterogeneous panel regressions."""

from .dgp import DgpConfig, gen_panel
from .engine import AdsConfig, AdsResult, ads_fit, build_weight_matrix, naive_fit
from .errors import (
    AdsError,
    DegenerateInputError,
    DimensionError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .estimators import LassoConfig, WeightedSample, weighted_lasso, weighted_ols
from .harness import SimConfig, paper_table, run_cell, run_suite
from .panel import CoefficientSet, MseReport, MseRow, PanelDataset, WeightMatrix, mse_against, predict
from .panel_io import chronological_split, read_long_csv, write_report

__all__ = [
    "AdsConfig",
    "AdsError",
    "AdsResult",
    "CoefficientSet",
    "DegenerateInputError",
    "DgpConfig",
    "DimensionError",
    "LassoConfig",
    "MseReport",
    "MseRow",
    "PanelDataset",
    "ParseError",
    "SchemaError",
    "SimConfig",
    "ValidationError",
    "WeightMatrix",
    "WeightedSample",
    "ads_fit",
    "build_weight_matrix",
    "chronological_split",
    "gen_panel",
    "mse_against",
    "naive_fit",
    "paper_table",
    "predict",
    "read_long_csv",
    "run_cell",
    "run_suite",
    "weighted_lasso",
    "weighted_ols",
    "write_report",
]
