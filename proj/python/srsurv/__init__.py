"""Discrete-time survival models for error-prone self-reported outcomes."""

from ._srsurv import (
    Coefficient,
    Dataset,
    ErrorModel,
    FitResult,
    LikelihoodError,
    PanelError,
    Scenario,
    SimulationError,
    dataset_from_columns,
    fit,
    lr_test,
    read_panel_csv,
    reproduce,
    sensitivity,
    wald_contrast,
    wald_test,
)

__all__ = [
    "Coefficient",
    "Dataset",
    "ErrorModel",
    "FitResult",
    "LikelihoodError",
    "PanelError",
    "Scenario",
    "SimulationError",
    "dataset_from_columns",
    "fit",
    "lr_test",
    "read_panel_csv",
    "reproduce",
    "sensitivity",
    "wald_contrast",
    "wald_test",
]
