"""Classical comparison generators."""
from .gmm import DegenerateFitError, GmmBaseline, GmmModel, fit_em, fit_gmm, gmm_sample
from .tao import (
    COLUMNS as TAO_COLUMNS,
    N_COLUMNS as TAO_N_COLUMNS,
    REFERENCE_COLUMNS,
    STRUCTURAL_RANK,
    TaoBaseline,
    TaoModel,
    design_matrix,
    design_row,
    reactive_from_active,
    tao_design_row,
    tao_fit,
    tao_predict,
)

__all__ = [
    "DegenerateFitError", "GmmBaseline", "GmmModel", "fit_em", "fit_gmm", "gmm_sample",
    "TAO_COLUMNS", "TAO_N_COLUMNS", "REFERENCE_COLUMNS", "STRUCTURAL_RANK", "TaoBaseline",
    "TaoModel", "design_matrix", "design_row", "reactive_from_active", "tao_design_row",
    "tao_fit", "tao_predict",
]
