"""Nearest-neighbor matching, LSIF density-ratio estimation, and Riesz
regression for average-treatment-effect estimation, with exact equivalence
checks between the three routes."""

from .constants import LOGISTIC_TRUE_ATE
from .dataset import (
    DensitySpec,
    DgpSpec,
    ObservationalDataset,
    TwoSampleData,
    builtin_dgp,
    density_ratio,
    gaussian_density,
    generate,
    generate_two_sample,
    load_csv,
    load_points_csv,
    logistic_dgp,
    save_csv,
    save_points_csv,
    uniform_density,
)
from .lsif import (
    Basis,
    LsifFit,
    Theorem1Check,
    catchment_indicator,
    constant_basis,
    fit,
    gaussian_grid_basis,
    indicator_basis,
    one_step_dre,
    polynomial_basis,
    predict,
    verify_theorem1,
    verify_theorem1_all,
)
from .matching import (
    AteEstimate,
    OutcomeModel,
    ate_bias_corrected,
    ate_dr_riesz,
    ate_matching,
    ate_regression,
    ate_weight_form,
    fit_outcome,
    impute,
)
from .neighbors import (
    Metric,
    NeighborModel,
    brute_force_knn,
    catchment_contains,
    knn,
    matched_times_two_sample,
    matching_structures,
    mth_radius,
)
from .riesz import (
    RieszRepresenter,
    WeightModel,
    dr_score,
    evaluate_representer,
    fit_weight_arm,
    nn_representer_values,
    nn_weight,
    nn_weights,
    riesz_fit,
)

__all__ = [
    "AteEstimate",
    "Basis",
    "DensitySpec",
    "DgpSpec",
    "LOGISTIC_TRUE_ATE",
    "LsifFit",
    "Metric",
    "NeighborModel",
    "ObservationalDataset",
    "OutcomeModel",
    "RieszRepresenter",
    "Theorem1Check",
    "TwoSampleData",
    "WeightModel",
    "ate_bias_corrected",
    "ate_dr_riesz",
    "ate_matching",
    "ate_regression",
    "ate_weight_form",
    "brute_force_knn",
    "builtin_dgp",
    "catchment_contains",
    "catchment_indicator",
    "constant_basis",
    "density_ratio",
    "dr_score",
    "evaluate_representer",
    "fit",
    "fit_outcome",
    "fit_weight_arm",
    "gaussian_density",
    "gaussian_grid_basis",
    "generate",
    "generate_two_sample",
    "impute",
    "indicator_basis",
    "knn",
    "load_csv",
    "load_points_csv",
    "logistic_dgp",
    "matched_times_two_sample",
    "matching_structures",
    "mth_radius",
    "nn_representer_values",
    "nn_weight",
    "nn_weights",
    "one_step_dre",
    "polynomial_basis",
    "predict",
    "riesz_fit",
    "save_csv",
    "save_points_csv",
    "uniform_density",
    "verify_theorem1",
    "verify_theorem1_all",
]

__version__ = "0.1.0"
