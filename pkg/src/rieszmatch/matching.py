"""ATE estimators built on M-nearest-neighbor matching with replacement.

Four routes to the same target: imputation-form matching, its weight-form
rewriting through matched-times counts, the bias-corrected estimator that
matches on outcome-regression residuals, and the doubly robust score form
driven by the signed matching weights.  The first two are algebraically
identical, as are the last two; tests assert both identities at 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ObservationalDataset
from .lsif import polynomial_feature_matrix
from .neighbors import Metric, matching_structures
from .riesz import nn_representer_values, nn_weights


@dataclass(frozen=True)
class OutcomeModel:
    """Per-arm polynomial least-squares fits of the outcome means."""

    degree: int
    coef_treated: np.ndarray
    coef_control: np.ndarray

    def mean_treated(self, x: np.ndarray) -> np.ndarray:
        return polynomial_feature_matrix(x, self.degree) @ self.coef_treated

    def mean_control(self, x: np.ndarray) -> np.ndarray:
        return polynomial_feature_matrix(x, self.degree) @ self.coef_control

    def mean_observed(self, x: np.ndarray, treatment: np.ndarray) -> np.ndarray:
        return np.where(treatment == 1, self.mean_treated(x), self.mean_control(x))


def fit_outcome(dataset: ObservationalDataset, degree: int) -> OutcomeModel:
    """Least-squares polynomial fit of each arm's outcome mean."""
    if not 0 <= degree <= 3:
        raise ValueError("degree must be in 0..3")
    features = polynomial_feature_matrix(dataset.covariates, degree)
    n_coef = features.shape[1]
    coefs = {}
    for arm, name in ((1, "treated"), (0, "control")):
        mask = dataset.treatment == arm
        if mask.sum() < n_coef:
            raise ValueError(
                f"{name} arm has {int(mask.sum())} units, fewer than {n_coef} coefficients"
            )
        coef, _, rank, _ = np.linalg.lstsq(features[mask], dataset.outcome[mask], rcond=None)
        if rank < n_coef:
            raise np.linalg.LinAlgError(f"rank-deficient design in the {name} arm")
        coefs[arm] = coef
    return OutcomeModel(degree=degree, coef_treated=coefs[1], coef_control=coefs[0])


@dataclass(frozen=True)
class AteEstimate:
    tau: float
    variant: str
    diagnostics: dict = field(default_factory=dict)


def _diagnostics(dataset: ObservationalDataset, m: int | None, max_weight: float | None) -> dict:
    out = {"n_treated": dataset.n_treated, "n_control": dataset.n_control}
    if m is not None:
        out["m"] = m
    if max_weight is not None:
        out["max_weight"] = float(max_weight)
    return out


def impute(dataset: ObservationalDataset, metric: Metric | None, m: int) -> np.ndarray:
    """Per-unit imputed potential outcomes, column 0 control and column 1 treated.

    The observed arm keeps the observed outcome exactly; the opposite arm is
    the mean outcome of the unit's M nearest opposite-arm matches.
    """
    structures = matching_structures(dataset, metric, m)
    matched_mean = dataset.outcome[structures.neighbor_sets].mean(axis=1)
    out = np.empty((dataset.n, 2))
    treated = dataset.treatment == 1
    out[treated, 1] = dataset.outcome[treated]
    out[treated, 0] = matched_mean[treated]
    out[~treated, 0] = dataset.outcome[~treated]
    out[~treated, 1] = matched_mean[~treated]
    return out


def ate_matching(dataset: ObservationalDataset, metric: Metric | None, m: int) -> AteEstimate:
    """Mean imputed treated-minus-control contrast."""
    pairs = impute(dataset, metric, m)
    tau = float(np.mean(pairs[:, 1] - pairs[:, 0]))
    weights = nn_weights(dataset, metric, m)
    return AteEstimate(
        tau=tau, variant="matching", diagnostics=_diagnostics(dataset, m, weights.max())
    )


def ate_weight_form(dataset: ObservationalDataset, metric: Metric | None, m: int) -> AteEstimate:
    """Signed matched-times weighting (1/n) sum (2 D_i - 1)(1 + K_M(i)/M) Y_i."""
    weights = nn_weights(dataset, metric, m)
    signed = (2.0 * dataset.treatment - 1.0) * weights
    tau = float(np.mean(signed * dataset.outcome))
    return AteEstimate(
        tau=tau, variant="weight_form", diagnostics=_diagnostics(dataset, m, weights.max())
    )


def ate_regression(dataset: ObservationalDataset, outcome: OutcomeModel) -> AteEstimate:
    """Plug-in mean of the fitted arm contrast."""
    x = dataset.covariates
    tau = float(np.mean(outcome.mean_treated(x) - outcome.mean_control(x)))
    return AteEstimate(
        tau=tau,
        variant="regression_plugin",
        diagnostics=_diagnostics(dataset, None, None) | {"degree": outcome.degree},
    )


def ate_bias_corrected(
    dataset: ObservationalDataset, metric: Metric | None, m: int, outcome: OutcomeModel
) -> AteEstimate:
    """Regression plug-in plus the weighted residual correction."""
    x = dataset.covariates
    tau_reg = ate_regression(dataset, outcome).tau
    residuals = dataset.outcome - outcome.mean_observed(x, dataset.treatment)
    weights = nn_weights(dataset, metric, m)
    treated = dataset.treatment == 1
    correction = (
        np.sum(weights[treated] * residuals[treated])
        - np.sum(weights[~treated] * residuals[~treated])
    ) / dataset.n
    return AteEstimate(
        tau=tau_reg + correction,
        variant="bias_corrected",
        diagnostics=_diagnostics(dataset, m, weights.max()) | {"degree": outcome.degree},
    )


def ate_dr_riesz(
    dataset: ObservationalDataset, metric: Metric | None, m: int, outcome: OutcomeModel
) -> AteEstimate:
    """Doubly robust score mean with the matching-weight representer.

    Same algebra as the bias-corrected form in a different factorization;
    the two agree to floating-point roundoff.
    """
    x = dataset.covariates
    contrast = outcome.mean_treated(x) - outcome.mean_control(x)
    residuals = dataset.outcome - outcome.mean_observed(x, dataset.treatment)
    alpha = nn_representer_values(dataset, metric, m)
    tau = float(np.mean(contrast + alpha * residuals))
    return AteEstimate(
        tau=tau,
        variant="dr_riesz",
        diagnostics=_diagnostics(dataset, m, np.abs(alpha).max()) | {"degree": outcome.degree},
    )
