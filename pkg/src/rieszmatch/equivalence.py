"""Random-instance generators and equivalence suites.

Each suite computes the gap between two independently coded routes to the
same quantity: indicator-basis LSIF vs the one-step count formula, matching
imputation vs its weight form, per-point LSIF arm fits vs matched-times
weights, the joint Riesz block solve vs arm-wise solves, and the doubly
robust score form vs the bias-corrected form.  The command-line ``verify``
subcommand and the acceptance tests both run on top of these helpers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ObservationalDataset, TwoSampleData
from .lsif import (
    catchment_indicator,
    monomial_exponents,
    polynomial_basis,
    verify_theorem1_all,
)
from .matching import (
    ate_bias_corrected,
    ate_dr_riesz,
    ate_matching,
    ate_weight_form,
    fit_outcome,
)
from .neighbors import Metric
from .riesz import (
    dr_score,
    fit_weight_arm,
    nn_representer_values,
    nn_weights,
    riesz_fit,
)

GAP_THRESHOLD = 1e-12


def random_two_sample_instance(
    rng: np.random.Generator, max_n: int = 300, max_d: int = 3, max_m: int = 5
) -> tuple[TwoSampleData, Metric, int]:
    """Random continuous two-sample instance; points are distinct a.s."""
    m = int(rng.integers(1, max_m + 1))
    d = int(rng.integers(1, max_d + 1))
    n0 = int(rng.integers(max(m, 5), max_n + 1))
    n1 = int(rng.integers(5, max_n + 1))
    den = rng.normal(size=(n0, d))
    num = rng.normal(loc=0.3, size=(n1, d))
    metric = Metric() if rng.random() < 0.7 else Metric(weights=rng.uniform(0.5, 2.0, size=d))
    return TwoSampleData(denominator=den, numerator=num), metric, m


def random_observational_instance(
    rng: np.random.Generator, max_n: int = 300, max_d: int = 3, max_m: int = 5
) -> tuple[ObservationalDataset, Metric, int]:
    """Random observational instance with both arms at least max_m large."""
    m = int(rng.integers(1, max_m + 1))
    d = int(rng.integers(1, max_d + 1))
    n = int(rng.integers(max(4 * m, 20), max_n + 1))
    x = rng.normal(size=(n, d))
    p = rng.uniform(0.3, 0.7)
    while True:
        treat = (rng.random(n) < p).astype(np.int64)
        if m <= treat.sum() <= n - m:
            break
    y = np.sin(x[:, 0]) + treat * (1.0 + 0.5 * x[:, 0]) + rng.normal(size=n)
    metric = Metric() if rng.random() < 0.7 else Metric(weights=rng.uniform(0.5, 2.0, size=d))
    return ObservationalDataset(covariates=x, treatment=treat, outcome=y), metric, m


def theorem1_max_gap(data: TwoSampleData, metric: Metric | None, m: int) -> float:
    """Largest LSIF vs one-step gap over all numerator evaluation points."""
    return verify_theorem1_all(data, metric, m).max_gap


def eq1_gap(dataset: ObservationalDataset, metric: Metric | None, m: int) -> float:
    """Gap between imputation-form and weight-form matching estimates."""
    return abs(ate_matching(dataset, metric, m).tau - ate_weight_form(dataset, metric, m).tau)


def weight_identity_max_gap(dataset: ObservationalDataset, metric: Metric | None, m: int) -> float:
    """Per-unit gap between the indicator-basis LSIF weight and 1 + K_M(i)/M."""
    weights = nn_weights(dataset, metric, m)
    worst = 0.0
    for i in range(dataset.n):
        arm = int(dataset.treatment[i])
        reference = dataset.covariates[dataset.treatment == arm]
        basis = catchment_indicator(reference, metric, m, dataset.covariates[i])
        theta = fit_weight_arm(dataset, arm, basis, lam=0.0)
        worst = max(worst, abs(float(theta[0]) - weights[i]))
    return worst


def well_posed_degree(dataset: ObservationalDataset, max_degree: int = 2) -> int:
    """Largest polynomial degree whose basis stays well below the arm sizes."""
    min_arm = min(dataset.n_treated, dataset.n_control)
    for degree in range(max_degree, 0, -1):
        if 3 * len(monomial_exponents(dataset.d, degree)) <= min_arm:
            return degree
    return 0


def separability_max_gap(dataset: ObservationalDataset, lam: float, degree: int | None = None) -> float:
    """Per-coefficient gap between the joint Riesz solve and arm-wise solves."""
    if degree is None:
        degree = well_posed_degree(dataset)
    basis = polynomial_basis(dataset.d, degree)
    rep = riesz_fit(dataset, basis, lam)
    theta1 = fit_weight_arm(dataset, 1, basis, lam)
    theta0 = fit_weight_arm(dataset, 0, basis, lam)
    gap1 = np.abs(rep.weight_model.theta_treated - theta1).max()
    gap0 = np.abs(rep.weight_model.theta_control - theta0).max()
    return float(max(gap1, gap0))


def dr_identity_gaps(
    dataset: ObservationalDataset, metric: Metric | None, m: int, degree: int = 1
) -> tuple[float, float]:
    """Gap between the DR-score and bias-corrected estimates, and the mean score."""
    outcome = fit_outcome(dataset, degree)
    bc = ate_bias_corrected(dataset, metric, m, outcome)
    dr = ate_dr_riesz(dataset, metric, m, outcome)
    x = dataset.covariates
    contrast = outcome.mean_treated(x) - outcome.mean_control(x)
    gamma = outcome.mean_observed(x, dataset.treatment)
    alpha = nn_representer_values(dataset, metric, m)
    psi = dr_score(contrast, gamma, alpha, dataset.outcome, dr.tau)
    return abs(dr.tau - bc.tau), abs(float(np.mean(psi)))


@dataclass(frozen=True)
class InstanceRecord:
    index: int
    theorem1_gap: float
    eq1_gap: float
    weight_identity_gap: float
    separability_gap: float
    dr_gap: float
    score_mean: float

    @property
    def max_gap(self) -> float:
        return max(
            self.theorem1_gap,
            self.eq1_gap,
            self.weight_identity_gap,
            self.separability_gap,
            self.dr_gap,
            self.score_mean,
        )


def run_instance(index: int, seed: int, max_n: int = 160) -> InstanceRecord:
    """All equivalence gaps on one random instance pair; worker for ``verify``."""
    rng = np.random.default_rng(seed)
    two_sample, metric2, m2 = random_two_sample_instance(rng, max_n=max_n)
    dataset, metric_obs, m_obs = random_observational_instance(rng, max_n=max_n)
    th1 = theorem1_max_gap(two_sample, metric2, m2)
    eq1 = eq1_gap(dataset, metric_obs, m_obs)
    wid = weight_identity_max_gap(dataset, metric_obs, m_obs)
    sep = separability_max_gap(dataset, lam=1e-3)
    degree = 1 if min(dataset.n_treated, dataset.n_control) > dataset.d + 1 else 0
    dr_gap, score_mean = dr_identity_gaps(dataset, metric_obs, m_obs, degree=degree)
    return InstanceRecord(
        index=index,
        theorem1_gap=th1,
        eq1_gap=eq1,
        weight_identity_gap=wid,
        separability_gap=sep,
        dr_gap=dr_gap,
        score_mean=score_mean,
    )


def instance_seeds(seed: int, count: int) -> list[int]:
    """Deterministic per-instance integer seeds derived from one root seed."""
    root = np.random.SeedSequence(seed)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in root.spawn(count)]
