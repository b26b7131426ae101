"""Riesz regression for the ATE functional.

The inverse propensity weights 1/e(x) and 1/(1-e(x)) are density ratios
(marginal covariate density over the within-arm joint density), so each arm's
weight function can be fitted by the same quadratic risk as LSIF: the squared
term averages over the arm, the linear term over the whole sample.  Fitting
both arms at once minimizes the joint Riesz regression risk; the joint system
is block diagonal, so the coefficients coincide with the two arm-wise fits.

With the per-point catchment indicator basis and no ridge penalty the fitted
weight at unit i is exactly 1 + K_M(i)/M, the matched-times weight of
nearest-neighbor matching; ``nn_weight`` computes that value directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import ObservationalDataset
from .lsif import Basis, evaluate_matrix, solve_spd
from .neighbors import Metric, matching_structures


def _arm_moments(dataset: ObservationalDataset, arm: int, basis: Basis):
    if arm not in (0, 1):
        raise ValueError("arm must be 0 or 1")
    phi = evaluate_matrix(basis, dataset.covariates)
    mask = dataset.treatment == arm
    phi_arm = phi[mask]
    h_mat = phi_arm.T @ phi_arm / dataset.n
    h_vec = phi.mean(axis=0)
    return h_mat, h_vec


def fit_weight_arm(dataset: ObservationalDataset, arm: int, basis: Basis, lam: float) -> np.ndarray:
    """Closed-form coefficients of one arm's inverse-propensity weight model."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    h_mat, h_vec = _arm_moments(dataset, arm, basis)
    system = h_mat if lam == 0 else h_mat + lam * np.eye(basis.dimension)
    try:
        return solve_spd(system, h_vec)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"singular moment matrix for arm {arm} at lambda={lam:g}"
        ) from None


def arm_objective_value(
    dataset: ObservationalDataset, arm: int, basis: Basis, lam: float, theta: np.ndarray
) -> float:
    """Sample-form arm risk (1/2) mean_arm w^2 - mean w + (lambda/2)|theta|^2."""
    theta = np.asarray(theta, dtype=float)
    w = evaluate_matrix(basis, dataset.covariates) @ theta
    mask = dataset.treatment == arm
    sq_term = np.sum(w[mask] * w[mask]) / dataset.n
    return float(0.5 * sq_term - np.mean(w) + 0.5 * lam * np.dot(theta, theta))


def arm_objective_gradient(
    dataset: ObservationalDataset, arm: int, basis: Basis, lam: float, theta: np.ndarray
) -> np.ndarray:
    h_mat, h_vec = _arm_moments(dataset, arm, basis)
    theta = np.asarray(theta, dtype=float)
    return h_mat @ theta + lam * theta - h_vec


@dataclass(frozen=True)
class WeightModel:
    """Per-arm weight functions, each a basis with a coefficient vector."""

    basis_treated: Basis
    theta_treated: np.ndarray
    basis_control: Basis
    theta_control: np.ndarray
    lam: float

    def weight(self, arm: int, x) -> float:
        if arm == 1:
            basis, theta = self.basis_treated, self.theta_treated
        elif arm == 0:
            basis, theta = self.basis_control, self.theta_control
        else:
            raise ValueError("arm must be 0 or 1")
        phi = np.ravel(evaluate_matrix(basis, np.atleast_2d(np.asarray(x, dtype=float))))
        return float(np.dot(theta, phi))


@dataclass(frozen=True)
class RieszRepresenter:
    """Signed weight function: +w(1, x) on the treated, -w(0, x) on controls."""

    weight_model: WeightModel


def riesz_fit(dataset: ObservationalDataset, basis: Basis, lam: float) -> RieszRepresenter:
    """Minimize the joint two-arm risk in one block solve.

    The stacked system is block diagonal over arms, so the result matches
    ``fit_weight_arm`` for each arm; tests assert that identity.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    h1, h_vec = _arm_moments(dataset, 1, basis)
    h0, _ = _arm_moments(dataset, 0, basis)
    b = basis.dimension
    ridge = lam * np.eye(b)
    joint = scipy.linalg.block_diag(h1 + ridge, h0 + ridge)
    rhs = np.concatenate([h_vec, h_vec])
    try:
        theta = solve_spd(joint, rhs)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"singular joint moment matrix at lambda={lam:g}"
        ) from None
    model = WeightModel(
        basis_treated=basis,
        theta_treated=theta[:b],
        basis_control=basis,
        theta_control=theta[b:],
        lam=float(lam),
    )
    return RieszRepresenter(weight_model=model)


def evaluate_representer(rep: RieszRepresenter, d: int, x) -> float:
    """Representer value at (d, x): the weight with sign 2d - 1."""
    if d not in (0, 1):
        raise ValueError("d must be 0 or 1")
    w = rep.weight_model.weight(d, x)
    return w if d == 1 else -w


def nn_weights(dataset: ObservationalDataset, metric: Metric | None, m: int) -> np.ndarray:
    """Matching weights 1 + K_M(i)/M for every unit."""
    structures = matching_structures(dataset, metric, m)
    return 1.0 + structures.matched_times / m


def nn_weight(dataset: ObservationalDataset, metric: Metric | None, m: int, i: int) -> float:
    """Matching weight of a single unit; always at least 1."""
    if not 0 <= i < dataset.n:
        raise ValueError("unit index out of range")
    return float(nn_weights(dataset, metric, m)[i])


def nn_representer_values(dataset: ObservationalDataset, metric: Metric | None, m: int) -> np.ndarray:
    """Signed matching weights (2 D_i - 1)(1 + K_M(i)/M) at the sample points."""
    return (2.0 * dataset.treatment - 1.0) * nn_weights(dataset, metric, m)


def dr_score(m_value, gamma_value, alpha_value, y, tau):
    """Orthogonal doubly robust score m - tau + alpha (y - gamma).

    Accepts scalars or arrays; broadcasting follows numpy rules.  The result
    is linear in tau with slope -1.
    """
    m_value = np.asarray(m_value, dtype=float)
    gamma_value = np.asarray(gamma_value, dtype=float)
    alpha_value = np.asarray(alpha_value, dtype=float)
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    for name, arr in (
        ("m_value", m_value),
        ("gamma_value", gamma_value),
        ("alpha_value", alpha_value),
        ("y", y),
        ("tau", tau),
    ):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite {name}")
    out = m_value - tau + alpha_value * (y - gamma_value)
    return float(out) if out.ndim == 0 else out
