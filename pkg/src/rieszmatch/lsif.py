"""Least-squares importance fitting for density-ratio estimation.

Fits a linear-in-parameters ratio model r(x) = beta' Phi(x) by minimizing the
empirical quadratic risk

    J(beta) = (1/2) beta' H beta - beta' h + (lambda/2) |beta|^2,

where H averages Phi Phi' over the denominator sample and h averages Phi over
the numerator sample.  The unique minimizer is (H + lambda I)^{-1} h, solved
by a symmetric positive-definite factorization with explicit singularity
detection (nothing is silently regularized).

The catchment indicator basis turns this machinery into the one-step
nearest-neighbor ratio estimate: with that single feature and lambda = 0 the
fitted value at the anchor equals (N0/N1) K_M(c) / M exactly, where K_M(c) is
the matched-times count.  ``verify_theorem1`` exercises that identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .dataset import TwoSampleData
from .neighbors import (
    EUCLIDEAN,
    Metric,
    NeighborModel,
    _as_matrix,
    _as_points,
    _mth_sq_radius_batch,
    _sq_dists,
    matched_times_at,
)

_PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class Basis:
    """A finite feature map.

    ``evaluate`` takes a d-vector and returns a b-vector; the built-in bases
    also accept an (k, d) matrix and return (k, b), which the fitting code
    uses for speed.
    """

    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LsifFit:
    basis: Basis
    lam: float
    H_hat: np.ndarray  # (b, b)
    h_hat: np.ndarray  # (b,)
    beta: np.ndarray   # (b,)


def solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric positive-definite system via Cholesky.

    Raises numpy.linalg.LinAlgError when the matrix is not positive definite
    or when the relative pivot ratio falls below 1e-12.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise np.linalg.LinAlgError("matrix is singular or not positive definite") from None
    pivots = np.diag(factor[0]) ** 2
    if pivots.min() <= _PIVOT_RTOL * pivots.max():
        raise np.linalg.LinAlgError(
            f"matrix is numerically singular (relative pivot below {_PIVOT_RTOL:g})"
        )
    return scipy.linalg.cho_solve(factor, np.asarray(rhs, dtype=float), check_finite=False)


def evaluate_matrix(basis: Basis, points: np.ndarray) -> np.ndarray:
    """Evaluate a basis on an (k, d) matrix, tolerating per-point callables."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = None
    try:
        raw = np.asarray(basis.evaluate(pts), dtype=float)
        if raw.shape == (len(pts), basis.dimension):
            out = raw
    except Exception:
        out = None
    if out is None:
        out = np.array([np.ravel(basis.evaluate(p)) for p in pts], dtype=float)
        if out.shape != (len(pts), basis.dimension):
            raise ValueError("basis evaluate returned the wrong shape")
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite basis output")
    return out


def fit(data: TwoSampleData, basis: Basis, lam: float) -> LsifFit:
    """Closed-form ridge fit of the density-ratio coefficients."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    phi_den = evaluate_matrix(basis, data.denominator)
    phi_num = evaluate_matrix(basis, data.numerator)
    h_mat = phi_den.T @ phi_den / data.n_denominator
    h_vec = phi_num.mean(axis=0)
    system = h_mat if lam == 0 else h_mat + lam * np.eye(basis.dimension)
    try:
        beta = solve_spd(system, h_vec)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"singular moment matrix at lambda={lam:g}; "
            "the basis has no unique minimizer on this sample"
        ) from None
    return LsifFit(basis=basis, lam=float(lam), H_hat=h_mat, h_hat=h_vec, beta=beta)


def predict(fit_result: LsifFit, x) -> float:
    """Fitted ratio value beta' Phi(x) at a single point."""
    phi = np.ravel(evaluate_matrix(fit_result.basis, np.atleast_2d(np.asarray(x, dtype=float))))
    return float(np.dot(fit_result.beta, phi))


def default_ridge(data: TwoSampleData, basis: Basis) -> float:
    """Numerical-safety default 1e-6 trace(H)/b for general bases."""
    phi_den = evaluate_matrix(basis, data.denominator)
    trace = float(np.sum(phi_den * phi_den)) / data.n_denominator
    return 1e-6 * trace / basis.dimension


def objective_value(data: TwoSampleData, basis: Basis, lam: float, beta: np.ndarray) -> float:
    """Sample-form objective J(beta); used by gradient and optimality tests."""
    beta = np.asarray(beta, dtype=float)
    r_den = evaluate_matrix(basis, data.denominator) @ beta
    r_num = evaluate_matrix(basis, data.numerator) @ beta
    return float(
        0.5 * np.mean(r_den * r_den) - np.mean(r_num) + 0.5 * lam * np.dot(beta, beta)
    )


def objective_gradient(fit_result: LsifFit, beta: np.ndarray) -> np.ndarray:
    """Analytic gradient (H + lambda I) beta - h of the empirical objective."""
    beta = np.asarray(beta, dtype=float)
    return fit_result.H_hat @ beta + fit_result.lam * beta - fit_result.h_hat


# ---------------------------------------------------------------------------
# Built-in bases


def constant_basis(dimension_in: int) -> Basis:
    def evaluate(points):
        pts = np.asarray(points, dtype=float)
        p = _as_points(pts, dimension_in)
        if pts.ndim <= 1 and len(p) == 1:
            return np.ones(1)
        return np.ones((len(p), 1))

    return Basis(dimension=1, evaluate=evaluate)


def monomial_exponents(dimension_in: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree <= degree, constant first."""
    if not 0 <= degree <= 3:
        raise ValueError("degree must be in 0..3")
    exps = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dimension_in), total):
            e = [0] * dimension_in
            for j in combo:
                e[j] += 1
            exps.append(tuple(e))
    return exps


def polynomial_feature_matrix(points: np.ndarray, degree: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    exps = monomial_exponents(pts.shape[1], degree)
    cols = [np.prod(pts**np.array(e), axis=1) for e in exps]
    return np.column_stack(cols)


def polynomial_basis(dimension_in: int, degree: int) -> Basis:
    """All monomials of total degree <= degree (degree at most 3)."""
    b = len(monomial_exponents(dimension_in, degree))

    def evaluate(points):
        pts = np.asarray(points, dtype=float)
        p = _as_points(pts, dimension_in)
        out = polynomial_feature_matrix(p, degree)
        if pts.ndim <= 1 and len(p) == 1:
            return out[0]
        return out

    return Basis(dimension=b, evaluate=evaluate)


def gaussian_grid_basis(points: np.ndarray, per_dim: int = 4, bandwidth: float | None = None) -> Basis:
    """Gaussian bumps centered on a regular grid over the point cloud's box."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    axes = [np.linspace(lo[k], hi[k], per_dim) for k in range(pts.shape[1])]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.column_stack([m.ravel() for m in mesh])
    if bandwidth is None:
        span = float(np.mean(hi - lo))
        bandwidth = max(span / per_dim, 1e-8)
    inv_two_sq = 1.0 / (2.0 * bandwidth * bandwidth)

    def evaluate(qpoints):
        q = np.asarray(qpoints, dtype=float)
        q2 = _as_points(q, centers.shape[1])
        sq = _sq_dists(q2, centers)
        out = np.exp(-sq * inv_two_sq)
        if q.ndim <= 1 and len(q2) == 1:
            return out[0]
        return out

    return Basis(dimension=len(centers), evaluate=evaluate)


def catchment_indicator(reference_points, metric: Metric | None, m: int, c) -> Basis:
    """One-dimensional matched-membership indicator anchored at ``c``.

    The feature tests whether a point and the anchor fall inside one M-NN
    catchment of the reference sample, anchoring the radius at whichever of
    the two is not a reference point:

    - at a point x that exactly equals a reference point, the feature is 1
      when dist(x, c) <= the M-th nearest-reference radius of c, so on the
      reference sample the feature picks out exactly the M nearest references
      of c (ties aside);
    - at any other point x it is 1 when dist(c, x) <= the M-th
      nearest-reference radius of x, so summed over a query sample it counts
      the points whose catchment covers c, i.e. the matched-times count.

    Both boundaries are inclusive.  The anchor itself always evaluates to 1.
    """
    metric = metric if metric is not None else EUCLIDEAN
    ref = _as_matrix(reference_points).copy()
    model = NeighborModel(ref, metric, m)
    anchor = _as_points(c, ref.shape[1])
    if anchor.shape[0] != 1:
        raise ValueError("anchor must be a single point")
    anchor_scaled = metric.scale(anchor)
    anchor_sq_radius = float(_mth_sq_radius_batch(model, anchor)[0])

    def evaluate(points):
        pts = np.asarray(points, dtype=float)
        p = _as_points(pts, ref.shape[1])
        single = pts.ndim <= 1 and len(p) == 1
        scaled = metric.scale(p)
        is_ref = (p[:, None, :] == ref[None, :, :]).all(axis=2).any(axis=1)
        out = np.zeros(len(p))
        if is_ref.any():
            sq = _sq_dists(scaled[is_ref], anchor_scaled)[:, 0]
            out[is_ref] = sq <= anchor_sq_radius
        rest = ~is_ref
        if rest.any():
            radii_sq = _mth_sq_radius_batch(model, p[rest])
            sq = _sq_dists(anchor_scaled, scaled[rest])[0]
            out[rest] = sq <= radii_sq
        if single:
            return out[:1]
        return out[:, None]

    return Basis(dimension=1, evaluate=evaluate)


def indicator_basis(data: TwoSampleData, metric: Metric | None, m: int, c) -> Basis:
    """Catchment indicator anchored at ``c`` over the denominator sample."""
    if m > data.n_denominator:
        raise ValueError(f"m={m} exceeds the denominator sample size {data.n_denominator}")
    return catchment_indicator(data.denominator, metric, m, c)


# ---------------------------------------------------------------------------
# One-step estimator and the equivalence check


def one_step_dre(data: TwoSampleData, metric: Metric | None, m: int, c) -> float:
    """Nearest-neighbor one-step ratio estimate (N0/N1) K_M(c) / M."""
    anchor = _as_points(c, data.d)
    if anchor.shape[0] != 1:
        raise ValueError("c must be a single point")
    k = int(matched_times_at(data, metric, m, anchor)[0])
    return data.n_denominator / data.n_numerator * k / m


@dataclass(frozen=True)
class Theorem1Check:
    lsif_value: float
    one_step_value: float
    gap: float


def verify_theorem1(data: TwoSampleData, metric: Metric | None, m: int, c) -> Theorem1Check:
    """Fit the indicator-basis LSIF at lambda=0 and compare with the one-step value."""
    fit_result = fit(data, indicator_basis(data, metric, m, c), lam=0.0)
    lsif_value = predict(fit_result, c)
    one_step = one_step_dre(data, metric, m, c)
    return Theorem1Check(
        lsif_value=lsif_value, one_step_value=one_step, gap=abs(lsif_value - one_step)
    )


@dataclass(frozen=True)
class Theorem1Batch:
    lsif_values: np.ndarray
    one_step_values: np.ndarray
    gaps: np.ndarray

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())


def verify_theorem1_all(data: TwoSampleData, metric: Metric | None, m: int) -> Theorem1Batch:
    """Run the indicator-LSIF vs one-step comparison at every numerator point.

    This batched path reproduces the per-point arithmetic of
    ``verify_theorem1`` exactly (same counts, same scalar Cholesky solve) but
    shares the neighbor radii across evaluation points.
    """
    if m > data.n_denominator:
        raise ValueError(f"m={m} exceeds the denominator sample size {data.n_denominator}")
    metric = metric if metric is not None else EUCLIDEAN
    den = data.denominator
    num = data.numerator
    model = NeighborModel(den, metric, m)
    radii_sq_num = _mth_sq_radius_batch(model, num)  # radius at each numerator point
    den_s = metric.scale(den)
    num_s = metric.scale(num)
    sq_num_den = _sq_dists(num_s, den_s)  # (N1, N0)
    sq_num_num = _sq_dists(num_s, num_s)  # (N1, N1)
    # anchors are the numerator points; an anchor that coincides with a
    # denominator row still gets its radius as a query, which is then 0
    num_is_ref = (num[:, None, :] == den[None, :, :]).all(axis=2).any(axis=1)

    h_counts = (sq_num_den <= radii_sq_num[:, None]).sum(axis=1)  # reference side
    covered = sq_num_num <= radii_sq_num[None, :]  # [t, j]: dist(c_t, Z_j) vs radius at Z_j
    k_counts = covered.sum(axis=1)  # matched-times count at each anchor
    if num_is_ref.any():
        # numerator points that equal a reference row take the anchor-side test
        covered = covered.copy()
        covered[:, num_is_ref] = sq_num_num[:, num_is_ref] <= radii_sq_num[:, None]

    h_mat = h_counts / data.n_denominator
    h_vec = covered.sum(axis=1) / data.n_numerator
    if np.any(h_mat == 0.0):
        raise np.linalg.LinAlgError("singular moment matrix in batched theorem check")
    # scalar Cholesky solve; LAPACK's triangular solve multiplies by the
    # reciprocal pivot, so do the same to match the per-point path bit for bit
    inv_chol = 1.0 / np.sqrt(h_mat)
    beta = h_vec * inv_chol * inv_chol
    one_step = data.n_denominator / data.n_numerator * k_counts / m
    return Theorem1Batch(
        lsif_values=beta, one_step_values=one_step, gaps=np.abs(beta - one_step)
    )
