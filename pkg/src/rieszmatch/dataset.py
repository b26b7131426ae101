"""Data models, CSV ingestion, and synthetic data-generating processes.

Observational data is a sample of (covariates, binary treatment, outcome)
triples.  Two-sample data holds a denominator sample and a numerator sample
for density-ratio estimation.  The built-in generators carry their own ground
truth (true ATE, analytic density ratio) so estimators can be tested against
known answers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from .constants import LOGISTIC_TRUE_ATE


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ObservationalDataset:
    """n units of (covariates, treatment flag, outcome); immutable after construction."""

    covariates: np.ndarray  # (n, d)
    treatment: np.ndarray   # (n,) integers in {0, 1}
    outcome: np.ndarray     # (n,)

    def __post_init__(self):
        x = np.array(self.covariates, dtype=float, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("covariates must be a nonempty n x d matrix")
        d_raw = np.asarray(self.treatment)
        if d_raw.shape != (x.shape[0],):
            raise ValueError("treatment must be a length-n vector")
        if not np.all(np.isin(d_raw, (0, 1))):
            raise ValueError("non-binary treatment")
        d = d_raw.astype(np.int64)
        y = np.array(self.outcome, dtype=float, copy=True)
        if y.shape != (x.shape[0],):
            raise ValueError("outcome must be a length-n vector")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("non-finite value in dataset")
        if d.sum() == 0 or d.sum() == len(d):
            raise ValueError("empty treatment arm")
        x.setflags(write=False)
        d.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "treatment", d)
        object.__setattr__(self, "outcome", y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated


@dataclass(frozen=True)
class TwoSampleData:
    """Denominator and numerator samples for density-ratio estimation."""

    denominator: np.ndarray  # (N0, d)
    numerator: np.ndarray    # (N1, d)

    def __post_init__(self):
        den = np.array(self.denominator, dtype=float, copy=True)
        num = np.array(self.numerator, dtype=float, copy=True)
        if den.ndim == 1:
            den = den[:, None]
        if num.ndim == 1:
            num = num[:, None]
        if den.ndim != 2 or num.ndim != 2 or len(den) == 0 or len(num) == 0:
            raise ValueError("both samples must be nonempty 2-d arrays")
        if den.shape[1] != num.shape[1]:
            raise ValueError("samples must share the column dimension")
        if not (np.all(np.isfinite(den)) and np.all(np.isfinite(num))):
            raise ValueError("non-finite value in sample")
        den.setflags(write=False)
        num.setflags(write=False)
        object.__setattr__(self, "denominator", den)
        object.__setattr__(self, "numerator", num)

    @property
    def n_denominator(self) -> int:
        return self.denominator.shape[0]

    @property
    def n_numerator(self) -> int:
        return self.numerator.shape[0]

    @property
    def d(self) -> int:
        return self.denominator.shape[1]


@dataclass(frozen=True)
class DgpSpec:
    """A synthetic observational design with known ground truth.

    ``propensity`` and the two outcome-mean functions take an (n, d) matrix
    and return a length-n vector.  ``covariate_sampler`` draws the covariate
    law: ``sampler(rng, n) -> (n, d)``.
    """

    dimension: int
    propensity: Callable[[np.ndarray], np.ndarray]
    outcome_mean_treated: Callable[[np.ndarray], np.ndarray]
    outcome_mean_control: Callable[[np.ndarray], np.ndarray]
    noise_sd: float
    overlap_epsilon: float
    true_ate: float
    covariate_sampler: Callable[[np.random.Generator, int], np.ndarray]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if not 0 < self.overlap_epsilon < 0.5:
            raise ValueError("overlap_epsilon must lie in (0, 1/2)")


def logistic_dgp(dimension: int = 2, epsilon: float = 0.1, noise_sd: float = 1.0) -> DgpSpec:
    """Built-in smooth overlap-satisfying design with true ATE = 1.

    X ~ Uniform[-1, 1]^d, e(x) = eps + (1 - 2 eps) sigmoid(2 x1),
    mu1(x) = 1 + x1 + x2 (the x2 term is dropped when d = 1), mu0(x) = x1.
    """

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(n, dimension))

    def propensity(x: np.ndarray) -> np.ndarray:
        return epsilon + (1.0 - 2.0 * epsilon) * expit(2.0 * x[:, 0])

    def mu1(x: np.ndarray) -> np.ndarray:
        if dimension >= 2:
            return 1.0 + x[:, 0] + x[:, 1]
        return 1.0 + x[:, 0]

    def mu0(x: np.ndarray) -> np.ndarray:
        return x[:, 0].copy()

    return DgpSpec(
        dimension=dimension,
        propensity=propensity,
        outcome_mean_treated=mu1,
        outcome_mean_control=mu0,
        noise_sd=noise_sd,
        overlap_epsilon=epsilon,
        true_ate=LOGISTIC_TRUE_ATE,
        covariate_sampler=sampler,
    )


BUILTIN_DGPS = {"logistic": logistic_dgp}


def builtin_dgp(name: str, **kwargs) -> DgpSpec:
    try:
        factory = BUILTIN_DGPS[name]
    except KeyError:
        raise ValueError(f"unknown DGP {name!r}; available: {sorted(BUILTIN_DGPS)}") from None
    return factory(**kwargs)


def generate(spec: DgpSpec, n: int, seed: int) -> ObservationalDataset:
    """Draw a reproducible observational dataset from ``spec``.

    Draw order is fixed (covariates, treatment uniforms, outcome noise) so a
    given seed always yields a bit-identical dataset.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    x = np.asarray(spec.covariate_sampler(rng, n), dtype=float)
    if x.shape != (n, spec.dimension):
        raise ValueError("covariate_sampler returned the wrong shape")
    e = np.asarray(spec.propensity(x), dtype=float)
    if e.shape != (n,) or np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ValueError("propensity must map into (0, 1)")
    treat = (rng.random(n) < e).astype(np.int64)
    if treat.sum() in (0, n):
        raise ValueError("empty treatment arm after generation; increase n")
    mu = np.where(
        treat == 1,
        np.asarray(spec.outcome_mean_treated(x), dtype=float),
        np.asarray(spec.outcome_mean_control(x), dtype=float),
    )
    y = mu + spec.noise_sd * rng.standard_normal(n)
    return ObservationalDataset(covariates=x, treatment=treat, outcome=y)


@dataclass(frozen=True)
class DensitySpec:
    """Product density on R^d: per-dimension uniform boxes or Gaussians.

    For ``family="uniform"``, ``loc`` holds lower bounds and ``scale`` widths;
    for ``family="gaussian"``, ``loc`` holds means and ``scale`` standard
    deviations.
    """

    family: str
    loc: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian"):
            raise ValueError(f"unsupported density family: {self.family!r}")
        loc = _readonly(np.atleast_1d(self.loc))
        scale = _readonly(np.atleast_1d(self.scale))
        if loc.shape != scale.shape or loc.ndim != 1:
            raise ValueError("loc and scale must be 1-d arrays of equal length")
        if np.any(scale <= 0):
            raise ValueError("scale entries must be positive")
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @property
    def dimension(self) -> int:
        return self.loc.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "uniform":
            return self.loc + self.scale * rng.random((n, self.dimension))
        return self.loc + self.scale * rng.standard_normal((n, self.dimension))

    def density(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        if self.family == "uniform":
            inside = (pts >= self.loc) & (pts <= self.loc + self.scale)
            return np.where(inside.all(axis=1), 1.0 / np.prod(self.scale), 0.0)
        z = (pts - self.loc) / self.scale
        norm = np.prod(self.scale) * (2.0 * np.pi) ** (self.dimension / 2.0)
        return np.exp(-0.5 * (z * z).sum(axis=1)) / norm


def uniform_density(low, high) -> DensitySpec:
    low = np.atleast_1d(np.asarray(low, dtype=float))
    high = np.atleast_1d(np.asarray(high, dtype=float))
    return DensitySpec(family="uniform", loc=low, scale=high - low)


def gaussian_density(mean, sd) -> DensitySpec:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.broadcast_to(np.asarray(sd, dtype=float), mean.shape).copy()
    return DensitySpec(family="gaussian", loc=mean, scale=sd)


def density_ratio(spec_num: DensitySpec, spec_den: DensitySpec, points: np.ndarray) -> np.ndarray:
    """Analytic numerator/denominator density ratio; test oracle for built-ins."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return spec_num.density(points) / spec_den.density(points)


def generate_two_sample(
    spec_num: DensitySpec,
    spec_den: DensitySpec,
    n_denominator: int,
    n_numerator: int,
    seed: int,
) -> TwoSampleData:
    """Draw the denominator sample, then the numerator sample, from one stream."""
    if n_denominator < 1 or n_numerator < 1:
        raise ValueError("both sample sizes must be >= 1")
    if spec_num.dimension != spec_den.dimension:
        raise ValueError("density specs must share the dimension")
    rng = np.random.default_rng(seed)
    den = spec_den.sample(rng, n_denominator)
    num = spec_num.sample(rng, n_numerator)
    return TwoSampleData(denominator=den, numerator=num)


_EXPECTED_TAIL = ["d", "y"]


def _parse_header(header: list[str], path: str) -> int:
    if header is None:
        raise ValueError(f"{path}: missing header row")
    if len(header) < 3 or header[-2:] != _EXPECTED_TAIL:
        raise ValueError(f"{path}: malformed header; expected x0,...,x{{d-1}},d,y")
    d = len(header) - 2
    expected = [f"x{i}" for i in range(d)]
    if header[:-2] != expected:
        raise ValueError(f"{path}: malformed header; expected x0,...,x{{d-1}},d,y")
    return d


def load_csv(path) -> ObservationalDataset:
    """Read an observational dataset; row numbers in errors count file lines."""
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        d = _parse_header(header, str(path))
        width = d + 2
        xs, ds, ys = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(
                    f"malformed row at row {line_no}: expected {width} fields, got {len(row)}"
                )
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise ValueError(f"malformed row at row {line_no}: unparseable number") from None
            if not all(np.isfinite(values)):
                raise ValueError(f"non-finite value at row {line_no}")
            if values[d] not in (0.0, 1.0):
                raise ValueError(f"non-binary treatment at row {line_no}")
            xs.append(values[:d])
            ds.append(int(values[d]))
            ys.append(values[d + 1])
    if not ds:
        raise ValueError(f"{path}: empty treatment arm (no data rows)")
    n_treated = sum(ds)
    if n_treated == 0 or n_treated == len(ds):
        raise ValueError(f"{path}: empty treatment arm")
    return ObservationalDataset(
        covariates=np.array(xs, dtype=float),
        treatment=np.array(ds, dtype=np.int64),
        outcome=np.array(ys, dtype=float),
    )


def save_csv(dataset: ObservationalDataset, path) -> None:
    """Write a dataset so that load_csv(save_csv(ds)) reproduces it bit for bit."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(dataset.d)] + _EXPECTED_TAIL)
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.covariates[i]]
                + [str(int(dataset.treatment[i])), repr(float(dataset.outcome[i]))]
            )


def load_points_csv(path) -> np.ndarray:
    """Read a plain point cloud with header x0,...,x{d-1}."""
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or header != [f"x{i}" for i in range(len(header))] or not header:
            raise ValueError(f"{path}: malformed header; expected x0,...,x{{d-1}}")
        d = len(header)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != d:
                raise ValueError(
                    f"malformed row at row {line_no}: expected {d} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"malformed row at row {line_no}: unparseable number") from None
            if not all(np.isfinite(rows[-1])):
                raise ValueError(f"non-finite value at row {line_no}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def save_points_csv(points: np.ndarray, path) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(pts.shape[1])])
        for row in pts:
            writer.writerow([repr(float(v)) for v in row])
