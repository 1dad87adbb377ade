"""Built-in target models with analytic gradients, plus CSV data ingestion.

All log-densities are kernels (additive constants dropped). Gradients are
hand-derived and covered by finite-difference checks in the test suite and
the ``gradcheck`` CLI command.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from scipy.special import expit

from .flow import TargetModel

__all__ = [
    "std_gaussian",
    "gaussian_full",
    "funnel",
    "smile",
    "standardized_t",
    "standardized_chi2",
    "logistic_regression",
    "load_design_matrix",
    "make_target",
    "REGISTRY",
]


def std_gaussian(d: int) -> TargetModel:
    """N(0, I_d)."""
    return TargetModel(
        dim_d=d,
        grad_log_density=lambda q: -q,
        log_density=lambda q: -0.5 * float(q @ q),
        name=f"std_gaussian_{d}",
    )


def gaussian_full(mu: np.ndarray, sigma: np.ndarray) -> TargetModel:
    """N(mu, Sigma) with dense SPD covariance."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    prec = np.linalg.inv(sigma)
    prec = 0.5 * (prec + prec.T)

    def logd(q):
        r = q - mu
        return -0.5 * float(r @ (prec @ r))

    return TargetModel(
        dim_d=mu.shape[0],
        grad_log_density=lambda q: -(prec @ (q - mu)),
        log_density=logd,
        name=f"gaussian_{mu.shape[0]}d",
    )


def funnel() -> TargetModel:
    """q1 ~ N(0,1), q2 | q1 ~ N(0, exp(3 q1)).

    The log-kernel keeps the q1-dependent normalization term, which is what
    produces the pathological neck: -q1^2/2 - (3/2) q1 - q2^2 exp(-3 q1)/2.
    """

    def _exp3(x: float) -> float:
        # exp without numpy overflow warnings; inf signals divergence
        return math.exp(x) if x < 709.0 else math.inf

    def logd(q):
        q1, q2 = float(q[0]), float(q[1])
        e = _exp3(-3.0 * q1)
        return -0.5 * q1 * q1 - 1.5 * q1 - 0.5 * q2 * q2 * e

    def grad(q):
        q1, q2 = float(q[0]), float(q[1])
        e = _exp3(-3.0 * q1)
        return np.array([-q1 - 1.5 + 1.5 * q2 * q2 * e, -q2 * e])

    return TargetModel(dim_d=2, grad_log_density=grad, log_density=logd,
                       name="funnel")


def smile(d: int = 11, sd: float = 0.5) -> TargetModel:
    """q1 ~ N(0,1), q_k | q1 ~ N(q1^2, sd^2) for k = 2..d."""
    inv_var = 1.0 / (sd * sd)

    def logd(q):
        r = q[1:] - q[0] ** 2
        return -0.5 * q[0] ** 2 - 0.5 * inv_var * float(r @ r)

    def grad(q):
        q1 = float(q[0])
        r = q[1:] - q1 * q1
        g = np.empty(d)
        g[0] = -q1 + 2.0 * inv_var * q1 * float(r.sum())
        g[1:] = -inv_var * r
        return g

    return TargetModel(dim_d=d, grad_log_density=grad, log_density=logd,
                       name="smile")


def standardized_t(nu: float) -> TargetModel:
    """Student-t with nu > 2 dof, scaled to unit variance."""
    if nu <= 2:
        raise ValueError("standardized t needs nu > 2")

    def logd(q):
        return -0.5 * (nu + 1.0) * np.log1p(q[0] ** 2 / (nu - 2.0))

    def grad(q):
        return np.array([-(nu + 1.0) * q[0] / (nu - 2.0 + q[0] ** 2)])

    return TargetModel(dim_d=1, grad_log_density=grad, log_density=logd,
                       name=f"std_t_{nu:g}")


def standardized_chi2(k: float) -> TargetModel:
    """(X - k)/sqrt(2k) for X ~ chi-square_k; zero mean, unit variance.

    Support is x > -sqrt(k/2); at or below the boundary the log-density is
    -inf and the gradient non-finite, which the sampler treats as a
    divergence.
    """
    c = np.sqrt(2.0 * k)

    def logd(q):
        s = k + c * q[0]
        if s <= 0.0:
            return -np.inf
        return (0.5 * k - 1.0) * np.log(s) - 0.5 * s

    def grad(q):
        s = k + c * q[0]
        if s <= 0.0:
            return np.array([np.nan])
        return np.array([(0.5 * k - 1.0) * c / s - 0.5 * c])

    return TargetModel(dim_d=1, grad_log_density=grad, log_density=logd,
                       name=f"std_chi2_{k:g}")


def logistic_regression(X: np.ndarray, y: np.ndarray,
                        prior_var: float = 100.0) -> TargetModel:
    """Bernoulli-logit regression with N(0, prior_var I) coefficient prior."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("design/response dimensions do not match")
    inv_pv = 1.0 / prior_var

    def logd(beta):
        eta = X @ beta
        # y'eta - sum log(1 + e^eta), evaluated stably
        return float(y @ eta - np.logaddexp(0.0, eta).sum()
                     - 0.5 * inv_pv * (beta @ beta))

    def grad(beta):
        eta = X @ beta
        return X.T @ (y - expit(eta)) - inv_pv * beta

    return TargetModel(dim_d=X.shape[1], grad_log_density=grad,
                       log_density=logd, name="logistic")


class DataFormatError(ValueError):
    """Raised for malformed design-matrix files, with row context."""


def load_design_matrix(path: str | Path,
                       standardize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Read a CSV of numeric covariates plus a final binary response column.

    The file must have one header row. Non-constant covariates are
    standardized to mean 0 / sd 1 (changes only the parameterization), and
    an intercept column of ones is appended as the last column.
    """
    path = Path(path)
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        width = len(header)
        if width < 2:
            raise DataFormatError(f"{path}: need at least one covariate and a response")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {width}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path}: row {lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    data = np.array(rows)
    X, y = data[:, :-1], data[:, -1]
    bad = np.nonzero((y != 0.0) & (y != 1.0))[0]
    if bad.size:
        raise DataFormatError(
            f"{path}: row {bad[0] + 2}: response must be 0 or 1, got {y[bad[0]]}")
    if standardize:
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        keep = sd > 0.0
        X = X.copy()
        X[:, keep] = (X[:, keep] - mean[keep]) / sd[keep]
    X = np.hstack([X, np.ones((X.shape[0], 1))])
    return X, y


REGISTRY = {
    "std_gaussian": lambda dim=1, **_: std_gaussian(int(dim)),
    "gaussian": lambda dim=1, **_: std_gaussian(int(dim)),
    "funnel": lambda **_: funnel(),
    "smile": lambda dim=11, **_: smile(int(dim)),
    "t": lambda nu=20, **_: standardized_t(float(nu)),
    "chi2": lambda k=50, **_: standardized_chi2(float(k)),
}


def make_target(name: str, data: str | None = None, **params) -> TargetModel:
    """Build a registry target by name; ``logistic`` requires a data path."""
    if name == "logistic":
        if data is None:
            raise ValueError("logistic model requires a data file path")
        X, y = load_design_matrix(data)
        return logistic_regression(X, y, prior_var=float(params.get("prior_var", 100.0)))
    if name not in REGISTRY:
        known = ", ".join(sorted([*REGISTRY, "logistic"]))
        raise ValueError(f"unknown model {name!r}; known models: {known}")
    return REGISTRY[name](**params)
