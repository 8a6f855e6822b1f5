"""Weighted per-individual estimators: least squares and l1-penalised least squares.

Both estimators work on a :class:`WeightedSample`, a stack of design rows with
one nonnegative weight per row. The Lasso objective is normalised by the
total weight,

    (1 / (2 * sum(w))) * sum_k w_k (y_k - x_k' b)^2 + lam * sum_j |b_j|,

so that with unit weights on T rows it reduces to the usual ``1/(2T)`` loss
and with weights ``W(i, j)`` replicated over T periods it carries the
``1/(2 T sum_j W(i, j))`` normaliser of the smoothed second stage.

The solver is cyclic coordinate descent on the weighted Gram matrix, so a fit
costs O(k^2) per sweep regardless of the number of stacked rows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from numba import njit

from .errors import DegenerateInputError, ValidationError
from .panel import PanelDataset

PINV_RCOND = 1e-10


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WeightedSample:
    """Stacked design rows, targets and per-row weights."""

    rows: np.ndarray
    targets: np.ndarray
    obs_weights: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        weights = np.asarray(self.obs_weights, dtype=float)
        if rows.ndim != 2:
            raise ValidationError(f"rows must be 2-d, got shape {rows.shape}")
        if targets.shape != (rows.shape[0],) or weights.shape != (rows.shape[0],):
            raise ValidationError(
                f"targets {targets.shape} and weights {weights.shape} must match {rows.shape[0]} rows"
            )
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(targets)) and np.all(np.isfinite(weights))):
            raise ValidationError("weighted sample contains non-finite values")
        if np.any(weights < 0):
            raise ValidationError("observation weights must be nonnegative")
        if not np.any(weights > 0):
            raise DegenerateInputError("all observation weights are zero")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "obs_weights", weights)

    @classmethod
    def unit(cls, rows, targets) -> "WeightedSample":
        rows = np.asarray(rows, dtype=float)
        return cls(rows, targets, np.ones(rows.shape[0]))

    @property
    def n_coef(self) -> int:
        return self.rows.shape[1]

    @cached_property
    def total_weight(self) -> float:
        return float(self.obs_weights.sum())

    @cached_property
    def moments(self):
        """Weight-normalised Gram matrix, cross-moment vector and mean squared target."""
        w = self.obs_weights / self.total_weight
        xw = self.rows * w[:, None]
        gram = self.rows.T @ xw
        cross = xw.T @ self.targets
        yy = float(w @ self.targets**2)
        return gram, cross, yy

    def weighted_std(self) -> float:
        w = self.obs_weights / self.total_weight
        mean = float(w @ self.targets)
        return math.sqrt(max(float(w @ (self.targets - mean) ** 2), 0.0))

    def residual_std(self, beta) -> float:
        w = self.obs_weights / self.total_weight
        r = self.targets - self.rows @ beta
        return math.sqrt(float(w @ r**2))


@dataclass(frozen=True)
class LassoConfig:
    """Settings for the weighted Lasso.

    ``penalty`` is either ``"plugin"`` (data-driven loading, see
    :func:`plugin_lambda`) or a fixed nonnegative float.
    """

    penalty: Union[str, float] = "plugin"
    plugin_constant: float = 1.1
    max_sweeps: int = 1000
    tol: float = 1e-7
    penalize_intercept: bool = True
    standardize: bool = False

    def __post_init__(self):
        if isinstance(self.penalty, str):
            if self.penalty != "plugin":
                raise ValidationError(f"unknown penalty rule {self.penalty!r}")
        elif not (float(self.penalty) >= 0.0 and math.isfinite(float(self.penalty))):
            raise ValidationError(f"fixed penalty must be a finite nonnegative number, got {self.penalty}")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if not self.plugin_constant > 0:
            raise ValidationError("plugin_constant must be positive")

    @property
    def is_plugin(self) -> bool:
        return isinstance(self.penalty, str)


@dataclass(frozen=True)
class LassoFit:
    coef: np.ndarray
    lam: float
    converged: bool
    sweeps: int
    objective_trace: np.ndarray = field(repr=False)


def weighted_ols(sample: WeightedSample) -> np.ndarray:
    """Weighted least squares, minimum-norm when the weighted Gram matrix is singular."""
    sw = np.sqrt(sample.obs_weights)
    beta, *_ = np.linalg.lstsq(sample.rows * sw[:, None], sample.targets * sw, rcond=PINV_RCOND)
    return beta


def soft_threshold(z: float, kappa: float) -> float:
    if kappa < 0:
        raise ValidationError(f"threshold must be nonnegative, got {kappa}")
    return math.copysign(max(abs(z) - kappa, 0.0), z)


@njit(cache=True)
def _quad_objective(gram, cross, yy, lam, beta):
    k = beta.shape[0]
    quad = 0.0
    for a in range(k):
        s = 0.0
        for b in range(k):
            s += gram[a, b] * beta[b]
        quad += beta[a] * s
    val = 0.5 * quad + 0.5 * yy
    for a in range(k):
        val += lam[a] * abs(beta[a]) - cross[a] * beta[a]
    return val


@njit(cache=True)
def _cd_gram(gram, cross, yy, lam, beta, tol, max_sweeps, trace):
    """Cyclic coordinate descent; updates ``beta`` in place.

    Returns (sweeps, converged). ``trace[s]`` holds the objective after s sweeps.
    """
    k = beta.shape[0]
    # grad[j] = cross[j] - (gram @ beta)[j], the residual correlation of column j
    grad = cross.copy()
    for a in range(k):
        for b in range(k):
            grad[a] -= gram[a, b] * beta[b]
    trace[0] = _quad_objective(gram, cross, yy, lam, beta)
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(k):
            gjj = gram[j, j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = grad[j] + gjj * old
                mag = abs(z) - lam[j]
                if mag > 0.0:
                    new = mag / gjj if z > 0.0 else -mag / gjj
                else:
                    new = 0.0
            d = new - old
            if d != 0.0:
                beta[j] = new
                for a in range(k):
                    grad[a] -= gram[a, j] * d
                if abs(d) > max_change:
                    max_change = abs(d)
        trace[sweep + 1] = _quad_objective(gram, cross, yy, lam, beta)
        if max_change < tol:
            return sweep + 1, True
    return max_sweeps, False


def _scales(gram: np.ndarray, standardize: bool) -> np.ndarray:
    k = gram.shape[0]
    scale = np.ones(k)
    if standardize:
        second = np.sqrt(np.clip(np.diag(gram), 0.0, None))
        scale[1:] = np.where(second[1:] > 0, second[1:], 1.0)
    return scale


def _lasso_from_moments(gram, cross, yy, lam, cfg: LassoConfig, warm=None) -> LassoFit:
    k = gram.shape[0]
    scale = _scales(gram, cfg.standardize)
    g = gram / np.outer(scale, scale)
    c = cross / scale
    lam_vec = np.full(k, float(lam))
    if not cfg.penalize_intercept:
        lam_vec[0] = 0.0
    beta = np.zeros(k) if warm is None else np.asarray(warm, dtype=float) * scale
    trace = np.empty(cfg.max_sweeps + 1)
    sweeps, converged = _cd_gram(
        np.ascontiguousarray(g), np.ascontiguousarray(c), float(yy), lam_vec, beta, float(cfg.tol), int(cfg.max_sweeps), trace
    )
    return LassoFit(
        coef=beta / scale,
        lam=float(lam),
        converged=bool(converged),
        sweeps=int(sweeps),
        objective_trace=trace[: sweeps + 1].copy(),
    )


def weighted_lasso(sample: WeightedSample, cfg: LassoConfig, lam: float) -> LassoFit:
    """Weighted Lasso by cyclic coordinate descent at a fixed penalty level.

    Non-convergence within ``cfg.max_sweeps`` is reported via
    ``LassoFit.converged`` rather than raised.
    """
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise ValidationError(f"penalty must be a finite nonnegative number, got {lam}")
    gram, cross, yy = sample.moments
    return _lasso_from_moments(gram, cross, yy, lam, cfg)


def lasso_kkt_violation(sample: WeightedSample, beta, lam: float, penalize_intercept: bool = True) -> float:
    """Largest violation of the Lasso optimality conditions at ``beta``.

    With ``g = X'W(y - X beta) / sum(w)``: zero coordinates need ``|g_j| <= lam``
    and nonzero ones need ``g_j == lam * sign(beta_j)``.
    """
    gram, cross, _ = sample.moments
    beta = np.asarray(beta, dtype=float)
    g = cross - gram @ beta
    lam_vec = np.full(beta.shape[0], float(lam))
    if not penalize_intercept:
        lam_vec[0] = 0.0
    nz = beta != 0
    viol = np.where(nz, np.abs(g - lam_vec * np.sign(beta)), np.clip(np.abs(g) - lam_vec, 0.0, None))
    return float(viol.max())


def lasso_objective(sample: WeightedSample, beta, lam: float, penalize_intercept: bool = True) -> float:
    w = sample.obs_weights / sample.total_weight
    r = sample.targets - sample.rows @ np.asarray(beta, dtype=float)
    pen = np.abs(beta)
    if not penalize_intercept:
        pen = pen[1:]
    return 0.5 * float(w @ r**2) + lam * float(np.sum(pen))


def null_lambda(sample: WeightedSample) -> float:
    """Smallest penalty at which the all-zero vector is optimal (intercept penalised)."""
    _, cross, _ = sample.moments
    return float(np.max(np.abs(cross)))


def lambda_rule(sigma: float, p: int, effective_n: float, constant: float = 1.1) -> float:
    """``constant * sigma * sqrt(2 log(p + 1) / effective_n)``."""
    if p < 1:
        raise ValidationError("plug-in penalty needs at least one covariate (p >= 1)")
    if not effective_n > 0:
        raise ValidationError(f"effective sample size must be positive, got {effective_n}")
    return constant * sigma * math.sqrt(2.0 * math.log(p + 1) / effective_n)


def refit_sigma(sample: WeightedSample, beta, effective_n: float) -> float:
    """Noise level from a least-squares refit on the support of ``beta``.

    The intercept column is always kept. The weighted residual variance is
    inflated by ``n / (n - k)`` for the k refitted columns; when the support
    is too large for that correction the raw residual spread of ``beta`` is
    used instead.
    """
    support = np.flatnonzero(np.asarray(beta) != 0)
    support = np.union1d(support, [0])
    k = support.size
    if effective_n - k < 1:
        return sample.residual_std(beta)
    sub = WeightedSample(sample.rows[:, support], sample.targets, sample.obs_weights)
    refit = np.zeros(sample.n_coef)
    refit[support] = weighted_ols(sub)
    return sample.residual_std(refit) * math.sqrt(effective_n / (effective_n - k))


def plugin_lambda(sample: WeightedSample, cfg: LassoConfig, stage: str, effective_n: float) -> float:
    """Two-pass plug-in penalty loading.

    The noise level starts at the weighted standard deviation of the targets.
    A pilot Lasso at the resulting penalty selects a support, the noise level
    is re-estimated from a least-squares refit on that support (see
    :func:`refit_sigma`), and the loading is recomputed from it.
    """
    if stage not in ("first", "second"):
        raise ValidationError(f"stage must be 'first' or 'second', got {stage!r}")
    p = sample.n_coef - 1
    c = cfg.plugin_constant
    lam0 = lambda_rule(sample.weighted_std(), p, effective_n, c)
    gram, cross, yy = sample.moments
    pilot = _lasso_from_moments(gram, cross, yy, lam0, cfg)
    return lambda_rule(refit_sigma(sample, pilot.coef, effective_n), p, effective_n, c)


def resolve_lambda(sample: WeightedSample, cfg: LassoConfig, stage: str, effective_n: float) -> float:
    if cfg.is_plugin:
        return plugin_lambda(sample, cfg, stage, effective_n)
    return float(cfg.penalty)


def individual_sample(data: PanelDataset, i: int) -> WeightedSample:
    if not 0 <= i < data.n_individuals:
        raise IndexError(f"individual index {i} out of range for N={data.n_individuals}")
    return WeightedSample.unit(data.design[i], data.response[i])


def fit_individual(data: PanelDataset, i: int, estimator: str, cfg: LassoConfig | None = None) -> np.ndarray:
    """Fit individual ``i`` on its own T observations only."""
    sample = individual_sample(data, i)
    if estimator == "ols":
        return weighted_ols(sample)
    if estimator == "lasso":
        cfg = cfg or LassoConfig()
        lam = resolve_lambda(sample, cfg, "first", data.n_periods)
        fit = weighted_lasso(sample, cfg, lam)
        if not fit.converged:
            warnings.warn(f"lasso for individual {i} stopped after {fit.sweeps} sweeps", ConvergenceWarning)
        return fit.coef
    raise ValidationError(f"unknown estimator {estimator!r}")
