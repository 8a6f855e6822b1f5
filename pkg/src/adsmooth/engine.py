"""Adaptive discrete smoothing driver.

Three steps: fit every individual on its own data, turn pairwise distances
between those first-stage coefficient vectors into similarity weights, then
re-fit every individual on the whole panel with individual j's rows carrying
weight ``W(i, j)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionError, ValidationError
from .estimators import (
    ConvergenceWarning,
    LassoConfig,
    WeightedSample,
    fit_individual,
    resolve_lambda,
    weighted_lasso,
    weighted_ols,
)
from .panel import CoefficientSet, PanelDataset, WeightMatrix


@dataclass(frozen=True)
class AdsConfig:
    """Smoothing settings.

    ``gamma`` is either a fixed nonnegative bandwidth or ``"median"`` for the
    median heuristic (see :func:`resolve_gamma`).
    """

    delta: float = 0.5
    gamma: Union[float, str] = "median"
    estimator: str = "ols"
    lasso_cfg: LassoConfig = field(default_factory=LassoConfig)
    refine_iterations: int = 0
    refine_tol: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValidationError(f"delta must lie in (0, 1], got {self.delta}")
        if isinstance(self.gamma, str):
            if self.gamma != "median":
                raise ValidationError(f"unknown gamma rule {self.gamma!r}")
        elif not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be finite and nonnegative, got {self.gamma}")
        if self.estimator not in ("ols", "lasso"):
            raise ValidationError(f"estimator must be 'ols' or 'lasso', got {self.estimator!r}")
        if self.refine_iterations < 0:
            raise ValidationError("refine_iterations must be >= 0")
        if not self.refine_tol > 0:
            raise ValidationError("refine_tol must be positive")


@dataclass(frozen=True)
class AdsResult:
    first_stage: CoefficientSet
    weights: WeightMatrix
    final: CoefficientSet
    gamma: float
    refinements: int = 0
    refine_converged: bool | None = None


def coef_distance(a, b) -> float:
    """Squared Euclidean distance between two coefficient vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"coefficient vectors of shapes {a.shape} and {b.shape}")
    d = a - b
    return float(d @ d)


def pairwise_distances(coefs) -> np.ndarray:
    b = coefs.coefs if isinstance(coefs, CoefficientSet) else np.asarray(coefs, dtype=float)
    diff = b[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def resolve_gamma(first_stage: CoefficientSet, cfg: AdsConfig) -> float:
    """Kernel bandwidth: the fixed value, or ln 2 over the median pairwise distance.

    Under the median heuristic the median-distance pair receives weight
    ``delta / 2``. All-identical first-stage estimates give ``gamma = 0``.
    """
    if not isinstance(cfg.gamma, str):
        return float(cfg.gamma)
    n = first_stage.n_individuals
    if n < 2:
        raise ValidationError("median heuristic needs at least two individuals")
    dist = pairwise_distances(first_stage)
    m = float(np.median(dist[np.triu_indices(n, k=1)]))
    if m <= 0.0:
        return 0.0
    return math.log(2.0) / m


def _kernel(coefs: CoefficientSet, gamma: float, delta: float) -> WeightMatrix:
    if not np.all(np.isfinite(coefs.coefs)):
        raise ValidationError("first-stage coefficients must be finite")
    w = delta * np.exp(-gamma * pairwise_distances(coefs))
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 1.0)
    return WeightMatrix(w=w, delta=delta, gamma=gamma)


def build_weight_matrix(first_stage: CoefficientSet, cfg: AdsConfig) -> WeightMatrix:
    if first_stage.n_individuals < 1:
        raise ValidationError("need at least one individual")
    if first_stage.n_individuals == 1:
        return WeightMatrix(w=np.ones((1, 1)), delta=cfg.delta, gamma=0.0)
    return _kernel(first_stage, resolve_gamma(first_stage, cfg), cfg.delta)


def first_stage_fit(data: PanelDataset, estimator: str, lasso_cfg: LassoConfig | None = None) -> CoefficientSet:
    return CoefficientSet(
        np.vstack([fit_individual(data, i, estimator, lasso_cfg) for i in range(data.n_individuals)])
    )


def smoothed_sample(data: PanelDataset, weights_row) -> WeightedSample:
    """All N*T rows, stacked by individual then period, weighted by ``weights_row[j]``."""
    n, t, k = data.design.shape
    return WeightedSample(
        rows=data.design.reshape(n * t, k),
        targets=data.response.reshape(n * t),
        obs_weights=np.repeat(np.asarray(weights_row, dtype=float), t),
    )


def effective_size(weights_row, t: int) -> float:
    """Kish effective sample size ``T * (sum w)^2 / sum w^2`` of one weight row.

    This is the size at which the noise in the weighted Lasso score matches
    that of an unweighted sample; it equals ``T`` when only the individual's
    own rows carry weight and lies between ``T`` and ``N * T`` otherwise.
    """
    w = np.asarray(weights_row, dtype=float)
    return t * float(w.sum()) ** 2 / float(w @ w)


def second_stage_fit(data: PanelDataset, weights: WeightMatrix, cfg: AdsConfig) -> CoefficientSet:
    out = np.empty((data.n_individuals, data.n_covariates + 1))
    t = data.n_periods
    for i in range(data.n_individuals):
        row = weights.w[i]
        keep = row > 0
        # zero-weight individuals contribute nothing; dropping them keeps the solve small
        sub = PanelDataset(design=data.design[keep], response=data.response[keep])
        sample = smoothed_sample(sub, row[keep])
        if cfg.estimator == "ols":
            out[i] = weighted_ols(sample)
        else:
            lam = resolve_lambda(sample, cfg.lasso_cfg, "second", effective_size(row, t))
            fit = weighted_lasso(sample, cfg.lasso_cfg, lam)
            if not fit.converged:
                warnings.warn(
                    f"second-stage lasso for individual {i} stopped after {fit.sweeps} sweeps", ConvergenceWarning
                )
            out[i] = fit.coef
    return CoefficientSet(out)


def ads_fit(data: PanelDataset, cfg: AdsConfig) -> AdsResult:
    """Run the smoothing estimator on ``data``.

    With ``cfg.refine_iterations > 0`` the weights are rebuilt from the
    smoothed coefficients (keeping the first-stage bandwidth) and the second
    stage repeated, stopping once no weight moves by more than
    ``cfg.refine_tol``.
    """
    first = first_stage_fit(data, cfg.estimator, cfg.lasso_cfg)
    weights = build_weight_matrix(first, cfg)
    gamma = weights.gamma
    final = second_stage_fit(data, weights, cfg)
    if data.n_individuals == 1 or cfg.refine_iterations == 0:
        return AdsResult(first, weights, final, gamma)

    done = 0
    converged = False
    for _ in range(cfg.refine_iterations):
        rebuilt = _kernel(final, gamma, cfg.delta)
        if np.max(np.abs(rebuilt.w - weights.w)) < cfg.refine_tol:
            converged = True
            break
        weights = rebuilt
        final = second_stage_fit(data, weights, cfg)
        done += 1
    if not converged:
        rebuilt = _kernel(final, gamma, cfg.delta)
        converged = bool(np.max(np.abs(rebuilt.w - weights.w)) < cfg.refine_tol)
    return AdsResult(first, weights, final, gamma, refinements=done, refine_converged=converged)


def naive_fit(data: PanelDataset) -> CoefficientSet:
    """Intercept-only model per individual: the mean of its responses."""
    coefs = np.zeros((data.n_individuals, data.n_covariates + 1))
    coefs[:, 0] = data.response.mean(axis=1)
    return CoefficientSet(coefs)
