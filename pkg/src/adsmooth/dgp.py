"""Synthetic heterogeneous panels.

Four coefficient processes:

* DGP 1 -- every coefficient component is equicorrelated across individuals
  (correlation ``beta_cor``), components independent of each other.
* DGP 2 -- ``beta_i = 1 + (a, a^2, -a, -a^2, a/1, a/2, a/3, ...)`` with
  ``a ~ U(0, 1)`` drawn per individual.
* DGP 3 / DGP 4 -- sparse versions of DGP 2 / DGP 1: the first ``s + 1``
  components follow the dense rule, the remaining ``p - s`` are zero.

Covariates are standard normal, either independent or with Toeplitz
covariance ``0.5 ** |k - l|``; a leading column of ones is the intercept.

Random streams
--------------
Each draw uses its own Philox generator keyed by
``SeedSequence(seed, spawn_key=(purpose, individual))``. Purposes are
coefficients, train design, train noise, test design and test noise, so
changing T leaves the coefficient draw untouched and train/test never share
a stream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ValidationError
from .panel import CoefficientSet, PanelDataset

TOEPLITZ_RHO = 0.5

_BETA, _TRAIN_X, _TRAIN_EPS, _TEST_X, _TEST_EPS = range(5)


@dataclass(frozen=True)
class DgpConfig:
    dgp: int
    n: int
    t: int
    p: int
    s: Optional[int] = None
    beta_cor: Optional[float] = None
    design: str = "iid"
    noise_sd: float = 1.0
    seed: int = 0
    # 0: the first offset element lands on the intercept slot; 1: on the first covariate
    offset_start: int = 0

    def __post_init__(self):
        if self.dgp not in (1, 2, 3, 4):
            raise ValidationError(f"dgp must be 1, 2, 3 or 4, got {self.dgp}")
        if self.n < 1 or self.t < 1 or self.p < 0:
            raise ValidationError(f"invalid panel size n={self.n}, t={self.t}, p={self.p}")
        if self.dgp in (3, 4):
            if self.s is None:
                raise ValidationError(f"dgp {self.dgp} requires the sparsity s")
            if not 0 <= self.s <= self.p:
                raise ValidationError(f"sparsity s={self.s} must satisfy 0 <= s <= p={self.p}")
        elif self.s is not None:
            raise ValidationError(f"sparsity s only applies to dgp 3 and 4, not {self.dgp}")
        if self.dgp in (1, 4):
            if self.beta_cor is None or not 0.0 <= self.beta_cor <= 1.0:
                raise ValidationError(f"beta_cor must lie in [0, 1], got {self.beta_cor}")
        elif self.beta_cor is not None:
            raise ValidationError(f"beta_cor only applies to dgp 1 and 4, not {self.dgp}")
        if self.design not in ("iid", "toeplitz"):
            raise ValidationError(f"design must be 'iid' or 'toeplitz', got {self.design!r}")
        if not self.noise_sd >= 0.0:
            raise ValidationError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.offset_start not in (0, 1):
            raise ValidationError("offset_start must be 0 or 1")

    def with_seed(self, seed: int) -> "DgpConfig":
        return replace(self, seed=int(seed))


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(purpose, index))
    return np.random.Generator(np.random.Philox(ss))


def toeplitz_cov(p: int, rho: float = TOEPLITZ_RHO) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_design(cfg: DgpConfig, rng) -> np.ndarray:
    """(T, p + 1) design for one individual, drawn from ``rng``."""
    z = rng.standard_normal((cfg.t, cfg.p))
    if cfg.design == "toeplitz" and cfg.p > 1:
        chol = np.linalg.cholesky(toeplitz_cov(cfg.p))
        z = z @ chol.T
    return np.hstack([np.ones((cfg.t, 1)), z])


def _equicorrelated(n: int, k: int, rho: float, seed: int, rng=None) -> np.ndarray:
    if rng is not None:
        shared = rng.standard_normal(k)
        own = None if rho == 1.0 else rng.standard_normal((n, k))
    else:
        shared = stream(seed, _BETA, 0).standard_normal(k)
        own = None if rho == 1.0 else np.vstack([stream(seed, _BETA, i + 1).standard_normal(k) for i in range(n)])
    if own is None:
        return np.tile(shared, (n, 1))
    return np.sqrt(rho) * shared[None, :] + np.sqrt(1.0 - rho) * own


def offset_vector(alpha: float, k: int) -> np.ndarray:
    """First ``k`` entries of (a, a^2, -a, -a^2, a/1, a/2, a/3, ...)."""
    head = [alpha, alpha**2, -alpha, -(alpha**2)]
    out = np.empty(k)
    for idx in range(k):
        out[idx] = head[idx] if idx < 4 else alpha / (idx - 3)
    return out


def _alpha_coefs(n: int, k: int, seed: int, offset_start: int, rng=None) -> np.ndarray:
    if rng is not None:
        alphas = rng.uniform(0.0, 1.0, size=n)
    else:
        alphas = [stream(seed, _BETA, i + 1).uniform(0.0, 1.0) for i in range(n)]
    coefs = np.ones((n, k))
    for i, alpha in enumerate(alphas):
        coefs[i, offset_start:] += offset_vector(alpha, k - offset_start)
    return coefs


def gen_beta_dgp1(cfg: DgpConfig, rng=None) -> CoefficientSet:
    """Equicorrelated normal coefficients over all p + 1 components.

    Draws come from ``rng`` when given, otherwise from the per-individual
    streams derived from ``cfg.seed``.
    """
    rho = cfg.beta_cor
    if rho is None or not 0.0 <= rho <= 1.0:
        raise ValidationError(f"beta_cor must lie in [0, 1], got {rho}")
    return CoefficientSet(_equicorrelated(cfg.n, cfg.p + 1, rho, cfg.seed, rng))


def gen_beta_dgp2(cfg: DgpConfig, rng=None) -> CoefficientSet:
    return CoefficientSet(_alpha_coefs(cfg.n, cfg.p + 1, cfg.seed, cfg.offset_start, rng))


def gen_beta_sparse(cfg: DgpConfig, rng=None) -> CoefficientSet:
    if cfg.s is None or cfg.s > cfg.p:
        raise ValidationError(f"sparsity s={cfg.s} must not exceed p={cfg.p}")
    k = cfg.s + 1
    if cfg.dgp == 3:
        block = _alpha_coefs(cfg.n, k, cfg.seed, cfg.offset_start, rng)
    elif cfg.dgp == 4:
        block = _equicorrelated(cfg.n, k, cfg.beta_cor, cfg.seed, rng)
    else:
        raise ValidationError(f"sparse coefficients need dgp 3 or 4, got {cfg.dgp}")
    coefs = np.zeros((cfg.n, cfg.p + 1))
    coefs[:, :k] = block
    return CoefficientSet(coefs)


def gen_beta(cfg: DgpConfig) -> CoefficientSet:
    if cfg.dgp == 1:
        return gen_beta_dgp1(cfg)
    if cfg.dgp == 2:
        return gen_beta_dgp2(cfg)
    return gen_beta_sparse(cfg)


def _draw_panel(cfg: DgpConfig, beta: np.ndarray, x_purpose: int, eps_purpose: int) -> PanelDataset:
    design = np.stack([gen_design(cfg, stream(cfg.seed, x_purpose, i)) for i in range(cfg.n)])
    signal = np.einsum("ntk,nk->nt", design, beta)
    noise = np.stack([stream(cfg.seed, eps_purpose, i).standard_normal(cfg.t) for i in range(cfg.n)])
    return PanelDataset(design=design, response=signal + cfg.noise_sd * noise, signal=signal)


def gen_panel(cfg: DgpConfig):
    """Draw ``(train, test, truth)``: one coefficient draw, two independent panels."""
    truth = gen_beta(cfg)
    train = _draw_panel(cfg, truth.coefs, _TRAIN_X, _TRAIN_EPS)
    test = _draw_panel(cfg, truth.coefs, _TEST_X, _TEST_EPS)
    return train, test, truth
