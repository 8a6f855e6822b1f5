"""Core panel containers and prediction / MSE evaluation.

All containers store dense numpy arrays and are treated as immutable once
built; the arrays are flagged read-only so they can be shared freely between
worker processes and threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ValidationError


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PanelDataset:
    """Balanced panel of N individuals observed over T periods.

    Parameters
    ----------
    design : array of shape (N, T, p + 1)
        Per-individual design matrices. Column 0 must be identically one.
    response : array of shape (N, T)
        Observed outcomes.
    signal : array of shape (N, T), optional
        Noiseless regression values, available for synthetic data only.
    ids, times, covariate_names : optional metadata
        Individual identifiers, the (N, T) time index and covariate column
        names, carried through from file ingestion.
    """

    design: np.ndarray
    response: np.ndarray
    signal: Optional[np.ndarray] = None
    ids: Optional[tuple] = None
    times: Optional[np.ndarray] = None
    covariate_names: Optional[tuple] = None

    def __post_init__(self):
        design = _frozen(self.design)
        response = _frozen(self.response)
        if design.ndim != 3:
            raise DimensionError(f"design must be 3-d (N, T, p+1), got shape {design.shape}")
        n, t, k = design.shape
        if n < 1 or t < 1 or k < 1:
            raise DimensionError(f"empty design of shape {design.shape}")
        if response.shape != (n, t):
            raise DimensionError(f"response shape {response.shape} != {(n, t)}")
        if not np.all(design[:, :, 0] == 1.0):
            raise ValidationError("design column 0 must be the intercept (all ones)")
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response))):
            raise ValidationError("design and response must be finite")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        if self.signal is not None:
            signal = _frozen(self.signal)
            if signal.shape != response.shape:
                raise DimensionError(f"signal shape {signal.shape} != response shape {response.shape}")
            object.__setattr__(self, "signal", signal)
        if self.ids is not None:
            ids = tuple(self.ids)
            if len(ids) != n:
                raise DimensionError(f"{len(ids)} ids for {n} individuals")
            object.__setattr__(self, "ids", ids)
        if self.times is not None:
            times = _frozen(self.times, dtype=np.int64)
            if times.shape != (n, t):
                raise DimensionError(f"times shape {times.shape} != {(n, t)}")
            object.__setattr__(self, "times", times)
        if self.covariate_names is not None:
            names = tuple(self.covariate_names)
            if len(names) != k - 1:
                raise DimensionError(f"{len(names)} covariate names for p={k - 1}")
            object.__setattr__(self, "covariate_names", names)

    @property
    def n_individuals(self) -> int:
        return self.design.shape[0]

    @property
    def n_periods(self) -> int:
        return self.design.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.design.shape[2] - 1

    def target(self) -> np.ndarray:
        """Evaluation target: the noiseless signal when known, else the response."""
        return self.signal if self.signal is not None else self.response

    def subset_periods(self, idx) -> "PanelDataset":
        """Dataset restricted to the given period indices (same for every individual)."""
        idx = np.asarray(idx)
        return PanelDataset(
            design=self.design[:, idx, :],
            response=self.response[:, idx],
            signal=None if self.signal is None else self.signal[:, idx],
            ids=self.ids,
            times=None if self.times is None else self.times[:, idx],
            covariate_names=self.covariate_names,
        )


@dataclass(frozen=True)
class CoefficientSet:
    """N x (p + 1) matrix whose row i is the coefficient vector of individual i."""

    coefs: np.ndarray

    def __post_init__(self):
        coefs = _frozen(self.coefs)
        if coefs.ndim != 2:
            raise DimensionError(f"coefficients must be 2-d, got shape {coefs.shape}")
        if not np.all(np.isfinite(coefs)):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "coefs", coefs)

    @property
    def n_individuals(self) -> int:
        return self.coefs.shape[0]

    def __len__(self):
        return self.coefs.shape[0]

    def __getitem__(self, i):
        return self.coefs[i]


@dataclass(frozen=True)
class WeightMatrix:
    """Pairwise similarity weights with unit diagonal.

    Off-diagonal entries lie in ``[0, delta]`` and the matrix is symmetric.
    Entries equal to zero only arise from floating-point underflow at very
    large kernel bandwidth parameters.
    """

    w: np.ndarray
    delta: float
    gamma: float = 0.0

    def __post_init__(self):
        w = _frozen(self.w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"weight matrix must be square, got {w.shape}")
        if not 0.0 < self.delta <= 1.0:
            raise ValidationError(f"delta must lie in (0, 1], got {self.delta}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if not np.all(np.diag(w) == 1.0):
            raise ValidationError("weight matrix diagonal must be exactly 1")
        if not np.array_equal(w, w.T):
            raise ValidationError("weight matrix must be symmetric")
        off = w[~np.eye(w.shape[0], dtype=bool)]
        if off.size and (off.min() < 0.0 or off.max() > self.delta):
            raise ValidationError(f"off-diagonal weights must lie in [0, {self.delta}]")
        object.__setattr__(self, "w", w)

    @property
    def n_individuals(self) -> int:
        return self.w.shape[0]

    def effective_sizes(self) -> np.ndarray:
        """Row sums, the soft-pooled sample-size factor of each individual."""
        return self.w.sum(axis=1)


@dataclass(frozen=True)
class MseRow:
    dgp: Optional[int]
    design: str
    n: int
    t: int
    cor: Optional[float]
    estimator: str
    mse: float
    mc_stderr: float
    reps: int
    p: Optional[int] = None
    s: Optional[int] = None
    failed_reps: int = 0
    failed: bool = False

    def __post_init__(self):
        if not (self.mse >= 0.0):
            raise ValidationError(f"mse must be nonnegative, got {self.mse}")
        if not (self.mc_stderr >= 0.0):
            raise ValidationError(f"mc_stderr must be nonnegative, got {self.mc_stderr}")
        if self.reps < 1:
            raise ValidationError(f"reps must be >= 1, got {self.reps}")


@dataclass
class MseReport:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def extend(self, rows: Sequence[MseRow]) -> None:
        self.rows.extend(rows)

    @property
    def failed(self) -> bool:
        return any(r.failed for r in self.rows)

    def lookup(self, **where) -> MseRow:
        """Return the unique row matching all ``field=value`` pairs."""
        hits = [r for r in self.rows if all(getattr(r, k) == v for k, v in where.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {where}")
        return hits[0]


def _coef_array(coefs) -> np.ndarray:
    if isinstance(coefs, CoefficientSet):
        return coefs.coefs
    return np.asarray(coefs, dtype=float)


def predict(data: PanelDataset, coefs) -> np.ndarray:
    """Fitted values ``x_it' beta_i`` as an (N, T) array."""
    b = _coef_array(coefs)
    n, _, k = data.design.shape
    if b.shape != (n, k):
        raise DimensionError(f"coefficient shape {b.shape} does not match dataset (N={n}, p+1={k})")
    return np.einsum("ntk,nk->nt", data.design, b)


def mse_against(predictions, targets) -> float:
    """Mean squared difference over all individuals and periods."""
    pred = np.asarray(predictions, dtype=float)
    targ = np.asarray(targets, dtype=float)
    if pred.shape != targ.shape:
        raise DimensionError(f"predictions {pred.shape} and targets {targ.shape} differ")
    if pred.size == 0:
        raise DimensionError("cannot compute MSE of empty arrays")
    return float(np.mean((pred - targ) ** 2))
