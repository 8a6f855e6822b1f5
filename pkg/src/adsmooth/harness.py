"""Monte Carlo runner: repeat (generate, fit, score out of sample) and aggregate."""

from __future__ import annotations

import logging
import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dgp import DgpConfig, gen_panel
from .engine import AdsConfig, ads_fit, naive_fit
from .errors import ValidationError
from .estimators import ConvergenceWarning, fit_individual
from .panel import CoefficientSet, MseReport, MseRow, mse_against, predict

log = logging.getLogger(__name__)

ESTIMATORS = ("naive", "ols", "lasso", "ads-ols", "ads-lasso")
MAX_FAILED_SHARE = 0.01


@dataclass(frozen=True)
class SimConfig:
    cells: Sequence[DgpConfig]
    estimators: Sequence[str]
    ads: AdsConfig = field(default_factory=AdsConfig)
    reps: int = 500
    master_seed: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise ValidationError("reps must be >= 1")
        _check_estimators(self.estimators)


def _check_estimators(estimators):
    if not estimators:
        raise ValidationError("estimator set must be non-empty")
    bad = [e for e in estimators if e not in ESTIMATORS]
    if bad:
        raise ValidationError(f"unknown estimators {bad}; choose from {ESTIMATORS}")


def cell_id(cell: DgpConfig) -> int:
    """Stable 32-bit identifier of a cell (seed excluded)."""
    key = f"{cell.dgp}|{cell.n}|{cell.t}|{cell.p}|{cell.s}|{cell.beta_cor}|{cell.design}|{cell.noise_sd}|{cell.offset_start}"
    return zlib.crc32(key.encode())


def rep_seed(master_seed: int, cell: DgpConfig, r: int) -> int:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(cell_id(cell), int(r)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fit(name: str, train, ads: AdsConfig, cache: dict) -> CoefficientSet:
    if name == "naive":
        return naive_fit(train)
    base = name.removeprefix("ads-")
    lasso_cfg = ads.lasso_cfg
    if base not in cache:
        cache[base] = CoefficientSet(
            np.vstack([fit_individual(train, i, base, lasso_cfg) for i in range(train.n_individuals)])
        )
    if name == base:
        return cache[base]
    return ads_fit(train, replace(ads, estimator=base)).final


def run_repetition(cell: DgpConfig, estimators, ads: AdsConfig, seed: int) -> dict:
    """One draw of the cell; maps estimator name to test MSE, or None on failure."""
    train, test, _ = gen_panel(cell.with_seed(seed))
    target = test.target()
    out = {}
    cache = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for name in estimators:
            try:
                coefs = _fit(name, train, ads, cache)
                out[name] = mse_against(predict(test, coefs), target)
            except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                log.debug("estimator %s failed at seed %d: %s", name, seed, exc)
                out[name] = None
    return out


def _rep_task(args):
    return run_repetition(*args)


def run_cell(
    cell: DgpConfig,
    estimators: Sequence[str],
    ads: AdsConfig,
    reps: int,
    master_seed: int,
    jobs: int = 1,
) -> list:
    """Simulate one grid cell ``reps`` times; one report row per estimator.

    Repetition r uses a seed derived from (master_seed, cell, r), so results
    do not depend on ``jobs`` or on completion order.
    """
    _check_estimators(estimators)
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    tasks = [(cell, tuple(estimators), ads, rep_seed(master_seed, cell, r)) for r in range(reps)]
    if jobs > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_rep_task, tasks, chunksize=max(1, reps // (4 * jobs))))
    else:
        results = [_rep_task(t) for t in tasks]

    rows = []
    for name in estimators:
        vals = np.array([res[name] for res in results if res[name] is not None], dtype=float)
        n_failed = reps - vals.size
        failed = n_failed > MAX_FAILED_SHARE * reps
        if vals.size:
            mse = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        else:
            mse, se = 0.0, 0.0
        rows.append(
            MseRow(
                dgp=cell.dgp,
                design=cell.design,
                n=cell.n,
                t=cell.t,
                cor=cell.beta_cor,
                estimator=name,
                mse=mse,
                mc_stderr=se,
                reps=max(vals.size, 1),
                p=cell.p,
                s=cell.s,
                failed_reps=n_failed,
                failed=failed,
            )
        )
    log.info(
        "cell dgp=%d design=%s n=%d t=%d p=%d cor=%s: %s",
        cell.dgp,
        cell.design,
        cell.n,
        cell.t,
        cell.p,
        cell.beta_cor,
        ", ".join(f"{r.estimator}={r.mse:.4f}" for r in rows),
    )
    return rows


def run_suite(cfg: SimConfig, jobs: int = 1) -> MseReport:
    report = MseReport()
    for cell in cfg.cells:
        rows = run_cell(cell, cfg.estimators, cfg.ads, cfg.reps, cfg.master_seed, jobs=jobs)
        if any(r.failed for r in rows):
            log.warning("cell dgp=%d n=%d t=%d failed in more than 1%% of repetitions", cell.dgp, cell.n, cell.t)
        report.extend(rows)
    return report


def _grid(dgp, design, p, pairs, cors=(None,), s=None):
    return [
        DgpConfig(dgp=dgp, n=n, t=t, p=p, s=s, beta_cor=cor, design=design)
        for n, t in pairs
        for cor in cors
    ]


def _nt(ns, ts):
    return [(n, t) for t in ts for n in ns]


PAPER_TABLES = ("linear-s1-iid", "linear-s1-cor", "linear-s2", "lasso-s1", "lasso-s2")


def paper_table(name: str, reps: int = 500, master_seed: int = 0, ads: Optional[AdsConfig] = None) -> SimConfig:
    """Cell grid of one of the published simulation tables.

    Only cells with reported values are included; rows are ordered as in the
    published tables.
    """
    if name == "linear-s1-iid":
        cells = (
            _grid(1, "iid", 5, _nt((2, 10, 50), (10,)) + _nt((2, 10), (20,)), cors=(0.0, 0.3, 0.7, 1.0))
            + _grid(1, "iid", 10, _nt((2, 10, 50), (20,)) + _nt((2, 10), (50,)), cors=(0.0, 0.3, 0.7, 1.0))
        )
        est = ("ols", "ads-ols")
    elif name == "linear-s1-cor":
        cells = _grid(1, "toeplitz", 5, _nt((2, 10, 50, 100), (10,)) + [(2, 20)], cors=(0.0, 0.3, 0.5, 0.8, 1.0))
        est = ("ols", "ads-ols")
    elif name == "linear-s2":
        cells = _grid(2, "iid", 5, _nt((2, 5, 10, 50, 100), (10, 20, 50)) + [(2, 100)]) + _grid(
            2, "toeplitz", 5, _nt((2, 5, 10, 50), (10, 20, 50)) + [(2, 100)]
        )
        est = ("ols", "ads-ols")
    elif name == "lasso-s1":
        cors = (0.0, 0.5, 1.0)
        cells = _grid(4, "iid", 15, _nt((10, 50, 100), (5, 10, 25, 50)), cors=cors, s=5) + _grid(
            4, "toeplitz", 15, _nt((10, 50, 100), (10, 25, 50)), cors=cors, s=5
        )
        est = ("lasso", "ads-lasso")
    elif name == "lasso-s2":
        cells = _grid(3, "iid", 15, _nt((2, 5, 10, 50), (10, 20, 50, 100)), s=5) + _grid(
            3, "toeplitz", 15, _nt((2, 5, 10, 50), (10, 20, 50)) + [(50, 100)], s=5
        )
        est = ("lasso", "ads-lasso")
    else:
        raise ValidationError(f"unknown table {name!r}; choose from {PAPER_TABLES}")
    if ads is None:
        ads = AdsConfig(estimator="lasso" if est[0] == "lasso" else "ols")
    return SimConfig(cells=cells, estimators=est, ads=ads, reps=reps, master_seed=master_seed)
