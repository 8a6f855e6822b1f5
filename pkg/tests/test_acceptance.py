"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the summary lines appear at
the end of the session) or directly with ``python tests/test_acceptance.py``.
All simulations use master seed 1.
"""

import math
import time

import numpy as np

from adsmooth.dgp import DgpConfig, _equicorrelated, gen_design, gen_panel, stream, toeplitz_cov
from adsmooth.engine import AdsConfig, ads_fit, build_weight_matrix, first_stage_fit
from adsmooth.estimators import (
    LassoConfig,
    WeightedSample,
    lasso_kkt_violation,
    null_lambda,
    soft_threshold,
    weighted_lasso,
    weighted_ols,
)
from adsmooth.harness import run_cell
from adsmooth.panel import CoefficientSet

SEED = 1
REPS = 100
OLS = AdsConfig(estimator="ols")
LASSO = AdsConfig(estimator="lasso")

RESULTS = {}


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS[number] = line
    print(line)
    return ok


def mse(cell, estimators, ads, reps=REPS):
    return {r.estimator: r.mse for r in run_cell(cell, estimators, ads, reps, SEED)}


def test_criterion_1_linear_setting2_levels():
    t0 = time.time()
    big = mse(DgpConfig(dgp=2, n=50, t=10, p=5), ("ols", "ads-ols"), OLS)
    small = mse(DgpConfig(dgp=2, n=10, t=10, p=5), ("ols", "ads-ols"), OLS)
    secs = time.time() - t0
    ok = 1.75 <= big["ols"] <= 2.15 and 0.18 <= big["ads-ols"] <= 0.40 and 0.30 <= small["ads-ols"] <= 0.60 and secs < 120
    assert record(
        1,
        ok,
        f"N=50: ols {big['ols']:.4f} in [1.75,2.15], ads-ols {big['ads-ols']:.4f} in [0.18,0.40]; "
        f"N=10: ads-ols {small['ads-ols']:.4f} in [0.30,0.60]; {secs:.1f}s < 120s",
    )


def test_criterion_2_linear_setting1_direction():
    t0 = time.time()
    same = mse(DgpConfig(dgp=1, n=50, t=10, p=5, beta_cor=1.0), ("ols", "ads-ols"), OLS)
    unrelated = mse(DgpConfig(dgp=1, n=50, t=10, p=5, beta_cor=0.0), ("ols", "ads-ols"), OLS)
    secs = time.time() - t0
    ok = (
        same["ads-ols"] < 0.15
        and 1.7 <= same["ols"] <= 2.1
        and unrelated["ads-ols"] >= 0.8 * unrelated["ols"]
        and secs < 180
    )
    assert record(
        2,
        ok,
        f"cor=1: ads-ols {same['ads-ols']:.4f} < 0.15, ols {same['ols']:.4f} in [1.7,2.1]; "
        f"cor=0: ads-ols {unrelated['ads-ols']:.4f} >= 0.8*ols {0.8 * unrelated['ols']:.4f}; {secs:.1f}s < 180s",
    )


def test_criterion_3_lasso_setting2_ratios():
    t0 = time.time()
    small = mse(DgpConfig(dgp=3, n=10, t=10, p=15, s=5), ("lasso", "ads-lasso"), LASSO)
    big = mse(DgpConfig(dgp=3, n=50, t=10, p=15, s=5), ("lasso", "ads-lasso"), LASSO)
    secs = time.time() - t0
    r_small = small["ads-lasso"] / small["lasso"]
    r_big = big["ads-lasso"] / big["lasso"]
    ok = r_small < 0.5 and r_big < 0.15 and secs < 600
    assert record(
        3,
        ok,
        f"N=10: ratio {r_small:.3f} < 0.5 ({small['ads-lasso']:.4f}/{small['lasso']:.4f}); "
        f"N=50: ratio {r_big:.3f} < 0.15 ({big['ads-lasso']:.4f}/{big['lasso']:.4f}); {secs:.1f}s < 600s",
    )


def test_criterion_4_harm_regime():
    res = mse(DgpConfig(dgp=4, n=50, t=50, p=15, s=5, beta_cor=0.0), ("lasso", "ads-lasso"), LASSO)
    ok = res["ads-lasso"] > res["lasso"]
    assert record(4, ok, f"cor=0, N=50, T=50: ads-lasso {res['ads-lasso']:.4f} > lasso {res['lasso']:.4f}")


def _orthogonal_case(seed, lam):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((20, 5)))
    x = q * math.sqrt(20)
    s = WeightedSample.unit(x, x @ rng.standard_normal(5) + rng.standard_normal(20))
    ols = weighted_ols(s)
    fit = weighted_lasso(s, LassoConfig(tol=1e-13, max_sweeps=100000), lam)
    return np.max(np.abs(fit.coef - np.array([soft_threshold(b, lam) for b in ols])))


def test_criterion_5_oracle_equivalences():
    cfg = LassoConfig(tol=1e-12, max_sweeps=100000)
    lam0 = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, k = rng.integers(10, 40), rng.integers(2, 7)
        x = np.hstack([np.ones((n, 1)), rng.standard_normal((n, k - 1))])
        s = WeightedSample(x, rng.standard_normal(n), rng.uniform(0.1, 2.0, n))
        lam0 = max(lam0, np.max(np.abs(weighted_lasso(s, cfg, 0.0).coef - weighted_ols(s))))

    data = gen_panel(DgpConfig(dgp=1, n=8, t=12, p=3, beta_cor=1.0, seed=SEED))[0]
    n, t, k = data.design.shape
    pooled = weighted_ols(WeightedSample.unit(data.design.reshape(n * t, k), data.response.reshape(-1)))
    pooled_err = np.max(np.abs(ads_fit(data, AdsConfig(gamma=0.0, delta=1.0)).final.coefs - pooled))

    data2 = gen_panel(DgpConfig(dgp=2, n=8, t=12, p=3, seed=SEED))[0]
    indiv_err = np.max(np.abs(ads_fit(data2, AdsConfig(gamma=1e12)).final.coefs - first_stage_fit(data2, "ols").coefs))

    orth_err = max(_orthogonal_case(seed, lam) for seed in range(10) for lam in (0.05, 0.2, 0.8))

    ok = lam0 < 1e-6 and pooled_err < 1e-8 and indiv_err < 1e-4 and orth_err < 1e-8
    assert record(
        5,
        ok,
        f"lasso(0) vs ols {lam0:.1e} < 1e-6; pooled {pooled_err:.1e} < 1e-8; "
        f"individual {indiv_err:.1e} < 1e-4; orthogonal {orth_err:.1e} < 1e-8",
    )


def test_criterion_6_ols_risk_oracle():
    parts, ok = [], True
    for t in (20, 50, 100):
        got = mse(DgpConfig(dgp=2, n=10, t=t, p=5), ("ols",), OLS, reps=200)["ols"]
        oracle = 6 / (t - 7)
        rel = abs(got - oracle) / oracle
        ok &= rel < 0.10
        parts.append(f"T={t}: {got:.4f} vs {oracle:.4f} ({100 * rel:.1f}%)")
    assert record(6, ok, "; ".join(parts) + "; tolerance 10%")


def test_criterion_7_invariant_suites():
    checks = {}

    cfg = LassoConfig(tol=1e-10, max_sweeps=100000)
    kkt, mono = 0.0, 0.0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        x = np.hstack([np.ones((30, 1)), rng.standard_normal((30, 8))])
        s = WeightedSample(x, x @ rng.standard_normal(9) + rng.standard_normal(30), rng.uniform(0, 2, 30))
        lam = rng.uniform(0.01, 1.0) * null_lambda(s)
        fit = weighted_lasso(s, cfg, lam)
        if fit.converged:
            kkt = max(kkt, lasso_kkt_violation(s, fit.coef, lam))
        mono = max(mono, float(np.max(np.diff(fit.objective_trace), initial=0.0)))
    checks["kkt"] = kkt < 1e-6
    checks["monotone"] = mono <= 1e-12

    wm_ok = True
    for seed in range(50):
        b = CoefficientSet(np.random.default_rng(seed).standard_normal((12, 6)))
        w = build_weight_matrix(b, AdsConfig(delta=0.5)).w
        off = w[~np.eye(12, dtype=bool)]
        wm_ok &= bool(np.all(np.diag(w) == 1) and np.array_equal(w, w.T) and np.all((off > 0) & (off <= 0.5)))
    checks["weights"] = wm_ok

    rng = np.random.default_rng(7)
    draws = np.stack([_equicorrelated(2, 2, 0.5, 0, rng) for _ in range(100_000)])
    across = np.corrcoef(draws[:, 0, 0], draws[:, 1, 0])[0, 1]
    within = np.corrcoef(draws[:, 0, 0], draws[:, 0, 1])[0, 1]
    x = gen_design(DgpConfig(dgp=2, n=1, t=100_000, p=4, design="toeplitz"), stream(3, 1, 0))
    cov_err = np.max(np.abs(np.cov(x[:, 1:], rowvar=False) - toeplitz_cov(4)))
    checks["moments"] = abs(across - 0.5) < 0.05 and abs(within) < 0.05 and cov_err < 0.05

    cell = DgpConfig(dgp=2, n=10, t=10, p=5)
    a = run_cell(cell, ("ols", "ads-ols"), OLS, 6, SEED, jobs=1)
    b = run_cell(cell, ("ols", "ads-ols"), OLS, 6, SEED, jobs=2)
    c = run_cell(cell, ("ols", "ads-ols"), OLS, 6, SEED, jobs=1)
    p1, p2 = gen_panel(DgpConfig(dgp=4, n=3, t=5, p=6, s=2, beta_cor=0.5, seed=9)), gen_panel(
        DgpConfig(dgp=4, n=3, t=5, p=6, s=2, beta_cor=0.5, seed=9)
    )
    checks["determinism"] = a == b == c and np.array_equal(p1[0].response, p2[0].response)

    ok = all(checks.values())
    assert record(
        7,
        ok,
        f"KKT max {kkt:.1e}; objective rise max {mono:.1e}; "
        f"beta corr across {across:.3f} within {within:.3f}; toeplitz cov err {cov_err:.3f}; "
        + ", ".join(f"{k}={'ok' if v else 'bad'}" for k, v in checks.items()),
    )


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS[k] for k in sorted(RESULTS)))
