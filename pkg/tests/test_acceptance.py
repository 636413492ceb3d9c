"""Acceptance suite: one test per release criterion, at fixed tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. The two dataset-bound criteria are skipped unless the
HYPAL_QM9_CSV environment variable points at the extracted feature table;
the forge criterion then falls back to its planted-truth substitute.
"""

import math
import os
import time

import numpy as np
import pytest

from hypal import expr as ex
from hypal import gp, lasso
from hypal.cli import main
from hypal.data import FEATURE_COLUMNS, TARGET_COLUMN, load_feature_table, write_feature_table
from hypal.forge import run_forge
from hypal.hmc import HmcConfig, hmc_sample
from hypal.hypotheses import load_bundled_hypotheses
from hypal.learn import Experiment, run

from conftest import make_table

QM9_ENV = "HYPAL_QM9_CSV"


def _passed(name: str, elapsed: float, budget: float):
    assert elapsed < budget, f"{name} took {elapsed:.1f}s (budget {budget:.0f}s)"
    print(f"\nACCEPTANCE {name}: PASS ({elapsed:.1f}s)")


@pytest.fixture(scope="module")
def models():
    return load_bundled_hypotheses()


def test_gp_oracle_equivalence(models):
    started = time.perf_counter()
    rng = np.random.default_rng(1001)
    h = models[2]  # single-parameter mean keeps phi handling explicit
    for _ in range(200):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 4))
        hyper = gp.KernelHyper(
            float(rng.uniform(0.2, 3.0)), rng.uniform(0.3, 2.0, 2), float(rng.uniform(0.01, 0.5))
        )
        phi = {"IE": float(rng.uniform(-3.9, 1.9))}
        cols = {"TPSA": rng.uniform(0, 5, n), "molelogP": rng.normal(0, 1, n)}
        x = np.column_stack([cols["TPSA"], cols["molelogP"]])
        y = rng.normal(-2, 1, n)
        data = gp.GpData(np.arange(n), x, {**cols, "FE": y}, y)
        x_star = np.column_stack([rng.uniform(0, 5, m), rng.normal(0, 1, m)])
        cols_star = {"TPSA": x_star[:, 0], "molelogP": x_star[:, 1]}
        pred = gp.predict(
            gp.PosteriorSamples([hyper], [phi], 1.0, 0), data, h, x_star, cols_star
        )
        # dense brute force: explicit matrix inverse, same model definition
        k_train = np.array([[gp.matern52(x[i], x[j], hyper) for j in range(n)] for i in range(n)])
        k_train += (hyper.noise_variance + gp.BASE_JITTER * hyper.signal_variance) * np.eye(n)
        k_cross = np.array([[gp.matern52(x[i], x_star[j], hyper) for j in range(m)] for i in range(n)])
        inv = np.linalg.inv(k_train)
        residual = y - h.eval_batch(cols, phi, n)
        mu = h.eval_batch(cols_star, phi, m) + k_cross.T @ inv @ residual
        var = hyper.signal_variance - np.sum(k_cross * (inv @ k_cross), axis=0)
        scale_mu = np.maximum(np.abs(mu), 1e-6)
        scale_var = np.maximum(np.abs(var), 1e-6)
        assert np.all(np.abs(pred.mean - mu) / scale_mu <= 1e-8)
        assert np.all(np.abs(pred.variance - var) / scale_var <= 1e-8)
    _passed("GP oracle equivalence (200 instances)", time.perf_counter() - started, 10.0)


def test_gradient_correctness(models):
    started = time.perf_counter()
    rng = np.random.default_rng(1002)
    points_per_model = (17, 17, 16)  # 50 random points across the three models
    for h, n_points in zip(models, points_per_model):
        n = 7
        cols = {
            "TPSA": rng.uniform(0, 5, n),
            "molelogP": rng.normal(0, 1, n),
            "FE": rng.normal(-2, 1, n),
        }
        x = np.column_stack([cols["TPSA"], cols["molelogP"]])
        data = gp.GpData(np.arange(n), x, cols, cols["FE"])
        problem = gp.GpProblem(data, h, gp.HyperPriors.from_data(data, h))
        for _ in range(n_points):
            z = problem.initial_point() + 0.5 * rng.standard_normal(problem.dim)
            _, grad = problem.logdensity_and_grad(z)
            for k in range(problem.dim):
                step = 1e-6 * (1 + abs(z[k]))
                zp, zm = z.copy(), z.copy()
                zp[k] += step
                zm[k] -= step
                fd = (problem.logdensity_and_grad(zp)[0] - problem.logdensity_and_grad(zm)[0]) / (2 * step)
                assert abs(grad[k] - fd) / max(1e-8, abs(fd)) <= 1e-5
    _passed("joint density gradient vs finite differences (50 points)", time.perf_counter() - started, 30.0)


def test_lasso_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(1003)
    # orthonormal designs: solution equals the soft-threshold closed form
    for _ in range(50):
        n, p = 64, 6
        q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        design = q * math.sqrt(n)
        design -= design.mean(axis=0)
        design /= design.std(axis=0)
        q, _ = np.linalg.qr(design)
        design = q * math.sqrt(n)
        design -= design.mean(axis=0)
        target = design @ (rng.standard_normal(p) * (rng.uniform(size=p) < 0.6))
        target += 0.05 * rng.standard_normal(n)
        target -= target.mean()
        lam = float(rng.uniform(0.02, 0.5))
        fit = lasso.lasso_fit(design, target, lam)
        oracle = np.array(
            [lasso.soft_threshold(float(design[:, j] @ target) / n, lam) for j in range(p)]
        )
        assert np.abs(fit.coefficients - oracle).max() <= 1e-6
    # general designs: stationarity conditions within tolerance
    for _ in range(50):
        n, p = 50, 12
        design, _, _ = lasso.standardize_columns(rng.standard_normal((n, p)))
        target = design @ (rng.standard_normal(p) * (rng.uniform(size=p) < 0.5))
        target += 0.1 * rng.standard_normal(n)
        target -= target.mean()
        lam = float(rng.uniform(0.02, 0.4))
        fit = lasso.lasso_fit(design, target, lam)
        assert fit.kkt_violation(design, target) <= 1e-6
        top = lasso.lambda_max(design, target)
        assert lasso.lasso_fit(design, target, top).active_set == ()
        assert lasso.lasso_fit(design, target, top * 2).active_set == ()
    _passed("LASSO soft-threshold, KKT, lambda_max (50+50 instances)", time.perf_counter() - started, 10.0)


def test_hmc_sanity():
    started = time.perf_counter()

    def standard_normal(z):
        return -0.5 * float(z @ z), -z

    chain = hmc_sample(standard_normal, HmcConfig(warmup=500, n_samples=2000, seed=7), np.zeros(1))
    assert abs(float(chain.samples.mean())) <= 0.05
    assert abs(float(chain.samples.var()) - 1.0) <= 0.1

    variances = np.array([1.0, 4.0, 9.0])

    def diag_normal(z):
        return -0.5 * float(z @ (z / variances)), -z / variances

    chain3 = hmc_sample(diag_normal, HmcConfig(warmup=500, n_samples=2000, seed=11), np.zeros(3))
    sample_var = chain3.samples.var(axis=0)
    assert np.all(np.abs(sample_var - variances) / variances <= 0.15)
    # fixed seed reproduces the chain bit for bit
    again = hmc_sample(diag_normal, HmcConfig(warmup=500, n_samples=2000, seed=11), np.zeros(3))
    assert np.array_equal(chain3.samples, again.samples)
    _passed("HMC analytic moments and bit-exact replay", time.perf_counter() - started, 60.0)


def test_interpolation(models):
    started = time.perf_counter()
    rng = np.random.default_rng(1004)
    for h in models:
        n = 20
        cols = {"TPSA": rng.uniform(0, 4, n), "molelogP": rng.normal(0, 1, n)}
        x = np.column_stack([cols["TPSA"], cols["molelogP"]])
        phi = {k: 0.5 * (p.low + p.high) for k, p in h.params.items()}
        y = h.eval_batch(cols, phi, n) + 0.3 * np.sin(x[:, 0] + x[:, 1])
        data = gp.GpData(np.arange(n), x, {**cols, "FE": y}, y)
        hyper = gp.KernelHyper(1.0, np.array([1.0, 1.0]), 1e-12)
        pred = gp.predict(gp.PosteriorSamples([hyper], [phi], 1.0, 0), data, h, x, cols)
        assert np.abs(pred.mean - y).max() <= 1e-4
        assert pred.variance.max() <= 10 * gp.BASE_JITTER * hyper.signal_variance
    _passed("tiny-noise interpolation for all three models", time.perf_counter() - started, 10.0)


def test_planted_truth_recovery(models):
    started = time.perf_counter()
    table = make_table(2000, seed=90, planted="model1_fixed")
    experiment = Experiment(
        table=table,
        hypotheses=models,
        excluded_ids=tuple(r.id for r in table.records[:100]),
        n_seed=60,
        n_steps=30,
        epsilon=0.3,
        pool_subsample=250,
        hmc_warmup=150,
        hmc_samples=150,
        hmc_thin_to=30,
        leapfrog_min=5,
        leapfrog_max=15,
        master_seed=424242,
    )
    _, summary = run(experiment, n_init=3)
    wins = 0
    for per_init in summary["per_init"]:
        avg = {k: (v if v is not None else -2.0) for k, v in per_init["average_reward"].items()}
        best = max(sorted(avg), key=lambda k: avg[k])
        wins += best == "model_1"
    print("\nplanted-truth per-init averages:", [p["average_reward"] for p in summary["per_init"]])
    assert wins >= 2, f"model_1 won only {wins}/3 initializations: {summary['per_init']}"
    _passed("planted-truth recovery (3 inits x 30 steps)", time.perf_counter() - started, 900.0)


def test_desk_scale_qm9_reproduction(models):
    path = os.environ.get(QM9_ENV)
    if not path:
        pytest.skip(f"set {QM9_ENV} to the extracted QM9 feature table to run")
    started = time.perf_counter()
    table = load_feature_table(path)
    from hypal.data import partition_first_n

    partition = partition_first_n(table, 1000)
    experiment = Experiment(
        table=table,
        hypotheses=models,
        excluded_ids=partition.hypothesis_subset,
        n_seed=300,
        n_steps=50,
        epsilon=0.3,
        pool_subsample=2000,
        hmc_warmup=250,
        hmc_samples=250,
        hmc_thin_to=50,
        master_seed=20240817,
    )
    _, summary = run(experiment, n_init=3)
    print("\ndesk-scale per-init averages:", [p["average_reward"] for p in summary["per_init"]])
    last_count = 0
    for per_init in summary["per_init"]:
        avg = {k: (v if v is not None else 2.0) for k, v in per_init["average_reward"].items()}
        worst = min(sorted(avg), key=lambda k: avg[k])
        last_count += worst == "model_3"
    assert last_count >= 2, f"model_3 ranked last in only {last_count}/3 inits"
    agg = summary["aggregate"]["average_reward"]

    def score(name):
        return agg[name] if agg[name] is not None else -2.0

    assert score("model_1") > score("model_3")
    assert score("model_2") > score("model_3")
    _passed("desk-scale QM9 reproduction (3 inits x 50 steps)", time.perf_counter() - started, 7200.0)


def test_forge_recovers_reference_form(tmp_path):
    started = time.perf_counter()
    target_key = ex.canonical_key(ex.parse("IE*(1+(TPSA/SP)^2)"))
    path = os.environ.get(QM9_ENV)
    if path:
        table = load_feature_table(path)
        subset = np.arange(1000)
        label = "QM9 first-1000"
        top_k = 10
    else:
        # planted-truth substitute: the generating form must rank first
        table = make_table(1200, seed=91, planted="model1_columns")
        subset = np.arange(1000)
        label = "planted-truth substitute"
        top_k = 3
    hyps, report = run_forge(table, subset, FEATURE_COLUMNS, TARGET_COLUMN)
    keys = [report.candidates[i].key for i in report.ranking[:top_k]]
    assert target_key in keys, f"reference form not in top {top_k}: {keys}"
    _passed(f"forge recovers the reference form ({label})", time.perf_counter() - started, 600.0)


def test_learn_determinism(tmp_path):
    started = time.perf_counter()
    dataset = tmp_path / "features.csv"
    write_feature_table(make_table(150, seed=92), dataset)
    args = lambda out: [
        "learn", "--dataset", str(dataset), "--output-dir", str(out),
        "--hypothesis-subset-n", "20", "--n-seed", "25", "--n-steps", "3",
        "--n-init", "2", "--pool-subsample", "40", "--hmc-warmup", "50",
        "--hmc-samples", "50", "--hmc-thin-to", "10", "--seed", "13",
    ]
    assert main(args(tmp_path / "a")) == 0
    assert main(args(tmp_path / "b")) == 0
    trace_a = (tmp_path / "a" / "trace.csv").read_bytes()
    trace_b = (tmp_path / "b" / "trace.csv").read_bytes()
    assert trace_a == trace_b
    _passed("byte-identical learn reruns", time.perf_counter() - started, 120.0)
