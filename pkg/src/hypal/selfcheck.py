"""Fast built-in oracle checks, runnable from the CLI without pytest.

Each check compares an implementation against an independent computation
(closed form, dense linear algebra, finite differences, or analytic
moments) and prints one ok/FAIL line.
"""

from __future__ import annotations

import math

import numpy as np

from hypal import expr as ex
from hypal import gp, lasso
from hypal.hmc import HmcConfig, hmc_sample
from hypal.hypotheses import from_unconstrained, load_bundled_hypotheses, to_unconstrained


def _check(name: str, ok: bool, detail: str = "") -> bool:
    status = "ok" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"{status:4s} - {name}{suffix}")
    return ok


def check_matern_value() -> bool:
    hyper = gp.KernelHyper(1.0, np.array([1.0]), 1e-6)
    got = gp.matern52(np.array([0.0]), np.array([1.0]), hyper)
    expected = (1.0 + math.sqrt(5) + 5.0 / 3.0) * math.exp(-math.sqrt(5))
    return _check("matern52 closed form", abs(got - expected) < 1e-12, f"{got:.12f}")


def check_lasso_orthonormal() -> bool:
    rng = np.random.default_rng(0)
    n, p = 64, 4
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    design = q * math.sqrt(n)  # unit-variance orthonormal-in-expectation columns
    design -= design.mean(axis=0)
    design /= design.std(axis=0)
    # re-orthonormalize after standardization so the closed form is exact
    q, _ = np.linalg.qr(design)
    design = q * math.sqrt(n)
    design -= design.mean(axis=0)
    target = design @ np.array([1.5, -0.5, 0.0, 0.2]) + 0.01 * rng.standard_normal(n)
    target -= target.mean()
    lam = 0.3
    fit = lasso.lasso_fit(design, target, lam)
    expected = np.array([lasso.soft_threshold(float(design[:, j] @ target) / n, lam) for j in range(p)])
    err = float(np.abs(fit.coefficients - expected).max())
    return _check("lasso orthonormal soft-threshold", err < 1e-6, f"max err {err:.2e}")


def check_lasso_zero_at_lambda_max() -> bool:
    rng = np.random.default_rng(1)
    design, _, _ = lasso.standardize_columns(rng.standard_normal((40, 6)))
    target = rng.standard_normal(40)
    target -= target.mean()
    lam = lasso.lambda_max(design, target)
    fit = lasso.lasso_fit(design, target, lam * 1.0001)
    return _check("lasso zero above lambda_max", not fit.active_set)


def check_gp_dense_oracle() -> bool:
    rng = np.random.default_rng(2)
    n, d = 3, 2
    hyper = gp.KernelHyper(2.0, np.array([0.7, 1.3]), 0.1)
    x = rng.standard_normal((n, d))
    x_star = rng.standard_normal((2, d))
    y = rng.standard_normal(n)
    cols = {"TPSA": x[:, 0], "molelogP": x[:, 1]}
    cols_star = {"TPSA": x_star[:, 0], "molelogP": x_star[:, 1]}
    hypo = load_bundled_hypotheses()[2]  # single-parameter model
    phi = {"IE": -1.0}
    data = gp.GpData(ids=np.arange(n), X=x, columns={**cols, "FE": y}, y=y)
    samples = gp.PosteriorSamples([hyper], [phi], 1.0, 0)
    pred = gp.predict(samples, data, hypo, x_star, cols_star)
    # dense reference with an explicit inverse
    k_train = np.array([[gp.matern52(x[i], x[j], hyper) for j in range(n)] for i in range(n)])
    k_train += (hyper.noise_variance + gp.BASE_JITTER * hyper.signal_variance) * np.eye(n)
    k_cross = np.array([[gp.matern52(x[i], xs, hyper) for xs in x_star] for i in range(n)])
    inv = np.linalg.inv(k_train)
    mean_f = hypo.eval_batch(cols, phi, n_rows=n)
    mean_s = hypo.eval_batch(cols_star, phi, n_rows=2)
    mu = mean_s + k_cross.T @ inv @ (y - mean_f)
    var = hyper.signal_variance - np.sum(k_cross * (inv @ k_cross), axis=0)
    err = max(
        float(np.abs(pred.mean - mu).max() / np.abs(mu).max()),
        float(np.abs(pred.variance - var).max() / np.abs(var).max()),
    )
    return _check("gp predict vs dense inverse", err < 1e-8, f"rel err {err:.2e}")


def check_expression_gradients() -> bool:
    rng = np.random.default_rng(3)
    worst = 0.0
    for hypo in load_bundled_hypotheses():
        cols = {"TPSA": rng.uniform(0, 50, 5), "molelogP": rng.normal(0, 1, 5)}
        phi = {n: rng.uniform(p.low + 0.1 * p.width, p.high - 0.1 * p.width)
               for n, p in hypo.params.items()}
        grad = hypo.grad_params(cols, phi, n_rows=5)
        for k, name in enumerate(hypo.param_names):
            h = 1e-6 * (1 + abs(phi[name]))
            up = dict(phi, **{name: phi[name] + h})
            down = dict(phi, **{name: phi[name] - h})
            fd = (hypo.eval_batch(cols, up, n_rows=5) - hypo.eval_batch(cols, down, n_rows=5)) / (2 * h)
            rel = np.abs(grad[:, k] - fd) / np.maximum(1e-8, np.abs(fd))
            worst = max(worst, float(rel.max()))
    return _check("expression gradients vs finite differences", worst < 1e-5, f"rel {worst:.2e}")


def check_transform_roundtrip() -> bool:
    hypo = load_bundled_hypotheses()[0]
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        phi = {n: rng.uniform(p.low + 1e-3, p.high - 1e-3) for n, p in hypo.params.items()}
        z = to_unconstrained(phi, hypo.params)
        back, _ = from_unconstrained(z, hypo.params)
        worst = max(worst, max(abs(back[n] - phi[n]) for n in phi))
    return _check("prior transform round trip", worst < 1e-12, f"abs {worst:.2e}")


def check_hmc_normal() -> bool:
    def target(z):
        return -0.5 * float(z @ z), -z

    chain = hmc_sample(target, HmcConfig(warmup=300, n_samples=800, seed=5), np.zeros(1))
    mean = float(chain.samples.mean())
    var = float(chain.samples.var())
    ok = abs(mean) < 0.1 and abs(var - 1.0) < 0.2
    return _check("hmc standard normal moments", ok, f"mean {mean:.3f} var {var:.3f}")


def check_parse_roundtrip() -> bool:
    texts = ["IE*(1+(TPSA/SP)^2)", "1+2*3", "exp(molelogP)-sqrt(MW)/2", "-(TPSA+1)^2"]
    ok = True
    for text in texts:
        tree = ex.parse(text)
        ok = ok and ex.parse(ex.to_text(tree)) == tree
    return _check("expression parse round trip", ok)


ALL_CHECKS = (
    check_matern_value,
    check_lasso_orthonormal,
    check_lasso_zero_at_lambda_max,
    check_gp_dense_oracle,
    check_expression_gradients,
    check_transform_roundtrip,
    check_hmc_normal,
    check_parse_roundtrip,
)


def run_selfcheck() -> int:
    """Run every check; return the number of failures."""
    failures = 0
    for check in ALL_CHECKS:
        try:
            ok = check()
        except Exception as exc:  # a crashed check is a failed check
            _check(check.__name__, False, f"raised {type(exc).__name__}: {exc}")
            ok = False
        if not ok:
            failures += 1
    print(f"{len(ALL_CHECKS) - failures}/{len(ALL_CHECKS)} checks passed")
    return failures
