"""Gaussian process with a parametric prior mean, inferred jointly.

The kernel is Matérn-5/2 with per-dimension lengthscales over the cheap
feature space. The mean function is a Hypothesis whose parameters are
sampled together with the kernel hyperparameters; prediction averages the
per-sample posterior means and variances (law of total variance), and the
acquisition picks the pool point with the largest aggregated variance.

All positive hyperparameters are log-transformed for sampling; bounded
mean parameters go through the sigmoid bijection from hypal.hypotheses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from hypal.errors import DataError, NumericalError
from hypal.hypotheses import Hypothesis, from_unconstrained, softplus

log = logging.getLogger(__name__)

SQRT5 = math.sqrt(5.0)
BASE_JITTER = 1e-6
MAX_JITTER = 1e-2
LENGTHSCALE_RANGE_FRACTION = 5.0
PREDICT_CHUNK = 4096


@dataclass(frozen=True)
class KernelHyper:
    """Matérn-5/2 hyperparameters; everything strictly positive."""

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=np.float64)
        object.__setattr__(self, "lengthscales", ls)
        if not (
            np.isfinite(self.signal_variance)
            and self.signal_variance > 0
            and np.isfinite(self.noise_variance)
            and self.noise_variance > 0
            and np.all(np.isfinite(ls))
            and np.all(ls > 0)
        ):
            raise DataError("kernel hyperparameters must be finite and strictly positive")


def matern52(x: np.ndarray, x_prime: np.ndarray, hyper: KernelHyper) -> float:
    """Covariance between two points (symmetric in its arguments)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x_prime = np.asarray(x_prime, dtype=np.float64).ravel()
    if x.shape != x_prime.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    scaled = (x - x_prime) / hyper.lengthscales
    d = float(np.sqrt(scaled @ scaled))
    return float(hyper.signal_variance * (1.0 + SQRT5 * d + 5.0 * d * d / 3.0) * np.exp(-SQRT5 * d))


def _cross_sq_diffs(a: np.ndarray, b: np.ndarray) -> list[np.ndarray]:
    """Per-dimension squared differences, one (len(a), len(b)) matrix each."""
    return [
        (a[:, d, None] - b[None, :, d]) ** 2
        for d in range(a.shape[1])
    ]


def _matern_matrix(
    sq_diffs: Sequence[np.ndarray], hyper: KernelHyper
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Correlation matrix M plus the (d, exp term) intermediates reused by gradients."""
    if sq_diffs:
        d2 = sum(s / l**2 for s, l in zip(sq_diffs, hyper.lengthscales))
        d = np.sqrt(np.maximum(d2, 0.0))
    else:
        d = np.zeros((0, 0))
    e = np.exp(-SQRT5 * d)
    m = (1.0 + SQRT5 * d + (5.0 / 3.0) * d * d) * e
    return m, d, e


@dataclass(frozen=True)
class GpData:
    """Training inputs for one fit: kernel inputs, mean-function columns, targets."""

    ids: np.ndarray
    X: np.ndarray
    columns: dict[str, np.ndarray]
    y: np.ndarray

    def __post_init__(self):
        if len(set(self.ids.tolist())) != len(self.ids):
            raise DataError("duplicate ids in GP training data")
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"inconsistent shapes: X {self.X.shape}, y {self.y.shape}")

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])


@dataclass(frozen=True)
class HyperPriors:
    """Weakly informative, scale-aware hyperpriors for one fit."""

    lengthscale_mu: np.ndarray  # mean of log lengthscale, per dimension
    lengthscale_sigma: float
    signal_std_scale: float  # HalfNormal scale on signal std
    noise_std_scale: float  # HalfNormal scale on noise std

    @staticmethod
    def from_data(data: GpData, hypothesis: Hypothesis, lengthscale_sigma: float = 1.0) -> "HyperPriors":
        ranges = np.ptp(data.X, axis=0) if data.n > 1 else np.ones(data.dim)
        ranges = np.where(ranges > 0, ranges, 1.0)
        mu = np.log(ranges / LENGTHSCALE_RANGE_FRACTION)
        midpoint = {name: 0.5 * (p.low + p.high) for name, p in hypothesis.params.items()}
        if data.n:
            residual = data.y - hypothesis.eval_batch(data.columns, midpoint, n_rows=data.n)
            signal_scale = float(residual.std())
            noise_scale = 0.1 * float(data.y.std())
        else:
            signal_scale = noise_scale = 0.0
        return HyperPriors(
            lengthscale_mu=mu,
            lengthscale_sigma=lengthscale_sigma,
            signal_std_scale=signal_scale if signal_scale > 0 else 1.0,
            noise_std_scale=noise_scale if noise_scale > 0 else 1.0,
        )


@dataclass(frozen=True)
class PosteriorSamples:
    """Joint posterior draws retained for prediction."""

    kernel: list[KernelHyper]
    mean_params: list[dict[str, float]]
    acceptance_rate: float
    divergences: int

    def __post_init__(self):
        if len(self.kernel) != len(self.mean_params):
            raise DataError("kernel and mean-parameter sample lists differ in length")

    def __len__(self) -> int:
        return len(self.kernel)


@dataclass(frozen=True)
class Prediction:
    """Sample-aggregated posterior mean and (latent, noise-free) variance."""

    mean: np.ndarray
    variance: np.ndarray
    per_sample_means: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.variance < 0):
            raise NumericalError("negative aggregated posterior variance")


class GpProblem:
    """Joint log density over unconstrained (kernel, mean) coordinates.

    Coordinate layout: [log signal_std, log lengthscales (dim), log noise_std,
    mean parameters in sorted name order].
    """

    def __init__(self, data: GpData, hypothesis: Hypothesis, priors: HyperPriors):
        if data.n == 0:
            raise DataError("joint density needs at least one observation")
        self.data = data
        self.hypothesis = hypothesis
        self.priors = priors
        self.param_names = hypothesis.param_names
        self.dim = 2 + data.dim + len(self.param_names)
        self._sq_diffs = _cross_sq_diffs(data.X, data.X)

    # -- coordinate packing -------------------------------------------

    def unpack(self, z: np.ndarray) -> tuple[KernelHyper, dict[str, float], float]:
        """Split coordinates into (kernel hyper, mean params, transform log-Jacobian)."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DataError(f"expected {self.dim} coordinates, got shape {z.shape}")
        d = self.data.dim
        with np.errstate(over="ignore"):
            signal_std = float(np.exp(z[0]))
            lengthscales = np.exp(z[1 : 1 + d])
            noise_std = float(np.exp(z[1 + d]))
        try:
            hyper = KernelHyper(signal_std * signal_std, lengthscales, noise_std * noise_std)
        except (DataError, OverflowError) as exc:
            # exp under/overflow during an aggressive proposal: numerical, not data
            raise NumericalError(str(exc)) from None
        phi, phi_log_jac = from_unconstrained(z[2 + d :], self.hypothesis.params)
        # positive transforms contribute log|d exp(z)/dz| = z each
        log_jac = float(z[0] + z[1 : 1 + d].sum() + z[1 + d]) + phi_log_jac
        return hyper, phi, log_jac

    def initial_point(self) -> np.ndarray:
        z = np.zeros(self.dim)
        z[0] = math.log(self.priors.signal_std_scale)
        z[1 : 1 + self.data.dim] = self.priors.lengthscale_mu
        z[1 + self.data.dim] = math.log(self.priors.noise_std_scale)
        # mean params start at the prior midpoint (z = 0 under the sigmoid map)
        return z

    # -- density and gradient -----------------------------------------

    def _chol(self, kernel_matrix: np.ndarray, signal_variance: float):
        jitter = BASE_JITTER
        while True:
            try:
                stabilized = kernel_matrix + jitter * signal_variance * np.eye(self.data.n)
                return cho_factor(stabilized, lower=True), jitter
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > MAX_JITTER:
                    raise NumericalError(
                        f"Cholesky failed even with jitter {MAX_JITTER:g} * signal variance"
                    ) from None

    def logdensity_and_grad(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        hyper, phi, _ = self.unpack(z)
        data, priors = self.data, self.priors
        n, d = data.n, data.dim
        signal_std = math.sqrt(hyper.signal_variance)
        noise_std = math.sqrt(hyper.noise_variance)

        m_matrix, dist, exp_term = _matern_matrix(self._sq_diffs, hyper)
        kernel_matrix = hyper.signal_variance * m_matrix + hyper.noise_variance * np.eye(n)
        (chol, lower), jitter = self._chol(kernel_matrix, hyper.signal_variance)

        mean = self.hypothesis.eval_batch(data.columns, phi, n_rows=n)
        residual = data.y - mean
        alpha = cho_solve((chol, lower), residual)
        logdet = 2.0 * float(np.log(np.diag(chol)).sum())
        loglik = -0.5 * float(residual @ alpha) - 0.5 * logdet - 0.5 * n * math.log(2.0 * math.pi)

        kernel_inv = cho_solve((chol, lower), np.eye(n))
        outer = np.outer(alpha, alpha)
        weight = outer - kernel_inv  # d loglik / dK = weight / 2

        grad = np.zeros(self.dim)
        # signal std (log scale): dK/dz = 2 (sigma_f^2 (M + jitter I))
        dk_signal = 2.0 * hyper.signal_variance * (m_matrix + jitter * np.eye(n))
        grad[0] = 0.5 * float(np.sum(weight * dk_signal))
        # lengthscales (log scale)
        if n > 1:
            radial = hyper.signal_variance * (5.0 / 3.0) * (1.0 + SQRT5 * dist) * exp_term
            for k in range(d):
                dk = radial * (self._sq_diffs[k] / hyper.lengthscales[k] ** 2)
                grad[1 + k] = 0.5 * float(np.sum(weight * dk))
        # noise std (log scale): dK/dz = 2 sigma_n^2 I
        grad[1 + d] = 0.5 * float(np.trace(weight)) * 2.0 * hyper.noise_variance
        # mean parameters
        if self.param_names:
            g_matrix = self.hypothesis.grad_params(data.columns, phi, n_rows=n)
            dmean = g_matrix.T @ alpha
            for i, name in enumerate(self.param_names):
                prior = self.hypothesis.params[name]
                fraction = (phi[name] - prior.low) / prior.width
                dphi_dz = prior.width * fraction * (1.0 - fraction)
                grad[2 + d + i] = float(dmean[i]) * dphi_dz

        # hyperpriors (including transform Jacobians), all on the z scale
        logp = loglik
        z_signal, z_noise = float(z[0]), float(z[1 + d])
        for z_val, std, scale, index in (
            (z_signal, signal_std, priors.signal_std_scale, 0),
            (z_noise, noise_std, priors.noise_std_scale, 1 + d),
        ):
            # HalfNormal(scale) density of exp(z) plus Jacobian z
            logp += (
                0.5 * math.log(2.0 / math.pi)
                - math.log(scale)
                - 0.5 * (std / scale) ** 2
                + z_val
            )
            grad[index] += 1.0 - (std / scale) ** 2
        z_ls = z[1 : 1 + d]
        sigma_ls = priors.lengthscale_sigma
        logp += float(
            np.sum(
                -0.5 * ((z_ls - priors.lengthscale_mu) / sigma_ls) ** 2
                - math.log(sigma_ls)
                - 0.5 * math.log(2.0 * math.pi)
            )
        )
        grad[1 : 1 + d] += -(z_ls - priors.lengthscale_mu) / sigma_ls**2
        for i, name in enumerate(self.param_names):
            prior = self.hypothesis.params[name]
            fraction = (phi[name] - prior.low) / prior.width
            z_phi = float(z[2 + d + i])
            # uniform density + sigmoid Jacobian collapse to log(s(1-s))
            logp += -softplus(z_phi) - softplus(-z_phi)
            grad[2 + d + i] += 1.0 - 2.0 * fraction
        return logp, grad


def joint_log_density(
    z: np.ndarray, data: GpData, hypothesis: Hypothesis, priors: HyperPriors | None = None
) -> tuple[float, np.ndarray]:
    """One-shot evaluation; build a GpProblem directly for repeated calls."""
    problem = GpProblem(data, hypothesis, priors or HyperPriors.from_data(data, hypothesis))
    return problem.logdensity_and_grad(np.asarray(z, dtype=np.float64))


def sample_posterior(
    data: GpData,
    hypothesis: Hypothesis,
    hmc_config,
    thin_to: int = 100,
    priors: HyperPriors | None = None,
) -> PosteriorSamples:
    """Fit the joint posterior by HMC and thin the chain for prediction.

    Raises NumericalError if the chain keeps no samples.
    """
    from hypal.hmc import hmc_sample

    problem = GpProblem(data, hypothesis, priors or HyperPriors.from_data(data, hypothesis))
    chain = hmc_sample(problem.logdensity_and_grad, hmc_config, problem.initial_point())
    if len(chain) == 0:
        raise NumericalError("HMC kept no samples (all post-warmup iterations diverged)")
    kept = len(chain)
    m = min(thin_to, kept)
    # evenly spaced thinning over the kept samples, latest included
    indices = np.unique(np.linspace(kept - 1, 0, m).round().astype(int))[::-1]
    kernel: list[KernelHyper] = []
    mean_params: list[dict[str, float]] = []
    for idx in indices:
        hyper, phi, _ = problem.unpack(chain.samples[idx])
        kernel.append(hyper)
        mean_params.append(phi)
    log.debug(
        "posterior for %s: accept=%.3f divergences=%d step=%.3g kept=%d thinned=%d",
        hypothesis.name, chain.acceptance_rate, chain.divergences, chain.step_size,
        kept, len(kernel),
    )
    return PosteriorSamples(
        kernel=kernel,
        mean_params=mean_params,
        acceptance_rate=chain.acceptance_rate,
        divergences=chain.divergences,
    )


def predict(
    samples: PosteriorSamples,
    data: GpData,
    hypothesis: Hypothesis,
    x_star: np.ndarray,
    columns_star: Mapping[str, np.ndarray],
    keep_per_sample: bool = False,
) -> Prediction:
    """Posterior predictive aggregated over samples.

    Per sample the latent (noise-free) mean and variance come from the
    usual conditional formulas; aggregation uses the law of total variance.
    With no training rows this reduces to the prior predictive.
    """
    if len(samples) == 0:
        raise DataError("no posterior samples")
    x_star = np.asarray(x_star, dtype=np.float64)
    n_star = x_star.shape[0]
    n = data.n
    means = np.empty((len(samples), n_star))
    variances = np.empty((len(samples), n_star))
    sq_train = _cross_sq_diffs(data.X, data.X) if n else []
    sq_cross_all = _cross_sq_diffs(data.X, x_star) if n else []
    for i in range(len(samples)):
        hyper = samples.kernel[i]
        phi = samples.mean_params[i]
        mean_star = hypothesis.eval_batch(columns_star, phi, n_rows=n_star)
        if n == 0:
            means[i] = mean_star
            variances[i] = hyper.signal_variance
            continue
        m_matrix, _, _ = _matern_matrix(sq_train, hyper)
        kernel_matrix = hyper.signal_variance * m_matrix + hyper.noise_variance * np.eye(n)
        jitter = BASE_JITTER
        while True:
            try:
                chol = np.linalg.cholesky(
                    kernel_matrix + jitter * hyper.signal_variance * np.eye(n)
                )
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > MAX_JITTER:
                    raise NumericalError("Cholesky failed during prediction") from None
        mean_train = hypothesis.eval_batch(data.columns, phi, n_rows=n)
        alpha = cho_solve((chol, True), data.y - mean_train)
        for start in range(0, n_star, PREDICT_CHUNK):
            stop = min(start + PREDICT_CHUNK, n_star)
            sq_cross = [s[:, start:stop] for s in sq_cross_all]
            cross_m, _, _ = _matern_matrix(sq_cross, hyper)
            k_cross = hyper.signal_variance * cross_m  # (n, chunk)
            means[i, start:stop] = mean_star[start:stop] + k_cross.T @ alpha
            q = solve_triangular(chol, k_cross, lower=True)
            variances[i, start:stop] = np.maximum(
                hyper.signal_variance - np.sum(q * q, axis=0), 0.0
            )
    mean = means.mean(axis=0)
    variance = variances.mean(axis=0) + means.var(axis=0)
    return Prediction(
        mean=mean,
        variance=variance,
        per_sample_means=means if keep_per_sample else None,
    )


def acquire(prediction: Prediction, pool_ids: Sequence[int]) -> int:
    """Pool id with the largest aggregated posterior variance; ties take the lowest id."""
    pool_ids = list(pool_ids)
    if not pool_ids:
        raise DataError("empty pool")
    if len(pool_ids) != prediction.variance.shape[0]:
        raise DataError("pool ids and prediction length differ")
    best_id = pool_ids[0]
    best_v = float(prediction.variance[0])
    for idx in range(1, len(pool_ids)):
        v = float(prediction.variance[idx])
        pid = pool_ids[idx]
        if v > best_v or (v == best_v and pid < best_id):
            best_id, best_v = pid, v
    return int(best_id)
