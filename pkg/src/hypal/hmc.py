"""Hamiltonian Monte Carlo with dual-averaging step-size adaptation.

Single chain, identity mass matrix, leapfrog count drawn uniformly from a
configured range each iteration. Step size adapts during warmup only
(Nesterov dual averaging toward a target acceptance statistic) and is
frozen to its averaged value afterwards. Iterations whose energy error
exceeds the divergence threshold are rejected and excluded from the
returned sample set. Everything is deterministic given the seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from hypal.errors import DataError, NumericalError

log = logging.getLogger(__name__)

DIVERGENCE_ENERGY = 1000.0

# dual-averaging constants
DA_GAMMA = 0.05
DA_T0 = 10.0
DA_KAPPA = 0.75

LogDensityGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class HmcConfig:
    warmup: int = 500
    n_samples: int = 500
    leapfrog_min: int = 5
    leapfrog_max: int = 25
    target_accept: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.warmup < 1 or self.n_samples < 1:
            raise DataError("warmup and n_samples must be >= 1")
        if not 1 <= self.leapfrog_min <= self.leapfrog_max:
            raise DataError("need 1 <= leapfrog_min <= leapfrog_max")
        if not 0.0 < self.target_accept < 1.0:
            raise DataError("target_accept must be in (0, 1)")


@dataclass(frozen=True)
class HmcChain:
    samples: np.ndarray  # (n_kept, dim)
    acceptance_rate: float  # mean acceptance statistic after warmup
    divergences: int  # post-warmup divergent iterations
    warmup_divergences: int
    step_size: float

    def __len__(self) -> int:
        return self.samples.shape[0]


def _safe_eval(target: LogDensityGrad, z: np.ndarray) -> tuple[float, np.ndarray]:
    """Evaluate the target, mapping numerical failures to -inf (a rejection)."""
    try:
        logp, grad = target(z)
    except (NumericalError, FloatingPointError):
        return -math.inf, np.zeros_like(z)
    if not math.isfinite(logp) or not np.all(np.isfinite(grad)):
        return -math.inf, np.zeros_like(z)
    return float(logp), np.asarray(grad, dtype=np.float64)


def _leapfrog(
    target: LogDensityGrad,
    position: np.ndarray,
    momentum: np.ndarray,
    grad: np.ndarray,
    step: float,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    with np.errstate(over="ignore", invalid="ignore"):
        q = position.copy()
        p = momentum + 0.5 * step * grad
        logp = -math.inf
        g = grad
        for i in range(n_steps):
            q = q + step * p
            if not np.all(np.isfinite(q)):
                return q, p, -math.inf, g
            logp, g = _safe_eval(target, q)
            if not math.isfinite(logp):
                return q, p, -math.inf, g
            if i < n_steps - 1:
                p = p + step * g
        p = p + 0.5 * step * g
    return q, p, logp, g


def find_reasonable_step(
    target: LogDensityGrad, position: np.ndarray, rng: np.random.Generator
) -> float:
    """Double or halve the step until one leapfrog crosses 50% acceptance."""
    step = 1.0
    logp0, grad0 = _safe_eval(target, position)
    if not math.isfinite(logp0):
        raise NumericalError("initial point has non-finite log density")
    momentum = rng.standard_normal(position.shape[0])
    h0 = logp0 - 0.5 * float(momentum @ momentum)

    def joint(step_size: float) -> float:
        q, p, logp, _ = _leapfrog(target, position, momentum, grad0, step_size, 1)
        if not math.isfinite(logp):
            return -math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            h = logp - 0.5 * float(p @ p)
        return h if math.isfinite(h) else -math.inf

    direction = 1 if joint(step) - h0 > math.log(0.5) else -1
    for _ in range(64):
        step_next = step * (2.0**direction)
        if direction * (joint(step_next) - h0) <= direction * math.log(0.5):
            return step_next  # first value across the 50% line
        step = step_next
    log.warning("step-size search did not bracket 0.5 acceptance; using %.3g", step)
    return step


def hmc_sample(target: LogDensityGrad, config: HmcConfig, initial: np.ndarray) -> HmcChain:
    """Run one chain; returns kept samples and diagnostics."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    position = np.asarray(initial, dtype=np.float64).copy()
    dim = position.shape[0]
    logp, grad = _safe_eval(target, position)
    if not math.isfinite(logp):
        raise NumericalError("initial point has non-finite log density")

    step = find_reasonable_step(target, position, rng)
    mu = math.log(10.0 * step)
    log_step_avg = 0.0
    h_bar = 0.0

    samples = np.empty((config.n_samples, dim))
    kept = 0
    divergences = 0
    warmup_divergences = 0
    accept_sum = 0.0
    accept_count = 0

    total = config.warmup + config.n_samples
    for iteration in range(1, total + 1):
        in_warmup = iteration <= config.warmup
        momentum = rng.standard_normal(dim)
        n_leapfrog = int(rng.integers(config.leapfrog_min, config.leapfrog_max + 1))
        h0 = logp - 0.5 * float(momentum @ momentum)
        q, p, logp_new, grad_new = _leapfrog(target, position, momentum, grad, step, n_leapfrog)
        if math.isfinite(logp_new):
            with np.errstate(over="ignore", invalid="ignore"):
                h1 = logp_new - 0.5 * float(p @ p)
            energy_error = h0 - h1 if math.isfinite(h1) else math.inf
        else:
            energy_error = math.inf
        divergent = not math.isfinite(energy_error) or energy_error > DIVERGENCE_ENERGY
        if divergent:
            alpha = 0.0
            if in_warmup:
                warmup_divergences += 1
            else:
                divergences += 1
        else:
            alpha = min(1.0, math.exp(min(0.0, -energy_error)))
            if rng.uniform() < alpha:
                position, logp, grad = q, logp_new, grad_new
        if in_warmup:
            # dual averaging toward the target acceptance statistic
            eta = 1.0 / (iteration + DA_T0)
            h_bar = (1.0 - eta) * h_bar + eta * (config.target_accept - alpha)
            log_step = mu - math.sqrt(iteration) / DA_GAMMA * h_bar
            weight = iteration**-DA_KAPPA
            log_step_avg = (1.0 - weight) * log_step_avg + weight * log_step
            step = math.exp(log_step)
            if iteration == config.warmup:
                if warmup_divergences == config.warmup:
                    raise NumericalError("every warmup iteration diverged")
                step = math.exp(log_step_avg)
        else:
            accept_sum += alpha
            accept_count += 1
            if not divergent:
                samples[kept] = position
                kept += 1

    acceptance = accept_sum / accept_count if accept_count else 0.0
    log.debug(
        "hmc: step=%.4g accept=%.3f divergences=%d (+%d warmup) kept=%d",
        step, acceptance, divergences, warmup_divergences, kept,
    )
    return HmcChain(
        samples=samples[:kept].copy(),
        acceptance_rate=acceptance,
        divergences=divergences,
        warmup_divergences=warmup_divergences,
        step_size=step,
    )
