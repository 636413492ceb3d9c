"""Reward-driven active learning over an ensemble of competing hypotheses.

Each step: epsilon-greedy pick of a hypothesis, joint GP fit by HMC on the
measured set, prediction over a fixed evaluation pool, reward +1/-1 by
whether total uncertainty dropped, variance-maximizing query, oracle
lookup, bookkeeping. Initializations are independent given the master
seed; within one initialization the loop is strictly sequential.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from hypal import gp
from hypal.data import FeatureTable, TARGET_COLUMN
from hypal.errors import DataError
from hypal.hmc import HmcConfig
from hypal.hypotheses import Hypothesis

log = logging.getLogger(__name__)

# spawn-key namespaces under the master seed; adding initializations or
# steps never perturbs the streams of existing ones
_NS_SEEDS = 0
_NS_POLICY = 1
_NS_SUBSAMPLE = 2
_NS_HMC = 3


@dataclass(frozen=True)
class Policy:
    """Epsilon-greedy selection policy."""

    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise DataError(f"epsilon must be in [0, 1], got {self.epsilon}")


class RewardLedger:
    """Cumulative reward and selection count per model."""

    def __init__(self, n_models: int):
        if n_models < 1:
            raise DataError("need at least one model")
        self.cumulative = [0] * n_models
        self.selections = [0] * n_models

    def update(self, model: int, reward: int) -> None:
        if reward not in (-1, 1):
            raise DataError(f"reward must be +1 or -1, got {reward}")
        self.cumulative[model] += reward
        self.selections[model] += 1

    def average(self, model: int) -> float | None:
        if self.selections[model] == 0:
            return None
        return self.cumulative[model] / self.selections[model]


def select_model(ledger: RewardLedger, policy: Policy, rng: np.random.Generator) -> int:
    """Uniform with probability epsilon, otherwise best cumulative reward (ties: lowest index)."""
    n = len(ledger.cumulative)
    if rng.uniform() < policy.epsilon:
        return int(rng.integers(0, n))
    best = 0
    for i in range(1, n):
        if ledger.cumulative[i] > ledger.cumulative[best]:
            best = i
    return best


def total_uncertainty(prediction: gp.Prediction) -> tuple[float, float]:
    """(sum, median) of the posterior standard deviation over the pool."""
    if prediction.variance.shape[0] == 0:
        raise DataError("uncertainty of an empty pool")
    std = np.sqrt(prediction.variance)
    return float(std.sum()), float(np.median(std))


@dataclass(frozen=True)
class StepRecord:
    step: int
    model: int
    model_name: str
    u_total: float
    u_median: float
    reward: int
    queried_id: int
    seconds: float


@dataclass
class LearningTrace:
    init_index: int
    seed_ids: tuple[int, ...]
    records: list[StepRecord] = field(default_factory=list)


@dataclass
class LoopState:
    """Mutable state of one initialization's exploration loop."""

    measured_ids: list[int]
    pool_ids: list[int]
    eval_ids: list[int]
    ledger: RewardLedger
    u_prev: float | None = None
    step_index: int = 0


def _hmc_seed(master_seed: int, init_index: int, step_index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(_NS_HMC, init_index, step_index))
    return int(ss.generate_state(1)[0])


def _gp_data(table: FeatureTable, row_of: dict[int, int], ids: Sequence[int], gp_inputs: Sequence[str]) -> gp.GpData:
    idx = np.array([row_of[i] for i in ids], dtype=np.intp)
    columns = table.rows(idx)
    x = np.column_stack([columns[name] for name in gp_inputs])
    return gp.GpData(
        ids=np.asarray(list(ids), dtype=np.int64),
        X=x,
        columns=columns,
        y=columns[TARGET_COLUMN],
    )


class Experiment:
    """Shared, immutable context for all initializations of one run."""

    def __init__(
        self,
        table: FeatureTable,
        hypotheses: Sequence[Hypothesis],
        excluded_ids: Sequence[int],
        gp_inputs: Sequence[str] = ("TPSA", "molelogP"),
        n_seed: int = 300,
        n_steps: int = 200,
        epsilon: float = 0.3,
        pool_subsample: int = 2000,
        hmc_warmup: int = 500,
        hmc_samples: int = 500,
        hmc_thin_to: int = 100,
        leapfrog_min: int = 5,
        leapfrog_max: int = 25,
        target_accept: float = 0.8,
        master_seed: int = 0,
    ):
        if not hypotheses:
            raise DataError("no hypotheses to compete")
        self.table = table
        self.hypotheses = list(hypotheses)
        self.gp_inputs = tuple(gp_inputs)
        self.n_seed = n_seed
        self.n_steps = n_steps
        self.policy = Policy(epsilon)
        self.pool_subsample = pool_subsample
        self.hmc_warmup = hmc_warmup
        self.hmc_samples = hmc_samples
        self.hmc_thin_to = hmc_thin_to
        self.leapfrog_min = leapfrog_min
        self.leapfrog_max = leapfrog_max
        self.target_accept = target_accept
        self.master_seed = master_seed
        self.row_of = table.index_of()
        excluded = set(excluded_ids)
        self.candidate_ids = [int(r.id) for r in table.records if r.id not in excluded]
        if len(self.candidate_ids) <= n_seed:
            raise DataError(
                f"pool of {len(self.candidate_ids)} rows cannot supply {n_seed} seeds and a query pool"
            )

    def init_state(self, init_index: int) -> tuple[LoopState, tuple[int, ...], list[gp.HyperPriors]]:
        seeds_rng = np.random.default_rng(
            np.random.SeedSequence(self.master_seed, spawn_key=(_NS_SEEDS, init_index))
        )
        seed_ids = sorted(
            int(i) for i in seeds_rng.choice(self.candidate_ids, size=self.n_seed, replace=False)
        )
        remaining = [i for i in self.candidate_ids if i not in set(seed_ids)]
        if self.pool_subsample and self.pool_subsample < len(remaining):
            sub_rng = np.random.default_rng(
                np.random.SeedSequence(self.master_seed, spawn_key=(_NS_SUBSAMPLE, init_index))
            )
            eval_ids = sorted(
                int(i) for i in sub_rng.choice(remaining, size=self.pool_subsample, replace=False)
            )
        else:
            eval_ids = list(remaining)
        state = LoopState(
            measured_ids=list(seed_ids),
            pool_ids=remaining,
            eval_ids=eval_ids,
            ledger=RewardLedger(len(self.hypotheses)),
        )
        # per-model hyperpriors are frozen from the seed set of this initialization
        seed_data = _gp_data(self.table, self.row_of, seed_ids, self.gp_inputs)
        hyperpriors = [gp.HyperPriors.from_data(seed_data, h) for h in self.hypotheses]
        return state, tuple(seed_ids), hyperpriors

    def policy_rng(self, init_index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.master_seed, spawn_key=(_NS_POLICY, init_index))
        )

    def step(
        self,
        state: LoopState,
        init_index: int,
        policy_rng: np.random.Generator,
        hyperpriors: Sequence[gp.HyperPriors],
    ) -> StepRecord:
        """Advance one exploration step, mutating the state."""
        if not state.eval_ids:
            raise DataError("evaluation pool is empty")
        started = time.perf_counter()
        model_idx = select_model(state.ledger, self.policy, policy_rng)
        hypothesis = self.hypotheses[model_idx]
        data = _gp_data(self.table, self.row_of, state.measured_ids, self.gp_inputs)
        hmc_config = HmcConfig(
            warmup=self.hmc_warmup,
            n_samples=self.hmc_samples,
            leapfrog_min=self.leapfrog_min,
            leapfrog_max=self.leapfrog_max,
            target_accept=self.target_accept,
            seed=_hmc_seed(self.master_seed, init_index, state.step_index),
        )
        samples = gp.sample_posterior(
            data, hypothesis, hmc_config, thin_to=self.hmc_thin_to,
            priors=hyperpriors[model_idx],
        )
        eval_idx = np.array([self.row_of[i] for i in state.eval_ids], dtype=np.intp)
        eval_columns = self.table.rows(eval_idx)
        x_star = np.column_stack([eval_columns[name] for name in self.gp_inputs])
        prediction = gp.predict(samples, data, hypothesis, x_star, eval_columns)
        u_total, u_median = total_uncertainty(prediction)
        if state.u_prev is None:
            reward = 0  # no comparison point yet; excluded from the ledger
        else:
            reward = 1 if u_total < state.u_prev else -1
            state.ledger.update(model_idx, reward)
        queried = gp.acquire(prediction, state.eval_ids)
        state.measured_ids.append(queried)
        state.pool_ids.remove(queried)
        state.eval_ids.remove(queried)
        state.u_prev = u_total
        record = StepRecord(
            step=state.step_index,
            model=model_idx,
            model_name=hypothesis.name,
            u_total=u_total,
            u_median=u_median,
            reward=reward,
            queried_id=queried,
            seconds=time.perf_counter() - started,
        )
        state.step_index += 1
        log.info(
            "init %d step %d: model=%s U_total=%.6g U_median=%.6g reward=%+d queried=%d "
            "(accept=%.2f div=%d)",
            init_index, record.step, hypothesis.name, u_total, u_median, reward, queried,
            samples.acceptance_rate, samples.divergences,
        )
        return record

    def run_init(
        self,
        init_index: int,
        on_step: Callable[[int, StepRecord], None] | None = None,
    ) -> tuple[LearningTrace, RewardLedger]:
        state, seed_ids, hyperpriors = self.init_state(init_index)
        trace = LearningTrace(init_index=init_index, seed_ids=seed_ids)
        policy_rng = self.policy_rng(init_index)
        for _ in range(self.n_steps):
            record = self.step(state, init_index, policy_rng, hyperpriors)
            trace.records.append(record)
            if on_step is not None:
                on_step(init_index, record)
        return trace, state.ledger


def run(
    experiment: Experiment,
    n_init: int,
    on_step: Callable[[int, StepRecord], None] | None = None,
    workers: int = 1,
) -> tuple[list[LearningTrace], dict]:
    """Run all initializations and summarize per-model rewards.

    With workers > 1 initializations execute in separate processes; the
    per-initialization RNG streams make the result identical either way.
    """
    if n_init < 1:
        raise DataError("n_init must be >= 1")
    results: list[tuple[LearningTrace, RewardLedger]] = []
    if workers > 1 and n_init > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(experiment.run_init, i) for i in range(n_init)]
            results = [f.result() for f in futures]
        if on_step is not None:
            for trace, _ in results:
                for record in trace.records:
                    on_step(trace.init_index, record)
    else:
        for i in range(n_init):
            results.append(experiment.run_init(i, on_step=on_step))
    traces = [trace for trace, _ in results]
    summary = summarize(experiment.hypotheses, results)
    return traces, summary


def summarize(hypotheses: Sequence[Hypothesis], results) -> dict:
    names = [h.name for h in hypotheses]
    per_init = []
    total_cumulative = {n: 0 for n in names}
    total_selections = {n: 0 for n in names}
    for trace, ledger in results:
        averages = {}
        for idx, name in enumerate(names):
            averages[name] = ledger.average(idx)
            total_cumulative[name] += ledger.cumulative[idx]
            total_selections[name] += ledger.selections[idx]
        per_init.append(
            {
                "init": trace.init_index,
                "average_reward": averages,
                "selections": {n: ledger.selections[i] for i, n in enumerate(names)},
                "final_cumulative": {n: ledger.cumulative[i] for i, n in enumerate(names)},
            }
        )
    aggregate_avg = {
        n: (total_cumulative[n] / total_selections[n] if total_selections[n] else None)
        for n in names
    }
    ranking = sorted(
        names,
        key=lambda n: (-(aggregate_avg[n] if aggregate_avg[n] is not None else -2.0), n),
    )
    return {
        "models": names,
        "per_init": per_init,
        "aggregate": {
            "average_reward": aggregate_avg,
            "selections": total_selections,
            "final_cumulative": total_cumulative,
            "ranking": ranking,
        },
    }
