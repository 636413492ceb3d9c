"""Experiment configuration: flat JSON keys, CLI-overridable, hashable.

Every output artifact embeds the sha256 hash of the resolved configuration
plus the master seed, so any result file can be traced to its exact setup.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from hypal.errors import UsageError


@dataclass
class ExperimentConfig:
    dataset: str = ""
    hypotheses: str = ""  # empty: use the bundled reference models
    output_dir: str = "out"
    seed: int = 0
    # partitioning and loop protocol
    hypothesis_subset_n: int = 1000
    n_seed: int = 300
    n_steps: int = 200
    n_init: int = 5
    epsilon: float = 0.3
    pool_subsample: int = 2000  # 0 = full pool
    gp_inputs: tuple[str, ...] = ("TPSA", "molelogP")
    # HMC budget (full-scale defaults; desk preset: 250/250/50)
    hmc_warmup: int = 500
    hmc_samples: int = 500
    hmc_thin_to: int = 100
    leapfrog_min: int = 5
    leapfrog_max: int = 25
    target_accept: float = 0.8
    # kernel tag and hyperprior scale (only matern52 is implemented)
    kernel: str = "matern52"
    lengthscale_sigma: float = 1.0
    # forge settings
    forge_max_terms: int = 3
    forge_sis_top: int = 2000
    forge_lambda_points: int = 16
    forge_lambda_min_ratio: float = 1e-4
    forge_n_hypotheses: int = 3
    # execution
    workers: int = 1
    trace_timings: bool = False

    def __post_init__(self):
        if isinstance(self.gp_inputs, list):
            self.gp_inputs = tuple(self.gp_inputs)
        positive = (
            "hypothesis_subset_n", "n_seed", "n_init", "hmc_warmup", "hmc_samples",
            "hmc_thin_to", "leapfrog_min", "leapfrog_max", "forge_max_terms",
            "forge_sis_top", "forge_lambda_points", "forge_n_hypotheses", "workers",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise UsageError(f"config key {name} must be >= 1")
        if self.n_steps < 0:
            raise UsageError("n_steps must be >= 0")
        if self.pool_subsample < 0:
            raise UsageError("pool_subsample must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise UsageError("epsilon must be in [0, 1]")
        if self.kernel != "matern52":
            raise UsageError(f"unsupported kernel {self.kernel!r}")
        if self.leapfrog_min > self.leapfrog_max:
            raise UsageError("leapfrog_min must be <= leapfrog_max")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["gp_inputs"] = list(self.gp_inputs)
        return out

    # execution plumbing that cannot change results stays out of the hash
    _UNHASHED = ("output_dir", "workers", "trace_timings")

    def hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in self._UNHASHED}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file plus explicit overrides."""
    values: dict = {}
    if path:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must contain a JSON object")
        values.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise UsageError(f"bad configuration: {exc}") from None
