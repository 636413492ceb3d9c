"""Hypotheses: named expression trees with priors on their free parameters.

File format (JSON): a list under the key "hypotheses" (or a bare list),
each entry {name, expression, params: {name: {low, high, unit}}, inputs,
output_unit, unit_checked?}. A bundled file ships the three reference
formation-enthalpy models used throughout the docs and tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from hypal import expr as ex
from hypal.data import SCHEMA
from hypal.errors import DataError, UnitError
from hypal.units import Unit, parse_unit

BUNDLED_HYPOTHESES = "reference_hypotheses.json"


@dataclass(frozen=True)
class ParamPrior:
    """Uniform prior on a scalar parameter, in its physical unit."""

    low: float
    high: float
    unit: Unit
    kind: str = "uniform"  # reserved; only uniform is implemented

    def __post_init__(self):
        if self.kind != "uniform":
            raise DataError(f"unsupported prior kind {self.kind!r}")
        if not self.low < self.high:
            raise DataError(f"prior bounds must satisfy low < high, got [{self.low}, {self.high}]")

    @property
    def width(self) -> float:
        return self.high - self.low

    def log_density(self) -> float:
        return -float(np.log(self.width))


@dataclass(frozen=True)
class Hypothesis:
    """A candidate structure-property law usable as a GP prior mean."""

    name: str
    expr: ex.Expr
    params: dict[str, ParamPrior]
    input_vars: tuple[str, ...]
    output_unit: Unit
    unit_checked: bool = True
    _grad_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        variables, params = ex.collect_names(self.expr)
        missing = params - set(self.params)
        if missing:
            raise DataError(f"hypothesis {self.name!r}: parameters without priors: {sorted(missing)}")
        unused = set(self.params) - params
        if unused:
            raise DataError(f"hypothesis {self.name!r}: priors for absent parameters: {sorted(unused)}")
        stray = variables - set(self.input_vars)
        if stray:
            raise DataError(f"hypothesis {self.name!r}: variables not declared as inputs: {sorted(stray)}")
        if self.unit_checked:
            inferred = ex.infer_unit(
                self.expr,
                {v: SCHEMA[v] for v in variables if v in SCHEMA},
                {k: p.unit for k, p in self.params.items()},
            )
            if inferred is not None and inferred != self.output_unit:
                raise UnitError(
                    f"hypothesis {self.name!r}: inferred unit {inferred.tag()} "
                    f"!= declared {self.output_unit.tag()}"
                )

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.params))

    def eval(self, inputs: Mapping[str, float], params: Mapping[str, float]) -> float:
        return ex.evaluate(self.expr, inputs, params)

    def eval_batch(
        self, columns: Mapping[str, np.ndarray], params: Mapping[str, float], n_rows=None
    ) -> np.ndarray:
        used = {k: v for k, v in columns.items() if k in self.input_vars}
        if n_rows is None and columns:
            n_rows = len(next(iter(columns.values())))
        return ex.evaluate_batch(self.expr, used, params, n_rows=n_rows)

    def _derivative(self, param: str) -> ex.Expr:
        if param not in self._grad_cache:
            self._grad_cache[param] = ex.differentiate(self.expr, param)
        return self._grad_cache[param]

    def grad_params(
        self, columns: Mapping[str, np.ndarray], params: Mapping[str, float], n_rows=None
    ) -> np.ndarray:
        """Exact partials of the model output w.r.t. each parameter.

        Returns an (n_rows, n_params) matrix; parameter order is param_names.
        """
        used = {k: v for k, v in columns.items() if k in self.input_vars}
        if n_rows is None and columns:
            n_rows = len(next(iter(columns.values())))
        cols = []
        for name in self.param_names:
            tree = self._derivative(name)
            cols.append(ex.evaluate_batch(tree, used, params, n_rows=n_rows))
        if not cols:
            return np.zeros(((n_rows or 0), 0))
        return np.column_stack(cols)


# -- bounded <-> unconstrained bijection ----------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z: float) -> float:
    """log(1 + exp(z)) without overflow."""
    return max(z, 0.0) + float(np.log1p(np.exp(-abs(z))))


def log_sigmoid_jacobian(z: float, width: float) -> float:
    """log of d/dz [low + width*sigmoid(z)] = log(width * s * (1-s)), saturation-safe."""
    return float(np.log(width)) - softplus(z) - softplus(-z)


def to_unconstrained(params: Mapping[str, float], priors: Mapping[str, ParamPrior]) -> np.ndarray:
    """Map interior points of the prior box to unconstrained coordinates.

    Order follows sorted prior names. Values on or outside the bounds are
    rejected: the bijection is only defined on the open interval.
    """
    names = sorted(priors)
    z = np.empty(len(names))
    for i, name in enumerate(names):
        prior = priors[name]
        value = params[name]
        if not prior.low < value < prior.high:
            raise DataError(
                f"parameter {name}={value!r} not strictly inside ({prior.low}, {prior.high})"
            )
        fraction = (value - prior.low) / prior.width
        z[i] = np.log(fraction) - np.log1p(-fraction)
    return z


def from_unconstrained(
    z: np.ndarray, priors: Mapping[str, ParamPrior]
) -> tuple[dict[str, float], float]:
    """Inverse map plus the log-Jacobian of the transform."""
    names = sorted(priors)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (len(names),):
        raise DataError(f"expected {len(names)} coordinates, got shape {z.shape}")
    s = _sigmoid(z)
    params: dict[str, float] = {}
    log_jac = 0.0
    for i, name in enumerate(names):
        prior = priors[name]
        params[name] = float(prior.low + prior.width * s[i])
        log_jac += log_sigmoid_jacobian(float(z[i]), prior.width)
    return params, log_jac


# -- JSON IO ---------------------------------------------------------------

def _hypothesis_from_dict(entry: dict) -> Hypothesis:
    try:
        name = entry["name"]
        expression = entry["expression"]
        inputs = tuple(entry.get("inputs", ()))
        output_unit = parse_unit(entry["output_unit"])
    except KeyError as exc:
        raise DataError(f"hypothesis entry missing field {exc}") from None
    params = {}
    for pname, spec in entry.get("params", {}).items():
        params[pname] = ParamPrior(
            low=float(spec["low"]),
            high=float(spec["high"]),
            unit=parse_unit(spec.get("unit", "dimensionless")),
        )
    tree = ex.parse(expression, var_names=inputs)
    return Hypothesis(
        name=name,
        expr=tree,
        params=params,
        input_vars=inputs,
        output_unit=output_unit,
        unit_checked=bool(entry.get("unit_checked", True)),
    )


def _hypothesis_to_dict(h: Hypothesis) -> dict:
    entry = {
        "name": h.name,
        "expression": ex.to_text(h.expr),
        "params": {
            name: {"low": p.low, "high": p.high, "unit": p.unit.tag()}
            for name, p in h.params.items()
        },
        "inputs": list(h.input_vars),
        "output_unit": h.output_unit.tag(),
    }
    if not h.unit_checked:
        entry["unit_checked"] = False
    return entry


def load_hypotheses(path: str | Path) -> list[Hypothesis]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"hypothesis file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    entries = payload["hypotheses"] if isinstance(payload, dict) else payload
    hypotheses = [_hypothesis_from_dict(entry) for entry in entries]
    if not hypotheses:
        raise DataError(f"{path}: no hypotheses defined")
    names = [h.name for h in hypotheses]
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate hypothesis names")
    return hypotheses


def save_hypotheses(
    hypotheses: Sequence[Hypothesis], path: str | Path, metadata: dict | None = None
) -> None:
    payload = dict(metadata or {})
    payload["hypotheses"] = [_hypothesis_to_dict(h) for h in hypotheses]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_bundled_hypotheses() -> list[Hypothesis]:
    """The three reference formation-enthalpy models shipped with the package."""
    ref = resources.files("hypal").joinpath("bundled", BUNDLED_HYPOTHESES)
    with resources.as_file(ref) as path:
        return load_hypotheses(path)


def bundled_hypotheses_path() -> Path:
    ref = resources.files("hypal").joinpath("bundled", BUNDLED_HYPOTHESES)
    with resources.as_file(ref) as path:
        return Path(path)
