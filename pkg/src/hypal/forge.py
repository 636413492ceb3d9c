"""Candidate equation generation: functionalize, combine, screen, sparsify.

The pipeline expands base features through the unary operator set, builds
unit-balanced candidates of the form carrier * (1 + sum of dimensionless
terms), screens them by correlation with the target, fits an L1 path on
the survivors, and promotes the top-ranked forms into hypotheses with
data-driven priors on their expensive features.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from hypal import expr as ex
from hypal import lasso
from hypal.data import FeatureTable, SCHEMA
from hypal.errors import DataError
from hypal.hypotheses import Hypothesis, ParamPrior
from hypal.ops import ALL_OPS, UnaryOp
from hypal.units import Unit

log = logging.getLogger(__name__)

# Features whose values come from expensive electronic-structure data are
# promoted to free parameters when a candidate becomes a hypothesis; the
# cheap topological features stay as model inputs.
EXPENSIVE_FEATURES = ("SP", "IE")

PRIOR_WIDEN_FACTOR = 1.5


@dataclass(frozen=True)
class Descriptor:
    """A functionalized feature column with symbolic provenance."""

    provenance: ex.Expr
    unit: Unit
    values: np.ndarray

    @property
    def key(self) -> str:
        return ex.canonical_key(self.provenance)

    @property
    def label(self) -> str:
        return ex.to_text(self.provenance)


def expand_features(
    columns: Mapping[str, np.ndarray],
    base_features: Sequence[str],
    operators: Sequence[UnaryOp] = ALL_OPS,
    units: Mapping[str, Unit] | None = None,
) -> list[Descriptor]:
    """Apply every operator to every base feature, skipping out-of-domain pairs.

    Ordering is deterministic: feature order x operator order. A candidate
    whose domain or unit rule fails for any row is skipped entirely (and
    logged), so surviving columns always align with the design matrix.
    """
    units = units or SCHEMA
    if not columns or len(next(iter(columns.values()))) == 0:
        raise DataError("cannot expand an empty subset")
    out: list[Descriptor] = []
    for feature in base_features:
        values = np.asarray(columns[feature], dtype=np.float64)
        unit = units[feature]
        for op in operators:
            if not op.admits(values):
                log.debug("skip %s(%s): domain violation", op.name, feature)
                continue
            try:
                result_unit = op.result_unit(unit)
            except Exception:
                log.debug("skip %s(%s): unit rule violation", op.name, feature)
                continue
            applied = op.apply(values)
            if not np.all(np.isfinite(applied)):
                log.debug("skip %s(%s): non-finite result", op.name, feature)
                continue
            out.append(
                Descriptor(
                    provenance=op.build(ex.Var(feature)),
                    unit=result_unit,
                    values=np.asarray(applied, dtype=np.float64),
                )
            )
    return out


def _dimensionless_terms(pool: Sequence[Descriptor]) -> list[Descriptor]:
    """Dimensionless pool entries plus finite ratios of same-unit pool pairs."""
    terms: list[Descriptor] = [d for d in pool if d.unit.is_dimensionless()]
    for i, num in enumerate(pool):
        for j, den in enumerate(pool):
            if i == j or num.unit != den.unit:
                continue
            if np.any(den.values == 0):
                continue
            ratio = num.values / den.values
            if not np.all(np.isfinite(ratio)):
                continue
            terms.append(
                Descriptor(
                    provenance=ex.div(num.provenance, den.provenance),
                    unit=num.unit / den.unit,
                    values=ratio,
                )
            )
    # drop duplicate algebraic forms and the trivial constant 1
    seen: set[str] = {"1"}
    unique: list[Descriptor] = []
    for term in terms:
        key = term.key
        if key in seen:
            continue
        seen.add(key)
        unique.append(term)
    return unique


def combine_descriptors(
    pool: Sequence[Descriptor],
    max_terms: int,
    target_unit: Unit,
) -> list[Descriptor]:
    """Build carrier * (1 + sum of dimensionless terms) candidates.

    max_terms counts the carrier plus the summed terms, so max_terms=3
    yields candidates with at most two correction terms. Duplicate
    canonical forms are removed, keeping first occurrence.
    """
    if max_terms not in (2, 3):
        raise DataError(f"max_terms must be 2 or 3, got {max_terms}")
    carriers = [d for d in pool if d.unit == target_unit]
    if not carriers:
        raise DataError(f"no carrier descriptor with unit {target_unit.tag()}")
    terms = _dimensionless_terms(pool)
    candidates: list[Descriptor] = []
    seen: set[str] = set()

    def emit(descriptor: Descriptor):
        key = descriptor.key
        if key not in seen:
            seen.add(key)
            candidates.append(descriptor)

    for carrier in carriers:
        emit(carrier)
        for i, first in enumerate(terms):
            expr_1 = ex.mul(carrier.provenance, ex.add(ex.const(1.0), first.provenance))
            emit(Descriptor(expr_1, carrier.unit, carrier.values * (1.0 + first.values)))
            if max_terms < 3:
                continue
            for second in terms[i + 1 :]:
                summed = ex.add(ex.add(ex.const(1.0), first.provenance), second.provenance)
                values = carrier.values * (1.0 + first.values + second.values)
                emit(Descriptor(ex.mul(carrier.provenance, summed), carrier.unit, values))
    return candidates


def sis_screen(
    candidates: Sequence[Descriptor],
    target: np.ndarray,
    k: int,
) -> list[Descriptor]:
    """Top-k candidates by |Pearson correlation| with the target.

    Constant columns score 0. Ties keep candidate order; the top-k list is
    always a prefix of the top-(k+1) list.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    target = np.asarray(target, dtype=np.float64)
    centered = target - target.mean()
    target_norm = float(np.sqrt(centered @ centered))
    scores: list[float] = []
    for cand in candidates:
        values = cand.values - cand.values.mean()
        norm = float(np.sqrt(values @ values))
        if norm == 0.0 or target_norm == 0.0:
            scores.append(0.0)
        else:
            scores.append(abs(float(values @ centered)) / (norm * target_norm))
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    return [candidates[i] for i in order[:k]]


def descriptor_matrix(candidates: Sequence[Descriptor]) -> np.ndarray:
    return np.column_stack([c.values for c in candidates])


@dataclass(frozen=True)
class ForgeReport:
    """Ranked sparsifier output, ready for hypothesis assembly and dumping."""

    candidates: list[Descriptor]
    result: lasso.LassoResult
    ranking: list[int]
    lam: float


def sparsify(
    candidates: Sequence[Descriptor],
    target: np.ndarray,
    lambda_points: int = 16,
    lambda_min_ratio: float = 1e-4,
    min_active: int = 3,
) -> ForgeReport:
    """Fit the penalty path and keep the sparsest fit with enough survivors.

    Constant candidate columns cannot be standardized and are dropped first.
    """
    kept = [c for c in candidates if c.values.std() > 0]
    if not kept:
        raise DataError("no non-constant candidates to sparsify")
    matrix = descriptor_matrix(kept)
    standardized, _, _ = lasso.standardize_columns(matrix)
    target = np.asarray(target, dtype=np.float64)
    centered = target - target.mean()
    grid = lasso.default_lambda_grid(standardized, centered, lambda_points, lambda_min_ratio)
    # walk the warm-started path only until enough descriptors survive
    chosen = None
    warm = None
    for lam in grid:
        result = lasso.lasso_fit(standardized, centered, float(lam), warm_start=warm)
        warm = result.coefficients
        chosen = result
        if len(result.active_set) >= min_active:
            break
    if chosen is None or not chosen.active_set:
        raise DataError("empty active set at every penalty level")
    ranking = lasso.rank_descriptors(chosen)
    return ForgeReport(candidates=list(kept), result=chosen, ranking=ranking, lam=chosen.lam)


def _promote(tree: ex.Expr, promoted: Sequence[str]) -> ex.Expr:
    if isinstance(tree, ex.Var) and tree.name in promoted:
        return ex.Param(tree.name)
    if isinstance(tree, ex.Unary):
        return ex.Unary(tree.fn, _promote(tree.child, promoted))
    if isinstance(tree, ex.Binary):
        return ex.Binary(tree.op, _promote(tree.left, promoted), _promote(tree.right, promoted))
    return tree


def data_driven_prior(values: np.ndarray, unit: Unit) -> ParamPrior:
    """Uniform prior over the central feature range, widened about the midpoint."""
    p1, p99 = np.percentile(values, [1, 99])
    mid = 0.5 * (p1 + p99)
    half = 0.5 * (p99 - p1) * PRIOR_WIDEN_FACTOR
    if half == 0.0:
        half = max(abs(mid) * 0.5, 1.0)
    return ParamPrior(low=float(mid - half), high=float(mid + half), unit=unit)


def assemble_hypotheses(
    report: ForgeReport,
    columns: Mapping[str, np.ndarray],
    target_unit: Unit,
    n_hypotheses: int = 3,
    priors: Mapping[str, ParamPrior] | None = None,
    name_prefix: str = "forged",
) -> list[Hypothesis]:
    """Turn the top-ranked candidate forms into hypotheses.

    Expensive features become free parameters; unless explicit priors are
    supplied, each gets a data-driven uniform prior from its column.
    """
    out: list[Hypothesis] = []
    for rank_pos, idx in enumerate(report.ranking):
        if len(out) >= n_hypotheses:
            break
        candidate = report.candidates[idx]
        variables, _ = ex.collect_names(candidate.provenance)
        promoted = sorted(v for v in variables if v in EXPENSIVE_FEATURES)
        tree = _promote(candidate.provenance, promoted)
        params: dict[str, ParamPrior] = {}
        for name in promoted:
            if priors and name in priors:
                params[name] = priors[name]
            else:
                params[name] = data_driven_prior(np.asarray(columns[name]), SCHEMA[name])
        inputs = tuple(sorted(variables - set(promoted)))
        out.append(
            Hypothesis(
                name=f"{name_prefix}_{rank_pos + 1}",
                expr=tree,
                params=params,
                input_vars=inputs,
                output_unit=target_unit,
            )
        )
    if not out:
        raise DataError("ranking produced no hypotheses")
    return out


def run_forge(
    table: FeatureTable,
    subset_indices: np.ndarray,
    base_features: Sequence[str],
    target_column: str,
    max_terms: int = 3,
    sis_top: int = 2000,
    lambda_points: int = 16,
    lambda_min_ratio: float = 1e-4,
    n_hypotheses: int = 3,
    operators: Sequence[UnaryOp] = ALL_OPS,
) -> tuple[list[Hypothesis], ForgeReport]:
    """Full pipeline over the hypothesis-generation subset of a table."""
    columns = table.rows(subset_indices)
    target = columns[target_column]
    target_unit = table.unit(target_column)
    pool = expand_features(columns, base_features, operators)
    candidates = combine_descriptors(pool, max_terms, target_unit)
    screened = sis_screen(candidates, target, min(sis_top, len(candidates)))
    report = sparsify(
        screened,
        target,
        lambda_points=lambda_points,
        lambda_min_ratio=lambda_min_ratio,
        min_active=n_hypotheses,
    )
    hypotheses = assemble_hypotheses(report, columns, target_unit, n_hypotheses)
    return hypotheses, report
